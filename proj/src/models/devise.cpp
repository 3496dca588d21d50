// Copyright 2026 The zsl-lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "zsl/models/devise.hpp"

#include <array>

#include "zsl/errors.hpp"
#include "zsl/models/common.hpp"

namespace zsl {

DeviseModel make_devise(Eigen::Index feature_dim, Eigen::Index word_dim, Eigen::Index hidden, double leaky_slope,
                        double margin, Rng& rng) {
  const std::array<Eigen::Index, 3> dims{feature_dim, hidden, word_dim};
  return DeviseModel{make_mlp(dims, Activation::leaky_relu(leaky_slope), Activation::identity(), rng), margin};
}

ad::Var devise_loss(const DeviseModel& model, std::span<const ad::Var> vars, ad::Var features,
                    const Eigen::MatrixXd& candidates, std::span<const Eigen::Index> truth) {
  if (candidates.cols() != model.transform.output_dim()) {
    throw DimensionError("devise: word vectors do not match the transform output width");
  }
  ad::Tape& tape = *features.tape();
  const ad::Var projected = mlp_forward(model.transform, vars, features);
  const ad::Var scores = ad::matmul_nt(projected, tape.constant(candidates));
  return hinge_rank_loss(scores, truth, model.margin);
}

double devise_loss(const DeviseModel& model, const Eigen::VectorXd& feature, const std::string& true_label,
                   const EmbeddingTable& words, std::span<const std::string> candidates) {
  const Eigen::MatrixXd cand = words.matrix(candidates);
  const std::string labels[] = {true_label};
  const auto truth = label_indices(labels, candidates);
  MlpParams copy = model.transform;
  ParamList params;
  append_params(copy, "t", params);
  ad::Tape tape;
  const auto vars = bind_params(tape, params);
  return devise_loss(model, vars, tape.constant(Eigen::MatrixXd(feature.transpose())), cand, truth).scalar();
}

Eigen::MatrixXd devise_scores(const DeviseModel& model, const Eigen::MatrixXd& features,
                              const Eigen::MatrixXd& label_vectors) {
  if (label_vectors.cols() != model.transform.output_dim()) {
    throw DimensionError("devise: word vectors do not match the transform output width");
  }
  return mlp_apply(model.transform, features) * label_vectors.transpose();
}

Eigen::MatrixXd devise_scores(const DeviseModel& model, const Eigen::MatrixXd& features,
                              std::span<const std::string> label_space, const EmbeddingTable& words) {
  return devise_scores(model, features, words.matrix(label_space));
}

}  // namespace zsl
