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

#pragma once

#include <span>
#include <string>

#include <Eigen/Dense>

#include "zsl/embeddings.hpp"
#include "zsl/numerics/mlp.hpp"

namespace zsl {

/// Image features mapped into word space by an MLP, scored by dot product.
struct DeviseModel {
  MlpParams transform;  // feature_dim -> hidden -> word_dim
  double margin = 0.1;
};

DeviseModel make_devise(Eigen::Index feature_dim, Eigen::Index word_dim, Eigen::Index hidden, double leaky_slope,
                        double margin, Rng& rng);

/// Mean over the batch of sum_{j != y} max(0, margin - w_y.t(x) + w_j.t(x)).
/// `candidates` holds one word vector per row; `truth` indexes into it.
ad::Var devise_loss(const DeviseModel& model, std::span<const ad::Var> vars, ad::Var features,
                    const Eigen::MatrixXd& candidates, std::span<const Eigen::Index> truth);

/// Single-instance loss against the word vectors of `candidates` (all seen classes).
double devise_loss(const DeviseModel& model, const Eigen::VectorXd& feature, const std::string& true_label,
                   const EmbeddingTable& words, std::span<const std::string> candidates);

/// Rows are instances, columns follow `label_vectors` rows.
Eigen::MatrixXd devise_scores(const DeviseModel& model, const Eigen::MatrixXd& features,
                              const Eigen::MatrixXd& label_vectors);
Eigen::MatrixXd devise_scores(const DeviseModel& model, const Eigen::MatrixXd& features,
                              std::span<const std::string> label_space, const EmbeddingTable& words);

}  // namespace zsl
