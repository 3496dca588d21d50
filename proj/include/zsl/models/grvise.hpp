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
#include <vector>

#include <Eigen/Dense>

#include "zsl/embeddings.hpp"
#include "zsl/features.hpp"
#include "zsl/numerics/mlp.hpp"
#include "zsl/taxonomy.hpp"

namespace zsl {

/// Probe rows [weight | bias] scaled to unit norm. Zero rows are left as is
/// and flagged.
struct NormalizedProbe {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
  std::vector<bool> zero_rows;

  /// classes x (dim + 1) stacked [weight | bias].
  Eigen::MatrixXd stacked() const;
};

NormalizedProbe normalize_probe(const Eigen::MatrixXd& weight, const Eigen::VectorXd& bias);

/// Class graph with row-normalised adjacency D^-1 (A + I).
struct LabelGraph {
  std::vector<std::string> nodes;  // sorted
  Eigen::MatrixXd adjacency;
  std::vector<std::string> dropped;  // ancestors skipped for lack of a word vector

  Eigen::Index index(const std::string& node) const;
};

/// Nodes are `classes` plus their taxonomy ancestors that have vectors in
/// `vectors`; edges are the taxonomy edges among them, made symmetric.
/// Throws MissingEmbeddingError if a class itself has no vector.
LabelGraph build_label_graph(const Taxonomy& taxonomy, std::span<const std::string> classes,
                             const EmbeddingTable& vectors);

struct GcnLayer {
  Eigen::MatrixXd theta;  // in x out
  Activation activation;
};

/// H_{l+1} = act(A H_l Theta_l) with A already row-normalised.
Eigen::MatrixXd gcn_forward(const Eigen::MatrixXd& adjacency, const Eigen::MatrixXd& inputs,
                            std::span<const GcnLayer> layers);
ad::Var gcn_forward(const Eigen::MatrixXd& adjacency, ad::Var inputs, std::span<const GcnLayer> layers,
                    std::span<const ad::Var> thetas);

/// Two-layer GCN regressing normalised probe parameters from word vectors.
struct GrviseModel {
  LabelGraph graph;
  Eigen::MatrixXd inputs;  // nodes x word_dim
  std::vector<GcnLayer> layers;

  /// nodes x (feature_dim + 1) predicted [weight | bias] per node.
  Eigen::MatrixXd predictions() const;
};

GrviseModel make_grvise(LabelGraph graph, const EmbeddingTable& vectors, Eigen::Index hidden,
                        Eigen::Index feature_dim, double leaky_slope, Rng& rng);

void append_params(GrviseModel& model, ParamList& out);

/// sum over seen classes of ||g(w_i) - l_i||^2; `targets` rows follow `seen_classes`.
ad::Var grvise_loss(const GrviseModel& model, std::span<const ad::Var> thetas,
                    std::span<const std::string> seen_classes, const Eigen::MatrixXd& targets);
double grvise_loss(const GrviseModel& model, std::span<const std::string> seen_classes,
                   const Eigen::MatrixXd& targets);

/// score(y) = predicted_weight(y) . x + predicted_bias(y).
Eigen::MatrixXd classifier_scores(const Eigen::MatrixXd& features, const Eigen::MatrixXd& predicted_rows);

/// Throws LookupError for labels outside the graph.
Eigen::MatrixXd grvise_scores(const GrviseModel& model, const Eigen::MatrixXd& features,
                              std::span<const std::string> label_space);

/// Graph-free baseline: an MLP maps each class's word vector to its probe row.
struct MlpPredictorModel {
  MlpParams net;  // word_dim -> hidden -> feature_dim + 1
};

MlpPredictorModel make_mlp_predictor(Eigen::Index word_dim, Eigen::Index hidden, Eigen::Index feature_dim,
                                     double leaky_slope, Rng& rng);

ad::Var mlp_predictor_loss(const MlpPredictorModel& model, std::span<const ad::Var> vars,
                           const Eigen::MatrixXd& class_vectors, const Eigen::MatrixXd& targets);

Eigen::MatrixXd mlp_predictor_scores(const MlpPredictorModel& model, const Eigen::MatrixXd& features,
                                     std::span<const std::string> label_space, const EmbeddingTable& vectors);

}  // namespace zsl
