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

#include "zsl/models/grvise.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "zsl/errors.hpp"
#include "zsl/models/common.hpp"

namespace zsl {

Eigen::MatrixXd NormalizedProbe::stacked() const {
  Eigen::MatrixXd out(weight.rows(), weight.cols() + 1);
  out << weight, bias;
  return out;
}

NormalizedProbe normalize_probe(const Eigen::MatrixXd& weight, const Eigen::VectorXd& bias) {
  if (bias.size() != weight.rows()) throw DimensionError("normalize_probe: bias length does not match rows");
  NormalizedProbe out{weight, bias, std::vector<bool>(static_cast<std::size_t>(weight.rows()), false)};
  for (Eigen::Index i = 0; i < weight.rows(); ++i) {
    const double n = std::sqrt(weight.row(i).squaredNorm() + bias(i) * bias(i));
    if (n == 0.0) {
      out.zero_rows[static_cast<std::size_t>(i)] = true;
      continue;
    }
    out.weight.row(i) /= n;
    out.bias(i) /= n;
  }
  return out;
}

Eigen::Index LabelGraph::index(const std::string& node) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), node);
  if (it == nodes.end() || *it != node) throw LookupError("label '" + node + "' is not in the class graph");
  return static_cast<Eigen::Index>(it - nodes.begin());
}

LabelGraph build_label_graph(const Taxonomy& taxonomy, std::span<const std::string> classes,
                             const EmbeddingTable& vectors) {
  std::set<std::string> keep;
  std::set<std::string> dropped;
  for (const std::string& c : classes) {
    if (!vectors.contains(c)) throw MissingEmbeddingError("class '" + c + "' has no word vector for the graph");
    keep.insert(c);
    if (!taxonomy.contains(c)) continue;
    for (const std::string& a : taxonomy.ancestors(c)) {
      (vectors.contains(a) ? keep : dropped).insert(a);
    }
  }
  LabelGraph g;
  g.nodes.assign(keep.begin(), keep.end());
  g.dropped.assign(dropped.begin(), dropped.end());
  const auto n = static_cast<Eigen::Index>(g.nodes.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  for (const auto& [child, parent] : taxonomy.edges()) {
    if (!keep.count(child) || !keep.count(parent)) continue;
    const Eigen::Index i = g.index(child);
    const Eigen::Index j = g.index(parent);
    a(i, j) = 1.0;
    a(j, i) = 1.0;
  }
  for (Eigen::Index i = 0; i < n; ++i) a.row(i) /= a.row(i).sum();
  g.adjacency = std::move(a);
  return g;
}

Eigen::MatrixXd gcn_forward(const Eigen::MatrixXd& adjacency, const Eigen::MatrixXd& inputs,
                            std::span<const GcnLayer> layers) {
  if (adjacency.rows() != adjacency.cols() || adjacency.cols() != inputs.rows()) {
    throw DimensionError("gcn_forward: adjacency does not match the node count");
  }
  Eigen::MatrixXd h = inputs;
  for (const GcnLayer& l : layers) {
    if (l.theta.rows() != h.cols()) throw DimensionError("gcn_forward: theta rows do not match layer input width");
    h = apply_activation(adjacency * h * l.theta, l.activation);
  }
  return h;
}

ad::Var gcn_forward(const Eigen::MatrixXd& adjacency, ad::Var inputs, std::span<const GcnLayer> layers,
                    std::span<const ad::Var> thetas) {
  if (thetas.size() != layers.size()) throw DimensionError("gcn_forward: one theta leaf per layer");
  if (adjacency.rows() != adjacency.cols() || adjacency.cols() != inputs.rows()) {
    throw DimensionError("gcn_forward: adjacency does not match the node count");
  }
  ad::Tape& tape = *inputs.tape();
  const ad::Var adj = tape.constant(adjacency);
  ad::Var h = inputs;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = apply_activation(ad::matmul(ad::matmul(adj, h), thetas[i]), layers[i].activation);
  }
  return h;
}

Eigen::MatrixXd GrviseModel::predictions() const { return gcn_forward(graph.adjacency, inputs, layers); }

GrviseModel make_grvise(LabelGraph graph, const EmbeddingTable& vectors, Eigen::Index hidden,
                        Eigen::Index feature_dim, double leaky_slope, Rng& rng) {
  GrviseModel m;
  m.inputs = vectors.matrix(graph.nodes);
  m.graph = std::move(graph);
  m.layers.push_back({glorot_uniform(vectors.dim, hidden, rng), Activation::leaky_relu(leaky_slope)});
  m.layers.push_back({glorot_uniform(hidden, feature_dim + 1, rng), Activation::identity()});
  return m;
}

void append_params(GrviseModel& model, ParamList& out) {
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    out.push_back(view("gcn." + std::to_string(i) + ".theta", model.layers[i].theta));
  }
}

ad::Var grvise_loss(const GrviseModel& model, std::span<const ad::Var> thetas,
                    std::span<const std::string> seen_classes, const Eigen::MatrixXd& targets) {
  if (targets.rows() != static_cast<Eigen::Index>(seen_classes.size())) {
    throw DataError("grvise_loss: one target row per seen class is required");
  }
  std::vector<Eigen::Index> rows;
  rows.reserve(seen_classes.size());
  for (const std::string& c : seen_classes) rows.push_back(model.graph.index(c));
  ad::Tape& tape = *thetas.front().tape();
  const ad::Var out = gcn_forward(model.graph.adjacency, tape.constant(model.inputs), model.layers, thetas);
  if (out.cols() != targets.cols()) throw DimensionError("grvise_loss: target width does not match GCN output");
  return ad::sum(ad::square(ad::gather_rows(out, rows) - tape.constant(targets)));
}

double grvise_loss(const GrviseModel& model, std::span<const std::string> seen_classes,
                   const Eigen::MatrixXd& targets) {
  if (targets.rows() != static_cast<Eigen::Index>(seen_classes.size())) {
    throw DataError("grvise_loss: one target row per seen class is required");
  }
  const Eigen::MatrixXd out = model.predictions();
  double total = 0.0;
  for (std::size_t i = 0; i < seen_classes.size(); ++i) {
    total += (out.row(model.graph.index(seen_classes[i])) - targets.row(static_cast<Eigen::Index>(i))).squaredNorm();
  }
  return total;
}

Eigen::MatrixXd classifier_scores(const Eigen::MatrixXd& features, const Eigen::MatrixXd& predicted_rows) {
  const Eigen::Index d = features.cols();
  if (predicted_rows.cols() != d + 1) throw DimensionError("predicted classifier rows must have feature_dim + 1 entries");
  Eigen::MatrixXd scores = features * predicted_rows.leftCols(d).transpose();
  scores.rowwise() += predicted_rows.col(d).transpose();
  return scores;
}

Eigen::MatrixXd grvise_scores(const GrviseModel& model, const Eigen::MatrixXd& features,
                              std::span<const std::string> label_space) {
  const Eigen::MatrixXd all = model.predictions();
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(label_space.size()), all.cols());
  for (std::size_t i = 0; i < label_space.size(); ++i) {
    rows.row(static_cast<Eigen::Index>(i)) = all.row(model.graph.index(label_space[i]));
  }
  return classifier_scores(features, rows);
}

MlpPredictorModel make_mlp_predictor(Eigen::Index word_dim, Eigen::Index hidden, Eigen::Index feature_dim,
                                     double leaky_slope, Rng& rng) {
  return {make_mlp(std::array{word_dim, hidden, feature_dim + 1}, Activation::leaky_relu(leaky_slope),
                   Activation::identity(), rng)};
}

ad::Var mlp_predictor_loss(const MlpPredictorModel& model, std::span<const ad::Var> vars,
                           const Eigen::MatrixXd& class_vectors, const Eigen::MatrixXd& targets) {
  if (class_vectors.rows() != targets.rows()) throw DataError("mlp predictor: one target row per class is required");
  ad::Tape& tape = *vars.front().tape();
  const ad::Var out = mlp_forward(model.net, vars, tape.constant(class_vectors));
  return ad::sum(ad::square(out - tape.constant(targets)));
}

Eigen::MatrixXd mlp_predictor_scores(const MlpPredictorModel& model, const Eigen::MatrixXd& features,
                                     std::span<const std::string> label_space, const EmbeddingTable& vectors) {
  return classifier_scores(features, mlp_apply(model.net, vectors.matrix(label_space)));
}

}  // namespace zsl
