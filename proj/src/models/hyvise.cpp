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

#include "zsl/models/hyvise.hpp"

#include "zsl/errors.hpp"
#include "zsl/models/common.hpp"
#include "zsl/numerics/mlp.hpp"

namespace zsl {

namespace {

constexpr double kMaxNorm = 1.0 - poincare::kBoundaryEps;

ad::Var exp_map_rows(ad::Var v) { return ad::clamp_row_norm(v * ad::tanh_ratio(ad::row_norm(v)), kMaxNorm); }

ad::Var log_map_rows(ad::Var p) { return p * ad::atanh_ratio(ad::row_norm(p)); }

Eigen::VectorXd leaky(const Eigen::VectorXd& v, double slope) {
  return v.unaryExpr([slope](double x) { return x > 0 ? x : slope * x; });
}

}  // namespace

HyviseModel make_hyvise(Eigen::Index feature_dim, Eigen::Index hidden, Eigen::Index poincare_dim,
                        double leaky_slope, double margin, Rng& rng) {
  HyviseModel m;
  m.layer1 = glorot_uniform(hidden, feature_dim, rng);
  m.layer2 = glorot_uniform(poincare_dim, hidden, rng);
  m.margin = margin;
  m.leaky_slope = leaky_slope;
  return m;
}

void append_params(HyviseModel& model, ParamList& out) {
  out.push_back(view("hyp.0.weight", model.layer1));
  out.push_back(view("hyp.1.weight", model.layer2));
}

Eigen::MatrixXd hyvise_embed(const HyviseModel& model, const Eigen::MatrixXd& features) {
  if (features.cols() != model.layer1.cols()) throw DimensionError("hyvise: feature width does not match layer 1");
  Eigen::MatrixXd out(features.rows(), model.layer2.rows());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const Eigen::VectorXd x0 = poincare::project_to_ball(poincare::exp_map(features.row(i).transpose()));
    const Eigen::VectorXd h = poincare::mobius_matmul(model.layer1, x0);
    const Eigen::VectorXd t = leaky(poincare::log_map(h), model.leaky_slope);
    const Eigen::VectorXd x1 = poincare::project_to_ball(poincare::exp_map(t));
    out.row(i) = poincare::mobius_matmul(model.layer2, x1).transpose();
  }
  return out;
}

ad::Var mobius_matmul_rows(ad::Var x, ad::Var m) {
  const ad::Var mx = ad::matmul_nt(x, m);
  const ad::Var ar = ad::atanh_ratio(ad::row_norm(x));
  // tanh(||Mx|| atanh(||x||) / ||x||) / ||Mx|| rewritten without divisions by the norms
  const ad::Var scale = ad::tanh_ratio(ad::row_norm(mx) * ar) * ar;
  return ad::clamp_row_norm(mx * scale, kMaxNorm);
}

ad::Var hyvise_embed(const HyviseModel& model, std::span<const ad::Var> vars, ad::Var features) {
  if (vars.size() != 2) throw DimensionError("hyvise: expected two weight leaves");
  if (features.cols() != model.layer1.cols()) throw DimensionError("hyvise: feature width does not match layer 1");
  const ad::Var x0 = exp_map_rows(features);
  const ad::Var h = mobius_matmul_rows(x0, vars[0]);
  const ad::Var t = ad::leaky_relu(log_map_rows(h), model.leaky_slope);
  return mobius_matmul_rows(exp_map_rows(t), vars[1]);
}

ad::Var poincare_distances(ad::Var a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) throw DimensionError("poincare_distances: dimension mismatch");
  ad::Tape& tape = *a.tape();
  const ad::Var aa = ad::row_squared_norm(a);  // n x 1
  const Eigen::MatrixXd bb = b.rowwise().squaredNorm().transpose();  // 1 x L
  const ad::Var diff2 = aa + tape.constant(bb) - 2.0 * ad::matmul_nt(a, tape.constant(b));
  const ad::Var denom = (1.0 - aa) * tape.constant((1.0 - bb.array()).matrix());
  return ad::acosh(1.0 + 2.0 * diff2 / denom);
}

ad::Var hyvise_loss(const HyviseModel& model, std::span<const ad::Var> vars, ad::Var features,
                    const Eigen::MatrixXd& label_points, std::span<const Eigen::Index> truth) {
  if (label_points.cols() != model.layer2.rows()) {
    throw DimensionError("hyvise: label points do not match the embedding dimension");
  }
  const ad::Var d = poincare_distances(hyvise_embed(model, vars, features), label_points);
  return hinge_rank_loss(-d, truth, model.margin);
}

double hyvise_loss(const HyviseModel& model, const Eigen::VectorXd& feature, const std::string& true_label,
                   const poincare::PoincareTable& points, std::span<const std::string> candidates) {
  const std::string labels[] = {true_label};
  const auto truth = label_indices(labels, candidates);
  HyviseModel copy = model;
  ParamList params;
  append_params(copy, params);
  ad::Tape tape;
  const auto vars = bind_params(tape, params);
  return hyvise_loss(copy, vars, tape.constant(Eigen::MatrixXd(feature.transpose())),
                     points.points.matrix(candidates), truth)
      .scalar();
}

Eigen::MatrixXd hyvise_scores(const HyviseModel& model, const Eigen::MatrixXd& features,
                              const Eigen::MatrixXd& label_points) {
  if (label_points.cols() != model.layer2.rows()) {
    throw DimensionError("hyvise: label points do not match the embedding dimension");
  }
  return -poincare::distance_matrix(hyvise_embed(model, features), label_points);
}

Eigen::MatrixXd hyvise_scores(const HyviseModel& model, const Eigen::MatrixXd& features,
                              std::span<const std::string> label_space, const poincare::PoincareTable& points) {
  return hyvise_scores(model, features, points.points.matrix(label_space));
}

}  // namespace zsl
