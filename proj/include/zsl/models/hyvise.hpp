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

#include "zsl/numerics/autodiff.hpp"
#include "zsl/numerics/params.hpp"
#include "zsl/numerics/rng.hpp"
#include "zsl/poincare.hpp"

namespace zsl {

/// Hyperbolic projector: features enter the ball through exp_map at the
/// origin, pass two Mobius layers with a tangent-space leaky ReLU between
/// them, and are compared with label points by Poincare distance.
struct HyviseModel {
  Eigen::MatrixXd layer1;  // hidden x feature_dim
  Eigen::MatrixXd layer2;  // poincare_dim x hidden
  double margin = 0.1;
  double leaky_slope = 0.2;
};

HyviseModel make_hyvise(Eigen::Index feature_dim, Eigen::Index hidden, Eigen::Index poincare_dim,
                        double leaky_slope, double margin, Rng& rng);

void append_params(HyviseModel& model, ParamList& out);

/// Ball points, one per feature row; every row norm is <= 1 - kBoundaryEps.
Eigen::MatrixXd hyvise_embed(const HyviseModel& model, const Eigen::MatrixXd& features);
ad::Var hyvise_embed(const HyviseModel& model, std::span<const ad::Var> vars, ad::Var features);

/// Row-wise Mobius product x -> M (x) on the tape; zero rows map to zero.
ad::Var mobius_matmul_rows(ad::Var x, ad::Var m);

/// Pairwise Poincare distances between rows of `a` and rows of constant `b`.
ad::Var poincare_distances(ad::Var a, const Eigen::MatrixXd& b);

/// Hinge rank loss over scores -d(g(x), p_y); `label_points` rows are the candidates.
ad::Var hyvise_loss(const HyviseModel& model, std::span<const ad::Var> vars, ad::Var features,
                    const Eigen::MatrixXd& label_points, std::span<const Eigen::Index> truth);

double hyvise_loss(const HyviseModel& model, const Eigen::VectorXd& feature, const std::string& true_label,
                   const poincare::PoincareTable& points, std::span<const std::string> candidates);

/// score(y) = -d(g(x), p_y).
Eigen::MatrixXd hyvise_scores(const HyviseModel& model, const Eigen::MatrixXd& features,
                              const Eigen::MatrixXd& label_points);
Eigen::MatrixXd hyvise_scores(const HyviseModel& model, const Eigen::MatrixXd& features,
                              std::span<const std::string> label_space, const poincare::PoincareTable& points);

}  // namespace zsl
