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

// Poincare-ball geometry (curvature -1) and a taxonomy embedding trainer.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include <Eigen/Dense>

#include "zsl/embeddings.hpp"
#include "zsl/errors.hpp"
#include "zsl/taxonomy.hpp"

namespace zsl::poincare {

/// Every published point satisfies ||p|| <= 1 - kBoundaryEps.
inline constexpr double kBoundaryEps = 1e-5;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

namespace detail {

// acosh(1 + delta) without the cancellation of forming 1 + delta first.
template <typename Scalar>
Scalar acosh1p(Scalar delta) {
  using std::log1p;
  using std::sqrt;
  return log1p(delta + sqrt(delta * (delta + Scalar(2))));
}

template <typename Derived>
void require_inside(const Eigen::MatrixBase<Derived>& p) {
  if (!(p.squaredNorm() < typename Derived::Scalar(1))) {
    throw DomainError("point lies on or outside the unit ball (norm " + std::to_string(double(p.norm())) + ")");
  }
}

}  // namespace detail

/// arcosh(1 + 2||u-v||^2 / ((1-||u||^2)(1-||v||^2))).
template <typename DerivedU, typename DerivedV>
typename DerivedU::Scalar distance(const Eigen::MatrixBase<DerivedU>& u, const Eigen::MatrixBase<DerivedV>& v) {
  using Scalar = typename DerivedU::Scalar;
  if (u.size() != v.size()) throw DimensionError("poincare distance: dimension mismatch");
  detail::require_inside(u);
  detail::require_inside(v);
  const Scalar alpha = Scalar(1) - u.squaredNorm();
  const Scalar beta = Scalar(1) - v.squaredNorm();
  const Scalar delta = Scalar(2) * (u - v).squaredNorm() / (alpha * beta);
  return detail::acosh1p(delta);
}

/// Pairwise distances between the rows of `a` and the rows of `b`.
template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic> distance_matrix(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) out(i, j) = distance(a.row(i), b.row(j));
  return out;
}

/// Rescales p onto radius 1 - eps when it lies beyond it.
template <typename Derived>
VectorX<typename Derived::Scalar> project_to_ball(const Eigen::MatrixBase<Derived>& p,
                                                  typename Derived::Scalar eps = kBoundaryEps) {
  using Scalar = typename Derived::Scalar;
  VectorX<Scalar> out = p;
  const Scalar n = out.norm();
  const Scalar limit = Scalar(1) - eps;
  if (n > limit) out *= limit / n;
  return out;
}

/// Exponential map at the origin: tanh(||v||) v / ||v||, with exp_map(0) = 0.
template <typename Derived>
VectorX<typename Derived::Scalar> exp_map(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  using std::tanh;
  const Scalar n = v.norm();
  if (n == Scalar(0)) return VectorX<Scalar>::Zero(v.size());
  return VectorX<Scalar>(v * (tanh(n) / n));
}

/// Logarithmic map at the origin, the inverse of exp_map.
template <typename Derived>
VectorX<typename Derived::Scalar> log_map(const Eigen::MatrixBase<Derived>& p) {
  using Scalar = typename Derived::Scalar;
  using std::atanh;
  detail::require_inside(p);
  const Scalar n = p.norm();
  if (n == Scalar(0)) return VectorX<Scalar>::Zero(p.size());
  return VectorX<Scalar>(p * (atanh(n) / n));
}

/// Mobius matrix-vector product tanh(||Mx||/||x|| atanh||x||) Mx/||Mx||,
/// projected into the ball. Returns 0 when x = 0 or Mx = 0.
template <typename DerivedM, typename DerivedX>
VectorX<typename DerivedX::Scalar> mobius_matmul(const Eigen::MatrixBase<DerivedM>& m,
                                                 const Eigen::MatrixBase<DerivedX>& x) {
  using Scalar = typename DerivedX::Scalar;
  using std::atanh;
  using std::tanh;
  if (m.cols() != x.size()) throw DimensionError("mobius_matmul: matrix columns do not match point dimension");
  detail::require_inside(x);
  const VectorX<Scalar> mx = m * x;
  const Scalar xn = x.norm();
  const Scalar mxn = mx.norm();
  if (xn == Scalar(0) || mxn == Scalar(0)) return VectorX<Scalar>::Zero(m.rows());
  const Scalar scale = tanh(mxn / xn * atanh(xn)) / mxn;
  return project_to_ball(mx * scale);
}

/// Gradient of distance(u, v) with respect to u (Euclidean, not Riemannian).
template <typename DerivedU, typename DerivedV>
VectorX<typename DerivedU::Scalar> distance_grad_u(const Eigen::MatrixBase<DerivedU>& u,
                                                   const Eigen::MatrixBase<DerivedV>& v) {
  using Scalar = typename DerivedU::Scalar;
  using std::sqrt;
  const Scalar uu = u.squaredNorm();
  const Scalar vv = v.squaredNorm();
  const Scalar alpha = Scalar(1) - uu;
  const Scalar beta = Scalar(1) - vv;
  const Scalar gamma = Scalar(1) + Scalar(2) * (u - v).squaredNorm() / (alpha * beta);
  const Scalar root = sqrt(std::max(gamma * gamma - Scalar(1), Scalar(1e-30)));
  const Scalar coef = Scalar(4) / (beta * root);
  return VectorX<Scalar>(coef * ((vv - Scalar(2) * u.dot(v) + Scalar(1)) / (alpha * alpha) * u - v / alpha));
}

/// Node identifier -> ball point.
struct PoincareTable {
  EmbeddingTable points;

  Eigen::Index dim() const { return points.dim; }
  /// Throws DomainError if any point violates the ball invariant.
  void validate() const;
};

enum class PositivePairs {
  Edges,    // direct child-parent edges; negatives are non-adjacent nodes
  Closure,  // every (descendant, ancestor) pair; negatives are unrelated nodes
};

struct TrainConfig {
  Eigen::Index dim = 10;
  int epochs = 500;
  int neg_samples = 10;
  double lr = 0.3;
  int burn_in_epochs = 10;
  double burn_in_lr_factor = 0.1;
  double init_radius = 1e-3;
  PositivePairs pairs = PositivePairs::Edges;
  std::uint64_t seed = 0;
};

/// Riemannian SGD on the softmax ranking loss
/// -log(exp(-d(u,v)) / sum_{v' in {v} u negatives} exp(-d(u,v'))).
/// Throws TrainingError for a taxonomy without edges.
PoincareTable train_poincare(const Taxonomy& taxonomy, const TrainConfig& config);

/// Header `#dim=<d> curvature=-1` followed by one `id c1 ... cd` line per node.
void write_table(std::ostream& out, const PoincareTable& table);
PoincareTable read_table(std::istream& in);
PoincareTable read_table_file(const std::filesystem::path& path);

}  // namespace zsl::poincare
