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

// Minimal reverse-mode differentiation over dense matrices.
//
// Scope is deliberately narrow: affine maps, pointwise activations, the
// hyperbolic building blocks, softmax pieces and reductions. Binary
// elementwise ops broadcast an operand of shape 1x1, n x 1 or 1 x m.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace zsl::ad {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double scalar() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Accumulates gradient contributions indexed by node id.
class GradBuffer {
 public:
  explicit GradBuffer(std::size_t n) : grads_(n) {}
  void add(std::size_t id, const Matrix& g);
  const Matrix& get(std::size_t id) const { return grads_[id]; }
  bool has(std::size_t id) const { return grads_[id].size() != 0; }

 private:
  std::vector<Matrix> grads_;
};

class Tape {
 public:
  using Backward = std::function<void(const Matrix& out_grad, GradBuffer& grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var constant(double value);
  /// Leaf whose gradient is collected.
  Var parameter(Matrix value);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  /// Records an interior node. `backward` runs only if some input needs a gradient.
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward);

  /// Reverse sweep from a 1x1 loss. Returns d(loss)/d(v) for each v in `wrt`
  /// (zeros for leaves the loss does not depend on).
  std::vector<Matrix> gradient(Var loss, std::span<const Var> wrt);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    bool needs_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

// Elementwise arithmetic with broadcasting.
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
Var operator+(Var a, double s);
Var operator+(double s, Var a);
Var operator-(Var a, double s);
Var operator-(double s, Var a);
Var operator*(Var a, double s);
Var operator*(double s, Var a);
Var operator/(Var a, double s);

Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
Var transpose(Var a);

Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var square(Var a);
Var tanh(Var a);
Var atanh(Var a);
Var acosh(Var a);
Var relu(Var a);
Var leaky_relu(Var a, double slope);
/// tanh(x)/x with the limit 1 at x = 0.
Var tanh_ratio(Var a);
/// atanh(x)/x with the limit 1 at x = 0.
Var atanh_ratio(Var a);

/// Sum of all entries, 1x1.
Var sum(Var a);
Var mean(Var a);
/// Per-row sum, n x 1.
Var row_sum(Var a);
/// Per-row Euclidean norm, n x 1. The gradient at a zero row is taken as 0.
Var row_norm(Var a);
Var row_squared_norm(Var a);
/// Numerically stable per-row log-sum-exp, n x 1.
Var logsumexp_rows(Var a);

/// out(i) = a(i, cols[i]), n x 1.
Var pick(Var a, std::span<const Index> cols);
Var gather_rows(Var a, std::span<const Index> rows);
Var slice_cols(Var a, Index start, Index count);
/// Rescales rows whose norm exceeds `max_norm` back onto that radius.
Var clamp_row_norm(Var a, double max_norm);

}  // namespace zsl::ad
