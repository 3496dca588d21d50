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

#include "zsl/numerics/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "zsl/errors.hpp"

namespace zsl::ad {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Index broadcast_dim(Index a, Index b, const Matrix& ma, const Matrix& mb) {
  if (a == b) return a;
  if (a == 1) return b;
  if (b == 1) return a;
  throw DimensionError("cannot broadcast " + shape_str(ma) + " with " + shape_str(mb));
}

Matrix expand(const Matrix& x, Index rows, Index cols) {
  if (x.rows() == rows && x.cols() == cols) return x;
  return x.replicate(rows / x.rows(), cols / x.cols());
}

// Sums a broadcast gradient back onto the operand's original shape.
Matrix reduce_to(const Matrix& g, Index rows, Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  if (rows == 1 && cols == 1) return Matrix::Constant(1, 1, g.sum());
  if (rows == 1) return g.colwise().sum();
  return g.rowwise().sum();
}

Var unary(Var a, Matrix out, std::function<Matrix(const Matrix& g)> grad_fn) {
  const std::size_t ida = a.id();
  return a.tape()->record(std::move(out), {a},
                          [ida, grad_fn = std::move(grad_fn)](const Matrix& g, GradBuffer& grads) {
                            grads.add(ida, grad_fn(g));
                          });
}

Tape* common_tape(Var a, Var b) {
  if (a.tape() != b.tape()) throw ContractError("operands recorded on different tapes");
  return a.tape();
}

double tanh_ratio_value(double x) {
  if (std::abs(x) < 1e-3) {
    const double x2 = x * x;
    return 1.0 - x2 / 3.0 + 2.0 * x2 * x2 / 15.0;
  }
  return std::tanh(x) / x;
}

double tanh_ratio_deriv(double x) {
  if (std::abs(x) < 1e-3) return -2.0 * x / 3.0 + 8.0 * x * x * x / 15.0;
  const double t = std::tanh(x);
  return (x * (1.0 - t * t) - t) / (x * x);
}

double atanh_ratio_value(double x) {
  if (std::abs(x) < 1e-3) {
    const double x2 = x * x;
    return 1.0 + x2 / 3.0 + x2 * x2 / 5.0;
  }
  return std::atanh(x) / x;
}

double atanh_ratio_deriv(double x) {
  if (std::abs(x) < 1e-3) return 2.0 * x / 3.0 + 4.0 * x * x * x / 5.0;
  return (x / (1.0 - x * x) - std::atanh(x)) / (x * x);
}

}  // namespace

const Matrix& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ContractError("scalar() on a " + shape_str(v) + " node");
  return v(0, 0);
}

void GradBuffer::add(std::size_t id, const Matrix& g) {
  if (grads_[id].size() == 0) {
    grads_[id] = g;
  } else {
    grads_[id] += g;
  }
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Tape::parameter(Matrix value) {
  nodes_.push_back(Node{std::move(value), true, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  bool needs = false;
  for (const Var& v : inputs) {
    if (v.tape() != this) throw ContractError("input recorded on a different tape");
    needs = needs || nodes_[v.id()].needs_grad;
  }
  nodes_.push_back(Node{std::move(value), needs, needs ? std::move(backward) : Backward{}});
  return Var(this, nodes_.size() - 1);
}

std::vector<Matrix> Tape::gradient(Var loss, std::span<const Var> wrt) {
  if (loss.tape() != this) throw ContractError("loss recorded on a different tape");
  if (loss.value().size() != 1) {
    throw ContractError("gradient requires a scalar loss, got " + shape_str(loss.value()));
  }
  GradBuffer grads(nodes_.size());
  grads.add(loss.id(), Matrix::Ones(1, 1));
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (node.backward && grads.has(id)) node.backward(grads.get(id), grads);
  }
  std::vector<Matrix> out;
  out.reserve(wrt.size());
  for (const Var& v : wrt) {
    if (grads.has(v.id())) {
      out.push_back(grads.get(v.id()));
    } else {
      out.push_back(Matrix::Zero(v.rows(), v.cols()));
    }
  }
  return out;
}

Var operator+(Var a, Var b) {
  Tape* t = common_tape(a, b);
  const Matrix& va = a.value();
  const Matrix& vb = b.value();
  const Index r = broadcast_dim(va.rows(), vb.rows(), va, vb);
  const Index c = broadcast_dim(va.cols(), vb.cols(), va, vb);
  Matrix out = expand(va, r, c) + expand(vb, r, c);
  const std::size_t ida = a.id(), idb = b.id();
  const Index ar = va.rows(), ac = va.cols(), br = vb.rows(), bc = vb.cols();
  return t->record(std::move(out), {a, b}, [=](const Matrix& g, GradBuffer& grads) {
    if (t->needs_grad(ida)) grads.add(ida, reduce_to(g, ar, ac));
    if (t->needs_grad(idb)) grads.add(idb, reduce_to(g, br, bc));
  });
}

Var operator-(Var a, Var b) {
  Tape* t = common_tape(a, b);
  const Matrix& va = a.value();
  const Matrix& vb = b.value();
  const Index r = broadcast_dim(va.rows(), vb.rows(), va, vb);
  const Index c = broadcast_dim(va.cols(), vb.cols(), va, vb);
  Matrix out = expand(va, r, c) - expand(vb, r, c);
  const std::size_t ida = a.id(), idb = b.id();
  const Index ar = va.rows(), ac = va.cols(), br = vb.rows(), bc = vb.cols();
  return t->record(std::move(out), {a, b}, [=](const Matrix& g, GradBuffer& grads) {
    if (t->needs_grad(ida)) grads.add(ida, reduce_to(g, ar, ac));
    if (t->needs_grad(idb)) grads.add(idb, -reduce_to(g, br, bc));
  });
}

Var operator*(Var a, Var b) {
  Tape* t = common_tape(a, b);
  const Matrix& va = a.value();
  const Matrix& vb = b.value();
  const Index r = broadcast_dim(va.rows(), vb.rows(), va, vb);
  const Index c = broadcast_dim(va.cols(), vb.cols(), va, vb);
  Matrix ea = expand(va, r, c);
  Matrix eb = expand(vb, r, c);
  Matrix out = ea.cwiseProduct(eb);
  const std::size_t ida = a.id(), idb = b.id();
  const Index ar = va.rows(), ac = va.cols(), br = vb.rows(), bc = vb.cols();
  return t->record(std::move(out), {a, b},
                   [=, ea = std::move(ea), eb = std::move(eb)](const Matrix& g, GradBuffer& grads) {
                     if (t->needs_grad(ida)) grads.add(ida, reduce_to(g.cwiseProduct(eb), ar, ac));
                     if (t->needs_grad(idb)) grads.add(idb, reduce_to(g.cwiseProduct(ea), br, bc));
                   });
}

Var operator/(Var a, Var b) {
  Tape* t = common_tape(a, b);
  const Matrix& va = a.value();
  const Matrix& vb = b.value();
  const Index r = broadcast_dim(va.rows(), vb.rows(), va, vb);
  const Index c = broadcast_dim(va.cols(), vb.cols(), va, vb);
  Matrix ea = expand(va, r, c);
  Matrix eb = expand(vb, r, c);
  Matrix out = ea.cwiseQuotient(eb);
  const std::size_t ida = a.id(), idb = b.id();
  const Index ar = va.rows(), ac = va.cols(), br = vb.rows(), bc = vb.cols();
  return t->record(
      std::move(out), {a, b}, [=, ea = std::move(ea), eb = std::move(eb)](const Matrix& g, GradBuffer& grads) {
        if (t->needs_grad(ida)) grads.add(ida, reduce_to(g.cwiseQuotient(eb), ar, ac));
        if (t->needs_grad(idb)) {
          Matrix gb = -(g.array() * ea.array() / eb.array().square()).matrix();
          grads.add(idb, reduce_to(gb, br, bc));
        }
      });
}

Var operator-(Var a) {
  return unary(a, -a.value(), [](const Matrix& g) { return Matrix(-g); });
}

Var operator+(Var a, double s) {
  return unary(a, (a.value().array() + s).matrix(), [](const Matrix& g) { return g; });
}
Var operator+(double s, Var a) { return a + s; }
Var operator-(Var a, double s) { return a + (-s); }
Var operator-(double s, Var a) { return (-a) + s; }

Var operator*(Var a, double s) {
  return unary(a, a.value() * s, [s](const Matrix& g) { return Matrix(g * s); });
}
Var operator*(double s, Var a) { return a * s; }
Var operator/(Var a, double s) { return a * (1.0 / s); }

Var matmul(Var a, Var b) {
  Tape* t = common_tape(a, b);
  const Matrix& va = a.value();
  const Matrix& vb = b.value();
  if (va.cols() != vb.rows()) {
    throw DimensionError("matmul " + shape_str(va) + " by " + shape_str(vb));
  }
  Matrix out = va * vb;
  const std::size_t ida = a.id(), idb = b.id();
  return t->record(std::move(out), {a, b}, [=](const Matrix& g, GradBuffer& grads) {
    if (t->needs_grad(ida)) grads.add(ida, g * t->value(idb).transpose());
    if (t->needs_grad(idb)) grads.add(idb, t->value(ida).transpose() * g);
  });
}

Var matmul_nt(Var a, Var b) {
  Tape* t = common_tape(a, b);
  const Matrix& va = a.value();
  const Matrix& vb = b.value();
  if (va.cols() != vb.cols()) {
    throw DimensionError("matmul_nt " + shape_str(va) + " by transpose of " + shape_str(vb));
  }
  Matrix out = va * vb.transpose();
  const std::size_t ida = a.id(), idb = b.id();
  return t->record(std::move(out), {a, b}, [=](const Matrix& g, GradBuffer& grads) {
    if (t->needs_grad(ida)) grads.add(ida, g * t->value(idb));
    if (t->needs_grad(idb)) grads.add(idb, g.transpose() * t->value(ida));
  });
}

Var transpose(Var a) {
  return unary(a, a.value().transpose(), [](const Matrix& g) { return Matrix(g.transpose()); });
}

Var exp(Var a) {
  Matrix out = a.value().array().exp().matrix();
  Matrix y = out;
  return unary(a, std::move(out), [y = std::move(y)](const Matrix& g) { return Matrix(g.cwiseProduct(y)); });
}

Var log(Var a) {
  Matrix x = a.value();
  return unary(a, x.array().log().matrix(),
               [x](const Matrix& g) { return Matrix(g.cwiseQuotient(x)); });
}

Var sqrt(Var a) {
  Matrix out = a.value().array().sqrt().matrix();
  Matrix y = out;
  return unary(a, std::move(out),
               [y = std::move(y)](const Matrix& g) { return Matrix((0.5 * g.array() / y.array()).matrix()); });
}

Var square(Var a) {
  Matrix x = a.value();
  return unary(a, x.array().square().matrix(),
               [x](const Matrix& g) { return Matrix((2.0 * g.array() * x.array()).matrix()); });
}

Var tanh(Var a) {
  Matrix out = a.value().array().tanh().matrix();
  Matrix y = out;
  return unary(a, std::move(out), [y = std::move(y)](const Matrix& g) {
    return Matrix((g.array() * (1.0 - y.array().square())).matrix());
  });
}

Var atanh(Var a) {
  Matrix x = a.value();
  Matrix out = x.unaryExpr([](double v) { return std::atanh(v); });
  return unary(a, std::move(out), [x](const Matrix& g) {
    return Matrix((g.array() / (1.0 - x.array().square())).matrix());
  });
}

Var acosh(Var a) {
  Matrix x = a.value();
  Matrix out = x.unaryExpr([](double v) { return std::acosh(std::max(v, 1.0)); });
  return unary(a, std::move(out), [x](const Matrix& g) {
    Matrix d = x.unaryExpr([](double v) { return 1.0 / std::sqrt(std::max(v * v - 1.0, 1e-30)); });
    return Matrix(g.cwiseProduct(d));
  });
}

Var relu(Var a) { return leaky_relu(a, 0.0); }

Var leaky_relu(Var a, double slope) {
  Matrix x = a.value();
  Matrix out = x.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
  return unary(a, std::move(out), [x, slope](const Matrix& g) {
    Matrix d = x.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; });
    return Matrix(g.cwiseProduct(d));
  });
}

Var tanh_ratio(Var a) {
  Matrix x = a.value();
  Matrix out = x.unaryExpr(&tanh_ratio_value);
  return unary(a, std::move(out),
               [x](const Matrix& g) { return Matrix(g.cwiseProduct(x.unaryExpr(&tanh_ratio_deriv))); });
}

Var atanh_ratio(Var a) {
  Matrix x = a.value();
  Matrix out = x.unaryExpr(&atanh_ratio_value);
  return unary(a, std::move(out),
               [x](const Matrix& g) { return Matrix(g.cwiseProduct(x.unaryExpr(&atanh_ratio_deriv))); });
}

Var sum(Var a) {
  const Index r = a.rows(), c = a.cols();
  return unary(a, Matrix::Constant(1, 1, a.value().sum()),
               [r, c](const Matrix& g) { return Matrix(Matrix::Constant(r, c, g(0, 0))); });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ContractError("mean of an empty node");
  return sum(a) / n;
}

Var row_sum(Var a) {
  const Index c = a.cols();
  return unary(a, a.value().rowwise().sum(), [c](const Matrix& g) { return Matrix(g.replicate(1, c)); });
}

Var row_norm(Var a) {
  Matrix x = a.value();
  Matrix norms = x.rowwise().norm();
  Matrix n = norms;
  return unary(a, std::move(norms), [x, n = std::move(n)](const Matrix& g) {
    Matrix out = Matrix::Zero(x.rows(), x.cols());
    for (Index i = 0; i < x.rows(); ++i) {
      if (n(i, 0) > 0.0) out.row(i) = x.row(i) * (g(i, 0) / n(i, 0));
    }
    return out;
  });
}

Var row_squared_norm(Var a) {
  Matrix x = a.value();
  return unary(a, x.rowwise().squaredNorm(), [x](const Matrix& g) {
    Matrix out = 2.0 * x;
    for (Index i = 0; i < x.rows(); ++i) out.row(i) *= g(i, 0);
    return out;
  });
}

Var logsumexp_rows(Var a) {
  const Matrix& x = a.value();
  Matrix softmax(x.rows(), x.cols());
  Matrix out(x.rows(), 1);
  for (Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    Eigen::RowVectorXd e = (x.row(i).array() - m).exp().matrix();
    const double s = e.sum();
    out(i, 0) = m + std::log(s);
    softmax.row(i) = e / s;
  }
  return unary(a, std::move(out), [softmax = std::move(softmax)](const Matrix& g) {
    Matrix r = softmax;
    for (Index i = 0; i < r.rows(); ++i) r.row(i) *= g(i, 0);
    return r;
  });
}

Var pick(Var a, std::span<const Index> cols) {
  const Matrix& x = a.value();
  if (static_cast<Index>(cols.size()) != x.rows()) {
    throw DimensionError("pick: " + std::to_string(cols.size()) + " indices for " + shape_str(x));
  }
  std::vector<Index> idx(cols.begin(), cols.end());
  Matrix out(x.rows(), 1);
  for (Index i = 0; i < x.rows(); ++i) {
    if (idx[i] < 0 || idx[i] >= x.cols()) throw DimensionError("pick: column index out of range");
    out(i, 0) = x(i, idx[i]);
  }
  const Index r = x.rows(), c = x.cols();
  return unary(a, std::move(out), [idx = std::move(idx), r, c](const Matrix& g) {
    Matrix d = Matrix::Zero(r, c);
    for (Index i = 0; i < r; ++i) d(i, idx[i]) = g(i, 0);
    return d;
  });
}

Var gather_rows(Var a, std::span<const Index> rows) {
  const Matrix& x = a.value();
  std::vector<Index> idx(rows.begin(), rows.end());
  Matrix out(static_cast<Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= x.rows()) throw DimensionError("gather_rows: row index out of range");
    out.row(static_cast<Index>(i)) = x.row(idx[i]);
  }
  const Index r = x.rows(), c = x.cols();
  return unary(a, std::move(out), [idx = std::move(idx), r, c](const Matrix& g) {
    Matrix d = Matrix::Zero(r, c);
    for (std::size_t i = 0; i < idx.size(); ++i) d.row(idx[i]) += g.row(static_cast<Index>(i));
    return d;
  });
}

Var slice_cols(Var a, Index start, Index count) {
  const Matrix& x = a.value();
  if (start < 0 || count < 0 || start + count > x.cols()) {
    throw DimensionError("slice_cols out of range for " + shape_str(x));
  }
  const Index r = x.rows(), c = x.cols();
  return unary(a, x.middleCols(start, count), [=](const Matrix& g) {
    Matrix d = Matrix::Zero(r, c);
    d.middleCols(start, count) = g;
    return d;
  });
}

Var clamp_row_norm(Var a, double max_norm) {
  Matrix x = a.value();
  Matrix out = x;
  Matrix norms = x.rowwise().norm();
  for (Index i = 0; i < x.rows(); ++i) {
    if (norms(i, 0) > max_norm) out.row(i) *= max_norm / norms(i, 0);
  }
  return unary(a, std::move(out), [x, norms, max_norm](const Matrix& g) {
    Matrix d = g;
    for (Index i = 0; i < x.rows(); ++i) {
      const double r = norms(i, 0);
      if (r > max_norm) {
        const double xg = x.row(i).dot(g.row(i));
        d.row(i) = (max_norm / r) * (g.row(i) - x.row(i) * (xg / (r * r)));
      }
    }
    return d;
  });
}

}  // namespace zsl::ad
