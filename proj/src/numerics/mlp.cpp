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

#include "zsl/numerics/mlp.hpp"

#include <cmath>

#include "zsl/errors.hpp"

namespace zsl {

std::string to_string(Activation a) {
  switch (a.kind) {
    case Activation::Kind::LeakyRelu:
      return "leaky_relu";
    case Activation::Kind::Tanh:
      return "tanh";
    case Activation::Kind::Identity:
      return "identity";
  }
  return "identity";
}

Activation activation_from_string(const std::string& s) {
  if (s == "leaky_relu") return Activation::leaky_relu();
  if (s == "tanh") return Activation::tanh();
  if (s == "identity") return Activation::identity();
  throw FormatError("unknown activation '" + s + "'");
}

void MlpParams::validate() const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const DenseLayer& l = layers[i];
    if (l.bias.size() != l.weight.rows()) {
      throw DimensionError("layer " + std::to_string(i) + ": bias length does not match weight rows");
    }
    if (i > 0 && layers[i - 1].weight.rows() != l.weight.cols()) {
      throw DimensionError("layer " + std::to_string(i) + ": input width does not match previous output");
    }
  }
}

Eigen::MatrixXd glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  return rng.uniform_matrix(rows, cols, -bound, bound);
}

MlpParams make_mlp(std::span<const Eigen::Index> dims, Activation hidden, Activation output, Rng& rng) {
  if (dims.size() < 2) throw DimensionError("an MLP needs at least input and output widths");
  MlpParams p;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const bool last = i + 2 == dims.size();
    p.layers.push_back(DenseLayer{glorot_uniform(dims[i + 1], dims[i], rng),
                                  Eigen::VectorXd::Zero(dims[i + 1]), last ? output : hidden});
  }
  return p;
}

Eigen::MatrixXd apply_activation(const Eigen::MatrixXd& x, Activation a) {
  switch (a.kind) {
    case Activation::Kind::LeakyRelu: {
      const double s = a.slope;
      return x.unaryExpr([s](double v) { return v > 0.0 ? v : s * v; });
    }
    case Activation::Kind::Tanh:
      return x.array().tanh().matrix();
    case Activation::Kind::Identity:
      return x;
  }
  return x;
}

Eigen::MatrixXd mlp_apply(const MlpParams& params, const Eigen::MatrixXd& x) {
  if (x.cols() != params.input_dim()) {
    throw DimensionError("mlp_apply: input has " + std::to_string(x.cols()) + " columns, expected " +
                         std::to_string(params.input_dim()));
  }
  Eigen::MatrixXd h = x;
  for (const DenseLayer& l : params.layers) {
    Eigen::MatrixXd pre = h * l.weight.transpose();
    pre.rowwise() += l.bias.transpose();
    h = apply_activation(pre, l.activation);
  }
  return h;
}

void append_params(MlpParams& params, const std::string& prefix, ParamList& out) {
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const std::string base = prefix + "." + std::to_string(i);
    out.push_back(view(base + ".weight", params.layers[i].weight));
    out.push_back(row_view(base + ".bias", params.layers[i].bias));
  }
}

ad::Var apply_activation(ad::Var x, Activation a) {
  switch (a.kind) {
    case Activation::Kind::LeakyRelu:
      return ad::leaky_relu(x, a.slope);
    case Activation::Kind::Tanh:
      return ad::tanh(x);
    case Activation::Kind::Identity:
      return x;
  }
  return x;
}

ad::Var mlp_forward(const MlpParams& params, std::span<const ad::Var> vars, ad::Var x) {
  if (vars.size() != 2 * params.layers.size()) {
    throw DimensionError("mlp_forward: expected " + std::to_string(2 * params.layers.size()) + " parameter leaves");
  }
  if (x.cols() != params.input_dim()) {
    throw DimensionError("mlp_forward: input has " + std::to_string(x.cols()) + " columns, expected " +
                         std::to_string(params.input_dim()));
  }
  ad::Var h = x;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    h = apply_activation(ad::matmul_nt(h, vars[2 * i]) + vars[2 * i + 1], params.layers[i].activation);
  }
  return h;
}

}  // namespace zsl
