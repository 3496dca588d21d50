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

#include "zsl/numerics/autodiff.hpp"
#include "zsl/numerics/params.hpp"
#include "zsl/numerics/rng.hpp"

namespace zsl {

struct Activation {
  enum class Kind { LeakyRelu, Tanh, Identity };
  Kind kind = Kind::Identity;
  double slope = 0.0;

  static Activation leaky_relu(double slope = 0.2) { return {Kind::LeakyRelu, slope}; }
  static Activation tanh() { return {Kind::Tanh, 0.0}; }
  static Activation identity() { return {Kind::Identity, 0.0}; }

  friend bool operator==(const Activation&, const Activation&) = default;
};

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  Activation activation;
};

/// Feed-forward stack; rows of the input are samples.
struct MlpParams {
  std::vector<DenseLayer> layers;

  Eigen::Index input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols(); }
  Eigen::Index output_dim() const { return layers.empty() ? 0 : layers.back().weight.rows(); }
  /// Throws DimensionError if adjacent layers do not chain or biases mismatch.
  void validate() const;
};

/// Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases. `dims` lists
/// every width from input to output; hidden layers use `hidden`.
MlpParams make_mlp(std::span<const Eigen::Index> dims, Activation hidden, Activation output, Rng& rng);

Eigen::MatrixXd glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng);

Eigen::MatrixXd apply_activation(const Eigen::MatrixXd& x, Activation a);

Eigen::MatrixXd mlp_apply(const MlpParams& params, const Eigen::MatrixXd& x);

/// Appends `<prefix>.<layer>.weight` / `.bias` views.
void append_params(MlpParams& params, const std::string& prefix, ParamList& out);

ad::Var apply_activation(ad::Var x, Activation a);

/// Tape forward pass. `vars` holds (weight, bias) leaves per layer in the
/// order produced by append_params.
ad::Var mlp_forward(const MlpParams& params, std::span<const ad::Var> vars, ad::Var x);

}  // namespace zsl
