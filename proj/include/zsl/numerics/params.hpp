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

namespace zsl {

/// Mutable view of one trainable tensor. A bias vector of length n is
/// viewed as a 1 x n row so it broadcasts over a batch.
struct NamedParam {
  std::string name;
  Eigen::Map<Eigen::MatrixXd> value;
};

using ParamList = std::vector<NamedParam>;

inline NamedParam view(std::string name, Eigen::MatrixXd& m) {
  return {std::move(name), Eigen::Map<Eigen::MatrixXd>(m.data(), m.rows(), m.cols())};
}

inline NamedParam row_view(std::string name, Eigen::VectorXd& v) {
  return {std::move(name), Eigen::Map<Eigen::MatrixXd>(v.data(), 1, v.size())};
}

/// Registers every parameter as a gradient-collecting leaf, in order.
inline std::vector<ad::Var> bind_params(ad::Tape& tape, std::span<const NamedParam> params) {
  std::vector<ad::Var> vars;
  vars.reserve(params.size());
  for (const NamedParam& p : params) vars.push_back(tape.parameter(p.value));
  return vars;
}

}  // namespace zsl
