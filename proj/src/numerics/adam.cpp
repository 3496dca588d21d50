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

#include "zsl/numerics/adam.hpp"

#include <cmath>
#include <string>

#include "zsl/errors.hpp"

namespace zsl {

void adam_step(std::span<NamedParam> params, std::span<const Eigen::MatrixXd> grads, AdamState& state) {
  if (params.size() != grads.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
  }
  if (state.first_moment.empty()) {
    for (const NamedParam& p : params) {
      state.first_moment.push_back(Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols()));
      state.second_moment.push_back(Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols()));
    }
  }
  if (state.first_moment.size() != params.size()) throw DimensionError("adam_step: parameter count changed");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i].value;
    if (grads[i].rows() != p.rows() || grads[i].cols() != p.cols() ||
        state.first_moment[i].rows() != p.rows() || state.first_moment[i].cols() != p.cols()) {
      throw DimensionError("adam_step: shape mismatch for " + params[i].name);
    }
  }

  ++state.step;
  const AdamHyper& h = state.hyper;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    m = h.beta1 * m + (1.0 - h.beta1) * grads[i];
    v = h.beta2 * v + (1.0 - h.beta2) * grads[i].cwiseAbs2();
    params[i].value.array() -= h.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + h.epsilon);
  }
}

}  // namespace zsl
