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

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "zsl/numerics/params.hpp"

namespace zsl {

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::int64_t step = 0;
  std::vector<Eigen::MatrixXd> first_moment;
  std::vector<Eigen::MatrixXd> second_moment;
  AdamHyper hyper;

  explicit AdamState(AdamHyper h = {}) : hyper(h) {}
};

/// One bias-corrected Adam update, in place. Moments are allocated on the
/// first call; later calls must present the same parameter shapes.
void adam_step(std::span<NamedParam> params, std::span<const Eigen::MatrixXd> grads, AdamState& state);

}  // namespace zsl
