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

#include <cstddef>
#include <functional>
#include <span>

#include <Eigen/Dense>

#include "zsl/numerics/params.hpp"

namespace zsl {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t param_index = 0;
  Eigen::Index row = 0;
  Eigen::Index col = 0;
};

/// Compares analytic gradients with central differences of `loss`.
///
/// The relative error at a coordinate is
/// |analytic - numeric| / max(1e-8, |analytic| + |numeric|); the report holds
/// the worst coordinate. `loss` must read the parameters through `params`,
/// which are perturbed and restored in place. Throws GradCheckError naming
/// the coordinate if either estimate is NaN.
GradCheckReport finite_diff_check(const std::function<double()>& loss, std::span<NamedParam> params,
                                  std::span<const Eigen::MatrixXd> analytic, double h = 1e-5);

}  // namespace zsl
