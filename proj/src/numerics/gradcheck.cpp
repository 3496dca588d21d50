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

#include "zsl/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "zsl/errors.hpp"

namespace zsl {

GradCheckReport finite_diff_check(const std::function<double()>& loss, std::span<NamedParam> params,
                                  std::span<const Eigen::MatrixXd> analytic, double h) {
  if (params.size() != analytic.size()) throw DimensionError("finite_diff_check: gradient count mismatch");
  GradCheckReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& value = params[p].value;
    const Eigen::MatrixXd& grad = analytic[p];
    if (grad.rows() != value.rows() || grad.cols() != value.cols()) {
      throw DimensionError("finite_diff_check: gradient shape mismatch for " + params[p].name);
    }
    for (Eigen::Index i = 0; i < value.rows(); ++i) {
      for (Eigen::Index j = 0; j < value.cols(); ++j) {
        const double saved = value(i, j);
        value(i, j) = saved + h;
        const double up = loss();
        value(i, j) = saved - h;
        const double down = loss();
        value(i, j) = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double a = grad(i, j);
        if (std::isnan(numeric) || std::isnan(a)) {
          throw GradCheckError("NaN gradient estimate at " + params[p].name + "(" + std::to_string(i) + "," +
                               std::to_string(j) + ")");
        }
        const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
        if (err > report.max_rel_error) report = {err, p, i, j};
      }
    }
  }
  return report;
}

}  // namespace zsl
