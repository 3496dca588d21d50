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
#include <vector>

namespace zsl {

/// Fractional ranks (1-based, ties share their mean rank).
std::vector<double> fractional_ranks(std::span<const double> values);

double pearson(std::span<const double> x, std::span<const double> y);

/// Spearman rank correlation with average-rank tie handling.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace zsl
