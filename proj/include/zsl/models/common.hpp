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
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "zsl/features.hpp"
#include "zsl/numerics/autodiff.hpp"

namespace zsl {

enum class Paradigm { Devise, Prvise, Grvise, Hyvise, LinearProbe, MlpPredictor };

std::string to_string(Paradigm p);
/// Accepts devise, prvise, grvise, hyvise, lp, mlp. Throws ContractError otherwise.
Paradigm paradigm_from_string(const std::string& s);

struct TrainConfig {
  int epochs = 200;
  std::size_t batch = 256;
  double lr = 1e-4;
  double margin = 0.1;
  std::uint64_t seed = 0;
  Eigen::Index hidden = 512;
  Eigen::Index latent_dim = 300;
  double leaky_slope = 0.2;
  ProbeConfig probe;  // used where a linear probe is trained first (grvise, mlp, lp)
};

nlohmann::json to_json(const TrainConfig& c);
/// Missing keys keep their defaults.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

/// Mean over rows of sum_{j != y} max(0, margin - s_y + s_j).
ad::Var hinge_rank_loss(ad::Var scores, std::span<const Eigen::Index> truth, double margin);

/// Maps labels to their positions in `classes`; throws LookupError for unknown labels.
std::vector<Eigen::Index> label_indices(std::span<const std::string> labels, std::span<const std::string> classes);

}  // namespace zsl
