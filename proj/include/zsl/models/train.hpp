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
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "zsl/embeddings.hpp"
#include "zsl/features.hpp"
#include "zsl/models/common.hpp"
#include "zsl/models/devise.hpp"
#include "zsl/models/grvise.hpp"
#include "zsl/models/hyvise.hpp"
#include "zsl/models/prvise.hpp"
#include "zsl/poincare.hpp"
#include "zsl/taxonomy.hpp"

namespace zsl {

/// Side tables a paradigm may need. Pointers are non-owning and may be null
/// when the paradigm does not use them.
struct ModelTables {
  const EmbeddingTable* words = nullptr;
  const poincare::PoincareTable* poincare = nullptr;
  const Taxonomy* taxonomy = nullptr;
  /// Classes without training rows that still get a node in the GrVISE graph.
  std::vector<std::string> extra_classes;
};

using ModelVariant = std::variant<DeviseModel, PrviseModel, GrviseModel, HyviseModel, LinearProbe, MlpPredictorModel>;

struct TrainedModel {
  Paradigm paradigm = Paradigm::Devise;
  ModelVariant model;
  std::vector<std::string> seen_classes;  // sorted
  TrainConfig config;
};

struct TrainResult {
  TrainedModel model;
  std::vector<double> loss_curve;  // one mean loss per epoch
};

/// Trains on the train-seen rows with seeded mini-batch Adam. Features are
/// never modified. GrVISE and the MLP predictor first fit a linear probe
/// (config.probe) and then regress its normalised rows full-batch, one Adam
/// step per epoch. The linear-probe paradigm runs config.probe alone, so its
/// epoch count is config.probe.epochs. Throws DataError for an empty train-seen partition and
/// ContractError when a required table is missing.
TrainResult train_paradigm(Paradigm paradigm, const FeatureSet& features, const ModelTables& tables,
                           const TrainConfig& config);

/// Whether the model can produce a score for `label`.
bool can_score(const TrainedModel& model, const std::string& label, const ModelTables& tables);

/// Whether the model ranks unseen classes at all (false only for the linear probe).
bool scores_unseen(const TrainedModel& model);

/// Rows are instances, columns follow `label_space`. Linear probes assign
/// -infinity to labels outside their classes.
Eigen::MatrixXd model_scores(const TrainedModel& model, const Eigen::MatrixXd& features,
                             std::span<const std::string> label_space, const ModelTables& tables);

/// Linear-probe rows regressed by GrVISE and the MLP predictor, ordered by `classes`.
Eigen::MatrixXd probe_targets(const LinearProbe& probe, std::span<const std::string> classes);

/// Sorted distinct labels of the train-seen partition.
std::vector<std::string> seen_classes_of(const FeatureSet& features);

}  // namespace zsl
