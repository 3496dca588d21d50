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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "zsl/embeddings.hpp"
#include "zsl/features.hpp"
#include "zsl/models/train.hpp"
#include "zsl/taxonomy.hpp"

namespace zsl {

enum class Regime { Embedding, ZslSeen, ZslUnseen };

std::string to_string(Regime r);
/// Accepts embedding, zsl-seen, zsl-unseen.
Regime regime_from_string(const std::string& s);

/// Label indices by descending score; equal scores keep ascending index.
/// Throws ContractError unless 1 <= k <= scores.size().
std::vector<std::size_t> topk(std::span<const double> scores, std::size_t k);

/// One ranked label list per instance (at least k entries each).
using Rankings = std::vector<std::vector<std::size_t>>;

/// Percentage of instances whose truth is among their first k labels.
double hit_at_k(const Rankings& rankings, std::span<const std::size_t> truths, std::size_t k);

struct MistakeMetrics {
  std::size_t mistakes = 0;
  std::optional<double> avg_sim;      // absent when mistakes == 0
  std::optional<double> avg_sim_dis;  // absent when mistakes == 0
};

/// Over instances whose top k misses the truth, averages sim(truth, p) and
/// rank(truth row, p) across all k predicted p, then across instances.
/// Label indices address the rows and columns of `sim` and `dis`.
MistakeMetrics mistake_metrics(const Rankings& rankings, std::span<const std::size_t> truths, std::size_t k,
                               const SimilarityMatrix& sim, const RankDistanceMatrix& dis);

struct KMetrics {
  std::size_t k = 1;
  double hit = 0.0;
  MistakeMetrics mistakes;
};

struct EvalReport {
  Regime regime = Regime::Embedding;
  bool applicable = true;  // false: the model cannot rank this regime's truths
  std::size_t instances = 0;
  std::vector<KMetrics> metrics;  // one entry per requested k, in request order
};

/// Metrics for a precomputed score matrix (rows instances, columns labels).
EvalReport evaluate_scores(Regime regime, const Eigen::MatrixXd& scores, std::span<const std::size_t> truths,
                           std::span<const std::size_t> k_list, const SimilarityMatrix& sim,
                           const RankDistanceMatrix& dis);

/// Labels the regime ranks over: seen classes for embedding, seen and unseen otherwise (sorted).
std::vector<std::string> regime_label_space(Regime regime, const Split& split);

/// Scores the regime's partition and reports every k. Similarity matrices
/// come from `tables.words` over the regime label space. Throws DataError
/// when the regime's partition is empty.
EvalReport evaluate(const TrainedModel& model, const FeatureSet& features, const Split& split, Regime regime,
                    std::span<const std::size_t> k_list, const ModelTables& tables);

nlohmann::json to_json(const EvalReport& report);
/// Header line for `csv_row`: regime then hit@k, avg.sim@k, avg.sim.dis@k for each k.
std::string csv_header(std::span<const std::size_t> k_list);
/// Not-applicable reports print N/A; absent mistake metrics print `-`.
std::string csv_row(const EvalReport& report);

/// Worker count for evaluation: ZSL_LAB_THREADS when set to a positive
/// integer, otherwise the hardware concurrency (at least 1).
unsigned eval_threads();

/// Per-epoch mean squared error of predicted probe rows, seen and unseen
/// classes separately, for a graph predictor and a graph-free MLP trained on
/// the seen rows of a probe fit over all classes.
struct ParameterPredictionCurves {
  std::vector<double> gcn_seen;
  std::vector<double> gcn_unseen;
  std::vector<double> mlp_seen;
  std::vector<double> mlp_unseen;
};

/// Probe is fit on every row of `features`; `tables.words` and
/// `tables.taxonomy` are required.
ParameterPredictionCurves parameter_prediction_curves(const FeatureSet& features, const Split& split,
                                                      const ModelTables& tables, const TrainConfig& config);

}  // namespace zsl
