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

#include "zsl/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include "zsl/errors.hpp"
#include "zsl/numerics/adam.hpp"
#include "zsl/numerics/params.hpp"

namespace zsl {

namespace {

// Runs fn(begin, end) over contiguous chunks of [0, n); every index is
// handled by exactly one call so results written per index are deterministic.
template <typename Fn>
void parallel_chunks(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(eval_threads(), std::max<std::size_t>(1, n / 64));
  if (workers <= 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex mu;
  const std::size_t step = (n + workers - 1) / workers;
  for (std::size_t begin = 0; begin < n; begin += step) {
    const std::size_t end = std::min(n, begin + step);
    pool.emplace_back([&, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

Partition regime_partition(Regime r) { return r == Regime::ZslUnseen ? Partition::ValUnseen : Partition::ValSeen; }

double mean_row_error(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& target) {
  if (target.rows() == 0) return 0.0;
  return (predicted - target).rowwise().squaredNorm().mean();
}

}  // namespace

std::string to_string(Regime r) {
  switch (r) {
    case Regime::Embedding:
      return "embedding";
    case Regime::ZslSeen:
      return "zsl-seen";
    case Regime::ZslUnseen:
      return "zsl-unseen";
  }
  return "embedding";
}

Regime regime_from_string(const std::string& s) {
  if (s == "embedding") return Regime::Embedding;
  if (s == "zsl-seen") return Regime::ZslSeen;
  if (s == "zsl-unseen") return Regime::ZslUnseen;
  throw ContractError("unknown regime '" + s + "' (expected embedding, zsl-seen or zsl-unseen)");
}

unsigned eval_threads() {
  if (const char* env = std::getenv("ZSL_LAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<std::size_t> topk(std::span<const double> scores, std::size_t k) {
  if (k < 1 || k > scores.size()) {
    throw ContractError("top-k needs 1 <= k <= " + std::to_string(scores.size()) + ", got " + std::to_string(k));
  }
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });
  idx.resize(k);
  return idx;
}

double hit_at_k(const Rankings& rankings, std::span<const std::size_t> truths, std::size_t k) {
  if (rankings.empty()) throw ContractError("hit@k of an empty set");
  if (rankings.size() != truths.size()) throw ContractError("hit@k: rankings and truths differ in length");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < rankings.size(); ++i) {
    if (rankings[i].size() < k) throw ContractError("hit@k: ranking shorter than k");
    hits += std::find(rankings[i].begin(), rankings[i].begin() + static_cast<std::ptrdiff_t>(k), truths[i]) !=
            rankings[i].begin() + static_cast<std::ptrdiff_t>(k);
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(rankings.size());
}

MistakeMetrics mistake_metrics(const Rankings& rankings, std::span<const std::size_t> truths, std::size_t k,
                               const SimilarityMatrix& sim, const RankDistanceMatrix& dis) {
  if (rankings.size() != truths.size()) throw ContractError("mistake metrics: rankings and truths differ in length");
  const auto n_labels = static_cast<std::size_t>(sim.values.rows());
  if (static_cast<std::size_t>(dis.values.rows()) != n_labels) {
    throw DimensionError("similarity and rank matrices cover different label sets");
  }
  MistakeMetrics out;
  // Per-instance terms are summed in sorted order so the result does not
  // depend on instance order.
  std::vector<double> sim_terms;
  std::vector<double> dis_terms;
  for (std::size_t i = 0; i < rankings.size(); ++i) {
    if (rankings[i].size() < k) throw ContractError("mistake metrics: ranking shorter than k");
    const auto first = rankings[i].begin();
    const auto last = first + static_cast<std::ptrdiff_t>(k);
    if (std::find(first, last, truths[i]) != last) continue;
    const auto t = static_cast<Eigen::Index>(truths[i]);
    double s = 0.0;
    double d = 0.0;
    for (auto it = first; it != last; ++it) {
      if (*it >= n_labels) throw LookupError("predicted label index outside the similarity matrix");
      s += sim.values(t, static_cast<Eigen::Index>(*it));
      d += dis.values(t, static_cast<Eigen::Index>(*it));
    }
    sim_terms.push_back(s / static_cast<double>(k));
    dis_terms.push_back(d / static_cast<double>(k));
  }
  out.mistakes = sim_terms.size();
  auto sorted_sum = [](std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    return std::accumulate(v.begin(), v.end(), 0.0);
  };
  if (out.mistakes > 0) {
    out.avg_sim = sorted_sum(sim_terms) / static_cast<double>(out.mistakes);
    out.avg_sim_dis = sorted_sum(dis_terms) / static_cast<double>(out.mistakes);
  }
  return out;
}

EvalReport evaluate_scores(Regime regime, const Eigen::MatrixXd& scores, std::span<const std::size_t> truths,
                           std::span<const std::size_t> k_list, const SimilarityMatrix& sim,
                           const RankDistanceMatrix& dis) {
  if (scores.rows() == 0) throw DataError("no instances to evaluate");
  if (static_cast<std::size_t>(scores.rows()) != truths.size()) throw ContractError("one truth per score row");
  if (scores.cols() != sim.values.rows()) throw DimensionError("score columns do not match the similarity matrix");
  if (k_list.empty()) throw ContractError("no k values requested");
  const std::size_t kmax = *std::max_element(k_list.begin(), k_list.end());
  const auto n = static_cast<std::size_t>(scores.rows());
  Rankings rankings(n);
  parallel_chunks(n, [&](std::size_t begin, std::size_t end) {
    std::vector<double> row(static_cast<std::size_t>(scores.cols()));
    for (std::size_t i = begin; i < end; ++i) {
      for (Eigen::Index j = 0; j < scores.cols(); ++j) row[static_cast<std::size_t>(j)] = scores(static_cast<Eigen::Index>(i), j);
      rankings[i] = topk(row, kmax);
    }
  });
  EvalReport report;
  report.regime = regime;
  report.instances = n;
  for (std::size_t k : k_list) {
    report.metrics.push_back({k, hit_at_k(rankings, truths, k), mistake_metrics(rankings, truths, k, sim, dis)});
  }
  return report;
}

std::vector<std::string> regime_label_space(Regime regime, const Split& split) {
  std::set<std::string> labels(split.seen.begin(), split.seen.end());
  if (regime != Regime::Embedding) labels.insert(split.unseen.begin(), split.unseen.end());
  return {labels.begin(), labels.end()};
}

EvalReport evaluate(const TrainedModel& model, const FeatureSet& features, const Split& split, Regime regime,
                    std::span<const std::size_t> k_list, const ModelTables& tables) {
  if (!tables.words) throw ContractError("evaluation needs word vectors for the similarity matrices");
  const FeatureSet part = features.select(regime_partition(regime));
  if (part.size() == 0) throw DataError("partition " + to_string(regime_partition(regime)) + " is empty");
  const std::vector<std::string> labels = regime_label_space(regime, split);
  std::vector<std::size_t> truths;
  truths.reserve(part.size());
  for (Eigen::Index t : label_indices(part.labels, labels)) truths.push_back(static_cast<std::size_t>(t));

  if (regime == Regime::ZslUnseen && !scores_unseen(model)) {
    EvalReport na;
    na.regime = regime;
    na.applicable = false;
    na.instances = part.size();
    for (std::size_t k : k_list) na.metrics.push_back({k, 0.0, {}});
    return na;
  }

  Eigen::MatrixXd scores(part.rows.rows(), static_cast<Eigen::Index>(labels.size()));
  parallel_chunks(part.size(), [&](std::size_t begin, std::size_t end) {
    const auto b = static_cast<Eigen::Index>(begin);
    const auto len = static_cast<Eigen::Index>(end - begin);
    const Eigen::MatrixXd chunk = model_scores(model, part.rows.middleRows(b, len), labels, tables);
    scores.middleRows(b, len) = chunk;
  });
  const SimilarityMatrix sim = similarity_matrix(*tables.words, labels);
  return evaluate_scores(regime, scores, truths, k_list, sim, rank_distance_matrix(sim));
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json metrics = nlohmann::json::object();
  std::vector<std::size_t> ks;
  for (const KMetrics& m : report.metrics) {
    ks.push_back(m.k);
    const std::string k = std::to_string(m.k);
    if (!report.applicable) {
      metrics["hit@" + k] = "N/A";
      metrics["avg.sim@" + k] = "N/A";
      metrics["avg.sim.dis@" + k] = "N/A";
      continue;
    }
    metrics["hit@" + k] = m.hit;
    metrics["mistakes@" + k] = m.mistakes.mistakes;
    metrics["avg.sim@" + k] = m.mistakes.avg_sim ? nlohmann::json(*m.mistakes.avg_sim) : nlohmann::json(nullptr);
    metrics["avg.sim.dis@" + k] =
        m.mistakes.avg_sim_dis ? nlohmann::json(*m.mistakes.avg_sim_dis) : nlohmann::json(nullptr);
  }
  return {{"regime", to_string(report.regime)},
          {"applicable", report.applicable},
          {"instances", report.instances},
          {"k", ks},
          {"metrics", metrics}};
}

std::string csv_header(std::span<const std::size_t> k_list) {
  std::string out = "regime";
  for (const char* name : {"hit@", "avg.sim@", "avg.sim.dis@"})
    for (std::size_t k : k_list) out += "," + std::string(name) + std::to_string(k);
  return out;
}

std::string csv_row(const EvalReport& report) {
  std::string out = to_string(report.regime);
  auto cell = [&](auto get) {
    for (const KMetrics& m : report.metrics) {
      if (!report.applicable) {
        out += ",N/A";
        continue;
      }
      const std::optional<double> v = get(m);
      out += "," + (v ? fmt(*v) : std::string("-"));
    }
  };
  cell([](const KMetrics& m) { return std::optional<double>(m.hit); });
  cell([](const KMetrics& m) { return m.mistakes.avg_sim; });
  cell([](const KMetrics& m) { return m.mistakes.avg_sim_dis; });
  return out;
}

ParameterPredictionCurves parameter_prediction_curves(const FeatureSet& features, const Split& split,
                                                      const ModelTables& tables, const TrainConfig& config) {
  if (!tables.words || !tables.taxonomy) throw ContractError("parameter prediction needs word vectors and a taxonomy");
  const EmbeddingTable& words = *tables.words;
  const std::vector<std::string> seen(split.seen.begin(), split.seen.end());
  const std::vector<std::string> unseen(split.unseen.begin(), split.unseen.end());
  std::vector<std::string> all = regime_label_space(Regime::ZslSeen, split);

  ProbeConfig pc = config.probe;
  pc.seed = config.seed;
  const LinearProbe probe = linear_probe_train(features.rows, features.labels, all, pc);
  const Eigen::MatrixXd seen_targets = probe_targets(probe, seen);
  const Eigen::MatrixXd unseen_targets = probe_targets(probe, unseen);

  Rng root(config.seed);
  Rng init_g = root.fork(0);
  Rng init_m = root.fork(1);
  const Eigen::Index f = features.dim();
  ParameterPredictionCurves out;

  GrviseModel g = make_grvise(build_label_graph(*tables.taxonomy, all, words), words, config.hidden, f,
                              config.leaky_slope, init_g);
  MlpPredictorModel m = make_mlp_predictor(words.dim, config.hidden, f, config.leaky_slope, init_m);
  ParamList gp;
  append_params(g, gp);
  ParamList mp;
  append_params(m.net, "predictor", mp);
  AdamState ga(AdamHyper{config.lr});
  AdamState ma(AdamHyper{config.lr});
  const Eigen::MatrixXd seen_words = words.matrix(seen);
  const Eigen::MatrixXd unseen_words = words.matrix(unseen);
  std::vector<Eigen::Index> seen_rows;
  std::vector<Eigen::Index> unseen_rows;
  for (const auto& c : seen) seen_rows.push_back(g.graph.index(c));
  for (const auto& c : unseen) unseen_rows.push_back(g.graph.index(c));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    {
      ad::Tape tape;
      const auto vars = bind_params(tape, gp);
      adam_step(gp, tape.gradient(grvise_loss(g, vars, seen, seen_targets), vars), ga);
    }
    {
      ad::Tape tape;
      const auto vars = bind_params(tape, mp);
      adam_step(mp, tape.gradient(mlp_predictor_loss(m, vars, seen_words, seen_targets), vars), ma);
    }
    const Eigen::MatrixXd gpred = g.predictions();
    out.gcn_seen.push_back(mean_row_error(gpred(seen_rows, Eigen::all), seen_targets));
    out.gcn_unseen.push_back(mean_row_error(gpred(unseen_rows, Eigen::all), unseen_targets));
    out.mlp_seen.push_back(mean_row_error(mlp_apply(m.net, seen_words), seen_targets));
    out.mlp_unseen.push_back(mean_row_error(mlp_apply(m.net, unseen_words), unseen_targets));
  }
  return out;
}

}  // namespace zsl
