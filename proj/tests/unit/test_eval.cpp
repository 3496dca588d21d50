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

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "support.hpp"
#include "zsl/errors.hpp"
#include "zsl/eval.hpp"
#include "zsl/features.hpp"
#include "zsl/models/train.hpp"

using namespace zsl;
using Eigen::MatrixXd;

namespace {

std::vector<std::size_t> ranking_oracle(const std::vector<double>& s) {
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  return idx;
}

SimilarityMatrix random_similarity(Rng& rng, std::size_t n) {
  EmbeddingTable t;
  t.dim = 4;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) {
    labels.push_back("l" + std::to_string(i));
    t.insert(labels.back(), rng.normal_matrix(4, 1).col(0));
  }
  return similarity_matrix(t, labels);
}

struct Brute {
  std::size_t mistakes = 0;
  double sim = 0.0;
  double dis = 0.0;
};

// Direct transcription of the metric, with the rank of p in truth's row
// recomputed from the similarity row rather than read from the rank matrix.
Brute brute_mistakes(const Rankings& r, const std::vector<std::size_t>& truths, std::size_t k,
                     const SimilarityMatrix& sim) {
  const auto n = static_cast<std::size_t>(sim.values.rows());
  std::vector<double> sims, dists;
  for (std::size_t i = 0; i < r.size(); ++i) {
    bool hit = false;
    for (std::size_t j = 0; j < k; ++j) hit = hit || r[i][j] == truths[i];
    if (hit) continue;
    const auto t = static_cast<Eigen::Index>(truths[i]);
    std::vector<double> row(n);
    for (std::size_t c = 0; c < n; ++c) row[c] = sim.values(t, static_cast<Eigen::Index>(c));
    row[truths[i]] = std::numeric_limits<double>::infinity();
    const auto order = ranking_oracle(row);
    double s = 0.0, d = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      s += sim.values(t, static_cast<Eigen::Index>(r[i][j]));
      d += static_cast<double>(std::find(order.begin(), order.end(), r[i][j]) - order.begin());
    }
    sims.push_back(s / static_cast<double>(k));
    dists.push_back(d / static_cast<double>(k));
  }
  Brute b;
  b.mistakes = sims.size();
  if (b.mistakes == 0) return b;
  std::sort(sims.begin(), sims.end());
  std::sort(dists.begin(), dists.end());
  for (double v : sims) b.sim += v;
  for (double v : dists) b.dis += v;
  b.sim /= static_cast<double>(b.mistakes);
  b.dis /= static_cast<double>(b.mistakes);
  return b;
}

class ThreadsEnv {
 public:
  explicit ThreadsEnv(const char* value) { ::setenv("ZSL_LAB_THREADS", value, 1); }
  ~ThreadsEnv() { ::unsetenv("ZSL_LAB_THREADS"); }
};

struct World {
  ToyWorld toy;
  Split split;
  SynthResult synth;
};

const World& world() {
  static const World w = [] {
    World out;
    out.toy = make_toy_world(4, 5, 16, 0.3, 31);
    out.split = generate_tiered_split(out.toy.taxonomy, out.toy.categories, 0.25, 31);
    SynthSpec spec;
    spec.samples_per_class = 15;
    spec.eval_samples_per_class = 5;
    spec.feature_dim = 16;
    spec.seed = 32;
    out.synth = synth_features(spec, out.toy.words, out.split);
    return out;
  }();
  return w;
}

ModelTables world_tables() {
  const World& w = world();
  ModelTables t;
  t.words = &w.toy.words;
  t.taxonomy = &w.toy.taxonomy;
  t.extra_classes.assign(w.split.unseen.begin(), w.split.unseen.end());
  return t;
}

TrainConfig small_config() {
  TrainConfig c;
  c.epochs = 5;
  c.hidden = 32;
  c.lr = 1e-3;
  c.batch = 64;
  c.seed = 3;
  c.probe.epochs = 20;
  return c;
}

}  // namespace

TEST_CASE("regime names round trip") {
  for (Regime r : {Regime::Embedding, Regime::ZslSeen, Regime::ZslUnseen}) CHECK(regime_from_string(to_string(r)) == r);
  CHECK_THROWS_AS(regime_from_string("gzsl"), ContractError);
}

TEST_CASE("topk: examples, full permutation, ties, range errors") {
  const std::vector<double> s{0.1, 0.9, 0.5};
  CHECK(topk(s, 2) == std::vector<std::size_t>{1, 2});
  CHECK(topk(s, 3) == std::vector<std::size_t>{1, 2, 0});
  const std::vector<double> tied{0.5, 0.7, 0.5, 0.7};
  CHECK(topk(tied, 4) == std::vector<std::size_t>{1, 3, 0, 2});
  CHECK_THROWS_AS(topk(s, 0), ContractError);
  CHECK_THROWS_AS(topk(s, 4), ContractError);
}

TEST_CASE("property: topk is the prefix of a stable descending sort") {
  Rng rng(1);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 1 + rng.index(40);
    std::vector<double> s(n);
    for (double& v : s) v = std::round(rng.uniform() * 8.0) / 8.0;
    const std::size_t k = 1 + rng.index(n);
    const auto full = ranking_oracle(s);
    REQUIRE(topk(s, k) == std::vector<std::size_t>(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(k)));
  }
}

TEST_CASE("hit_at_k: constructed rankings, monotonicity, errors") {
  const Rankings correct{{0, 1, 2}, {1, 0, 2}};
  const std::vector<std::size_t> truths{0, 1};
  CHECK(hit_at_k(correct, truths, 1) == 100.0);

  Rankings third;
  std::vector<std::size_t> t3;
  for (std::size_t i = 0; i < 10; ++i) {
    third.push_back({(i + 1) % 7, (i + 2) % 7, i % 7, (i + 3) % 7, (i + 4) % 7});
    t3.push_back(i % 7);
  }
  CHECK(hit_at_k(third, t3, 1) == 0.0);
  CHECK(hit_at_k(third, t3, 3) == 100.0);
  CHECK(hit_at_k(third, t3, 5) == 100.0);

  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    Rankings r;
    std::vector<std::size_t> t;
    for (int i = 0; i < 30; ++i) {
      std::vector<double> s(12);
      for (double& v : s) v = rng.uniform();
      r.push_back(topk(s, 12));
      t.push_back(rng.index(12));
    }
    for (std::size_t k = 1; k < 12; ++k) REQUIRE(hit_at_k(r, t, k) <= hit_at_k(r, t, k + 1));
  }

  const Rankings empty;
  const std::vector<std::size_t> none;
  CHECK_THROWS_AS(hit_at_k(empty, none, 1), ContractError);
  CHECK_THROWS_AS(hit_at_k(correct, truths, 4), ContractError);
  const std::vector<std::size_t> short_truths{0};
  CHECK_THROWS_AS(hit_at_k(correct, short_truths, 1), ContractError);
}

TEST_CASE("mistake_metrics: single-instance hand case and empty mistake set") {
  SimilarityMatrix sim{{"t", "p", "q"}, MatrixXd(3, 3)};
  sim.values << 1, 0.9, 0.2, 0.9, 1, 0.1, 0.2, 0.1, 1;
  const RankDistanceMatrix dis = rank_distance_matrix(sim);
  const Rankings r{{1, 0, 2}};
  const std::vector<std::size_t> t{0};
  const MistakeMetrics m = mistake_metrics(r, t, 1, sim, dis);
  CHECK(m.mistakes == 1);
  REQUIRE(m.avg_sim.has_value());
  CHECK(*m.avg_sim == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(*m.avg_sim_dis == 1.0);

  const MistakeMetrics none = mistake_metrics(r, t, 2, sim, dis);
  CHECK(none.mistakes == 0);
  CHECK_FALSE(none.avg_sim.has_value());
  CHECK_FALSE(none.avg_sim_dis.has_value());
}

TEST_CASE("mistake_metrics: exhaustive three-class outcomes match the oracle") {
  SimilarityMatrix sim{{"a", "b", "c"}, MatrixXd(3, 3)};
  sim.values << 1, 0.6, -0.2, 0.6, 1, 0.3, -0.2, 0.3, 1;
  const RankDistanceMatrix dis = rank_distance_matrix(sim);
  std::vector<std::vector<std::size_t>> perms;
  std::vector<std::size_t> p{0, 1, 2};
  do perms.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  // Every pair of instances, each with any ranking and any truth.
  for (const auto& r0 : perms)
    for (const auto& r1 : perms)
      for (std::size_t t0 = 0; t0 < 3; ++t0)
        for (std::size_t t1 = 0; t1 < 3; ++t1)
          for (std::size_t k = 1; k <= 3; ++k) {
            const Rankings r{r0, r1};
            const std::vector<std::size_t> t{t0, t1};
            const MistakeMetrics m = mistake_metrics(r, t, k, sim, dis);
            const Brute b = brute_mistakes(r, t, k, sim);
            REQUIRE(m.mistakes == b.mistakes);
            if (b.mistakes == 0) {
              REQUIRE_FALSE(m.avg_sim.has_value());
            } else {
              REQUIRE(*m.avg_sim == b.sim);
              REQUIRE(*m.avg_sim_dis == b.dis);
            }
          }
}

TEST_CASE("property: mistake_metrics equals the brute-force oracle on random instances") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    Rng rng(100 + seed);
    const std::size_t labels = 2 + rng.index(49);
    const std::size_t n = 1 + rng.index(1000);
    const SimilarityMatrix sim = random_similarity(rng, labels);
    const RankDistanceMatrix dis = rank_distance_matrix(sim);
    Rankings r;
    std::vector<std::size_t> t;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> s(labels);
      for (double& v : s) v = rng.uniform();
      r.push_back(topk(s, labels));
      t.push_back(rng.index(labels));
    }
    for (std::size_t k : {std::size_t{1}, std::min<std::size_t>(5, labels)}) {
      const MistakeMetrics m = mistake_metrics(r, t, k, sim, dis);
      const Brute b = brute_mistakes(r, t, k, sim);
      REQUIRE(m.mistakes == b.mistakes);
      if (b.mistakes > 0) {
        REQUIRE(*m.avg_sim == b.sim);
        REQUIRE(*m.avg_sim_dis == b.dis);
        REQUIRE(*m.avg_sim >= -1.0);
        REQUIRE(*m.avg_sim <= 1.0);
        REQUIRE(*m.avg_sim_dis >= 1.0);
      }
    }
  }
}

TEST_CASE("evaluate_scores: oracle scorer, uniform random scorer, errors") {
  Rng rng(3);
  const std::size_t labels = 10;
  const SimilarityMatrix sim = random_similarity(rng, labels);
  const RankDistanceMatrix dis = rank_distance_matrix(sim);
  const std::size_t n = 10000;
  std::vector<std::size_t> truths(n);
  MatrixXd oracle = MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(labels));
  for (std::size_t i = 0; i < n; ++i) {
    truths[i] = rng.index(labels);
    oracle(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(truths[i])) = 1.0;
  }
  const std::vector<std::size_t> ks{1, 5};
  const EvalReport perfect = evaluate_scores(Regime::ZslUnseen, oracle, truths, ks, sim, dis);
  CHECK(perfect.metrics[0].hit == 100.0);
  CHECK(perfect.metrics[0].mistakes.mistakes == 0);
  CHECK_FALSE(perfect.metrics[0].mistakes.avg_sim.has_value());

  const MatrixXd uniform = rng.uniform_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(labels), 0, 1);
  const EvalReport random = evaluate_scores(Regime::ZslSeen, uniform, truths, ks, sim, dis);
  const double p = 1.0 / static_cast<double>(labels);
  const double sigma = 100.0 * std::sqrt(p * (1 - p) / static_cast<double>(n));
  CHECK(std::abs(random.metrics[0].hit - 100.0 * p) <= 3 * sigma);
  CHECK(std::abs(random.metrics[1].hit - 500.0 * p) <= 3 * 100.0 * std::sqrt(5 * p * (1 - 5 * p) / n));
  CHECK(random.metrics[0].hit <= random.metrics[1].hit);
  CHECK(random.instances == n);

  const std::vector<std::size_t> no_k;
  CHECK_THROWS_AS(evaluate_scores(Regime::ZslSeen, uniform, truths, no_k, sim, dis), ContractError);
  const std::vector<std::size_t> big_k{11};
  CHECK_THROWS_AS(evaluate_scores(Regime::ZslSeen, uniform, truths, big_k, sim, dis), ContractError);
  CHECK_THROWS_AS(evaluate_scores(Regime::ZslSeen, MatrixXd(0, 10), {}, ks, sim, dis), DataError);
  CHECK_THROWS_AS(evaluate_scores(Regime::ZslSeen, uniform.leftCols(9), truths, ks, sim, dis), DimensionError);
}

TEST_CASE("evaluate_scores: reports are invariant to instance order and thread count") {
  Rng rng(4);
  const std::size_t labels = 20;
  const SimilarityMatrix sim = random_similarity(rng, labels);
  const RankDistanceMatrix dis = rank_distance_matrix(sim);
  const Eigen::Index n = 700;
  const MatrixXd scores = rng.normal_matrix(n, static_cast<Eigen::Index>(labels));
  std::vector<std::size_t> truths(static_cast<std::size_t>(n));
  for (auto& t : truths) t = rng.index(labels);
  const std::vector<std::size_t> ks{1, 3, 5};
  std::string base;
  {
    ThreadsEnv one("1");
    base = to_json(evaluate_scores(Regime::ZslSeen, scores, truths, ks, sim, dis)).dump();
  }
  {
    ThreadsEnv many("7");
    CHECK(to_json(evaluate_scores(Regime::ZslSeen, scores, truths, ks, sim, dis)).dump() == base);
  }
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  std::vector<std::size_t> shuffled_truths;
  for (Eigen::Index i : perm) shuffled_truths.push_back(truths[static_cast<std::size_t>(i)]);
  const MatrixXd shuffled = scores(perm, Eigen::all);
  CHECK(to_json(evaluate_scores(Regime::ZslSeen, shuffled, shuffled_truths, ks, sim, dis)).dump() == base);
}

TEST_CASE("eval_threads reads the environment") {
  {
    ThreadsEnv env("3");
    CHECK(eval_threads() == 3);
  }
  {
    ThreadsEnv env("zero");
    CHECK(eval_threads() >= 1);
  }
  {
    ThreadsEnv env("-2");
    CHECK(eval_threads() >= 1);
  }
}

TEST_CASE("report serialisation: null for absent metrics, N/A for inapplicable regimes") {
  EvalReport r;
  r.regime = Regime::ZslSeen;
  r.instances = 4;
  r.metrics.push_back({1, 75.0, {1, 0.5, 2.0}});
  r.metrics.push_back({5, 100.0, {0, std::nullopt, std::nullopt}});
  const nlohmann::json j = to_json(r);
  CHECK(j["regime"] == "zsl-seen");
  CHECK(j["k"] == nlohmann::json{1, 5});
  CHECK(j["metrics"]["hit@1"] == 75.0);
  CHECK(j["metrics"]["avg.sim@1"] == 0.5);
  CHECK(j["metrics"]["avg.sim@5"].is_null());
  CHECK(j["metrics"]["avg.sim.dis@5"].is_null());
  CHECK(j["metrics"]["mistakes@5"] == 0);
  const std::vector<std::size_t> ks{1, 5};
  CHECK(csv_header(ks) == "regime,hit@1,hit@5,avg.sim@1,avg.sim@5,avg.sim.dis@1,avg.sim.dis@5");
  CHECK(csv_row(r) == "zsl-seen,75.0000,100.0000,0.5000,-,2.0000,-");

  r.applicable = false;
  CHECK(to_json(r)["metrics"]["hit@1"] == "N/A");
  CHECK(csv_row(r) == "zsl-seen,N/A,N/A,N/A,N/A,N/A,N/A");
}

TEST_CASE("regime label spaces") {
  const Split s{{"b", "a"}, {"c"}};
  CHECK(regime_label_space(Regime::Embedding, s) == std::vector<std::string>{"a", "b"});
  CHECK(regime_label_space(Regime::ZslSeen, s) == std::vector<std::string>{"a", "b", "c"});
  CHECK(regime_label_space(Regime::ZslUnseen, s) == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("evaluate: trained model, determinism, LP not applicable to unseen, errors") {
  const World& w = world();
  const ModelTables tables = world_tables();
  const std::vector<std::size_t> ks{1, 5};
  const TrainResult devise = train_paradigm(Paradigm::Devise, w.synth.features, tables, small_config());
  for (Regime r : {Regime::Embedding, Regime::ZslSeen, Regime::ZslUnseen}) {
    CAPTURE(to_string(r));
    const EvalReport a = evaluate(devise.model, w.synth.features, w.split, r, ks, tables);
    CHECK(a.applicable);
    CHECK(to_json(a).dump() == to_json(evaluate(devise.model, w.synth.features, w.split, r, ks, tables)).dump());
    CHECK(a.metrics[0].hit <= a.metrics[1].hit);
    const auto expect = w.synth.features.select(r == Regime::ZslUnseen ? Partition::ValUnseen : Partition::ValSeen);
    CHECK(a.instances == expect.size());
  }

  const TrainResult lp = train_paradigm(Paradigm::LinearProbe, w.synth.features, tables, small_config());
  const EvalReport na = evaluate(lp.model, w.synth.features, w.split, Regime::ZslUnseen, ks, tables);
  CHECK_FALSE(na.applicable);
  CHECK(csv_row(na).find("N/A") != std::string::npos);
  const EvalReport emb = evaluate(lp.model, w.synth.features, w.split, Regime::Embedding, ks, tables);
  CHECK(emb.applicable);
  CHECK(emb.metrics[0].hit > 50.0);

  FeatureSet no_unseen = w.synth.features.select(Partition::TrainSeen);
  CHECK_THROWS_AS(evaluate(devise.model, no_unseen, w.split, Regime::ZslUnseen, ks, tables), DataError);
  CHECK_THROWS_AS(evaluate(devise.model, w.synth.features, w.split, Regime::ZslSeen, ks, ModelTables{}),
                  ContractError);
}

TEST_CASE("parameter prediction curves: one entry per epoch, non-negative") {
  const World& w = world();
  TrainConfig c = small_config();
  c.epochs = 15;
  const ParameterPredictionCurves curves = parameter_prediction_curves(w.synth.features, w.split, world_tables(), c);
  for (const auto* v : {&curves.gcn_seen, &curves.gcn_unseen, &curves.mlp_seen, &curves.mlp_unseen}) {
    REQUIRE(v->size() == 15);
    for (double x : *v) CHECK(x >= 0.0);
  }
  CHECK(curves.gcn_seen.back() < curves.gcn_seen.front());
  CHECK(curves.mlp_seen.back() < curves.mlp_seen.front());
}
