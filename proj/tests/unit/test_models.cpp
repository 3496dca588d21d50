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

#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "support.hpp"
#include "zsl/errors.hpp"
#include "zsl/features.hpp"
#include "zsl/models/checkpoint.hpp"
#include "zsl/models/common.hpp"
#include "zsl/models/devise.hpp"
#include "zsl/models/grvise.hpp"
#include "zsl/models/hyvise.hpp"
#include "zsl/models/prvise.hpp"
#include "zsl/models/train.hpp"
#include "zsl/poincare.hpp"

using namespace zsl;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

EmbeddingTable table_of(std::initializer_list<std::pair<std::string, VectorXd>> rows) {
  EmbeddingTable t;
  t.dim = rows.begin()->second.size();
  for (const auto& [k, v] : rows) t.insert(k, v);
  return t;
}

// Single linear layer with identity activation; t(x) = x when `w` is I.
DeviseModel identity_devise(Eigen::Index dim, double margin) {
  DeviseModel m;
  m.transform.layers.push_back({MatrixXd::Identity(dim, dim), VectorXd::Zero(dim), Activation::identity()});
  m.margin = margin;
  return m;
}

// Constant-output network: zero final weights, bias `out`.
void make_constant(MlpParams& net, const VectorXd& out) {
  net.layers.back().weight.setZero();
  net.layers.back().bias = out;
}

MatrixXd random_ball_rows(Rng& rng, Eigen::Index n, Eigen::Index dim, double max_norm) {
  MatrixXd out(n, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const VectorXd v = rng.normal_matrix(dim, 1).col(0);
    out.row(i) = (v.normalized() * max_norm * (0.2 + 0.8 * rng.uniform())).transpose();
  }
  return out;
}

// Aligned synthetic world shared by the training tests.
struct World {
  ToyWorld toy;
  Split split;
  SynthResult synth;
  poincare::PoincareTable points;
  std::vector<std::string> all_classes;
};

const World& world() {
  static const World w = [] {
    World out;
    out.toy = make_toy_world(4, 5, 16, 0.3, 21);
    out.split = generate_tiered_split(out.toy.taxonomy, out.toy.categories, 0.25, 21);
    SynthSpec spec;
    spec.samples_per_class = 20;
    spec.eval_samples_per_class = 5;
    spec.feature_dim = 16;
    spec.alignment = 1.0;
    spec.noise = 0.05;
    spec.seed = 22;
    out.synth = synth_features(spec, out.toy.words, out.split);
    poincare::TrainConfig pc;
    pc.dim = 5;
    pc.epochs = 50;
    pc.seed = 23;
    out.points = poincare::train_poincare(out.toy.taxonomy, pc);
    out.all_classes.assign(out.split.seen.begin(), out.split.seen.end());
    out.all_classes.insert(out.all_classes.end(), out.split.unseen.begin(), out.split.unseen.end());
    return out;
  }();
  return w;
}

ModelTables world_tables() {
  const World& w = world();
  ModelTables t;
  t.words = &w.toy.words;
  t.poincare = &w.points;
  t.taxonomy = &w.toy.taxonomy;
  t.extra_classes.assign(w.split.unseen.begin(), w.split.unseen.end());
  return t;
}

TrainConfig small_config(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.hidden = 32;
  c.latent_dim = 8;
  c.lr = 1e-3;
  c.batch = 64;
  c.seed = 5;
  c.probe.epochs = epochs == 0 ? 0 : 30;
  return c;
}

const std::vector<Paradigm> kAllParadigms{Paradigm::Devise,        Paradigm::Prvise,      Paradigm::Grvise,
                                          Paradigm::Hyvise,        Paradigm::LinearProbe, Paradigm::MlpPredictor};

std::vector<std::string> scoring_space(const TrainedModel& m) {
  return scores_unseen(m) ? world().all_classes : m.seen_classes;
}

}  // namespace

TEST_CASE("paradigm names round trip and unknown names are contract errors") {
  for (Paradigm p : kAllParadigms) CHECK(paradigm_from_string(to_string(p)) == p);
  CHECK_THROWS_AS(paradigm_from_string("clip"), ContractError);
}

TEST_CASE("train config JSON: defaults, round trip, rejection of non-positive values") {
  const TrainConfig d;
  CHECK(d.epochs == 200);
  CHECK(d.batch == 256);
  CHECK(d.lr == 1e-4);
  CHECK(d.margin == 0.1);
  TrainConfig c = small_config(7);
  const TrainConfig back = train_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(train_config_from_json(nlohmann::json::object()).epochs == 200);
  CHECK_THROWS_AS(train_config_from_json(nlohmann::json{{"lr", 0.0}}), ContractError);
  CHECK_THROWS_AS(train_config_from_json(nlohmann::json{{"batch", 0}}), ContractError);
  CHECK_THROWS_AS(train_config_from_json(nlohmann::json{{"margin", -1.0}}), ContractError);
}

TEST_CASE("hinge_rank_loss: mean over rows of summed violations") {
  ad::Tape tape;
  MatrixXd s(2, 3);
  s << 0.3, 0.5, 0.0,  // violations 0.3 + 0
      1.0, 0.0, 0.95;  // violation 0.05
  const std::vector<Eigen::Index> truth{0, 0};
  CHECK(hinge_rank_loss(tape.constant(s), truth, 0.1).scalar() == doctest::Approx(0.175).epsilon(1e-12));
  const std::vector<std::string> classes{"a", "b"};
  const std::vector<std::string> labels{"b", "a", "b"};
  CHECK(label_indices(labels, classes) == std::vector<Eigen::Index>{1, 0, 1});
  const std::vector<std::string> bad{"c"};
  CHECK_THROWS_AS(label_indices(bad, classes), LookupError);
}

TEST_CASE("devise_loss: hand examples") {
  const DeviseModel m = identity_devise(2, 0.1);
  const VectorXd x = vec({1, 0});
  const std::vector<std::string> cands{"y", "j", "k"};

  const auto satisfied = table_of({{"y", vec({0.9, 0})}, {"j", vec({0.5, 0})}, {"k", vec({-1, 0})}});
  CHECK(devise_loss(m, x, "y", satisfied, cands) == 0.0);

  const std::vector<std::string> two{"y", "j"};
  const auto one_other = table_of({{"y", vec({0.3, 0})}, {"j", vec({0.5, 0})}});
  CHECK(devise_loss(m, x, "y", one_other, two) == doctest::Approx(0.3).epsilon(1e-12));

  const auto two_violators = table_of({{"y", vec({0.3, 0})}, {"j", vec({0.4, 0})}, {"k", vec({0.4, 1})}});
  CHECK(devise_loss(m, x, "y", two_violators, cands) == doctest::Approx(0.4).epsilon(1e-12));

  const std::vector<std::string> missing{"y", "emu"};
  CHECK_THROWS_AS(devise_loss(m, x, "y", one_other, missing), MissingEmbeddingError);
}

TEST_CASE("devise: make_devise shapes and gradient check") {
  Rng rng(1);
  DeviseModel m = make_devise(6, 4, 8, 0.2, 0.1, rng);
  CHECK(m.transform.input_dim() == 6);
  CHECK(m.transform.output_dim() == 4);
  const MatrixXd x = rng.normal_matrix(5, 6);
  const MatrixXd cands = rng.normal_matrix(3, 4);
  const std::vector<Eigen::Index> truth{0, 1, 2, 1, 0};
  ParamList params;
  append_params(m.transform, "transform", params);
  const double err = testing::loss_grad_error(params, [&](ad::Tape& t, std::span<const ad::Var> v) {
    return devise_loss(m, v, t.constant(x), cands, truth);
  });
  CHECK(err <= 1e-4);
}

TEST_CASE("devise_scores: self match, batching invariance, top-k oracle") {
  const DeviseModel id = identity_devise(3, 0.1);
  const auto words = table_of({{"a", vec({1, 0, 0})}, {"b", vec({0, 1, 0})}, {"c", vec({0.6, 0.8, 0})}});
  const std::vector<std::string> space{"a", "b", "c"};
  MatrixXd x(1, 3);
  x.row(0) = words.at("c").transpose();
  const MatrixXd s = devise_scores(id, x, space, words);
  Eigen::Index best = 0;
  s.row(0).maxCoeff(&best);
  CHECK(best == 2);

  Rng rng(2);
  const DeviseModel m = make_devise(5, 3, 7, 0.2, 0.1, rng);
  const MatrixXd xs = rng.normal_matrix(6, 5);
  const MatrixXd batched = devise_scores(m, xs, space, words);
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    REQUIRE(devise_scores(m, xs.row(i), space, words) == batched.row(i));
    // Brute-force: w(y) . t(x) per label.
    const RowVectorXd t = mlp_apply(m.transform, xs.row(i));
    for (Eigen::Index j = 0; j < 3; ++j) {
      REQUIRE(std::abs(batched(i, j) - t.dot(words.at(space[static_cast<std::size_t>(j)]).transpose())) <= 1e-12);
    }
  }
  const std::vector<std::string> missing{"zzz"};
  CHECK_THROWS_AS(devise_scores(m, xs, missing, words), MissingEmbeddingError);
}

TEST_CASE("kl_diag_gaussian: closed-form examples and non-negativity") {
  const VectorXd m = vec({0.3, -1}), lv = vec({0.2, -0.5});
  CHECK(kl_diag_gaussian(m, lv, m, lv) == 0.0);
  CHECK(kl_diag_gaussian(vec({1}), vec({0}), vec({0}), vec({0})) == doctest::Approx(0.5).epsilon(1e-12));
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const MatrixXd p = rng.normal_matrix(4, 4);
    REQUIRE(kl_diag_gaussian(p.col(0), p.col(1), p.col(2), p.col(3)) >= 0.0);
  }
  CHECK_THROWS_AS(kl_diag_gaussian(vec({1}), vec({0}), vec({0, 1}), vec({0, 1})), DimensionError);
}

TEST_CASE("kl_diag_gaussian: tape form matches the plain form row by row") {
  Rng rng(4);
  const MatrixXd m1 = rng.normal_matrix(3, 5), l1 = rng.normal_matrix(3, 5);
  const MatrixXd m2 = rng.normal_matrix(3, 5), l2 = rng.normal_matrix(3, 5);
  ad::Tape t;
  const ad::Var kl = kl_diag_gaussian(t.constant(m1), t.constant(l1), t.constant(m2), t.constant(l2));
  REQUIRE(kl.rows() == 3);
  REQUIRE(kl.cols() == 1);
  for (Eigen::Index i = 0; i < 3; ++i) {
    CHECK(std::abs(kl.value()(i, 0) - kl_diag_gaussian(m1.row(i).transpose(), l1.row(i).transpose(),
                                                       m2.row(i).transpose(), l2.row(i).transpose())) <= 1e-12);
  }
}

TEST_CASE("prvise_loss: perfect decoders with identical encoders give 0, KL term decomposes") {
  Rng rng(5);
  PrviseModel m = make_prvise(3, 2, 4, 2, 0.2, rng);
  const VectorXd f = vec({0.5, -1, 2});
  const auto words = table_of({{"y", vec({0.25, 0.75})}});
  make_constant(m.image_decoder, f);
  make_constant(m.word_decoder, words.at("y"));
  make_constant(m.image_encoder, VectorXd::Zero(4));
  make_constant(m.word_encoder, VectorXd::Zero(4));
  Rng noise(6);
  CHECK(prvise_loss(m, f, "y", words, noise) == 0.0);

  const VectorXd mi = vec({0.4, -0.2}), li = vec({0.1, 0.3}), mw = vec({-0.5, 0.6}), lw = vec({-0.2, 0.0});
  VectorXd enc_i(4), enc_w(4);
  enc_i << mi, li;
  enc_w << mw, lw;
  make_constant(m.image_encoder, enc_i);
  make_constant(m.word_encoder, enc_w);
  CHECK(prvise_loss(m, f, "y", words, noise) == doctest::Approx(kl_diag_gaussian(mi, li, mw, lw)).epsilon(1e-12));
  CHECK_THROWS_AS(prvise_loss(m, f, "emu", words, noise), MissingEmbeddingError);
}

TEST_CASE("prvise: gradient check with frozen noise") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(10 + seed);
    PrviseModel m = make_prvise(5, 4, 6, 3, 0.2, rng);
    const MatrixXd x = rng.normal_matrix(4, 5);
    const MatrixXd w = rng.normal_matrix(4, 4);
    const PrviseNoise noise = draw_prvise_noise(4, 3, rng);
    ParamList params;
    append_params(m, params);
    const double err = testing::loss_grad_error(params, [&](ad::Tape& t, std::span<const ad::Var> v) {
      return prvise_loss(m, v, t.constant(x), w, noise);
    });
    CHECK(err <= 1e-4);
  }
}

TEST_CASE("prvise_scores: non-positive, zero at matching latent, brute-force ranking") {
  Rng rng(7);
  PrviseModel m = make_prvise(4, 3, 6, 2, 0.2, rng);
  const MatrixXd x = rng.normal_matrix(5, 4);
  const MatrixXd labels = rng.normal_matrix(4, 3);
  const MatrixXd s = prvise_scores(m, x, labels);
  CHECK(s.maxCoeff() <= 0.0);
  const MatrixXd qi = mlp_apply(m.image_encoder, x), qw = mlp_apply(m.word_encoder, labels);
  for (Eigen::Index i = 0; i < 5; ++i) {
    REQUIRE(prvise_scores(m, x.row(i), labels) == s.row(i));
    for (Eigen::Index j = 0; j < 4; ++j) {
      const double kl = kl_diag_gaussian(qi.row(i).head(2).transpose(), qi.row(i).tail(2).transpose(),
                                         qw.row(j).head(2).transpose(), qw.row(j).tail(2).transpose());
      REQUIRE(std::abs(s(i, j) + kl) <= 1e-12);
    }
  }

  // Constant encoders that agree put every label at the maximum score 0.
  PrviseModel same = m;
  make_constant(same.image_encoder, vec({0.1, 0.2, -0.3, 0.4}));
  make_constant(same.word_encoder, vec({0.1, 0.2, -0.3, 0.4}));
  CHECK(prvise_scores(same, x, labels).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("normalize_probe: rescale, idempotence, zero rows") {
  MatrixXd w(3, 2);
  w << 0, 2, 0.6, 0, 0, 0;
  const VectorXd b = vec({0, 0.8, 0});
  const NormalizedProbe n = normalize_probe(w, b);
  CHECK(n.weight.row(0) == RowVectorXd(Eigen::RowVector2d(0, 1)));
  CHECK(n.stacked().row(1).norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(n.zero_rows == std::vector<bool>{false, false, true});
  CHECK(n.weight.row(2).isZero());

  Rng rng(8);
  const MatrixXd rw = rng.normal_matrix(6, 5);
  const VectorXd rb = rng.normal_matrix(6, 1).col(0);
  const NormalizedProbe once = normalize_probe(rw, rb);
  const NormalizedProbe twice = normalize_probe(once.weight, once.bias);
  CHECK((twice.stacked() - once.stacked()).cwiseAbs().maxCoeff() <= 1e-12);
  MatrixXd raw(6, 6);
  raw << rw, rb;
  for (Eigen::Index i = 0; i < 6; ++i) {
    // Direction preserved: positive multiple of the raw row.
    REQUIRE(std::abs(once.stacked().row(i).dot(raw.row(i)) - raw.row(i).norm()) <= 1e-12);
  }
}

TEST_CASE("normalize_probe: normalized probe accuracy stays within 5 points on aligned data") {
  const World& w = world();
  const std::vector<std::string> seen(w.split.seen.begin(), w.split.seen.end());
  ProbeConfig pc;
  pc.epochs = 60;
  pc.seed = 3;
  LinearProbe probe = linear_probe_train(w.synth.features, seen, pc);
  const FeatureSet val = w.synth.features.select(Partition::ValSeen);
  const double raw = accuracy(probe, val.rows, val.labels);
  const NormalizedProbe n = normalize_probe(probe.weight, probe.bias);
  probe.weight = n.weight;
  probe.bias = n.bias;
  CHECK(std::abs(accuracy(probe, val.rows, val.labels) - raw) <= 5.0);
}

TEST_CASE("gcn_forward: two-node example, constant columns, zero theta, dimension errors") {
  MatrixXd a(2, 2);
  a << 0.5, 0.5, 0.5, 0.5;
  MatrixXd h0(2, 2);
  h0 << 2, 0, 0, 4;
  const std::vector<GcnLayer> ident{{MatrixXd::Identity(2, 2), Activation::identity()},
                                    {MatrixXd::Identity(2, 2), Activation::identity()}};
  MatrixXd expect(2, 2);
  expect << 1, 2, 1, 2;
  CHECK(gcn_forward(a, h0, std::span(ident).first(1)) == expect);
  CHECK(gcn_forward(a, h0, ident) == expect);

  Rng rng(9);
  MatrixXd adj = rng.uniform_matrix(5, 5, 0, 1);
  adj = adj.array().colwise() / adj.rowwise().sum().array();
  MatrixXd constant(5, 3);
  constant << RowVectorXd::Constant(5, 1.5).transpose(), RowVectorXd::Constant(5, -2).transpose(),
      RowVectorXd::Constant(5, 7).transpose();
  const std::vector<GcnLayer> id3{{MatrixXd::Identity(3, 3), Activation::identity()},
                                  {MatrixXd::Identity(3, 3), Activation::identity()}};
  const MatrixXd out = gcn_forward(adj, constant, id3);
  CHECK((out - constant).cwiseAbs().maxCoeff() <= 1e-12);

  const std::vector<GcnLayer> zero{{MatrixXd::Zero(3, 4), Activation::leaky_relu()},
                                   {MatrixXd::Zero(4, 2), Activation::identity()}};
  CHECK(gcn_forward(adj, rng.normal_matrix(5, 3), zero).isZero());

  const std::vector<GcnLayer> wrong{{MatrixXd::Identity(4, 4), Activation::identity()}};
  CHECK_THROWS_AS(gcn_forward(adj, constant, wrong), DimensionError);
  CHECK_THROWS_AS(gcn_forward(MatrixXd::Identity(4, 4), constant, id3), DimensionError);
}

TEST_CASE("build_label_graph: row-stochastic, ancestors included, dropped nodes reported") {
  std::istringstream in("b\ta\nc\tb\nd\tb\ne\tx\n");
  const Taxonomy t = load_taxonomy(in);
  const auto vectors = table_of({{"a", vec({1, 0})}, {"b", vec({0, 1})}, {"c", vec({1, 1})}, {"d", vec({2, 1})},
                                 {"e", vec({0, 3})}});
  const std::vector<std::string> classes{"c", "d", "e"};
  const LabelGraph g = build_label_graph(t, classes, vectors);
  CHECK(g.nodes == std::vector<std::string>{"a", "b", "c", "d", "e"});
  CHECK(g.dropped == std::vector<std::string>{"x"});
  CHECK((g.adjacency.rowwise().sum() - VectorXd::Ones(5)).cwiseAbs().maxCoeff() <= 1e-15);
  // b touches a, c, d and itself.
  CHECK(g.adjacency(g.index("b"), g.index("c")) == doctest::Approx(0.25));
  CHECK(g.adjacency(g.index("c"), g.index("d")) == 0.0);
  CHECK(g.adjacency(g.index("e"), g.index("e")) == 1.0);
  CHECK_THROWS_AS(g.index("x"), LookupError);
  const std::vector<std::string> bad{"c", "x"};
  CHECK_THROWS_AS(build_label_graph(t, bad, vectors), MissingEmbeddingError);
}

TEST_CASE("grvise_loss: zero at targets, single-node definition, data and lookup errors") {
  std::istringstream in("c\tb\nd\tb\n");
  const Taxonomy t = load_taxonomy(in);
  const auto vectors = table_of({{"b", vec({1, 0, 0})}, {"c", vec({0, 1, 0})}, {"d", vec({0, 0, 1})}});
  const std::vector<std::string> classes{"c", "d"};
  Rng rng(10);
  GrviseModel m = make_grvise(build_label_graph(t, classes, vectors), vectors, 4, 2, 0.2, rng);
  const MatrixXd pred = m.predictions();
  REQUIRE(pred.rows() == 3);
  REQUIRE(pred.cols() == 3);
  const std::vector<std::string> seen{"c", "d"};
  MatrixXd targets(2, 3);
  targets << pred.row(m.graph.index("c")), pred.row(m.graph.index("d"));
  CHECK(grvise_loss(m, seen, targets) == 0.0);

  const std::vector<std::string> one{"c"};
  const RowVectorXd l = Eigen::RowVector3d(0.2, -0.4, 1.0);
  CHECK(grvise_loss(m, one, l) == doctest::Approx((pred.row(m.graph.index("c")) - l).squaredNorm()).epsilon(1e-12));

  CHECK_THROWS_AS(grvise_loss(m, seen, MatrixXd(targets.topRows(1))), DataError);
  const std::vector<std::string> outside{"zz"};
  CHECK_THROWS_AS(grvise_loss(m, outside, MatrixXd(targets.topRows(1))), LookupError);
}

TEST_CASE("grvise: gradient check on a random graph") {
  Rng rng(11);
  const auto edges = testing::random_dag_edges(12, rng);
  const Taxonomy t = Taxonomy::from_edges(edges);
  EmbeddingTable vectors;
  vectors.dim = 5;
  for (const std::string& n : t.nodes()) vectors.insert(n, rng.normal_matrix(5, 1).col(0));
  const std::vector<std::string> classes{"n009", "n010", "n011"};
  GrviseModel m = make_grvise(build_label_graph(t, classes, vectors), vectors, 6, 3, 0.2, rng);
  const std::vector<std::string> seen{"n009", "n011"};
  const MatrixXd targets = rng.normal_matrix(2, 4);
  ParamList params;
  append_params(m, params);
  const double err = testing::loss_grad_error(params, [&](ad::Tape&, std::span<const ad::Var> v) {
    return grvise_loss(m, v, seen, targets);
  });
  CHECK(err <= 1e-4);
}

TEST_CASE("classifier and grvise scores: probe substitution, batching, lookup errors") {
  Rng rng(12);
  LinearProbe probe;
  probe.classes = {"a", "b", "c"};
  probe.weight = rng.normal_matrix(3, 4);
  probe.bias = rng.normal_matrix(3, 1).col(0);
  MatrixXd rows(3, 5);
  rows << probe.weight, probe.bias;
  const MatrixXd x = rng.normal_matrix(6, 4);
  CHECK((classifier_scores(x, rows) - probe.logits(x)).cwiseAbs().maxCoeff() <= 1e-12);

  std::istringstream in("a\tr\nb\tr\nc\tr\n");
  const Taxonomy t = load_taxonomy(in);
  EmbeddingTable vectors;
  vectors.dim = 3;
  for (const char* n : {"a", "b", "c", "r"}) vectors.insert(n, rng.normal_matrix(3, 1).col(0));
  GrviseModel m = make_grvise(build_label_graph(t, probe.classes, vectors), vectors, 5, 4, 0.2, rng);
  const std::vector<std::string> space{"c", "a"};
  const MatrixXd s = grvise_scores(m, x, space);
  const MatrixXd pred = m.predictions();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    REQUIRE(grvise_scores(m, x.row(i), space) == s.row(i));
    const RowVectorXd pc = pred.row(m.graph.index("c"));
    REQUIRE(std::abs(s(i, 0) - (pc.head(4).dot(x.row(i)) + pc(4))) <= 1e-12);
  }
  const std::vector<std::string> outside{"q"};
  CHECK_THROWS_AS(grvise_scores(m, x, outside), LookupError);
}

TEST_CASE("grvise: converged regression reproduces the probe's seen top-1") {
  const World& w = world();
  const ModelTables tables = world_tables();
  TrainConfig c = small_config(400);
  c.lr = 1e-2;
  const TrainResult r = train_paradigm(Paradigm::Grvise, w.synth.features, tables, c);
  REQUIRE(r.loss_curve.back() <= 1e-3);
  ProbeConfig pc = c.probe;
  pc.seed = c.seed;
  const LinearProbe probe = linear_probe_train(w.synth.features, r.model.seen_classes, pc);
  const FeatureSet val = w.synth.features.select(Partition::ValSeen);
  const MatrixXd s = model_scores(r.model, val.rows, r.model.seen_classes, tables);
  const auto expect = probe.predict(val.rows);
  std::size_t agree = 0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    Eigen::Index best = 0;
    s.row(i).maxCoeff(&best);
    agree += static_cast<std::size_t>(best) == expect[static_cast<std::size_t>(i)];
  }
  CHECK(agree == static_cast<std::size_t>(s.rows()));
}

TEST_CASE("hyvise_loss: hand example, satisfied hinge, brute-force agreement") {
  ad::Tape tape;
  MatrixXd d(1, 2);
  d << 0.5, 0.4;
  const std::vector<Eigen::Index> truth{0};
  CHECK(hinge_rank_loss(tape.constant(-d), truth, 0.1).scalar() == doctest::Approx(0.2).epsilon(1e-12));

  Rng rng(13);
  const HyviseModel m = make_hyvise(4, 6, 3, 0.2, 0.1, rng);
  const VectorXd f = rng.normal_matrix(4, 1).col(0) * 0.5;
  const VectorXd e = hyvise_embed(m, f.transpose()).row(0).transpose();
  poincare::PoincareTable pts;
  pts.points.dim = 3;
  pts.points.insert("y", e);
  pts.points.insert("far", poincare::project_to_ball(VectorXd(-e.normalized() * 0.99)));
  const std::vector<std::string> cands{"y", "far"};
  CHECK(hyvise_loss(m, f, "y", pts, cands) == 0.0);

  const MatrixXd others = random_ball_rows(rng, 4, 3, 0.9);
  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < 4; ++i) {
    names.push_back("p" + std::to_string(i));
    pts.points.insert(names.back(), others.row(i).transpose());
  }
  double brute = 0.0;
  for (Eigen::Index j = 1; j < 4; ++j) {
    brute += std::max(0.0, 0.1 + poincare::distance(e, VectorXd(others.row(0).transpose())) -
                               poincare::distance(e, VectorXd(others.row(j).transpose())));
  }
  CHECK(hyvise_loss(m, f, "p0", pts, names) == doctest::Approx(brute).epsilon(1e-10));
  CHECK(hyvise_loss(m, f, "p0", pts, names) >= 0.0);
  const std::vector<std::string> missing{"p0", "nowhere"};
  CHECK_THROWS_AS(hyvise_loss(m, f, "p0", pts, missing), MissingEmbeddingError);
}

TEST_CASE("hyvise: embeddings stay in the ball and the gradient matches finite differences") {
  Rng rng(14);
  HyviseModel m = make_hyvise(5, 7, 3, 0.2, 0.1, rng);
  const MatrixXd big = rng.normal_matrix(20, 5) * 10.0;
  const MatrixXd e = hyvise_embed(m, big);
  CHECK(e.rowwise().norm().maxCoeff() <= 1 - poincare::kBoundaryEps + 1e-15);

  const MatrixXd x = rng.normal_matrix(4, 5) * 0.3;
  const MatrixXd points = random_ball_rows(rng, 3, 3, 0.9);
  const std::vector<Eigen::Index> truth{0, 2, 1, 2};
  ParamList params;
  append_params(m, params);
  const double err = testing::loss_grad_error(params, [&](ad::Tape& t, std::span<const ad::Var> v) {
    return hyvise_loss(m, v, t.constant(x), points, truth);
  });
  CHECK(err <= 1e-4);

  ad::Tape t;
  ParamList ps;
  append_params(m, ps);
  const auto vars = bind_params(t, ps);
  CHECK((hyvise_embed(m, vars, t.constant(x)).value() - hyvise_embed(m, x)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("hyvise_scores: non-positive, zero at the embedded point, brute-force distances") {
  Rng rng(15);
  const HyviseModel m = make_hyvise(4, 6, 3, 0.2, 0.1, rng);
  const MatrixXd x = rng.normal_matrix(5, 4) * 0.5;
  MatrixXd points = random_ball_rows(rng, 4, 3, 0.9);
  const MatrixXd e = hyvise_embed(m, x);
  points.row(2) = e.row(0);
  const MatrixXd s = hyvise_scores(m, x, points);
  CHECK(s.maxCoeff() <= 0.0);
  Eigen::Index best = 0;
  s.row(0).maxCoeff(&best);
  CHECK(best == 2);
  CHECK(s(0, 2) == 0.0);
  for (Eigen::Index i = 0; i < 5; ++i) {
    REQUIRE(hyvise_scores(m, x.row(i), points) == s.row(i));
    for (Eigen::Index j = 0; j < 4; ++j) {
      REQUIRE(std::abs(s(i, j) + poincare::distance(VectorXd(e.row(i).transpose()),
                                                    VectorXd(points.row(j).transpose()))) <= 1e-9);
    }
  }
}

TEST_CASE("mlp predictor: gradient check") {
  Rng rng(16);
  MlpPredictorModel m = make_mlp_predictor(4, 6, 3, 0.2, rng);
  const MatrixXd inputs = rng.normal_matrix(5, 4);
  const MatrixXd targets = rng.normal_matrix(5, 4);
  ParamList params;
  append_params(m.net, "predictor", params);
  const double err = testing::loss_grad_error(params, [&](ad::Tape&, std::span<const ad::Var> v) {
    return mlp_predictor_loss(m, v, inputs, targets);
  });
  CHECK(err <= 1e-4);
}

TEST_CASE("train_paradigm: loss curves fall over the first 10 epochs on aligned data") {
  const World& w = world();
  const ModelTables tables = world_tables();
  for (Paradigm p : {Paradigm::Devise, Paradigm::Prvise, Paradigm::Grvise, Paradigm::Hyvise}) {
    CAPTURE(to_string(p));
    const TrainResult r = train_paradigm(p, w.synth.features, tables, small_config(10));
    REQUIRE(r.loss_curve.size() == 10);
    for (std::size_t e = 1; e < r.loss_curve.size(); ++e) {
      CAPTURE(e);
      CHECK(r.loss_curve[e] <= r.loss_curve[e - 1]);
    }
    for (double l : r.loss_curve) CHECK(l >= 0.0);
  }
}

TEST_CASE("train_paradigm: zero epochs returns the initial model, seeds determine the result") {
  const World& w = world();
  const ModelTables tables = world_tables();
  const FeatureSet& feats = w.synth.features;
  const FeatureSet val = feats.select(Partition::ValSeen);
  const MatrixXd before = feats.rows;
  for (Paradigm p : kAllParadigms) {
    CAPTURE(to_string(p));
    const TrainResult zero = train_paradigm(p, feats, tables, small_config(0));
    CHECK(zero.loss_curve.empty());
    const TrainResult a = train_paradigm(p, feats, tables, small_config(3));
    const TrainResult b = train_paradigm(p, feats, tables, small_config(3));
    CHECK(a.loss_curve == b.loss_curve);
    const auto space = scoring_space(a.model);
    CHECK(model_scores(a.model, val.rows, space, tables) == model_scores(b.model, val.rows, space, tables));
    if (p != Paradigm::LinearProbe) {
      // The untrained model is the initialisation the trained one started from.
      TrainConfig other = small_config(0);
      CHECK(model_scores(zero.model, val.rows, space, tables) ==
            model_scores(train_paradigm(p, feats, tables, other).model, val.rows, space, tables));
      CHECK(model_scores(zero.model, val.rows, space, tables) != model_scores(a.model, val.rows, space, tables));
    }
    TrainConfig reseeded = small_config(3);
    reseeded.seed = 99;
    CHECK(train_paradigm(p, feats, tables, reseeded).loss_curve != a.loss_curve);
  }
  CHECK(feats.rows == before);
}

TEST_CASE("train_paradigm: error cases") {
  const World& w = world();
  const FeatureSet val_only = w.synth.features.select(Partition::ValSeen);
  FeatureSet relabeled = val_only;
  relabeled.partitions.assign(relabeled.size(), Partition::ValSeen);
  CHECK_THROWS_AS(train_paradigm(Paradigm::Devise, relabeled, world_tables(), small_config(1)), DataError);
  CHECK_THROWS_AS(train_paradigm(Paradigm::Devise, w.synth.features, ModelTables{}, small_config(1)), ContractError);
  CHECK_THROWS_AS(train_paradigm(Paradigm::Hyvise, w.synth.features, ModelTables{}, small_config(1)), ContractError);
  ModelTables no_tax = world_tables();
  no_tax.taxonomy = nullptr;
  CHECK_THROWS_AS(train_paradigm(Paradigm::Grvise, w.synth.features, no_tax, small_config(1)), ContractError);
}

TEST_CASE("linear probe paradigm scores -inf outside its classes") {
  const World& w = world();
  const ModelTables tables = world_tables();
  const TrainResult r = train_paradigm(Paradigm::LinearProbe, w.synth.features, tables, small_config(2));
  CHECK_FALSE(scores_unseen(r.model));
  const FeatureSet val = w.synth.features.select(Partition::ValUnseen);
  const MatrixXd s = model_scores(r.model, val.rows, w.all_classes, tables);
  const Eigen::Index first_unseen = static_cast<Eigen::Index>(w.split.seen.size());
  CHECK(s.col(first_unseen).maxCoeff() == -std::numeric_limits<double>::infinity());
  CHECK(std::isfinite(s.col(0).maxCoeff()));
  CHECK(can_score(r.model, *w.split.seen.begin(), tables));
  CHECK_FALSE(can_score(r.model, *w.split.unseen.begin(), tables));
}

TEST_CASE("checkpoint: every paradigm round trips through the tensor container") {
  const World& w = world();
  const ModelTables tables = world_tables();
  const FeatureSet val = w.synth.features.select(Partition::ValSeen);
  for (Paradigm p : kAllParadigms) {
    CAPTURE(to_string(p));
    const TrainResult r = train_paradigm(p, w.synth.features, tables, small_config(2));
    std::stringstream buf;
    write_tensors(buf, model_tensors(r.model));
    const auto tensors = read_tensors(buf);
    const nlohmann::json manifest = nlohmann::json::parse(model_manifest(r.model).dump());
    const TrainedModel back = model_from_checkpoint(manifest, tensors);
    CHECK(back.paradigm == p);
    CHECK(back.seen_classes == r.model.seen_classes);
    CHECK(to_json(back.config) == to_json(r.model.config));
    const auto space = scoring_space(r.model);
    CHECK(model_scores(back, val.rows, space, tables) == model_scores(r.model, val.rows, space, tables));

    auto missing = tensors;
    missing.pop_back();
    CHECK_THROWS_AS(model_from_checkpoint(manifest, missing), FormatError);
    auto reshaped = tensors;
    reshaped.front().value.conservativeResize(reshaped.front().value.rows() + 1, Eigen::NoChange);
    CHECK_THROWS_AS(model_from_checkpoint(manifest, reshaped), FormatError);
  }
}

TEST_CASE("checkpoint container: byte layout and fail-closed reads") {
  MatrixXd m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const std::vector<NamedTensor> t{{"w", m}, {"b", MatrixXd::Constant(1, 1, -0.5)}};
  std::ostringstream out;
  write_tensors(out, t);
  const std::string bytes = out.str();
  CHECK(bytes.substr(0, 4) == "ZSLT");
  // Header 12, per tensor 4 + name + 4 + 16 + 8 * size.
  CHECK(bytes.size() == 12 + (4 + 1 + 4 + 16 + 48) + (4 + 1 + 4 + 16 + 8));
  std::istringstream in(bytes);
  const auto back = read_tensors(in);
  REQUIRE(back.size() == 2);
  CHECK(back[0].name == "w");
  CHECK(back[0].value == m);
  CHECK(back[1].value(0, 0) == -0.5);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::istringstream a(bad_magic);
  CHECK_THROWS_AS(read_tensors(a), FormatError);
  std::istringstream b(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_tensors(b), FormatError);
  std::istringstream c(bytes + "x");
  CHECK_THROWS_AS(read_tensors(c), FormatError);
  std::string bad_version = bytes;
  bad_version[4] = 9;
  std::istringstream d(bad_version);
  CHECK_THROWS_AS(read_tensors(d), FormatError);
}
