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

#include "zsl/models/train.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>

#include "zsl/errors.hpp"
#include "zsl/numerics/adam.hpp"
#include "zsl/numerics/params.hpp"

namespace zsl {

namespace {

// Per-epoch mean of the batch losses, weighted by batch size.
template <typename BatchLoss>
std::vector<double> minibatch_adam(ParamList& params, const Eigen::MatrixXd& x, std::span<const Eigen::Index> truth,
                                   const TrainConfig& config, Rng& rng, BatchLoss&& batch_loss) {
  AdamState adam(AdamHyper{config.lr});
  std::vector<Eigen::Index> order(truth.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> curve;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      const std::vector<Eigen::Index> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
      Eigen::MatrixXd xb = x(rows, Eigen::all);
      std::vector<Eigen::Index> yb;
      yb.reserve(rows.size());
      for (Eigen::Index r : rows) yb.push_back(truth[static_cast<std::size_t>(r)]);
      ad::Tape tape;
      const auto vars = bind_params(tape, params);
      const ad::Var loss = batch_loss(vars, tape.constant(std::move(xb)), std::span<const Eigen::Index>(yb));
      if (!std::isfinite(loss.scalar())) throw TrainingError("training loss became non-finite");
      total += loss.scalar() * static_cast<double>(rows.size());
      adam_step(params, tape.gradient(loss, vars), adam);
    }
    curve.push_back(total / static_cast<double>(order.size()));
  }
  return curve;
}

template <typename FullLoss>
std::vector<double> fullbatch_adam(ParamList& params, const TrainConfig& config, FullLoss&& full_loss) {
  AdamState adam(AdamHyper{config.lr});
  std::vector<double> curve;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    ad::Tape tape;
    const auto vars = bind_params(tape, params);
    const ad::Var loss = full_loss(vars);
    if (!std::isfinite(loss.scalar())) throw TrainingError("training loss became non-finite");
    curve.push_back(loss.scalar());
    adam_step(params, tape.gradient(loss, vars), adam);
  }
  return curve;
}

const EmbeddingTable& need_words(const ModelTables& t) {
  if (!t.words) throw ContractError("this paradigm needs a word-vector table");
  return *t.words;
}

const poincare::PoincareTable& need_poincare(const ModelTables& t) {
  if (!t.poincare) throw ContractError("hyvise needs a Poincare table");
  return *t.poincare;
}

}  // namespace

std::vector<std::string> seen_classes_of(const FeatureSet& features) {
  std::set<std::string> s;
  for (Eigen::Index i : features.indices(Partition::TrainSeen)) s.insert(features.labels[static_cast<std::size_t>(i)]);
  return {s.begin(), s.end()};
}

Eigen::MatrixXd probe_targets(const LinearProbe& probe, std::span<const std::string> classes) {
  const Eigen::MatrixXd stacked = normalize_probe(probe.weight, probe.bias).stacked();
  const auto idx = label_indices(classes, probe.classes);
  return stacked(idx, Eigen::all);
}

TrainResult train_paradigm(Paradigm paradigm, const FeatureSet& features, const ModelTables& tables,
                           const TrainConfig& config) {
  features.validate();
  const FeatureSet train = features.select(Partition::TrainSeen);
  if (train.size() == 0) throw DataError("the train-seen partition is empty");

  TrainResult result;
  TrainedModel& out = result.model;
  out.paradigm = paradigm;
  out.config = config;
  out.seen_classes = seen_classes_of(features);
  const auto truth = label_indices(train.labels, out.seen_classes);

  Rng root(config.seed);
  Rng init = root.fork(0);
  Rng order = root.fork(1);
  Rng noise = root.fork(2);
  const Eigen::Index f = features.dim();

  switch (paradigm) {
    case Paradigm::Devise: {
      const EmbeddingTable& words = need_words(tables);
      const Eigen::MatrixXd cand = words.matrix(out.seen_classes);
      DeviseModel m = make_devise(f, words.dim, config.hidden, config.leaky_slope, config.margin, init);
      ParamList params;
      append_params(m.transform, "transform", params);
      result.loss_curve = minibatch_adam(params, train.rows, truth, config, order,
                                         [&](std::span<const ad::Var> vars, ad::Var xb, std::span<const Eigen::Index> yb) {
                                           return devise_loss(m, vars, xb, cand, yb);
                                         });
      out.model = std::move(m);
      break;
    }
    case Paradigm::Prvise: {
      const EmbeddingTable& words = need_words(tables);
      const Eigen::MatrixXd cand = words.matrix(out.seen_classes);
      PrviseModel m = make_prvise(f, words.dim, config.hidden, config.latent_dim, config.leaky_slope, init);
      ParamList params;
      append_params(m, params);
      result.loss_curve = minibatch_adam(params, train.rows, truth, config, order,
                                         [&](std::span<const ad::Var> vars, ad::Var xb, std::span<const Eigen::Index> yb) {
                                           const Eigen::MatrixXd wb = cand(std::vector<Eigen::Index>(yb.begin(), yb.end()), Eigen::all);
                                           const PrviseNoise eps = draw_prvise_noise(xb.rows(), m.latent_dim, noise);
                                           return prvise_loss(m, vars, xb, wb, eps);
                                         });
      out.model = std::move(m);
      break;
    }
    case Paradigm::Hyvise: {
      const poincare::PoincareTable& points = need_poincare(tables);
      const Eigen::MatrixXd cand = points.points.matrix(out.seen_classes);
      HyviseModel m = make_hyvise(f, config.hidden, points.dim(), config.leaky_slope, config.margin, init);
      ParamList params;
      append_params(m, params);
      result.loss_curve = minibatch_adam(params, train.rows, truth, config, order,
                                         [&](std::span<const ad::Var> vars, ad::Var xb, std::span<const Eigen::Index> yb) {
                                           return hyvise_loss(m, vars, xb, cand, yb);
                                         });
      out.model = std::move(m);
      break;
    }
    case Paradigm::LinearProbe: {
      ProbeConfig pc = config.probe;
      pc.seed = config.seed;
      out.model = linear_probe_train(train.rows, train.labels, out.seen_classes, pc, &result.loss_curve);
      break;
    }
    case Paradigm::Grvise: {
      const EmbeddingTable& words = need_words(tables);
      if (!tables.taxonomy) throw ContractError("grvise needs a taxonomy");
      ProbeConfig pc = config.probe;
      pc.seed = config.seed;
      const LinearProbe probe = linear_probe_train(train.rows, train.labels, out.seen_classes, pc);
      const Eigen::MatrixXd targets = probe_targets(probe, out.seen_classes);
      std::set<std::string> classes(out.seen_classes.begin(), out.seen_classes.end());
      classes.insert(tables.extra_classes.begin(), tables.extra_classes.end());
      const std::vector<std::string> all(classes.begin(), classes.end());
      GrviseModel m = make_grvise(build_label_graph(*tables.taxonomy, all, words), words, config.hidden, f,
                                  config.leaky_slope, init);
      ParamList params;
      append_params(m, params);
      result.loss_curve = fullbatch_adam(params, config, [&](std::span<const ad::Var> vars) {
        return grvise_loss(m, vars, out.seen_classes, targets);
      });
      out.model = std::move(m);
      break;
    }
    case Paradigm::MlpPredictor: {
      const EmbeddingTable& words = need_words(tables);
      ProbeConfig pc = config.probe;
      pc.seed = config.seed;
      const LinearProbe probe = linear_probe_train(train.rows, train.labels, out.seen_classes, pc);
      const Eigen::MatrixXd targets = probe_targets(probe, out.seen_classes);
      const Eigen::MatrixXd inputs = words.matrix(out.seen_classes);
      MlpPredictorModel m = make_mlp_predictor(words.dim, config.hidden, f, config.leaky_slope, init);
      ParamList params;
      append_params(m.net, "predictor", params);
      result.loss_curve = fullbatch_adam(params, config, [&](std::span<const ad::Var> vars) {
        return mlp_predictor_loss(m, vars, inputs, targets);
      });
      out.model = std::move(m);
      break;
    }
  }
  return result;
}

bool scores_unseen(const TrainedModel& model) { return model.paradigm != Paradigm::LinearProbe; }

bool can_score(const TrainedModel& model, const std::string& label, const ModelTables& tables) {
  switch (model.paradigm) {
    case Paradigm::Devise:
    case Paradigm::Prvise:
    case Paradigm::MlpPredictor:
      return tables.words && tables.words->contains(label);
    case Paradigm::Hyvise:
      return tables.poincare && tables.poincare->points.contains(label);
    case Paradigm::Grvise: {
      const auto& nodes = std::get<GrviseModel>(model.model).graph.nodes;
      return std::binary_search(nodes.begin(), nodes.end(), label);
    }
    case Paradigm::LinearProbe: {
      const auto& classes = std::get<LinearProbe>(model.model).classes;
      return std::find(classes.begin(), classes.end(), label) != classes.end();
    }
  }
  return false;
}

Eigen::MatrixXd model_scores(const TrainedModel& model, const Eigen::MatrixXd& features,
                             std::span<const std::string> label_space, const ModelTables& tables) {
  switch (model.paradigm) {
    case Paradigm::Devise:
      return devise_scores(std::get<DeviseModel>(model.model), features, label_space, need_words(tables));
    case Paradigm::Prvise:
      return prvise_scores(std::get<PrviseModel>(model.model), features, label_space, need_words(tables));
    case Paradigm::Hyvise:
      return hyvise_scores(std::get<HyviseModel>(model.model), features, label_space, need_poincare(tables));
    case Paradigm::Grvise:
      return grvise_scores(std::get<GrviseModel>(model.model), features, label_space);
    case Paradigm::MlpPredictor:
      return mlp_predictor_scores(std::get<MlpPredictorModel>(model.model), features, label_space,
                                  need_words(tables));
    case Paradigm::LinearProbe: {
      const LinearProbe& probe = std::get<LinearProbe>(model.model);
      const Eigen::MatrixXd logits = probe.logits(features);
      Eigen::MatrixXd out = Eigen::MatrixXd::Constant(features.rows(), static_cast<Eigen::Index>(label_space.size()),
                                                      -std::numeric_limits<double>::infinity());
      for (std::size_t j = 0; j < label_space.size(); ++j) {
        auto it = std::find(probe.classes.begin(), probe.classes.end(), label_space[j]);
        if (it != probe.classes.end()) out.col(static_cast<Eigen::Index>(j)) = logits.col(it - probe.classes.begin());
      }
      return out;
    }
  }
  throw ContractError("unknown paradigm");
}

}  // namespace zsl
