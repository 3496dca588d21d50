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

#include "zsl/models/common.hpp"

#include <map>

#include "zsl/errors.hpp"

namespace zsl {

std::string to_string(Paradigm p) {
  switch (p) {
    case Paradigm::Devise:
      return "devise";
    case Paradigm::Prvise:
      return "prvise";
    case Paradigm::Grvise:
      return "grvise";
    case Paradigm::Hyvise:
      return "hyvise";
    case Paradigm::LinearProbe:
      return "lp";
    case Paradigm::MlpPredictor:
      return "mlp";
  }
  return "devise";
}

Paradigm paradigm_from_string(const std::string& s) {
  if (s == "devise") return Paradigm::Devise;
  if (s == "prvise") return Paradigm::Prvise;
  if (s == "grvise") return Paradigm::Grvise;
  if (s == "hyvise") return Paradigm::Hyvise;
  if (s == "lp") return Paradigm::LinearProbe;
  if (s == "mlp") return Paradigm::MlpPredictor;
  throw ContractError("unknown paradigm '" + s + "' (expected devise, prvise, grvise, hyvise, lp or mlp)");
}

nlohmann::json to_json(const TrainConfig& c) {
  return nlohmann::json{{"epochs", c.epochs},
                        {"batch", c.batch},
                        {"lr", c.lr},
                        {"margin", c.margin},
                        {"seed", c.seed},
                        {"hidden", c.hidden},
                        {"latent_dim", c.latent_dim},
                        {"leaky_slope", c.leaky_slope},
                        {"probe",
                         {{"epochs", c.probe.epochs},
                          {"lr", c.probe.lr},
                          {"batch", c.probe.batch},
                          {"seed", c.probe.seed}}}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  c.epochs = j.value("epochs", c.epochs);
  c.batch = j.value("batch", c.batch);
  c.lr = j.value("lr", c.lr);
  c.margin = j.value("margin", c.margin);
  c.seed = j.value("seed", c.seed);
  c.hidden = j.value("hidden", c.hidden);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
  if (j.contains("probe")) {
    const auto& p = j.at("probe");
    c.probe.epochs = p.value("epochs", c.probe.epochs);
    c.probe.lr = p.value("lr", c.probe.lr);
    c.probe.batch = p.value("batch", c.probe.batch);
    c.probe.seed = p.value("seed", c.probe.seed);
  }
  if (c.epochs < 0 || c.batch == 0 || !(c.lr > 0) || !(c.margin > 0) || c.hidden < 1 || c.latent_dim < 1) {
    throw ContractError("training configuration values must be positive");
  }
  return c;
}

ad::Var hinge_rank_loss(ad::Var scores, std::span<const Eigen::Index> truth, double margin) {
  const Eigen::Index b = scores.rows();
  const Eigen::Index c = scores.cols();
  Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(b, c);
  for (Eigen::Index i = 0; i < b; ++i) mask(i, truth[static_cast<std::size_t>(i)]) = 0.0;
  ad::Tape& tape = *scores.tape();
  const ad::Var true_scores = ad::pick(scores, truth);
  const ad::Var terms = ad::relu((scores - true_scores) + margin) * tape.constant(std::move(mask));
  return ad::sum(terms) / static_cast<double>(b);
}

std::vector<Eigen::Index> label_indices(std::span<const std::string> labels, std::span<const std::string> classes) {
  std::map<std::string, Eigen::Index> index;
  for (std::size_t i = 0; i < classes.size(); ++i) index[classes[i]] = static_cast<Eigen::Index>(i);
  std::vector<Eigen::Index> out;
  out.reserve(labels.size());
  for (const std::string& l : labels) {
    auto it = index.find(l);
    if (it == index.end()) throw LookupError("label '" + l + "' is not among the candidate classes");
    out.push_back(it->second);
  }
  return out;
}

}  // namespace zsl
