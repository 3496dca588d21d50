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

#include "zsl/models/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>

#include "zsl/errors.hpp"

namespace zsl {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'Z', 'S', 'L', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError(std::string("checkpoint truncated in ") + what);
  return v;
}

using TensorMap = std::map<std::string, const Eigen::MatrixXd*>;

const Eigen::MatrixXd& need(const TensorMap& m, const std::string& name) {
  auto it = m.find(name);
  if (it == m.end()) throw FormatError("checkpoint is missing tensor '" + name + "'");
  return *it->second;
}

void add_mlp(std::vector<NamedTensor>& out, const MlpParams& p, const std::string& prefix) {
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const std::string base = prefix + "." + std::to_string(i);
    out.push_back({base + ".weight", p.layers[i].weight});
    out.push_back({base + ".bias", p.layers[i].bias.transpose()});
  }
}

MlpParams load_mlp(const TensorMap& m, const std::string& prefix, std::size_t layers, double slope) {
  MlpParams p;
  for (std::size_t i = 0; i < layers; ++i) {
    const std::string base = prefix + "." + std::to_string(i);
    const Eigen::MatrixXd& w = need(m, base + ".weight");
    const Eigen::MatrixXd& b = need(m, base + ".bias");
    if (b.rows() != 1 || b.cols() != w.rows()) throw FormatError("tensor '" + base + ".bias' has the wrong shape");
    const Activation act = i + 1 == layers ? Activation::identity() : Activation::leaky_relu(slope);
    p.layers.push_back({w, b.row(0).transpose(), act});
  }
  try {
    p.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("checkpoint network '") + prefix + "' is inconsistent: " + e.what());
  }
  return p;
}

}  // namespace

void write_tensors(std::ostream& out, std::span<const NamedTensor> tensors) {
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const NamedTensor& t : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put<std::uint32_t>(out, 2);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.value.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.value.cols()));
    for (Eigen::Index r = 0; r < t.value.rows(); ++r)
      for (Eigen::Index c = 0; c < t.value.cols(); ++c) put<double>(out, t.value(r, c));
  }
  if (!out) throw FormatError("failed to write checkpoint");
}

std::vector<NamedTensor> read_tensors(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a checkpoint (bad magic)");
  if (get<std::uint32_t>(in, "header") != kVersion) throw FormatError("unsupported checkpoint version");
  const auto count = get<std::uint32_t>(in, "header");
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(in, "tensor name");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw FormatError("checkpoint truncated in tensor name");
    if (get<std::uint32_t>(in, "tensor rank") != 2) throw FormatError("tensor '" + name + "' is not rank 2");
    const auto rows = get<std::uint64_t>(in, "tensor shape");
    const auto cols = get<std::uint64_t>(in, "tensor shape");
    if (rows > (1ULL << 31) || cols > (1ULL << 31)) throw FormatError("tensor '" + name + "' is implausibly large");
    Eigen::MatrixXd v(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < v.rows(); ++r)
      for (Eigen::Index c = 0; c < v.cols(); ++c) v(r, c) = get<double>(in, "tensor values");
    out.push_back({std::move(name), std::move(v)});
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after checkpoint");
  return out;
}

std::vector<NamedTensor> model_tensors(const TrainedModel& model) {
  std::vector<NamedTensor> out;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DeviseModel>) {
          add_mlp(out, m.transform, "transform");
        } else if constexpr (std::is_same_v<T, PrviseModel>) {
          add_mlp(out, m.image_encoder, "image_encoder");
          add_mlp(out, m.word_encoder, "word_encoder");
          add_mlp(out, m.image_decoder, "image_decoder");
          add_mlp(out, m.word_decoder, "word_decoder");
        } else if constexpr (std::is_same_v<T, GrviseModel>) {
          out.push_back({"graph.adjacency", m.graph.adjacency});
          out.push_back({"graph.inputs", m.inputs});
          for (std::size_t i = 0; i < m.layers.size(); ++i) out.push_back({"gcn." + std::to_string(i) + ".theta", m.layers[i].theta});
        } else if constexpr (std::is_same_v<T, HyviseModel>) {
          out.push_back({"hyp.0.weight", m.layer1});
          out.push_back({"hyp.1.weight", m.layer2});
        } else if constexpr (std::is_same_v<T, LinearProbe>) {
          out.push_back({"probe.weight", m.weight});
          out.push_back({"probe.bias", m.bias.transpose()});
        } else {
          add_mlp(out, m.net, "predictor");
        }
      },
      model.model);
  return out;
}

nlohmann::json model_manifest(const TrainedModel& model) {
  nlohmann::json j{{"paradigm", to_string(model.paradigm)},
                   {"config", to_json(model.config)},
                   {"seed", model.config.seed},
                   {"seen_classes", model.seen_classes}};
  if (const auto* g = std::get_if<GrviseModel>(&model.model)) {
    j["graph_nodes"] = g->graph.nodes;
    j["graph_dropped"] = g->graph.dropped;
  }
  if (const auto* p = std::get_if<PrviseModel>(&model.model)) j["latent_dim"] = p->latent_dim;
  return j;
}

TrainedModel model_from_checkpoint(const nlohmann::json& manifest, std::span<const NamedTensor> tensors) {
  TrainedModel out;
  try {
    out.paradigm = paradigm_from_string(manifest.at("paradigm").get<std::string>());
    out.config = train_config_from_json(manifest.at("config"));
    out.seen_classes = manifest.at("seen_classes").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint manifest: ") + e.what());
  }
  TensorMap m;
  for (const NamedTensor& t : tensors) m[t.name] = &t.value;
  const double slope = out.config.leaky_slope;
  switch (out.paradigm) {
    case Paradigm::Devise:
      out.model = DeviseModel{load_mlp(m, "transform", 2, slope), out.config.margin};
      break;
    case Paradigm::Prvise: {
      PrviseModel p;
      p.image_encoder = load_mlp(m, "image_encoder", 2, slope);
      p.word_encoder = load_mlp(m, "word_encoder", 2, slope);
      p.image_decoder = load_mlp(m, "image_decoder", 2, slope);
      p.word_decoder = load_mlp(m, "word_decoder", 2, slope);
      p.latent_dim = p.image_decoder.input_dim();
      if (p.word_decoder.input_dim() != p.latent_dim || p.image_encoder.output_dim() != 2 * p.latent_dim ||
          p.word_encoder.output_dim() != 2 * p.latent_dim) {
        throw FormatError("prvise encoder and decoder latent sizes disagree");
      }
      out.model = std::move(p);
      break;
    }
    case Paradigm::Grvise: {
      GrviseModel g;
      try {
        g.graph.nodes = manifest.at("graph_nodes").get<std::vector<std::string>>();
        g.graph.dropped = manifest.value("graph_dropped", std::vector<std::string>{});
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed checkpoint manifest: ") + e.what());
      }
      g.graph.adjacency = need(m, "graph.adjacency");
      g.inputs = need(m, "graph.inputs");
      const auto n = static_cast<Eigen::Index>(g.graph.nodes.size());
      if (g.graph.adjacency.rows() != n || g.graph.adjacency.cols() != n || g.inputs.rows() != n) {
        throw FormatError("graph tensors do not match the node list");
      }
      g.layers.push_back({need(m, "gcn.0.theta"), Activation::leaky_relu(slope)});
      g.layers.push_back({need(m, "gcn.1.theta"), Activation::identity()});
      if (g.layers[0].theta.rows() != g.inputs.cols() || g.layers[1].theta.rows() != g.layers[0].theta.cols()) {
        throw FormatError("gcn weights do not chain");
      }
      out.model = std::move(g);
      break;
    }
    case Paradigm::Hyvise: {
      HyviseModel h{need(m, "hyp.0.weight"), need(m, "hyp.1.weight"), out.config.margin, slope};
      if (h.layer2.cols() != h.layer1.rows()) throw FormatError("hyvise layers do not chain");
      out.model = std::move(h);
      break;
    }
    case Paradigm::LinearProbe: {
      LinearProbe p;
      p.classes = out.seen_classes;
      p.weight = need(m, "probe.weight");
      const Eigen::MatrixXd& b = need(m, "probe.bias");
      if (b.rows() != 1 || b.cols() != p.weight.rows() || p.weight.rows() != static_cast<Eigen::Index>(p.classes.size())) {
        throw FormatError("probe tensors do not match the class list");
      }
      p.bias = b.row(0).transpose();
      out.model = std::move(p);
      break;
    }
    case Paradigm::MlpPredictor:
      out.model = MlpPredictorModel{load_mlp(m, "predictor", 2, slope)};
      break;
  }
  return out;
}

}  // namespace zsl
