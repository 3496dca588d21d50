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

#include "zsl/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>

#include "zsl/errors.hpp"
#include "zsl/numerics/adam.hpp"

namespace zsl {

namespace {

constexpr char kMagic[4] = {'V', 'S', 'E', 'F'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

bool get_u32(std::istream& in, std::uint32_t& v) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
  v = std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
  return true;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

Eigen::VectorXd random_unit(Eigen::Index dim, Rng& rng) {
  Eigen::VectorXd v = rng.normal_matrix(dim, 1);
  return v / v.norm();
}

}  // namespace

std::string to_string(Partition p) {
  switch (p) {
    case Partition::TrainSeen:
      return "train-seen";
    case Partition::ValSeen:
      return "val-seen";
    case Partition::ValUnseen:
      return "val-unseen";
  }
  return "train-seen";
}

Partition partition_from_string(const std::string& s) {
  if (s == "train-seen") return Partition::TrainSeen;
  if (s == "val-seen") return Partition::ValSeen;
  if (s == "val-unseen") return Partition::ValUnseen;
  throw FormatError("unknown partition tag '" + s + "'");
}

std::vector<Eigen::Index> FeatureSet::indices(Partition p) const {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < partitions.size(); ++i) {
    if (partitions[i] == p) out.push_back(static_cast<Eigen::Index>(i));
  }
  return out;
}

FeatureSet FeatureSet::select(Partition p) const {
  const auto idx = indices(p);
  FeatureSet out;
  out.rows.resize(static_cast<Eigen::Index>(idx.size()), dim());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.rows.row(static_cast<Eigen::Index>(i)) = rows.row(idx[i]);
    out.labels.push_back(labels[static_cast<std::size_t>(idx[i])]);
    out.partitions.push_back(p);
  }
  return out;
}

void FeatureSet::validate() const {
  if (static_cast<std::size_t>(rows.rows()) != labels.size() || labels.size() != partitions.size()) {
    throw ConsistencyError("feature rows, labels and partitions differ in length (" + std::to_string(rows.rows()) +
                           ", " + std::to_string(labels.size()) + ", " + std::to_string(partitions.size()) + ")");
  }
}

void FeatureSet::check_against(const Split& split) const {
  validate();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool seen = split.seen.count(labels[i]) != 0;
    const bool unseen = split.unseen.count(labels[i]) != 0;
    if (!seen && !unseen) throw ConsistencyError("row " + std::to_string(i) + " label '" + labels[i] + "' is not in the split");
    if (unseen != (partitions[i] == Partition::ValUnseen)) {
      throw ConsistencyError("row " + std::to_string(i) + " label '" + labels[i] + "' has partition " +
                             to_string(partitions[i]) + " inconsistent with the split");
    }
  }
}

void write_feature_matrix(std::ostream& out, const Eigen::MatrixXd& rows) {
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(rows.rows()));
  put_u32(out, static_cast<std::uint32_t>(rows.cols()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(rows(i, j))));
  }
}

Eigen::MatrixXd read_feature_matrix(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("feature file: bad magic");
  std::uint32_t version = 0, n = 0, d = 0;
  if (!get_u32(in, version) || !get_u32(in, n) || !get_u32(in, d)) throw FormatError("feature file: truncated header");
  if (version != kVersion) throw FormatError("feature file: unsupported version " + std::to_string(version));
  Eigen::MatrixXd rows(n, d);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < d; ++j) {
      std::uint32_t bits = 0;
      if (!get_u32(in, bits)) throw FormatError("feature file: truncated payload");
      rows(i, j) = static_cast<double>(std::bit_cast<float>(bits));
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("feature file: trailing bytes after payload");
  return rows;
}

FeatureSet load_features(const std::filesystem::path& binary, const std::filesystem::path& labels,
                         const std::filesystem::path& partitions) {
  std::ifstream in(binary, std::ios::binary);
  if (!in) throw FormatError("cannot open feature file " + binary.string());
  FeatureSet fs;
  fs.rows = read_feature_matrix(in);
  fs.labels = read_lines(labels);
  if (fs.labels.size() != static_cast<std::size_t>(fs.rows.rows())) {
    throw ConsistencyError("feature file has " + std::to_string(fs.rows.rows()) + " rows but label file has " +
                           std::to_string(fs.labels.size()) + " lines");
  }
  if (partitions.empty()) {
    fs.partitions.assign(fs.labels.size(), Partition::TrainSeen);
  } else {
    for (const std::string& tag : read_lines(partitions)) fs.partitions.push_back(partition_from_string(tag));
    if (fs.partitions.size() != fs.labels.size()) {
      throw ConsistencyError("partition file has " + std::to_string(fs.partitions.size()) + " lines, expected " +
                             std::to_string(fs.labels.size()));
    }
  }
  return fs;
}

void SynthSpec::validate() const {
  if (!(alignment >= 0.0 && alignment <= 1.0)) throw ContractError("alignment must lie in [0, 1]");
  if (!(noise >= 0.0)) throw ContractError("noise scale must be non-negative");
  if (feature_dim < 2) throw ContractError("feature_dim must be >= 2");
}

namespace {

// Orthonormal columns (rows when out < in) from the QR factor of a Gaussian
// matrix, so inner products survive the map when out >= in.
Eigen::MatrixXd random_isometry(Eigen::Index out, Eigen::Index in, Rng& rng) {
  const Eigen::Index tall = std::max(out, in);
  const Eigen::Index narrow = std::min(out, in);
  const Eigen::MatrixXd g = rng.normal_matrix(tall, narrow);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ() *
                            Eigen::MatrixXd::Identity(tall, narrow);
  return out >= in ? q : Eigen::MatrixXd(q.transpose());
}

}  // namespace

SynthResult synth_features(const SynthSpec& spec, const EmbeddingTable& class_vectors, const Split& split) {
  spec.validate();
  if (class_vectors.dim < 2) throw ContractError("word_dim must be >= 2");
  std::vector<std::string> classes(split.seen.begin(), split.seen.end());
  classes.insert(classes.end(), split.unseen.begin(), split.unseen.end());
  std::sort(classes.begin(), classes.end());
  if (spec.n_classes != 0 && spec.n_classes != classes.size()) {
    throw ContractError("spec asks for " + std::to_string(spec.n_classes) + " classes, split has " +
                        std::to_string(classes.size()));
  }
  for (const std::string& c : classes) class_vectors.at(c);

  Rng rng(spec.seed);
  const Eigen::MatrixXd projection = random_isometry(spec.feature_dim, class_vectors.dim, rng);

  SynthResult result;
  result.prototypes.dim = spec.feature_dim;
  for (const std::string& c : classes) {
    const Eigen::VectorXd random_part = random_unit(spec.feature_dim, rng);
    const Eigen::VectorXd aligned = projection * class_vectors.at(c);
    Eigen::VectorXd u = spec.alignment * aligned + (1.0 - spec.alignment) * random_part;
    const double un = u.norm();
    if (un > 0.0) u /= un;
    result.prototypes.insert(c, std::move(u));
  }

  const std::size_t per_seen = spec.samples_per_class + spec.eval_samples_per_class;
  const std::size_t total = split.seen.size() * per_seen + split.unseen.size() * spec.eval_samples_per_class;
  FeatureSet& fs = result.features;
  fs.rows.resize(static_cast<Eigen::Index>(total), spec.feature_dim);
  Eigen::Index row = 0;
  for (const std::string& c : classes) {
    const bool unseen = split.unseen.count(c) != 0;
    const Eigen::VectorXd& u = result.prototypes.at(c);
    auto emit = [&](Partition p) {
      fs.rows.row(row) = (u + rng.normal_matrix(spec.feature_dim, 1, spec.noise)).transpose();
      fs.labels.push_back(c);
      fs.partitions.push_back(p);
      ++row;
    };
    if (unseen) {
      for (std::size_t i = 0; i < spec.eval_samples_per_class; ++i) emit(Partition::ValUnseen);
    } else {
      for (std::size_t i = 0; i < spec.samples_per_class; ++i) emit(Partition::TrainSeen);
      for (std::size_t i = 0; i < spec.eval_samples_per_class; ++i) emit(Partition::ValSeen);
    }
  }
  return result;
}

ToyWorld make_toy_world(std::size_t categories, std::size_t leaves_per_category, Eigen::Index word_dim,
                        double category_weight, std::uint64_t seed) {
  if (categories == 0 || leaves_per_category == 0 || word_dim < 2) throw ContractError("toy world needs nonzero sizes");
  if (!(category_weight >= 0.0 && category_weight <= 1.0)) throw ContractError("category_weight must lie in [0, 1]");
  Rng rng(seed);
  ToyWorld w;
  w.words.dim = word_dim;
  std::vector<Taxonomy::Edge> edges;
  char buf[64];
  for (std::size_t c = 0; c < categories; ++c) {
    std::snprintf(buf, sizeof buf, "cat%03zu", c);
    const std::string cat = buf;
    w.categories.push_back(cat);
    edges.push_back({cat, "root"});
    const Eigen::VectorXd cv = random_unit(word_dim, rng);
    w.words.insert(cat, cv);
    for (std::size_t l = 0; l < leaves_per_category; ++l) {
      std::snprintf(buf, sizeof buf, "cat%03zu_leaf%03zu", c, l);
      const std::string leaf = buf;
      w.leaves.push_back(leaf);
      edges.push_back({leaf, cat});
      Eigen::VectorXd v = category_weight * cv + (1.0 - category_weight) * random_unit(word_dim, rng);
      w.words.insert(leaf, v / v.norm());
    }
  }
  w.words.insert("root", random_unit(word_dim, rng));
  w.taxonomy = Taxonomy::from_edges(edges);
  return w;
}

double infonce_from_scores(const Eigen::MatrixXd& scores) {
  if (scores.rows() != scores.cols()) throw DimensionError("infonce: score matrix must be square");
  if (scores.rows() < 2) throw ContractError("infonce needs at least 2 pairs (no negatives otherwise)");
  double total = 0.0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double m = scores.row(i).maxCoeff();
    const double lse = m + std::log((scores.row(i).array() - m).exp().sum());
    total += lse - scores(i, i);
  }
  return total / static_cast<double>(scores.rows());
}

double infonce_loss(const Eigen::MatrixXd& anchors, const Eigen::MatrixXd& candidates, double temperature) {
  if (anchors.rows() != candidates.rows() || anchors.cols() != candidates.cols()) {
    throw DimensionError("infonce: anchor and candidate batches differ in shape");
  }
  if (anchors.rows() < 2) throw ContractError("infonce needs at least 2 pairs (no negatives otherwise)");
  const Eigen::MatrixXd a = anchors.rowwise().normalized();
  const Eigen::MatrixXd c = candidates.rowwise().normalized();
  return infonce_from_scores(a * c.transpose() / temperature);
}

ad::Var infonce_loss(ad::Var anchors, ad::Var candidates, double temperature) {
  if (anchors.rows() != candidates.rows() || anchors.cols() != candidates.cols()) {
    throw DimensionError("infonce: anchor and candidate batches differ in shape");
  }
  if (anchors.rows() < 2) throw ContractError("infonce needs at least 2 pairs (no negatives otherwise)");
  const ad::Var a = anchors / ad::row_norm(anchors);
  const ad::Var c = candidates / ad::row_norm(candidates);
  const ad::Var scores = ad::matmul_nt(a, c) * (1.0 / temperature);
  std::vector<Eigen::Index> diag(static_cast<std::size_t>(anchors.rows()));
  std::iota(diag.begin(), diag.end(), 0);
  return ad::mean(ad::logsumexp_rows(scores) - ad::pick(scores, diag));
}

Eigen::MatrixXd ViewAugmenter::operator()(const Eigen::MatrixXd& batch, Rng& rng) const {
  Eigen::MatrixXd out = batch;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      out(i, j) += noise * rng.normal();
      if (rng.uniform() < mask_probability) out(i, j) = 0.0;
    }
  }
  return out;
}

PretrainResult train_toy_encoder(const Eigen::MatrixXd& raw, const ViewAugmenter& augmenter, MlpParams encoder,
                                 const PretrainConfig& config) {
  encoder.validate();
  if (raw.cols() != encoder.input_dim()) throw DimensionError("pretrain: data width does not match encoder input");
  if (raw.rows() < 2 || config.batch < 2) throw ContractError("pretrain needs batches of at least 2 rows");
  Rng rng(config.seed);
  ParamList params;
  append_params(encoder, "encoder", params);
  AdamState adam(AdamHyper{config.lr});
  std::vector<Eigen::Index> order(static_cast<std::size_t>(raw.rows()));
  std::iota(order.begin(), order.end(), 0);

  PretrainResult result;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start + 2 <= order.size(); start += config.batch) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      if (end - start < 2) break;
      Eigen::MatrixXd batch(static_cast<Eigen::Index>(end - start), raw.cols());
      for (std::size_t i = start; i < end; ++i) batch.row(static_cast<Eigen::Index>(i - start)) = raw.row(order[i]);
      const Eigen::MatrixXd view1 = augmenter(batch, rng);
      const Eigen::MatrixXd view2 = augmenter(batch, rng);

      ad::Tape tape;
      const auto vars = bind_params(tape, params);
      const ad::Var z1 = mlp_forward(encoder, vars, tape.constant(view1));
      const ad::Var z2 = mlp_forward(encoder, vars, tape.constant(view2));
      const ad::Var loss = infonce_loss(z1, z2, config.temperature);
      const auto grads = tape.gradient(loss, vars);
      adam_step(params, grads, adam);
      total += loss.scalar();
      ++batches;
    }
    result.loss_curve.push_back(batches > 0 ? total / batches : 0.0);
  }
  result.encoder = std::move(encoder);
  return result;
}

Eigen::MatrixXd LinearProbe::logits(const Eigen::MatrixXd& x) const {
  if (x.cols() != weight.cols()) throw DimensionError("probe: feature width does not match probe");
  Eigen::MatrixXd out = x * weight.transpose();
  out.rowwise() += bias.transpose();
  return out;
}

std::vector<std::size_t> LinearProbe::predict(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd l = logits(x);
  std::vector<std::size_t> out(static_cast<std::size_t>(l.rows()));
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < l.cols(); ++j) {
      if (l(i, j) > l(i, best)) best = j;
    }
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
  }
  return out;
}

LinearProbe linear_probe_train(const Eigen::MatrixXd& x, std::span<const std::string> labels,
                               std::span<const std::string> classes, const ProbeConfig& config,
                               std::vector<double>* loss_curve) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) throw ConsistencyError("probe: rows and labels differ");
  std::map<std::string, Eigen::Index> class_index;
  for (std::size_t c = 0; c < classes.size(); ++c) class_index[classes[c]] = static_cast<Eigen::Index>(c);
  std::vector<Eigen::Index> targets(labels.size());
  std::vector<int> counts(classes.size(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = class_index.find(labels[i]);
    if (it == class_index.end()) throw DataError("probe: row label '" + labels[i] + "' is not a probe class");
    targets[i] = it->second;
    ++counts[static_cast<std::size_t>(it->second)];
  }
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (counts[c] == 0) throw DataError("probe: class '" + classes[c] + "' has no training rows");
  }

  LinearProbe probe;
  probe.classes.assign(classes.begin(), classes.end());
  probe.weight = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(classes.size()), x.cols());
  probe.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(classes.size()));
  ParamList params{view("probe.weight", probe.weight), row_view("probe.bias", probe.bias)};
  AdamState adam(AdamHyper{config.lr});
  Rng rng(config.seed);
  std::vector<Eigen::Index> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      Eigen::MatrixXd xb(static_cast<Eigen::Index>(end - start), x.cols());
      std::vector<Eigen::Index> yb;
      for (std::size_t i = start; i < end; ++i) {
        xb.row(static_cast<Eigen::Index>(i - start)) = x.row(order[i]);
        yb.push_back(targets[static_cast<std::size_t>(order[i])]);
      }
      ad::Tape tape;
      const auto vars = bind_params(tape, params);
      const ad::Var logits = ad::matmul_nt(tape.constant(std::move(xb)), vars[0]) + vars[1];
      const ad::Var loss = ad::mean(ad::logsumexp_rows(logits) - ad::pick(logits, yb));
      epoch_loss += loss.scalar() * static_cast<double>(end - start);
      adam_step(params, tape.gradient(loss, vars), adam);
    }
    if (loss_curve) loss_curve->push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return probe;
}

LinearProbe linear_probe_train(const FeatureSet& features, std::span<const std::string> classes,
                               const ProbeConfig& config, std::vector<double>* loss_curve) {
  const FeatureSet train = features.select(Partition::TrainSeen);
  return linear_probe_train(train.rows, train.labels, classes, config, loss_curve);
}

double accuracy(const LinearProbe& probe, const Eigen::MatrixXd& x, std::span<const std::string> labels) {
  if (labels.empty()) throw ContractError("accuracy of an empty set");
  const auto pred = probe.predict(x);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += probe.classes[pred[i]] == labels[i];
  return 100.0 * static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace zsl
