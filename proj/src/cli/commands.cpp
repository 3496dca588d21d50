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
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "zsl/cli.hpp"
#include "zsl/errors.hpp"
#include "zsl/eval.hpp"
#include "zsl/features.hpp"
#include "zsl/models/checkpoint.hpp"
#include "zsl/models/train.hpp"
#include "zsl/poincare.hpp"
#include "zsl/taxonomy.hpp"

namespace zsl::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> paradigm;
  std::optional<std::string> k;
  std::optional<std::string> out;
  bool normalize_probe = false;
};

// Staged outputs are held in memory and committed only after the command
// has computed everything, so a failure leaves no partial artifacts.
class Context {
 public:
  Context(std::string command, json config, fs::path base, std::ostream& log)
      : command_(std::move(command)), config_(std::move(config)), base_(std::move(base)), log_(log) {
    if (!config_.contains("out")) throw ContractError("no output directory (set \"out\" or --out)");
    out_ = resolve(config_.at("out").get<std::string>());
    seed_ = config_.value("seed", std::uint64_t{0});
  }

  const json& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  std::ostream& log() { return log_; }

  bool has(const std::string& key) const { return config_.contains(key) && !config_.at(key).is_null(); }

  json section(const std::string& key) const { return has(key) ? config_.at(key) : json::object(); }

  // Records the file digest in the manifest.
  fs::path input(const std::string& key) {
    if (!has(key)) throw ContractError("config is missing required input \"" + key + "\"");
    const fs::path p = resolve(config_.at(key).get<std::string>());
    if (!fs::exists(p)) throw FormatError("input \"" + key + "\" does not exist: " + p.string());
    inputs_[key] = {{"path", config_.at(key).get<std::string>()}, {"sha256", sha256_file(p)}};
    return p;
  }

  std::optional<fs::path> optional_input(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return input(key);
  }

  // Directory inputs are digested file by file (sorted names).
  fs::path input_dir(const std::string& key, std::initializer_list<const char*> files) {
    if (!has(key)) throw ContractError("config is missing required input \"" + key + "\"");
    const fs::path dir = resolve(config_.at(key).get<std::string>());
    json digests = json::object();
    for (const char* f : files) {
      if (!fs::exists(dir / f)) throw FormatError("input \"" + key + "\" lacks " + std::string(f));
      digests[f] = sha256_file(dir / f);
    }
    inputs_[key] = {{"path", config_.at(key).get<std::string>()}, {"sha256", digests}};
    return dir;
  }

  void emit(const std::string& name, std::string bytes) { outputs_[name] = std::move(bytes); }

  void commit() {
    fs::create_directories(out_);
    json digests = json::object();
    for (const auto& [name, bytes] : outputs_) {
      atomic_write(out_ / name, bytes);
      digests[name] = sha256_bytes(bytes);
    }
    const json manifest{{"command", command_}, {"seed", seed_},     {"config", config_},
                        {"inputs", inputs_},   {"outputs", digests}};
    atomic_write(out_ / "manifest.json", manifest.dump(2) + "\n");
  }

 private:
  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : base_ / path;
  }

  std::string command_;
  json config_;
  fs::path base_;
  fs::path out_;
  std::uint64_t seed_ = 0;
  std::ostream& log_;
  json inputs_ = json::object();
  std::map<std::string, std::string> outputs_;
};

std::vector<std::string> read_list(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    out.push_back(line);
  }
  return out;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

std::string loss_csv(const std::vector<double>& curve) {
  std::string out = "epoch,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < curve.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i + 1, curve[i]);
    out += buf;
  }
  return out;
}

std::string tensors_bytes(std::span<const NamedTensor> tensors) {
  std::ostringstream os(std::ios::binary);
  write_tensors(os, tensors);
  return os.str();
}

std::vector<NamedTensor> read_tensor_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_tensors(in);
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw FormatError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

std::string feature_bytes(const Eigen::MatrixXd& rows) {
  std::ostringstream os(std::ios::binary);
  write_feature_matrix(os, rows);
  return os.str();
}

void emit_features(Context& ctx, const FeatureSet& f) {
  ctx.emit("features.bin", feature_bytes(f.rows));
  ctx.emit("labels.txt", join_lines(f.labels));
  std::vector<std::string> tags;
  for (Partition p : f.partitions) tags.push_back(to_string(p));
  ctx.emit("partitions.txt", join_lines(tags));
}

FeatureSet load_feature_inputs(Context& ctx) {
  const fs::path bin = ctx.input("features");
  const fs::path labels = ctx.input("labels");
  const auto parts = ctx.optional_input("partitions");
  return load_features(bin, labels, parts.value_or(fs::path{}));
}

std::string vectors_text(const EmbeddingTable& t) {
  std::ostringstream os;
  write_vectors(os, t);
  return os.str();
}

// Class vectors: an exact token match wins, otherwise the synonym mean.
// Ids in `required` must resolve; ids in `optional` are kept when they do.
EmbeddingTable class_table(Context& ctx, const std::set<std::string>& required, const std::set<std::string>& optional) {
  const WordVectorLoad words = load_word_vectors_file(ctx.input("word_vectors"));
  SynonymMap synonyms;
  if (const auto p = ctx.optional_input("synonyms")) synonyms = load_synonyms_file(*p);
  EmbeddingTable out;
  out.dim = words.table.dim;
  auto resolve = [&](const std::string& id, bool must) {
    if (out.contains(id)) return;
    if (words.table.contains(id)) {
      out.insert(id, words.table.at(id));
      return;
    }
    auto it = synonyms.find(id);
    const std::vector<std::string> syns = it != synonyms.end() ? it->second : std::vector<std::string>{id};
    try {
      out.insert(id, class_vector(words.table, id, syns));
    } catch (const MissingEmbeddingError&) {
      if (must) throw;
    }
  };
  for (const auto& id : required) resolve(id, true);
  for (const auto& id : optional) resolve(id, false);
  return out;
}

std::vector<std::size_t> k_list(const Context& ctx) {
  std::vector<std::size_t> ks = ctx.config().value("k", std::vector<std::size_t>{1, 5});
  if (ks.empty()) throw ContractError("k list is empty");
  for (std::size_t k : ks) {
    if (k == 0) throw ContractError("k values must be >= 1");
  }
  return ks;
}

int cmd_split(Context& ctx) {
  const Taxonomy tax = load_taxonomy_file(ctx.input("taxonomy"));
  Split split;
  if (ctx.has("categories")) {
    const auto cats = read_list(ctx.input("categories"));
    const double fraction = ctx.config().value("unseen_fraction", 0.2);
    split = generate_tiered_split(tax, cats, fraction, ctx.seed());
    ctx.emit("split.json", to_json(split).dump(2) + "\n");
  } else {
    split = load_split_file(ctx.input("split"));
  }
  const SplitReport report = validate_split(tax, split);
  ctx.emit("split_report.json", to_json(report).dump(2) + "\n");
  ctx.commit();
  if (!report.valid) {
    for (const Violation& v : report.violations) {
      ctx.log() << "violation: unseen '" << v.unseen << "' is a " << to_string(v.relation) << " of seen '" << v.seen
                << "'\n";
    }
    return kExitFailure;
  }
  ctx.log() << "split valid: " << split.seen.size() << " seen, " << split.unseen.size() << " unseen\n";
  return kExitOk;
}

int cmd_toy_world(Context& ctx) {
  const json c = ctx.section("toy_world");
  const ToyWorld w = make_toy_world(c.value("categories", std::size_t{10}), c.value("leaves_per_category", std::size_t{5}),
                                    c.value("word_dim", Eigen::Index{32}), c.value("category_weight", 0.3), ctx.seed());
  std::string tax = "# child\tparent\n";
  for (const auto& [child, parent] : w.taxonomy.edges()) tax += child + "\t" + parent + "\n";
  ctx.emit("taxonomy.tsv", tax);
  ctx.emit("words.txt", vectors_text(w.words));
  ctx.emit("categories.txt", join_lines(w.categories));
  ctx.commit();
  return kExitOk;
}

int cmd_synth(Context& ctx) {
  const Split split = load_split_file(ctx.input("split"));
  std::set<std::string> classes(split.seen.begin(), split.seen.end());
  classes.insert(split.unseen.begin(), split.unseen.end());
  const EmbeddingTable table = class_table(ctx, classes, {});
  const json c = ctx.section("synth");
  SynthSpec spec;
  spec.samples_per_class = c.value("samples_per_class", spec.samples_per_class);
  spec.eval_samples_per_class = c.value("eval_samples_per_class", spec.eval_samples_per_class);
  spec.feature_dim = c.value("feature_dim", spec.feature_dim);
  spec.alignment = c.value("alignment", spec.alignment);
  spec.noise = c.value("noise", spec.noise);
  spec.seed = ctx.seed();
  const SynthResult r = synth_features(spec, table, split);
  emit_features(ctx, r.features);
  ctx.emit("prototypes.txt", vectors_text(r.prototypes));
  ctx.commit();
  return kExitOk;
}

int cmd_poincare(Context& ctx) {
  const Taxonomy tax = load_taxonomy_file(ctx.input("taxonomy"));
  const json c = ctx.section("poincare");
  poincare::TrainConfig cfg;
  cfg.dim = c.value("dim", cfg.dim);
  cfg.epochs = c.value("epochs", cfg.epochs);
  cfg.neg_samples = c.value("neg_samples", cfg.neg_samples);
  cfg.lr = c.value("lr", cfg.lr);
  cfg.burn_in_epochs = c.value("burn_in_epochs", cfg.burn_in_epochs);
  cfg.burn_in_lr_factor = c.value("burn_in_lr_factor", cfg.burn_in_lr_factor);
  const std::string pairs = c.value("pairs", std::string("edges"));
  if (pairs != "edges" && pairs != "closure") throw ContractError("poincare.pairs must be edges or closure");
  cfg.pairs = pairs == "closure" ? poincare::PositivePairs::Closure : poincare::PositivePairs::Edges;
  cfg.seed = ctx.seed();
  const poincare::PoincareTable table = poincare::train_poincare(tax, cfg);
  std::ostringstream os;
  poincare::write_table(os, table);
  ctx.emit("poincare.txt", os.str());
  ctx.commit();
  return kExitOk;
}

int cmd_pretrain(Context& ctx) {
  const FeatureSet raw = load_feature_inputs(ctx);
  const json c = ctx.section("pretrain");
  PretrainConfig cfg;
  cfg.epochs = c.value("epochs", cfg.epochs);
  cfg.batch = c.value("batch", cfg.batch);
  cfg.temperature = c.value("temperature", cfg.temperature);
  cfg.lr = c.value("lr", cfg.lr);
  cfg.seed = ctx.seed();
  ViewAugmenter aug;
  aug.noise = c.value("noise", aug.noise);
  aug.mask_probability = c.value("mask_probability", aug.mask_probability);
  const Eigen::Index hidden = c.value("hidden", Eigen::Index{128});
  const Eigen::Index out_dim = c.value("out_dim", raw.dim());
  Rng init(ctx.seed());
  const std::array<Eigen::Index, 3> dims{raw.dim(), hidden, out_dim};
  MlpParams encoder = make_mlp(dims, Activation::leaky_relu(0.2), Activation::identity(), init);
  const PretrainResult r = train_toy_encoder(raw.rows, aug, std::move(encoder), cfg);

  FeatureSet encoded = raw;
  encoded.rows = mlp_apply(r.encoder, raw.rows);
  TrainedModel holder;  // reuse the tensor layout of an MLP predictor
  holder.model = MlpPredictorModel{r.encoder};
  std::vector<NamedTensor> tensors;
  for (NamedTensor& t : model_tensors(holder)) {
    t.name.replace(0, std::string("predictor").size(), "encoder");
    tensors.push_back(std::move(t));
  }
  ctx.emit("encoder.bin", tensors_bytes(tensors));
  ctx.emit("loss_curve.csv", loss_csv(r.loss_curve));
  emit_features(ctx, encoded);
  ctx.commit();
  return kExitOk;
}

int cmd_probe(Context& ctx, bool normalize) {
  const FeatureSet features = load_feature_inputs(ctx);
  const std::vector<std::string> classes = seen_classes_of(features);
  if (classes.empty()) throw DataError("no train-seen rows to fit a probe on");
  const json c = ctx.section("probe");
  ProbeConfig cfg;
  cfg.epochs = c.value("epochs", cfg.epochs);
  cfg.lr = c.value("lr", cfg.lr);
  cfg.batch = c.value("batch", cfg.batch);
  cfg.seed = ctx.seed();
  std::vector<double> curve;
  LinearProbe probe = linear_probe_train(features, classes, cfg, &curve);

  json info{{"classes", classes}, {"normalized", normalize}};
  const FeatureSet train = features.select(Partition::TrainSeen);
  info["train_accuracy"] = accuracy(probe, train.rows, train.labels);
  const FeatureSet val = features.select(Partition::ValSeen);
  if (val.size() > 0) info["val_seen_accuracy"] = accuracy(probe, val.rows, val.labels);
  if (normalize) {
    const NormalizedProbe n = normalize_probe(probe.weight, probe.bias);
    probe.weight = n.weight;
    probe.bias = n.bias;
    std::vector<std::string> zero;
    for (std::size_t i = 0; i < n.zero_rows.size(); ++i)
      if (n.zero_rows[i]) zero.push_back(classes[i]);
    info["zero_rows"] = zero;
    if (val.size() > 0) info["val_seen_accuracy_normalized"] = accuracy(probe, val.rows, val.labels);
  }
  TrainedModel holder;
  holder.model = probe;
  ctx.emit("probe.bin", tensors_bytes(model_tensors(holder)));
  ctx.emit("probe.json", info.dump(2) + "\n");
  ctx.emit("loss_curve.csv", loss_csv(curve));
  ctx.commit();
  return kExitOk;
}

struct LoadedTables {
  std::optional<EmbeddingTable> words;
  std::optional<poincare::PoincareTable> points;
  std::optional<Taxonomy> taxonomy;
  ModelTables view;
};

void bind(LoadedTables& t) {
  t.view.words = t.words ? &*t.words : nullptr;
  t.view.poincare = t.points ? &*t.points : nullptr;
  t.view.taxonomy = t.taxonomy ? &*t.taxonomy : nullptr;
}

int cmd_train(Context& ctx) {
  const Paradigm paradigm = paradigm_from_string(ctx.config().value("paradigm", std::string("devise")));
  const FeatureSet features = load_feature_inputs(ctx);
  TrainConfig cfg = train_config_from_json(ctx.section("train"));
  cfg.seed = ctx.seed();
  cfg.probe.seed = ctx.seed();

  std::optional<Split> split;
  if (ctx.has("split")) {
    split = load_split_file(ctx.input("split"));
    features.check_against(*split);
  }
  std::set<std::string> required(features.labels.begin(), features.labels.end());
  if (split) {
    required.insert(split->seen.begin(), split->seen.end());
    required.insert(split->unseen.begin(), split->unseen.end());
  }

  LoadedTables t;
  if (paradigm == Paradigm::Grvise) t.taxonomy = load_taxonomy_file(ctx.input("taxonomy"));
  if (paradigm == Paradigm::Hyvise) {
    t.points = poincare::read_table_file(ctx.input("poincare_table"));
  } else if (paradigm != Paradigm::LinearProbe) {
    std::set<std::string> optional;
    if (t.taxonomy) optional.insert(t.taxonomy->nodes().begin(), t.taxonomy->nodes().end());
    t.words = class_table(ctx, required, optional);
  }
  if (split) t.view.extra_classes.assign(split->unseen.begin(), split->unseen.end());
  bind(t);

  const TrainResult r = train_paradigm(paradigm, features, t.view, cfg);
  if (const auto* g = std::get_if<GrviseModel>(&r.model.model)) {
    for (const auto& d : g->graph.dropped) ctx.log() << "warning: graph node '" << d << "' has no word vector, dropped\n";
  }
  ctx.emit("checkpoint.bin", tensors_bytes(model_tensors(r.model)));
  ctx.emit("model.json", model_manifest(r.model).dump(2) + "\n");
  ctx.emit("loss_curve.csv", loss_csv(r.loss_curve));
  ctx.commit();
  return kExitOk;
}

int cmd_eval(Context& ctx) {
  const fs::path ckpt = ctx.input_dir("checkpoint", {"checkpoint.bin", "model.json"});
  const TrainedModel model = model_from_checkpoint(read_json_file(ckpt / "model.json"),
                                                   read_tensor_file(ckpt / "checkpoint.bin"));
  const FeatureSet features = load_feature_inputs(ctx);
  const Split split = load_split_file(ctx.input("split"));
  features.check_against(split);
  const std::vector<std::size_t> ks = k_list(ctx);

  std::vector<Regime> regimes;
  for (const std::string& r :
       ctx.config().value("regimes", std::vector<std::string>{"embedding", "zsl-seen", "zsl-unseen"})) {
    regimes.push_back(regime_from_string(r));
  }

  std::set<std::string> labels(split.seen.begin(), split.seen.end());
  labels.insert(split.unseen.begin(), split.unseen.end());
  LoadedTables t;
  t.words = class_table(ctx, labels, {});
  if (model.paradigm == Paradigm::Hyvise) t.points = poincare::read_table_file(ctx.input("poincare_table"));
  bind(t);

  json reports = json::array();
  std::string csv = csv_header(ks) + "\n";
  for (Regime r : regimes) {
    const EvalReport rep = evaluate(model, features, split, r, ks, t.view);
    reports.push_back(to_json(rep));
    csv += csv_row(rep) + "\n";
  }
  ctx.emit("report.json", json{{"paradigm", to_string(model.paradigm)}, {"reports", reports}}.dump(2) + "\n");
  if (ctx.config().value("csv", true)) ctx.emit("report.csv", csv);
  ctx.commit();
  return kExitOk;
}

json load_config(const Flags& flags, fs::path& base) {
  json config = json::object();
  base = fs::current_path();
  if (!flags.config.empty()) {
    const fs::path p(flags.config);
    if (!fs::exists(p)) throw FormatError("config file does not exist: " + p.string());
    config = read_json_file(p);
    if (!config.is_object()) throw FormatError("config must be a JSON object");
    base = fs::absolute(p).parent_path();
  }
  if (flags.seed) config["seed"] = *flags.seed;
  if (flags.paradigm) config["paradigm"] = *flags.paradigm;
  if (flags.out) config["out"] = fs::absolute(*flags.out).string();
  if (flags.normalize_probe) config["normalize_probe"] = true;
  if (flags.k) {
    std::vector<std::size_t> ks;
    std::stringstream ss(*flags.k);
    std::string item;
    while (std::getline(ss, item, ',')) {
      std::size_t pos = 0;
      unsigned long v = 0;
      try {
        v = std::stoul(item, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos != item.size() || item.empty()) throw ContractError("--k expects comma-separated integers, got '" + *flags.k + "'");
      ks.push_back(v);
    }
    config["k"] = ks;
  }
  return config;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Zero-shot visual-semantic embedding lab", "zsl_lab"};
  app.require_subcommand(1);
  Flags flags;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"split", "generate or validate a seen/unseen split"},
      {"toy-world", "emit a synthetic taxonomy, word vectors and category list"},
      {"synth", "synthesize a feature set from class word vectors"},
      {"poincare", "embed a taxonomy in the Poincare ball"},
      {"pretrain", "toy InfoNCE pre-training of a feature encoder"},
      {"probe", "fit a linear probe on train-seen features"},
      {"train", "train a paradigm on frozen features"},
      {"eval", "evaluate a checkpoint in one or more regimes"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "JSON run configuration");
    sub->add_option("--seed", flags.seed, "RNG seed (overrides config)");
    sub->add_option("--paradigm", flags.paradigm, "devise, prvise, grvise, hyvise, lp or mlp");
    sub->add_option("--k", flags.k, "comma-separated k values, e.g. 1,5");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_flag("--normalize-probe", flags.normalize_probe, "scale probe rows to unit norm");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  const std::string name = app.get_subcommands().front()->get_name();
  try {
    fs::path base;
    json config = load_config(flags, base);
    if (flags.paradigm || name == "train") paradigm_from_string(config.value("paradigm", std::string("devise")));
    Context ctx(name, std::move(config), base, err);
    if (name == "split") return cmd_split(ctx);
    if (name == "toy-world") return cmd_toy_world(ctx);
    if (name == "synth") return cmd_synth(ctx);
    if (name == "poincare") return cmd_poincare(ctx);
    if (name == "pretrain") return cmd_pretrain(ctx);
    if (name == "probe") return cmd_probe(ctx, ctx.config().value("normalize_probe", false));
    if (name == "train") return cmd_train(ctx);
    return cmd_eval(ctx);
  } catch (const ContractError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace zsl::cli
