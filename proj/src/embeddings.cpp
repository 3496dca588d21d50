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

#include "zsl/embeddings.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "zsl/errors.hpp"

namespace zsl {

const Eigen::VectorXd& EmbeddingTable::at(const std::string& label) const {
  auto it = entries.find(label);
  if (it == entries.end()) throw MissingEmbeddingError("no embedding for '" + label + "'");
  return it->second;
}

void EmbeddingTable::insert(const std::string& label, Eigen::VectorXd v) {
  if (entries.empty() && dim == 0) dim = v.size();
  if (v.size() != dim) {
    throw DimensionError("embedding for '" + label + "' has length " + std::to_string(v.size()) + ", table dim is " +
                         std::to_string(dim));
  }
  entries[label] = std::move(v);
}

std::vector<std::string> EmbeddingTable::labels() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& [k, v] : entries) out.push_back(k);
  return out;
}

Eigen::MatrixXd EmbeddingTable::matrix(std::span<const std::string> labels) const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(labels.size()), dim);
  for (std::size_t i = 0; i < labels.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = at(labels[i]).transpose();
  return m;
}

WordVectorLoad load_word_vectors(std::istream& in, const std::optional<std::set<std::string>>& wanted) {
  WordVectorLoad result;
  std::string line;
  std::size_t lineno = 0;
  Eigen::Index dim = -1;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const char* p = line.data();
    const char* end = p + line.size();
    auto skip_space = [&] {
      while (p < end && std::isspace(static_cast<unsigned char>(*p))) ++p;
    };
    skip_space();
    const char* tok_begin = p;
    while (p < end && !std::isspace(static_cast<unsigned char>(*p))) ++p;
    std::string token(tok_begin, p);
    if (token.empty()) continue;
    values.clear();
    skip_space();
    while (p < end) {
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc() || !std::isfinite(v)) throw ParseError("invalid number for token '" + token + "'", lineno);
      values.push_back(v);
      p = next;
      if (p < end && !std::isspace(static_cast<unsigned char>(*p))) {
        throw ParseError("invalid number for token '" + token + "'", lineno);
      }
      skip_space();
    }
    const auto d = static_cast<Eigen::Index>(values.size());
    if (dim < 0) {
      if (d == 0) throw ParseError("token '" + token + "' has no components", lineno);
      dim = d;
      result.table.dim = d;
    } else if (d != dim) {
      throw ParseError("token '" + token + "' has " + std::to_string(d) + " components, expected " +
                           std::to_string(dim),
                       lineno);
    }
    if (wanted && !wanted->count(token)) continue;
    result.table.entries[token] = Eigen::Map<const Eigen::VectorXd>(values.data(), d);
  }
  if (wanted) {
    for (const std::string& w : *wanted) {
      if (!result.table.contains(w)) result.missing.push_back(w);
    }
  }
  return result;
}

WordVectorLoad load_word_vectors_file(const std::filesystem::path& path,
                                      const std::optional<std::set<std::string>>& wanted) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open vector file " + path.string());
  return load_word_vectors(in, wanted);
}

void write_vectors(std::ostream& out, const EmbeddingTable& table) {
  char buf[32];
  for (const auto& [label, v] : table.entries) {
    out << label;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v(i));
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(end - buf));
    }
    out << '\n';
  }
}

std::vector<std::string> normalize_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (ch == '_' || ch == ' ') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Eigen::VectorXd class_vector(const EmbeddingTable& words, const std::string& class_id,
                             std::span<const std::string> synonyms) {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(words.dim);
  int resolved = 0;
  for (const std::string& syn : synonyms) {
    Eigen::VectorXd syn_acc = Eigen::VectorXd::Zero(words.dim);
    int hits = 0;
    for (const std::string& tok : normalize_tokens(syn)) {
      auto it = words.entries.find(tok);
      if (it == words.entries.end()) continue;
      syn_acc += it->second;
      ++hits;
    }
    if (hits == 0) continue;
    acc += syn_acc / hits;
    ++resolved;
  }
  if (resolved == 0) throw MissingEmbeddingError("no synonym of class '" + class_id + "' has a word vector");
  return acc / resolved;
}

SynonymMap load_synonyms(std::istream& in) {
  SynonymMap out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) throw ParseError("expected class_id<TAB>synonyms", lineno);
    std::vector<std::string> syns;
    std::stringstream ss(line.substr(tab + 1));
    std::string s;
    while (std::getline(ss, s, ',')) {
      if (!s.empty()) syns.push_back(s);
    }
    if (syns.empty()) throw ParseError("class has no synonyms", lineno);
    out[line.substr(0, tab)] = std::move(syns);
  }
  return out;
}

SynonymMap load_synonyms_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open synonym file " + path.string());
  return load_synonyms(in);
}

EmbeddingTable build_class_table(const EmbeddingTable& words, const SynonymMap& synonyms,
                                 std::span<const std::string> class_ids) {
  EmbeddingTable out;
  out.dim = words.dim;
  for (const std::string& id : class_ids) {
    auto it = synonyms.find(id);
    if (it != synonyms.end()) {
      out.insert(id, class_vector(words, id, it->second));
    } else {
      const std::string self[] = {id};
      out.insert(id, class_vector(words, id, self));
    }
  }
  return out;
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw DimensionError("cosine_similarity: length mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw UndefinedSimilarityError("cosine similarity of a zero vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

SimilarityMatrix similarity_matrix(const EmbeddingTable& table, std::span<const std::string> label_order) {
  const auto n = static_cast<Eigen::Index>(label_order.size());
  SimilarityMatrix sim{std::vector<std::string>(label_order.begin(), label_order.end()), Eigen::MatrixXd(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& wi = table.at(label_order[i]);
    if (wi.norm() == 0.0) throw UndefinedSimilarityError("label '" + label_order[i] + "' has a zero vector");
    sim.values(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      try {
        sim.values(i, j) = cosine_similarity(wi, table.at(label_order[j]));
      } catch (const UndefinedSimilarityError&) {
        throw UndefinedSimilarityError("similarity of '" + label_order[i] + "' and '" + label_order[j] +
                                       "' is undefined (zero vector)");
      }
      sim.values(j, i) = sim.values(i, j);
    }
  }
  return sim;
}

RankDistanceMatrix rank_distance_matrix(const SimilarityMatrix& sim) {
  const Eigen::Index n = sim.values.rows();
  if (sim.values.cols() != n || static_cast<Eigen::Index>(sim.labels.size()) != n) {
    throw DimensionError("rank_distance_matrix: similarity matrix is not square over its labels");
  }
  RankDistanceMatrix out{sim.labels, Eigen::MatrixXi::Zero(n, n)};
  std::vector<Eigen::Index> order;
  for (Eigen::Index i = 0; i < n; ++i) {
    order.clear();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) order.push_back(j);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return sim.values(i, a) > sim.values(i, b); });
    for (std::size_t r = 0; r < order.size(); ++r) out.values(i, order[r]) = static_cast<int>(r + 1);
  }
  return out;
}

}  // namespace zsl
