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

#include "zsl/taxonomy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <queue>

#include "zsl/errors.hpp"
#include "zsl/numerics/rng.hpp"

namespace zsl {

namespace {

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

std::vector<std::string> names(const Taxonomy& t, const std::vector<std::size_t>& idx) {
  std::vector<std::string> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(t.id(i));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

Taxonomy Taxonomy::from_edges(std::span<const Edge> edges) {
  Taxonomy t;
  std::set<std::string> ids;
  for (const auto& [child, parent] : edges) {
    ids.insert(child);
    ids.insert(parent);
  }
  t.ids_.assign(ids.begin(), ids.end());
  const std::size_t n = t.ids_.size();
  t.parents_.resize(n);
  t.children_.resize(n);

  std::set<std::pair<std::size_t, std::size_t>> seen_edges;
  for (const auto& [child, parent] : edges) {
    const std::size_t c = t.index(child);
    const std::size_t p = t.index(parent);
    if (c == p) throw StructureError("cycle through node '" + child + "'");
    if (!seen_edges.insert({c, p}).second) continue;
    t.parents_[c].push_back(p);
    t.children_[p].push_back(c);
    t.edges_.emplace_back(child, parent);
  }
  for (auto& v : t.parents_) std::sort(v.begin(), v.end());
  for (auto& v : t.children_) std::sort(v.begin(), v.end());

  // Kahn's algorithm from the roots downward; leftovers sit on or below a cycle.
  std::vector<std::size_t> pending(n);
  std::queue<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i) {
    pending[i] = t.parents_[i].size();
    if (pending[i] == 0) ready.push(i);
  }
  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    const std::size_t u = ready.front();
    ready.pop();
    order.push_back(u);
    for (std::size_t c : t.children_[u]) {
      if (--pending[c] == 0) ready.push(c);
    }
  }
  if (order.size() != n) {
    // Follow unresolved parents until a node repeats; that node is on a cycle.
    std::size_t u = 0;
    while (pending[u] == 0) ++u;
    std::vector<bool> visited(n, false);
    while (!visited[u]) {
      visited[u] = true;
      for (std::size_t p : t.parents_[u]) {
        if (pending[p] != 0) {
          u = p;
          break;
        }
      }
    }
    throw StructureError("cycle through node '" + t.ids_[u] + "'");
  }

  t.ancestors_.resize(n);
  for (std::size_t u : order) {
    std::vector<std::size_t> anc;
    for (std::size_t p : t.parents_[u]) {
      anc.push_back(p);
      anc.insert(anc.end(), t.ancestors_[p].begin(), t.ancestors_[p].end());
    }
    std::sort(anc.begin(), anc.end());
    anc.erase(std::unique(anc.begin(), anc.end()), anc.end());
    t.ancestors_[u] = std::move(anc);
  }
  return t;
}

bool Taxonomy::contains(const std::string& id) const { return std::binary_search(ids_.begin(), ids_.end(), id); }

std::size_t Taxonomy::index(const std::string& id) const {
  auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it == ids_.end() || *it != id) throw LookupError("unknown taxonomy node '" + id + "'");
  return static_cast<std::size_t>(it - ids_.begin());
}

std::vector<std::string> Taxonomy::parents(const std::string& id) const { return names(*this, parents_[index(id)]); }

std::vector<std::string> Taxonomy::children(const std::string& id) const {
  return names(*this, children_[index(id)]);
}

std::vector<std::string> Taxonomy::ancestors(const std::string& id) const {
  return names(*this, ancestors_[index(id)]);
}

bool Taxonomy::is_leaf(const std::string& id) const { return children_[index(id)].empty(); }

bool Taxonomy::is_hypernym(std::size_t a, std::size_t b) const {
  const auto& anc = ancestors_[b];
  return std::binary_search(anc.begin(), anc.end(), a);
}

bool Taxonomy::is_hypernym(const std::string& a, const std::string& b) const {
  return is_hypernym(index(a), index(b));
}

std::vector<std::string> Taxonomy::leaves_under(const std::string& id) const {
  const std::size_t root = index(id);
  std::vector<std::size_t> leaves;
  std::vector<bool> visited(size(), false);
  std::vector<std::size_t> stack{root};
  visited[root] = true;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    if (children_[u].empty()) leaves.push_back(u);
    for (std::size_t c : children_[u]) {
      if (!visited[c]) {
        visited[c] = true;
        stack.push_back(c);
      }
    }
  }
  return names(*this, leaves);
}

Taxonomy load_taxonomy(std::istream& in) {
  std::vector<Taxonomy::Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(std::move(line));
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("expected child<TAB>parent", lineno);
    std::string child = line.substr(0, tab);
    std::string parent = line.substr(tab + 1);
    if (child.empty() || parent.empty() || parent.find('\t') != std::string::npos) {
      throw ParseError("dangling or malformed identifier in edge record", lineno);
    }
    edges.emplace_back(std::move(child), std::move(parent));
  }
  return Taxonomy::from_edges(edges);
}

Taxonomy load_taxonomy_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open taxonomy file " + path.string());
  return load_taxonomy(in);
}

std::string to_string(Relation r) {
  switch (r) {
    case Relation::Hypernym:
      return "hypernym";
    case Relation::Hyponym:
      return "hyponym";
    case Relation::Identical:
      return "identical";
  }
  return "identical";
}

SplitReport validate_split(const Taxonomy& taxonomy, const Split& split) {
  SplitReport report;
  for (const std::string& s : split.seen) {
    const std::size_t si = taxonomy.index(s);
    for (const std::string& u : split.unseen) {
      const std::size_t ui = taxonomy.index(u);
      if (si == ui) {
        report.violations.push_back({s, u, Relation::Identical});
      } else if (taxonomy.is_hypernym(ui, si)) {
        report.violations.push_back({s, u, Relation::Hypernym});
      } else if (taxonomy.is_hypernym(si, ui)) {
        report.violations.push_back({s, u, Relation::Hyponym});
      }
    }
  }
  std::sort(report.violations.begin(), report.violations.end());
  report.valid = report.violations.empty();
  return report;
}

Split generate_tiered_split(const Taxonomy& taxonomy, std::span<const std::string> categories,
                            double unseen_fraction, std::uint64_t seed) {
  if (!(unseen_fraction > 0.0 && unseen_fraction < 1.0)) {
    throw ContractError("unseen_fraction must lie strictly between 0 and 1");
  }
  if (categories.empty()) throw ContractError("no categories given");

  std::vector<std::vector<std::string>> leaves;
  std::map<std::string, std::string> owner;
  for (const std::string& cat : categories) {
    if (taxonomy.is_leaf(cat)) throw ContractError("category '" + cat + "' is a leaf, not an internal node");
    auto under = taxonomy.leaves_under(cat);
    for (const std::string& leaf : under) {
      auto [it, inserted] = owner.emplace(leaf, cat);
      if (!inserted) {
        throw AmbiguityError("leaf '" + leaf + "' is reachable from categories '" + it->second + "' and '" + cat +
                             "'");
      }
    }
    leaves.push_back(std::move(under));
  }

  std::vector<std::size_t> order(categories.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  std::size_t total = 0;
  for (const auto& l : leaves) total += l.size();

  // 0/1 subset-sum over leaf counts, taking categories in shuffled order.
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> via(total + 1, kNone);
  std::vector<bool> reachable(total + 1, false);
  reachable[0] = true;
  for (std::size_t item : order) {
    const std::size_t w = leaves[item].size();
    for (std::size_t s = total; s >= w && s > 0; --s) {
      if (!reachable[s] && reachable[s - w]) {
        reachable[s] = true;
        via[s] = item;
      }
    }
  }
  const double target = unseen_fraction * static_cast<double>(total);
  std::size_t best = kNone;
  for (std::size_t s = 1; s < total; ++s) {
    if (!reachable[s]) continue;
    if (best == kNone || std::abs(static_cast<double>(s) - target) < std::abs(static_cast<double>(best) - target)) {
      best = s;
    }
  }
  if (best == kNone) {
    throw InfeasibleError("no assignment of whole categories leaves both seen and unseen sides nonempty");
  }

  std::vector<bool> unseen_cat(categories.size(), false);
  for (std::size_t s = best; s > 0; s -= leaves[via[s]].size()) unseen_cat[via[s]] = true;

  Split split;
  for (std::size_t c = 0; c < categories.size(); ++c) {
    auto& side = unseen_cat[c] ? split.unseen : split.seen;
    side.insert(leaves[c].begin(), leaves[c].end());
  }
  if (!validate_split(taxonomy, split).valid) {
    throw StructureError("generated split has cross-set ancestry; categories do not partition the leaves");
  }
  return split;
}

nlohmann::json to_json(const Split& split) {
  return nlohmann::json{{"seen", std::vector<std::string>(split.seen.begin(), split.seen.end())},
                        {"unseen", std::vector<std::string>(split.unseen.begin(), split.unseen.end())}};
}

Split split_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("seen") || !j.contains("unseen")) {
    throw FormatError("split JSON must be an object with 'seen' and 'unseen' arrays");
  }
  auto fill = [](const nlohmann::json& arr, std::set<std::string>& out) {
    if (!arr.is_array()) throw FormatError("split 'seen' and 'unseen' must be arrays");
    for (const auto& v : arr) {
      if (!v.is_string()) throw FormatError("split entries must be strings");
      out.insert(v.get<std::string>());
    }
  };
  Split s;
  fill(j.at("seen"), s.seen);
  fill(j.at("unseen"), s.unseen);
  return s;
}

Split load_split_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open split file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed split file " + path.string() + ": " + e.what());
  }
  return split_from_json(j);
}

nlohmann::json to_json(const SplitReport& report) {
  nlohmann::json v = nlohmann::json::array();
  for (const Violation& x : report.violations) {
    v.push_back({{"seen", x.seen}, {"unseen", x.unseen}, {"relation", to_string(x.relation)}});
  }
  return nlohmann::json{{"valid", report.valid}, {"violations", v}};
}

}  // namespace zsl
