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

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace zsl {

/// Immutable hypernymy DAG over opaque class identifiers. Nodes may have
/// several parents; ancestor sets are the closure over every parent path.
class Taxonomy {
 public:
  using Edge = std::pair<std::string, std::string>;  // (child, parent)

  Taxonomy() = default;

  /// Throws StructureError naming a node on a cycle.
  static Taxonomy from_edges(std::span<const Edge> edges);

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  bool contains(const std::string& id) const;
  /// Sorted identifiers.
  const std::vector<std::string>& nodes() const { return ids_; }
  const std::vector<Edge>& edges() const { return edges_; }

  std::size_t index(const std::string& id) const;
  const std::string& id(std::size_t index) const { return ids_[index]; }

  std::vector<std::string> parents(const std::string& id) const;
  std::vector<std::string> children(const std::string& id) const;
  /// Strict ancestors, sorted.
  std::vector<std::string> ancestors(const std::string& id) const;
  const std::vector<std::size_t>& ancestor_indices(std::size_t node) const { return ancestors_[node]; }
  const std::vector<std::size_t>& parent_indices(std::size_t node) const { return parents_[node]; }
  const std::vector<std::size_t>& child_indices(std::size_t node) const { return children_[node]; }

  bool is_leaf(const std::string& id) const;
  /// True iff `a` is a strict ancestor of `b`. Throws LookupError for unknown ids.
  bool is_hypernym(const std::string& a, const std::string& b) const;
  bool is_hypernym(std::size_t a, std::size_t b) const;

  /// Leaf descendants of `id` (or `id` itself when it is a leaf), sorted.
  std::vector<std::string> leaves_under(const std::string& id) const;

 private:
  std::vector<std::string> ids_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::vector<std::size_t>> ancestors_;
};

/// Parses `child<TAB>parent` records; blank and `#` lines are skipped.
/// Malformed records raise ParseError with the 1-based line number.
Taxonomy load_taxonomy(std::istream& in);
Taxonomy load_taxonomy_file(const std::filesystem::path& path);

struct Split {
  std::set<std::string> seen;
  std::set<std::string> unseen;

  friend bool operator==(const Split&, const Split&) = default;
};

/// Relation of the unseen class to the seen class.
enum class Relation { Hypernym, Hyponym, Identical };

std::string to_string(Relation r);

struct Violation {
  std::string seen;
  std::string unseen;
  Relation relation;

  friend auto operator<=>(const Violation&, const Violation&) = default;
};

struct SplitReport {
  bool valid = true;
  std::vector<Violation> violations;
};

/// Lists every cross-set ancestor pair in lexicographic order.
SplitReport validate_split(const Taxonomy& taxonomy, const Split& split);

/// Assigns whole categories to the unseen side so the unseen leaf share is as
/// close as possible to `unseen_fraction`. Deterministic in `seed`.
Split generate_tiered_split(const Taxonomy& taxonomy, std::span<const std::string> categories,
                            double unseen_fraction, std::uint64_t seed);

nlohmann::json to_json(const Split& split);
Split split_from_json(const nlohmann::json& j);
Split load_split_file(const std::filesystem::path& path);
nlohmann::json to_json(const SplitReport& report);

}  // namespace zsl
