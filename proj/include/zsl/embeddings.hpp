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

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace zsl {

/// Label -> dense vector map with a fixed dimension.
struct EmbeddingTable {
  Eigen::Index dim = 0;
  std::map<std::string, Eigen::VectorXd> entries;

  bool contains(const std::string& label) const { return entries.count(label) != 0; }
  /// Throws MissingEmbeddingError for unknown labels.
  const Eigen::VectorXd& at(const std::string& label) const;
  void insert(const std::string& label, Eigen::VectorXd v);
  std::vector<std::string> labels() const;
  std::size_t size() const { return entries.size(); }

  /// Stacks the rows for `labels` in order into a |labels| x dim matrix.
  Eigen::MatrixXd matrix(std::span<const std::string> labels) const;
};

struct WordVectorLoad {
  EmbeddingTable table;
  std::vector<std::string> missing;  // wanted tokens absent from the source, sorted
};

/// Reads GloVe-style text (`token v1 ... vd`). Lines starting with '#' are
/// skipped. With `wanted` set, only those tokens are kept.
WordVectorLoad load_word_vectors(std::istream& in, const std::optional<std::set<std::string>>& wanted = std::nullopt);
WordVectorLoad load_word_vectors_file(const std::filesystem::path& path,
                                      const std::optional<std::set<std::string>>& wanted = std::nullopt);

/// Writes one `label v1 ... vd` line per entry with round-trip precision.
void write_vectors(std::ostream& out, const EmbeddingTable& table);

/// Lowercases and splits a label or synonym on underscores and spaces.
std::vector<std::string> normalize_tokens(const std::string& text);

/// Mean over synonyms of (mean over each synonym's in-vocabulary tokens).
/// Throws MissingEmbeddingError naming `class_id` when nothing resolves.
Eigen::VectorXd class_vector(const EmbeddingTable& words, const std::string& class_id,
                             std::span<const std::string> synonyms);

using SynonymMap = std::map<std::string, std::vector<std::string>>;

/// Parses `class_id<TAB>syn1,syn2,...` lines.
SynonymMap load_synonyms(std::istream& in);
SynonymMap load_synonyms_file(const std::filesystem::path& path);

/// Class vectors for `class_ids`; classes without a synonym entry fall back to their own id.
EmbeddingTable build_class_table(const EmbeddingTable& words, const SynonymMap& synonyms,
                                 std::span<const std::string> class_ids);

/// Cosine similarity clamped to [-1, 1]. Throws UndefinedSimilarityError on a zero vector.
double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct SimilarityMatrix {
  std::vector<std::string> labels;
  Eigen::MatrixXd values;
};

struct RankDistanceMatrix {
  std::vector<std::string> labels;
  Eigen::MatrixXi values;
};

SimilarityMatrix similarity_matrix(const EmbeddingTable& table, std::span<const std::string> label_order);

/// Entry (i, j) is the position of label j when all labels are ordered by
/// descending similarity to label i, with i itself at 0 and ties broken by
/// ascending index.
RankDistanceMatrix rank_distance_matrix(const SimilarityMatrix& sim);

}  // namespace zsl
