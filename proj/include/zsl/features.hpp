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
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "zsl/embeddings.hpp"
#include "zsl/numerics/autodiff.hpp"
#include "zsl/numerics/mlp.hpp"
#include "zsl/taxonomy.hpp"

namespace zsl {

enum class Partition { TrainSeen, ValSeen, ValUnseen };

std::string to_string(Partition p);
Partition partition_from_string(const std::string& s);

/// Frozen image features with parallel class labels and partition tags.
struct FeatureSet {
  Eigen::MatrixXd rows;  // n x dim
  std::vector<std::string> labels;
  std::vector<Partition> partitions;

  Eigen::Index dim() const { return rows.cols(); }
  std::size_t size() const { return labels.size(); }
  std::vector<Eigen::Index> indices(Partition p) const;
  FeatureSet select(Partition p) const;
  /// Throws ConsistencyError if the parallel arrays disagree in length.
  void validate() const;
  /// Throws ConsistencyError if a label is outside the split or an unseen
  /// label sits outside the val-unseen partition.
  void check_against(const Split& split) const;
};

/// Binary matrix: magic `VSEF`, u32 version, u32 rows, u32 dim (little-endian),
/// then rows*dim little-endian float32 values, row-major.
void write_feature_matrix(std::ostream& out, const Eigen::MatrixXd& rows);
Eigen::MatrixXd read_feature_matrix(std::istream& in);

/// Loads features plus one-label-per-line text. Without a partition file every
/// row is tagged train-seen.
FeatureSet load_features(const std::filesystem::path& binary, const std::filesystem::path& labels,
                         const std::filesystem::path& partitions = {});

struct SynthSpec {
  std::size_t n_classes = 0;  // 0 accepts whatever the split provides
  std::size_t samples_per_class = 20;       // train-seen rows per seen class
  std::size_t eval_samples_per_class = 10;  // val rows per class (seen and unseen)
  Eigen::Index feature_dim = 64;
  double alignment = 1.0;  // alpha in [0, 1]
  double noise = 0.05;     // sigma >= 0
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthResult {
  FeatureSet features;
  EmbeddingTable prototypes;
};

/// Prototype u_c = normalize(alpha * P w_c + (1 - alpha) * r_c) with a fixed
/// random isometry P (orthonormal columns; orthonormal rows when
/// feature_dim < word_dim) and independent random unit vectors r_c.
/// Samples are u_c plus isotropic Gaussian noise.
SynthResult synth_features(const SynthSpec& spec, const EmbeddingTable& class_vectors, const Split& split);

/// Synthetic world: a root, `categories` category nodes and
/// `leaves_per_category` leaves under each. Leaf vectors are
/// unit(category_weight * c + (1 - category_weight) * r) with random unit
/// c per category and r per leaf; category vectors are unit(c).
struct ToyWorld {
  Taxonomy taxonomy;
  EmbeddingTable words;
  std::vector<std::string> categories;
  std::vector<std::string> leaves;
};

ToyWorld make_toy_world(std::size_t categories, std::size_t leaves_per_category, Eigen::Index word_dim,
                        double category_weight, std::uint64_t seed);

/// Mean over rows of logsumexp(row) - row[i] for a square score matrix.
double infonce_from_scores(const Eigen::MatrixXd& scores);

/// InfoNCE with critic cos(a_i, c_j) / temperature; row i of `candidates`
/// is the positive for anchor i. Throws ContractError for fewer than 2 rows.
double infonce_loss(const Eigen::MatrixXd& anchors, const Eigen::MatrixXd& candidates, double temperature);
ad::Var infonce_loss(ad::Var anchors, ad::Var candidates, double temperature);

struct ViewAugmenter {
  double noise = 0.1;
  double mask_probability = 0.2;

  Eigen::MatrixXd operator()(const Eigen::MatrixXd& batch, Rng& rng) const;
};

struct PretrainConfig {
  int epochs = 50;
  std::size_t batch = 64;
  double temperature = 0.2;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

struct PretrainResult {
  MlpParams encoder;
  std::vector<double> loss_curve;  // mean InfoNCE per epoch
};

PretrainResult train_toy_encoder(const Eigen::MatrixXd& raw, const ViewAugmenter& augmenter, MlpParams encoder,
                                 const PretrainConfig& config);

/// Multinomial logistic regression over a fixed class list.
struct LinearProbe {
  std::vector<std::string> classes;
  Eigen::MatrixXd weight;  // classes x dim
  Eigen::VectorXd bias;

  Eigen::MatrixXd logits(const Eigen::MatrixXd& x) const;
  std::vector<std::size_t> predict(const Eigen::MatrixXd& x) const;
};

struct ProbeConfig {
  int epochs = 100;
  double lr = 1e-2;
  std::size_t batch = 256;
  std::uint64_t seed = 0;
};

/// `loss_curve`, when given, receives the mean cross-entropy of each epoch.
/// Throws DataError when a class has no rows or a row's label is not a class.
LinearProbe linear_probe_train(const Eigen::MatrixXd& x, std::span<const std::string> labels,
                               std::span<const std::string> classes, const ProbeConfig& config,
                               std::vector<double>* loss_curve = nullptr);
/// Trains on the train-seen partition.
LinearProbe linear_probe_train(const FeatureSet& features, std::span<const std::string> classes,
                               const ProbeConfig& config, std::vector<double>* loss_curve = nullptr);

double accuracy(const LinearProbe& probe, const Eigen::MatrixXd& x, std::span<const std::string> labels);

}  // namespace zsl
