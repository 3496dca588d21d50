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

#include "zsl/poincare.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "zsl/numerics/rng.hpp"

namespace zsl::poincare {

void PoincareTable::validate() const {
  const double limit = 1.0 - kBoundaryEps;
  for (const auto& [id, p] : points.entries) {
    if (!(p.norm() <= limit + 1e-12)) {
      throw DomainError("point '" + id + "' has norm " + std::to_string(p.norm()) + " beyond the ball limit");
    }
  }
}

namespace {

struct Pair {
  std::size_t u;
  std::size_t v;
};

}  // namespace

PoincareTable train_poincare(const Taxonomy& taxonomy, const TrainConfig& config) {
  if (taxonomy.empty() || taxonomy.edges().empty()) throw TrainingError("taxonomy has no edges to embed");
  if (config.dim < 2) throw ContractError("poincare dimension must be >= 2");
  const std::size_t n = taxonomy.size();

  // related[u] holds every node that must not be drawn as a negative for u.
  std::vector<Pair> pairs;
  std::vector<std::vector<std::size_t>> related(n);
  for (std::size_t u = 0; u < n; ++u) {
    const auto& ups = config.pairs == PositivePairs::Edges ? taxonomy.parent_indices(u) : taxonomy.ancestor_indices(u);
    for (std::size_t v : ups) {
      pairs.push_back({u, v});
      related[u].push_back(v);
      related[v].push_back(u);
    }
  }
  std::vector<std::vector<std::size_t>> negatives(n);
  for (std::size_t u = 0; u < n; ++u) {
    std::sort(related[u].begin(), related[u].end());
    for (std::size_t w = 0; w < n; ++w) {
      if (w != u && !std::binary_search(related[u].begin(), related[u].end(), w)) negatives[u].push_back(w);
    }
  }

  Rng rng(config.seed);
  std::vector<Eigen::VectorXd> emb(n);
  for (auto& p : emb) p = rng.uniform_matrix(config.dim, 1, -config.init_radius, config.init_radius);

  std::vector<std::size_t> cand;
  std::vector<double> dist;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = epoch < config.burn_in_epochs ? config.lr * config.burn_in_lr_factor : config.lr;
    rng.shuffle(pairs);
    for (const Pair& pr : pairs) {
      const auto& pool = negatives[pr.u];
      if (pool.empty()) continue;
      cand.assign(1, pr.v);
      for (int k = 0; k < config.neg_samples; ++k) cand.push_back(pool[rng.index(pool.size())]);

      dist.resize(cand.size());
      double dmin = 0.0;
      for (std::size_t k = 0; k < cand.size(); ++k) {
        dist[k] = distance(emb[pr.u], emb[cand[k]]);
        dmin = k == 0 ? dist[k] : std::min(dmin, dist[k]);
      }
      double z = 0.0;
      for (double d : dist) z += std::exp(-(d - dmin));

      Eigen::VectorXd grad_u = Eigen::VectorXd::Zero(config.dim);
      std::vector<Eigen::VectorXd> grad_c(cand.size());
      for (std::size_t k = 0; k < cand.size(); ++k) {
        const double softmax = std::exp(-(dist[k] - dmin)) / z;
        const double dloss_dd = (k == 0 ? 1.0 : 0.0) - softmax;
        grad_u += dloss_dd * distance_grad_u(emb[pr.u], emb[cand[k]]);
        grad_c[k] = dloss_dd * distance_grad_u(emb[cand[k]], emb[pr.u]);
      }
      auto riemannian_update = [&](std::size_t node, const Eigen::VectorXd& g) {
        const double s = 1.0 - emb[node].squaredNorm();
        emb[node] = project_to_ball(Eigen::VectorXd(emb[node] - lr * (s * s / 4.0) * g));
      };
      riemannian_update(pr.u, grad_u);
      for (std::size_t k = 0; k < cand.size(); ++k) riemannian_update(cand[k], grad_c[k]);
    }
  }

  PoincareTable table;
  table.points.dim = config.dim;
  for (std::size_t i = 0; i < n; ++i) table.points.entries[taxonomy.id(i)] = emb[i];
  return table;
}

void write_table(std::ostream& out, const PoincareTable& table) {
  out << "#dim=" << table.dim() << " curvature=-1\n";
  write_vectors(out, table.points);
}

PoincareTable read_table(std::istream& in) {
  std::string header;
  if (!std::getline(in, header) || header.rfind("#dim=", 0) != 0) {
    throw FormatError("poincare table must start with '#dim=<d> curvature=-1'");
  }
  std::istringstream hs(header.substr(5));
  Eigen::Index dim = 0;
  std::string curvature;
  hs >> dim >> curvature;
  if (dim < 1 || curvature != "curvature=-1") throw FormatError("malformed poincare table header: " + header);
  PoincareTable table;
  table.points = load_word_vectors(in).table;
  if (table.points.size() > 0 && table.points.dim != dim) {
    throw FormatError("poincare table header says dim " + std::to_string(dim) + " but rows have " +
                      std::to_string(table.points.dim));
  }
  table.points.dim = dim;
  table.validate();
  return table;
}

PoincareTable read_table_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open poincare table " + path.string());
  return read_table(in);
}

}  // namespace zsl::poincare
