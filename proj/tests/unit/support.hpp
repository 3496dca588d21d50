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
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "zsl/numerics/autodiff.hpp"
#include "zsl/numerics/gradcheck.hpp"
#include "zsl/numerics/params.hpp"
#include "zsl/numerics/rng.hpp"
#include "zsl/taxonomy.hpp"

namespace zsl::testing {

// Gradient check of sum(f(x) .* weights) in x, weights fixed per seed so
// symmetric cancellations cannot hide a wrong derivative.
inline double op_grad_error(Eigen::MatrixXd x, const std::function<ad::Var(ad::Var)>& f, std::uint64_t seed = 7) {
  Eigen::MatrixXd weights;
  auto loss_of = [&](ad::Tape& tape, ad::Var v) {
    ad::Var out = f(v);
    if (weights.size() == 0) {
      Rng rng(seed);
      weights = rng.normal_matrix(out.rows(), out.cols());
    }
    return ad::sum(out * tape.constant(weights));
  };
  ParamList params{view("x", x)};
  ad::Tape tape;
  const auto vars = bind_params(tape, params);
  const auto grads = tape.gradient(loss_of(tape, vars[0]), vars);
  auto loss = [&] {
    ad::Tape t;
    return loss_of(t, t.constant(Eigen::MatrixXd(params[0].value))).scalar();
  };
  return finite_diff_check(loss, params, grads).max_rel_error;
}

// Worst relative error between tape gradients of `build` and central
// differences; `build` must read parameters only through its vars.
inline double loss_grad_error(ParamList& params,
                              const std::function<ad::Var(ad::Tape&, std::span<const ad::Var>)>& build) {
  ad::Tape tape;
  const auto vars = bind_params(tape, params);
  const auto grads = tape.gradient(build(tape, vars), vars);
  auto loss = [&] {
    ad::Tape t;
    const auto v = bind_params(t, params);
    return build(t, v).scalar();
  };
  return finite_diff_check(loss, params, grads).max_rel_error;
}

// Random DAG over "n000".."n<n-1>": node i > 0 gets one to three parents
// drawn from lower indices.
inline std::vector<Taxonomy::Edge> random_dag_edges(std::size_t n, Rng& rng) {
  auto name = [](std::size_t i) {
    std::string s = std::to_string(i);
    return "n" + std::string(3 - std::min<std::size_t>(3, s.size()), '0') + s;
  };
  std::vector<Taxonomy::Edge> edges;
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t k = 1 + rng.index(std::min<std::size_t>(3, i));
    std::set<std::size_t> parents;
    while (parents.size() < k) parents.insert(rng.index(i));
    for (std::size_t p : parents) edges.emplace_back(name(i), name(p));
  }
  return edges;
}

// Ancestors by explicit DFS over parent edges, independent of Taxonomy.
inline std::set<std::string> dfs_ancestors(const std::vector<Taxonomy::Edge>& edges, const std::string& node) {
  std::set<std::string> seen;
  std::vector<std::string> stack{node};
  while (!stack.empty()) {
    const std::string cur = stack.back();
    stack.pop_back();
    for (const auto& [c, p] : edges) {
      if (c == cur && seen.insert(p).second) stack.push_back(p);
    }
  }
  return seen;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& bytes) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("zsl_test_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace zsl::testing
