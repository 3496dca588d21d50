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

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "zsl/models/train.hpp"

namespace zsl {

struct NamedTensor {
  std::string name;
  Eigen::MatrixXd value;
};

/// Container: magic `ZSLT`, u32 version, u32 count, then per tensor u32
/// name length, name bytes, u32 rank (2), u64 rows, u64 cols and rows*cols
/// f64 values row-major. All integers and floats little-endian.
void write_tensors(std::ostream& out, std::span<const NamedTensor> tensors);
/// Throws FormatError on bad magic, truncation, unknown version or trailing bytes.
std::vector<NamedTensor> read_tensors(std::istream& in);

std::vector<NamedTensor> model_tensors(const TrainedModel& model);

/// Paradigm, config, seed, seen classes and (for GrVISE) graph nodes.
nlohmann::json model_manifest(const TrainedModel& model);

/// Inverse of model_tensors + model_manifest. Throws FormatError when a
/// tensor is missing or has the wrong shape.
TrainedModel model_from_checkpoint(const nlohmann::json& manifest, std::span<const NamedTensor> tensors);

}  // namespace zsl
