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
#include <string>
#include <string_view>

#include "json.hpp"

namespace zsl::cli {

/// Exit codes: 0 success, 1 data/format/validation failure, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `zsl_lab` binary. Subcommands: split, toy-world,
/// synth, poincare, pretrain, probe, train, eval.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_bytes(std::string_view bytes);

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);

}  // namespace zsl::cli
