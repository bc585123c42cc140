// Copyright 2026 The qhe-rl Authors
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

// Versioned JSON checkpoints of a training run.
//
// Layout: {"format", "version", "checksum", "payload"} where the checksum is
// FNV-1a (64 bit, hex) of the compact payload text. Doubles are written in
// shortest round-trip form, so load(save(x)) reproduces every bit.

#include "qhe/sac.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace qhe::checkpoint {

inline constexpr int kFormatVersion = 1;
inline constexpr std::string_view kFormatName = "qhe-checkpoint";

struct Checkpoint {
  nlohmann::json config;  // echo of the run configuration
  sac::TrainerState state;
};

std::string encode(const Checkpoint& c);
/// Throws IntegrityError on malformed, truncated or inconsistent input and
/// VersionError when written by a newer format.
Checkpoint decode(const std::string& text);

/// Writes atomically through a temporary file next to `path`.
void save(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load(const std::filesystem::path& path);

nlohmann::json params_to_json(const nn::MlpParams& p);
nn::MlpParams params_from_json(const nlohmann::json& j, const std::string& where);

bool operator==(const sac::TrainerState& a, const sac::TrainerState& b);

}  // namespace qhe::checkpoint
