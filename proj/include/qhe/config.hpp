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

// Run configuration: a JSON document with sections engine, train, eval,
// fit and run. Every key is optional and defaults to the reference
// experiment. Environment variables QHE_<SECTION>__<KEY> override entries.

#include "qhe/eval.hpp"
#include "qhe/qdyn.hpp"
#include "qhe/sac.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace qhe::config {

inline constexpr std::string_view kEnvPrefix = "QHE_";

struct EvalSection {
  double gamma = 0.995;
  std::int64_t steps = 1000;
};

struct FitSection {
  std::size_t max_period = 256;
};

struct RunSection {
  std::uint64_t seed = 1;
  std::string output_dir = "runs";
  std::int64_t checkpoint_every = 50000;
};

struct RunConfig {
  qdyn::EngineSpec engine;
  sac::TrainConfig train;
  EvalSection eval;
  eval::BaselineOptions baselines;
  FitSection fit;
  RunSection run;
};

/// Throws ConfigError naming the offending key path.
RunConfig from_json(const nlohmann::json& doc);
nlohmann::json to_json(const RunConfig& config);

/// Applies QHE_<SECTION>__<KEY>=value entries (values parsed as JSON,
/// falling back to a string) onto `doc`.
void apply_overrides(nlohmann::json& doc, const std::map<std::string, std::string>& env);
std::map<std::string, std::string> environment_overrides();

/// Reads, overrides from the process environment, and validates. Throws
/// ConfigError (key path = file path) when the file cannot be read or parsed.
RunConfig load(const std::filesystem::path& path, bool use_environment = true);
/// Defaults with environment overrides only.
RunConfig defaults(bool use_environment = true);

}  // namespace qhe::config
