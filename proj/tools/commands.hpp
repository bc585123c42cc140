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

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

namespace qhe::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kDivergence = 3,
  kNoPeriod = 4,
  kUndefinedEfficiency = 5,
};

struct TrainArgs {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::int64_t> steps;
  std::optional<std::string> resume;
};

struct ReplayArgs {
  std::string cycle = "fitted";  // fitted | cycle1 | cycle2 | cycle3 | checkpoint:PATH
  std::optional<std::int64_t> steps;
  std::optional<double> gamma;
  std::optional<std::string> config;
  std::optional<std::string> out;  // CSV path; stdout when absent
};

struct FitArgs {
  std::string traj;
  std::optional<std::string> config;
};

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);
int cmd_replay(const ReplayArgs& args, std::ostream& out, std::ostream& err);
int cmd_fit(const FitArgs& args, std::ostream& out, std::ostream& err);
int cmd_info(const std::optional<std::string>& config, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to a subcommand.
int run(int argc, char** argv);

}  // namespace qhe::cli
