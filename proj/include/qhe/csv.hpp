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

// Plot-ready CSV output. Floats carry 17 significant digits; report lines
// trail the table as "# key=value".

#include "qhe/engine_env.hpp"
#include "qhe/eval.hpp"
#include "qhe/sac.hpp"

#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace qhe::csv {

inline constexpr std::string_view kTrajectoryHeader =
    "step,d,u,reward,p0,p1,p2,re_rho12,im_rho12,avg_power";
inline constexpr std::string_view kTrainLogHeader =
    "step,L_Q,L_pi,alpha_D,alpha_C,H_D,H_C,Hbar_D,Hbar_C,eval_avg_power";

void write_trajectory(std::ostream& out, const env::Trajectory& traj,
                      const eval::KeyValues& trailer = {});

struct TrajectoryRow {
  std::size_t step = 0;
  Action action;
  double reward = 0.0;
  double avg_power = 0.0;
};

struct TrajectoryTable {
  std::vector<TrajectoryRow> rows;
  eval::KeyValues trailer;

  std::vector<Action> actions() const;
};

/// Throws IntegrityError on a wrong header or malformed row.
TrajectoryTable read_trajectory(std::istream& in);

void write_train_log_header(std::ostream& out);
void write_train_log_row(std::ostream& out, const sac::TrainLogRow& row);

}  // namespace qhe::csv
