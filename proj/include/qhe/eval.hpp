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

// Thermodynamic scoring of trajectories and the reference cycles.

#include "qhe/engine_env.hpp"
#include "qhe/fit.hpp"

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qhe::eval {

/// Average power of the simultaneous-coupling steady-state engine, taken
/// from the literature rather than computed here.
inline constexpr double kSteadyReferencePower = 0.399;
inline constexpr std::string_view kSteadyReferenceSource =
    "external constant: steady-state engine with simultaneous bath coupling";

/// Per-step sigma_i = -beta_active * reward_i (zero for Work), discounted
/// exactly like the power.
std::vector<double> entropy_production_trace(const env::Trajectory& traj, double gamma,
                                             const qdyn::EngineSpec& spec = {});

double carnot_efficiency(double beta_c, double beta_h);
double curzon_ahlborn_efficiency(double beta_c, double beta_h);

struct EfficiencyReport {
  double avg_power = 0.0;
  double avg_entropy_production = 0.0;
  double eta = 0.0;
  double eta_carnot = 0.0;
  double eta_ca = 0.0;
};

/// eta = eta_c / (1 + sigma / (beta_c P)). Throws UndefinedEfficiencyError
/// when P <= 0.
EfficiencyReport efficiency(double avg_power, double avg_sigma, double beta_c, double beta_h);
/// Scores the final discounted power and entropy production of `traj`.
EfficiencyReport efficiency_of(const env::Trajectory& traj, double gamma,
                               const qdyn::EngineSpec& spec = {});

/// Undiscounted heat and work over the last `period` steps.
struct PeriodBalance {
  double heat_in_h = 0.0;
  double heat_in_c = 0.0;
  double work_out = 0.0;  // net, including the quenches
  double sigma = 0.0;     // -beta_c Q_c - beta_h Q_h
  double duration = 0.0;

  double efficiency() const { return work_out / heat_in_h; }
};
PeriodBalance period_balance(const env::Trajectory& traj, std::size_t period, double dt,
                             const qdyn::EngineSpec& spec = {});

enum class BaselineTag { Cycle1, Cycle2, Cycle3RL, FittedOtto };
std::string_view to_string(BaselineTag tag);
/// Accepts the display names and the short CLI names (cycle1, fitted, ...).
BaselineTag baseline_from_string(std::string_view name);

/// Work ramps between the two extreme u values for the linear baselines.
struct RampCycle {
  std::size_t up_steps = 1;
  std::size_t down_steps = 2;
  double u_high = qdyn::kUMax;
  double u_low = qdyn::kUMin;
};

struct BaselineOptions {
  fit::FittedCycle fitted;
  RampCycle cycle1{1, 2};
  RampCycle cycle2{2, 6};
};

struct BaselineCycle {
  BaselineTag tag = BaselineTag::FittedOtto;
  env::CycleSchedule schedule;
};

/// Schedule of the four-stroke cycle, working-1 first.
env::CycleSchedule fitted_schedule(const fit::FittedCycle& cycle, std::string tag = "FittedOtto");
BaselineCycle build_baseline_cycle(BaselineTag tag, const BaselineOptions& options = {});

struct SteadyComparison {
  double ratio = 0.0;
  double reference = kSteadyReferencePower;
  std::string_view source = kSteadyReferenceSource;
};
SteadyComparison compare_to_steady(double avg_power);

/// Flat ordered key-value document.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// power, sigma, eta, eta_c, eta_CA, ratio_vs_steady; eta is "undefined"
/// when the power is not positive.
KeyValues report(double avg_power, double avg_sigma, const qdyn::EngineSpec& spec = {});
std::string format_key_values(const KeyValues& kv);
std::string format_double(double v);

}  // namespace qhe::eval
