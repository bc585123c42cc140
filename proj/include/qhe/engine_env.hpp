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

// The engine as a stepped control environment.
//
// Each step applies one Action for dt = 0.5: the density matrix is
// propagated under the chosen stroke and the reward is the rate of change
// of tr(rho H) during thermal strokes (zero for Work). The change of u
// between strokes is a sudden quench; its energy is reported separately in
// StepInfo::quench_work_in so that per-period energy bookkeeping closes.

#include "qhe/action.hpp"
#include "qhe/fit.hpp"
#include "qhe/qdyn.hpp"

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qhe::env {

inline constexpr int kObservationDim = 13;

/// u in [kUMin, kUMax] mapped affinely onto [-1, 1], and back.
double scale_to_unit(double u);
double unit_to_scale(double x);

struct Observation {
  // 0-2 populations, 3-8 Re/Im of rho01, rho02, rho12, 9 previous u in
  // [-1, 1], 10-12 one-hot of the previous process (all zero after reset).
  std::array<double, kObservationDim> values{};

  static Observation encode(const qdyn::DensityMatrix& rho, double u_prev,
                            std::optional<Process> d_prev);

  double population(int level) const { return values[static_cast<std::size_t>(level)]; }
  std::span<const double> span() const { return values; }

  friend bool operator==(const Observation&, const Observation&) = default;
};

struct StepInfo {
  double heat_into_system_h = 0.0;
  double heat_into_system_c = 0.0;
  double work_out = 0.0;        // -delta_E of a Work stroke
  double quench_work_in = 0.0;  // energy change from switching H at stroke start
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  double delta_E = 0.0;
  StepInfo info;
};

struct StepRecord {
  Observation obs;
  Action action;
  double reward = 0.0;
  Observation next_obs;
  double delta_E = 0.0;
  Process kind = Process::Work;
  StepInfo info;
  qdyn::Matrix3 rho_after = qdyn::Matrix3::Zero();
};

struct EnvOptions {
  double dt = 0.5;
  double init_beta = 3.0;
  double init_u_prev = 1.0;
  qdyn::PropagationOptions propagation;
};

/// Single-threaded stateful engine. Not thread-safe; use one per context.
class EngineEnv {
 public:
  explicit EngineEnv(qdyn::EngineSpec spec = {}, EnvOptions options = {});

  /// Gibbs state of H_free at init_beta; u_prev = init_u_prev, no previous process.
  Observation reset();
  StepResult step(const Action& action);

  Observation observe() const;
  const qdyn::DensityMatrix& state() const { return rho_; }
  double u_prev() const { return u_prev_; }
  std::optional<Process> d_prev() const { return d_prev_; }
  const qdyn::EngineSpec& spec() const { return spec_; }
  const EnvOptions& options() const { return options_; }
  bool is_reset() const { return initialized_; }

  /// Restores a state captured from observe()/state() (used by checkpoints).
  void restore(const qdyn::DensityMatrix& rho, double u_prev, std::optional<Process> d_prev,
               double energy);
  /// tr(rho H) with the Hamiltonian in force at the end of the last step.
  double energy() const { return energy_end_; }

 private:
  qdyn::EngineSpec spec_;
  EnvOptions options_;
  qdyn::DensityMatrix rho_;
  double u_prev_ = 1.0;
  std::optional<Process> d_prev_;
  double energy_end_ = 0.0;
  bool initialized_ = false;
};

/// Streaming form of the discounted running average
/// avg_i = gamma * avg_{i-1} + (1 - gamma) * v_i, avg_{-1} = 0.
class DiscountedAverage {
 public:
  explicit DiscountedAverage(double gamma);
  double push(double value);
  double value() const { return value_; }

 private:
  double gamma_;
  double value_ = 0.0;
};

/// Running discounted averages of `values`. Throws DomainError unless
/// 0 <= gamma < 1.
std::vector<double> discounted_average(std::span<const double> values, double gamma);

/// A periodic sequence of actions replayed cyclically.
class CycleSchedule {
 public:
  CycleSchedule(std::vector<Action> period, std::string tag = {});

  const Action& at(std::size_t step) const { return period_[step % period_.size()]; }
  std::size_t period_length() const { return period_.size(); }
  const std::vector<Action>& period() const { return period_; }
  const std::string& tag() const { return tag_; }

 private:
  std::vector<Action> period_;
  std::string tag_;
};

/// Segment generators used to assemble schedules.
std::vector<Action> constant_segment(Process d, double u, std::size_t steps);
/// Work strokes whose u moves linearly from `from` toward `to`, the k-th
/// (0-based) at from + (to - from) * (k + 1) / steps.
std::vector<Action> linear_ramp(double from, double to, std::size_t steps);
/// Work strokes sampled from the sigmoid at t_first, t_first + 1, ...
std::vector<Action> boltzmann_segment(const fit::BoltzmannParams& params, double t_first,
                                      std::size_t steps);

struct Trajectory {
  std::vector<StepRecord> records;
  std::vector<double> avg_power;

  double final_avg_power() const { return avg_power.empty() ? 0.0 : avg_power.back(); }
  std::vector<double> rewards() const;
  std::vector<Action> actions() const;
};

using ActionSource = std::function<Action(const Observation& obs, std::size_t step)>;

/// Resets `env` and runs n_steps actions from `source`. Integration errors
/// are rethrown with the failing step index.
Trajectory rollout(EngineEnv& env, std::size_t n_steps, double gamma, const ActionSource& source);

Trajectory run_schedule(const CycleSchedule& schedule, std::size_t n_steps, double gamma,
                        const qdyn::EngineSpec& spec = {}, const EnvOptions& options = {});

}  // namespace qhe::env
