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

#include "qhe/engine_env.hpp"

#include "qhe/errors.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace qhe {

void Action::validate() const {
  if (!(u >= qdyn::kUMin && u <= qdyn::kUMax)) {
    throw DomainError("action u = " + std::to_string(u) + " outside [0.3, 1.5]");
  }
}

}  // namespace qhe

namespace qhe::env {

double scale_to_unit(double u) {
  return 2.0 * (u - qdyn::kUMin) / (qdyn::kUMax - qdyn::kUMin) - 1.0;
}

double unit_to_scale(double x) {
  return qdyn::kUMin + 0.5 * (x + 1.0) * (qdyn::kUMax - qdyn::kUMin);
}

Observation Observation::encode(const qdyn::DensityMatrix& rho, double u_prev,
                                std::optional<Process> d_prev) {
  const qdyn::Matrix3& m = rho.matrix();
  Observation o;
  o.values = {m(0, 0).real(), m(1, 1).real(), m(2, 2).real(), m(0, 1).real(), m(0, 1).imag(),
              m(0, 2).real(), m(0, 2).imag(), m(1, 2).real(), m(1, 2).imag(),
              scale_to_unit(u_prev), 0.0, 0.0, 0.0};
  if (d_prev) o.values[10 + static_cast<std::size_t>(*d_prev)] = 1.0;
  return o;
}

EngineEnv::EngineEnv(qdyn::EngineSpec spec, EnvOptions options)
    : spec_(spec), options_(options) {
  spec_.validate();
  if (!(options_.dt > 0.0)) throw DomainError("dt must be > 0");
}

Observation EngineEnv::reset() {
  const qdyn::Matrix3 h_free = spec_.free_hamiltonian();
  rho_ = qdyn::gibbs_state(h_free, options_.init_beta);
  u_prev_ = options_.init_u_prev;
  d_prev_.reset();
  energy_end_ = qdyn::expectation_energy(rho_, options_.init_u_prev * h_free);
  initialized_ = true;
  return observe();
}

Observation EngineEnv::observe() const { return Observation::encode(rho_, u_prev_, d_prev_); }

void EngineEnv::restore(const qdyn::DensityMatrix& rho, double u_prev, std::optional<Process> d_prev,
                        double energy) {
  rho_ = rho;
  u_prev_ = u_prev;
  d_prev_ = d_prev;
  energy_end_ = energy;
  initialized_ = true;
}

StepResult EngineEnv::step(const Action& action) {
  if (!initialized_) throw DomainError("EngineEnv::step called before reset");
  action.validate();
  const qdyn::ProcessParams process = qdyn::ProcessParams::for_process(action.d, spec_);
  const qdyn::Matrix3 h_start = qdyn::build_hamiltonian(spec_, action.u, 0.0, process.drive_on);
  const double e_start = qdyn::expectation_energy(rho_, h_start);

  qdyn::DensityMatrix next =
      qdyn::lindblad_propagate(rho_, process, action.u, options_.dt, spec_, options_.propagation);
  const qdyn::Matrix3 h_end =
      qdyn::build_hamiltonian(spec_, action.u, options_.dt, process.drive_on);
  const double e_end = qdyn::expectation_energy(next, h_end);

  StepResult out;
  out.delta_E = e_end - e_start;
  out.info.quench_work_in = e_start - energy_end_;
  switch (action.d) {
    case Process::Hot:
      out.info.heat_into_system_h = out.delta_E;
      out.reward = out.delta_E / options_.dt;
      break;
    case Process::Cold:
      out.info.heat_into_system_c = out.delta_E;
      out.reward = out.delta_E / options_.dt;
      break;
    case Process::Work:
      out.info.work_out = -out.delta_E;
      out.reward = 0.0;
      break;
  }

  rho_ = std::move(next);
  u_prev_ = action.u;
  d_prev_ = action.d;
  energy_end_ = e_end;
  out.obs = observe();
  return out;
}

DiscountedAverage::DiscountedAverage(double gamma) : gamma_(gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("discount gamma must lie in [0, 1)");
}

double DiscountedAverage::push(double value) {
  value_ = gamma_ * value_ + (1.0 - gamma_) * value;
  return value_;
}

std::vector<double> discounted_average(std::span<const double> values, double gamma) {
  DiscountedAverage avg(gamma);
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(avg.push(v));
  return out;
}

CycleSchedule::CycleSchedule(std::vector<Action> period, std::string tag)
    : period_(std::move(period)), tag_(std::move(tag)) {
  if (period_.empty()) throw DomainError("cycle schedule must not be empty");
  for (const Action& a : period_) a.validate();
}

std::vector<Action> constant_segment(Process d, double u, std::size_t steps) {
  Action a{d, u};
  a.validate();
  return std::vector<Action>(steps, a);
}

std::vector<Action> linear_ramp(double from, double to, std::size_t steps) {
  std::vector<Action> out;
  out.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const double frac = static_cast<double>(k + 1) / static_cast<double>(steps);
    Action a{Process::Work, from + (to - from) * frac};
    a.validate();
    out.push_back(a);
  }
  return out;
}

std::vector<Action> boltzmann_segment(const fit::BoltzmannParams& params, double t_first,
                                      std::size_t steps) {
  std::vector<Action> out;
  out.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    Action a{Process::Work, fit::boltzmann_eval(params, t_first + static_cast<double>(k))};
    a.validate();
    out.push_back(a);
  }
  return out;
}

std::vector<double> Trajectory::rewards() const {
  std::vector<double> r;
  r.reserve(records.size());
  for (const StepRecord& rec : records) r.push_back(rec.reward);
  return r;
}

std::vector<Action> Trajectory::actions() const {
  std::vector<Action> a;
  a.reserve(records.size());
  for (const StepRecord& rec : records) a.push_back(rec.action);
  return a;
}

Trajectory rollout(EngineEnv& env, std::size_t n_steps, double gamma, const ActionSource& source) {
  DiscountedAverage avg(gamma);
  Trajectory traj;
  traj.records.reserve(n_steps);
  traj.avg_power.reserve(n_steps);
  Observation obs = env.reset();
  for (std::size_t i = 0; i < n_steps; ++i) {
    const Action action = source(obs, i);
    StepResult res;
    try {
      res = env.step(action);
    } catch (const IntegrationError& e) {
      throw IntegrationError("step " + std::to_string(i) + ": " + e.what());
    }
    StepRecord rec;
    rec.obs = obs;
    rec.action = action;
    rec.reward = res.reward;
    rec.next_obs = res.obs;
    rec.delta_E = res.delta_E;
    rec.kind = action.d;
    rec.info = res.info;
    rec.rho_after = env.state().matrix();
    traj.records.push_back(rec);
    traj.avg_power.push_back(avg.push(res.reward));
    obs = res.obs;
  }
  return traj;
}

Trajectory run_schedule(const CycleSchedule& schedule, std::size_t n_steps, double gamma,
                        const qdyn::EngineSpec& spec, const EnvOptions& options) {
  EngineEnv env(spec, options);
  return rollout(env, n_steps, gamma,
                 [&](const Observation&, std::size_t step) { return schedule.at(step); });
}

}  // namespace qhe::env
