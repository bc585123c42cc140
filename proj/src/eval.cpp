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

#include "qhe/eval.hpp"

#include "qhe/errors.hpp"

#include <fmt/format.h>

#include <cmath>

namespace qhe::eval {

std::vector<double> entropy_production_trace(const env::Trajectory& traj, double gamma,
                                             const qdyn::EngineSpec& spec) {
  env::DiscountedAverage avg(gamma);
  std::vector<double> out;
  out.reserve(traj.records.size());
  for (const env::StepRecord& r : traj.records) {
    double sigma = 0.0;
    if (r.kind == Process::Hot) sigma = -spec.beta_h * r.reward;
    if (r.kind == Process::Cold) sigma = -spec.beta_c * r.reward;
    out.push_back(avg.push(sigma));
  }
  return out;
}

double carnot_efficiency(double beta_c, double beta_h) { return 1.0 - beta_h / beta_c; }

double curzon_ahlborn_efficiency(double beta_c, double beta_h) {
  return 1.0 - std::sqrt(beta_h / beta_c);
}

EfficiencyReport efficiency(double avg_power, double avg_sigma, double beta_c, double beta_h) {
  if (!(avg_power > 0.0)) {
    throw UndefinedEfficiencyError("efficiency is undefined for non-positive average power " +
                                   format_double(avg_power));
  }
  EfficiencyReport r;
  r.avg_power = avg_power;
  r.avg_entropy_production = avg_sigma;
  r.eta_carnot = carnot_efficiency(beta_c, beta_h);
  r.eta_ca = curzon_ahlborn_efficiency(beta_c, beta_h);
  r.eta = r.eta_carnot / (1.0 + avg_sigma / (beta_c * avg_power));
  return r;
}

EfficiencyReport efficiency_of(const env::Trajectory& traj, double gamma,
                               const qdyn::EngineSpec& spec) {
  const std::vector<double> sigma = entropy_production_trace(traj, gamma, spec);
  return efficiency(traj.final_avg_power(), sigma.empty() ? 0.0 : sigma.back(), spec.beta_c,
                    spec.beta_h);
}

PeriodBalance period_balance(const env::Trajectory& traj, std::size_t period, double dt,
                             const qdyn::EngineSpec& spec) {
  if (period == 0 || traj.records.size() < period) {
    throw DomainError("trajectory shorter than one period");
  }
  PeriodBalance b;
  for (std::size_t i = traj.records.size() - period; i < traj.records.size(); ++i) {
    const env::StepInfo& info = traj.records[i].info;
    b.heat_in_h += info.heat_into_system_h;
    b.heat_in_c += info.heat_into_system_c;
    b.work_out += info.work_out - info.quench_work_in;
  }
  b.sigma = -spec.beta_c * b.heat_in_c - spec.beta_h * b.heat_in_h;
  b.duration = static_cast<double>(period) * dt;
  return b;
}

std::string_view to_string(BaselineTag tag) {
  switch (tag) {
    case BaselineTag::Cycle1: return "Cycle1";
    case BaselineTag::Cycle2: return "Cycle2";
    case BaselineTag::Cycle3RL: return "Cycle3-RL";
    case BaselineTag::FittedOtto: return "FittedOtto";
  }
  return "?";
}

BaselineTag baseline_from_string(std::string_view name) {
  if (name == "Cycle1" || name == "cycle1") return BaselineTag::Cycle1;
  if (name == "Cycle2" || name == "cycle2") return BaselineTag::Cycle2;
  if (name == "Cycle3-RL" || name == "cycle3") return BaselineTag::Cycle3RL;
  if (name == "FittedOtto" || name == "fitted") return BaselineTag::FittedOtto;
  throw DomainError("unknown cycle '" + std::string(name) + "'");
}

env::CycleSchedule fitted_schedule(const fit::FittedCycle& c, std::string tag) {
  if (c.tau1 <= 0 || c.tau2 <= 0 || c.tau3 <= 0 || c.tau4 <= 0) {
    throw DomainError("stroke durations must be positive");
  }
  std::vector<Action> p;
  auto append = [&p](const std::vector<Action>& seg) { p.insert(p.end(), seg.begin(), seg.end()); };
  double t = c.first_time;
  append(env::boltzmann_segment(c.working1, t, static_cast<std::size_t>(c.tau1)));
  t += c.tau1;
  append(env::constant_segment(Process::Hot, c.heating_u, static_cast<std::size_t>(c.tau2)));
  t += c.tau2;
  append(env::boltzmann_segment(c.working2, t, static_cast<std::size_t>(c.tau3)));
  append(env::constant_segment(Process::Cold, c.cooling_u, static_cast<std::size_t>(c.tau4)));
  return env::CycleSchedule(std::move(p), std::move(tag));
}

namespace {

env::CycleSchedule ramp_schedule(const RampCycle& r, const fit::FittedCycle& strokes,
                                 std::string tag) {
  if (r.up_steps == 0 || r.down_steps == 0) throw DomainError("ramp lengths must be positive");
  std::vector<Action> p;
  auto append = [&p](const std::vector<Action>& seg) { p.insert(p.end(), seg.begin(), seg.end()); };
  append(env::constant_segment(Process::Hot, strokes.heating_u, 1));
  append(env::linear_ramp(r.u_high, r.u_low, r.down_steps));
  append(env::constant_segment(Process::Cold, strokes.cooling_u, 1));
  append(env::linear_ramp(r.u_low, r.u_high, r.up_steps));
  return env::CycleSchedule(std::move(p), std::move(tag));
}

}  // namespace

BaselineCycle build_baseline_cycle(BaselineTag tag, const BaselineOptions& o) {
  const std::string name(to_string(tag));
  switch (tag) {
    case BaselineTag::Cycle1: return {tag, ramp_schedule(o.cycle1, o.fitted, name)};
    case BaselineTag::Cycle2: return {tag, ramp_schedule(o.cycle2, o.fitted, name)};
    case BaselineTag::Cycle3RL:
    case BaselineTag::FittedOtto: return {tag, fitted_schedule(o.fitted, name)};
  }
  throw DomainError("unknown baseline tag");
}

SteadyComparison compare_to_steady(double avg_power) {
  SteadyComparison c;
  c.ratio = avg_power / kSteadyReferencePower;
  return c;
}

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

KeyValues report(double avg_power, double avg_sigma, const qdyn::EngineSpec& spec) {
  KeyValues kv;
  kv.emplace_back("power", format_double(avg_power));
  kv.emplace_back("sigma", format_double(avg_sigma));
  if (avg_power > 0.0) {
    kv.emplace_back("eta", format_double(efficiency(avg_power, avg_sigma, spec.beta_c, spec.beta_h).eta));
  } else {
    kv.emplace_back("eta", "undefined");
  }
  kv.emplace_back("eta_c", format_double(carnot_efficiency(spec.beta_c, spec.beta_h)));
  kv.emplace_back("eta_CA", format_double(curzon_ahlborn_efficiency(spec.beta_c, spec.beta_h)));
  kv.emplace_back("ratio_vs_steady", format_double(compare_to_steady(avg_power).ratio));
  return kv;
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

}  // namespace qhe::eval
