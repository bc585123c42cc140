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

// Acceptance runner: one PASS/FAIL/SKIP line per criterion. Criteria 7 and
// 8 train agents for hours and run only with --slow / --full.

#include "checks.hpp"
#include "qhe/errors.hpp"
#include "qhe/eval.hpp"
#include "qhe/fit.hpp"
#include "qhe/sac.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

using namespace qhe;

namespace {

enum class Verdict { Pass, Fail, Skip };

struct Result {
  Verdict verdict = Verdict::Fail;
  std::string measured;
};

struct Criterion {
  int id;
  std::string title;
  double budget_seconds;  // <= 0: no runtime limit
  std::function<Result()> run;
};

Result pass_if(bool ok, std::string measured) { return {ok ? Verdict::Pass : Verdict::Fail, std::move(measured)}; }

std::string outcome_text(const checks::Outcome& o) {
  return o.ok ? fmt::format("worst={:.3g}", o.worst) : fmt::format("worst={:.3g} at {}", o.worst, o.detail);
}

constexpr double kGamma = 0.995;

env::Trajectory fitted_run() {
  const eval::BaselineCycle c = eval::build_baseline_cycle(eval::BaselineTag::FittedOtto);
  return env::run_schedule(c.schedule, 1000, kGamma);
}

Result fitted_power() {
  const double p = fitted_run().final_avg_power();
  return pass_if(std::abs(p / 0.837 - 1.0) <= 0.10, fmt::format("<P>={:.6f} target 0.837 +-10%", p));
}

Result fitted_efficiency() {
  const env::Trajectory traj = fitted_run();
  try {
    const eval::EfficiencyReport r = eval::efficiency_of(traj, kGamma);
    const bool ok = std::abs(r.eta - 0.654) <= 0.05 && r.eta > r.eta_ca && r.eta < r.eta_carnot;
    return pass_if(ok, fmt::format("eta={:.6f} target 0.654 +-0.05 within ({:.4f}, {:.1f})", r.eta, r.eta_ca,
                                   r.eta_carnot));
  } catch (const UndefinedEfficiencyError&) {
    return {Verdict::Fail, fmt::format("eta undefined: <P>={:.6f} is not positive", traj.final_avg_power())};
  }
}

Result thermalization() {
  env::EngineEnv e;
  e.reset();
  const double p2_start = e.state().populations()(2);
  for (int i = 0; i < 200; ++i) e.step({Process::Cold, 0.3});
  const Eigen::Vector3d cold = e.state().populations();
  env::EngineEnv h;
  h.reset();
  for (int i = 0; i < 200; ++i) h.step({Process::Hot, 1.5});
  const Eigen::Vector3d hot = h.state().populations();
  const double r10 = cold(1) / cold(0);
  const double r20 = hot(2) / hot(0);
  const double dp2 = std::abs(cold(2) - p2_start);
  const bool ok = std::abs(r10 - std::exp(-1.5)) <= 1e-3 && dp2 <= 1e-9 && std::abs(r20 - std::exp(-3.75)) <= 1e-3;
  return pass_if(ok, fmt::format("p1/p0={:.6f} (e^-1.5={:.6f}) |dp2|={:.2e} p2/p0={:.6f} (e^-3.75={:.6f})", r10,
                                 std::exp(-1.5), dp2, r20, std::exp(-3.75)));
}

Result property_suite() {
  const std::vector<std::pair<std::string, checks::Outcome>> parts{
      {"cptp", checks::cptp_random_steps(1000, 101)},
      {"choi", checks::complete_positivity(30, 102)},
      {"work-spectrum", checks::work_spectrum(200, 103)},
      {"recursion", checks::discount_recursion(104)},
      {"first-law",
       checks::first_law_closure(eval::build_baseline_cycle(eval::BaselineTag::FittedOtto).schedule, 10, 105)},
      {"target-hull", checks::target_convex_hull(20, 106)},
      {"u-bounds", checks::sampled_u_bounded(2000, 107)},
      {"schedule-endpoints", checks::schedule_endpoints()},
  };
  bool ok = true;
  std::string text;
  for (const auto& [name, o] : parts) {
    ok = ok && o.ok;
    text += fmt::format("{}{}:{}", text.empty() ? "" : " ", name, outcome_text(o));
  }
  return pass_if(ok, text);
}

Result gradient_suite() {
  const checks::GradientOutcome g = checks::gradient_cases(50, 201);
  return pass_if(g.critic.ok && g.actor.ok && g.temperature.ok,
                 fmt::format("50 cases critic:{} actor:{} temperature:{} (tol 1e-4)", outcome_text(g.critic),
                             outcome_text(g.actor), outcome_text(g.temperature)));
}

Result fit_round_trip() {
  const fit::BoltzmannParams truth{1.497, 0.300, 10.25, 0.25};
  std::vector<fit::Point> pts;
  for (double t = 8.5; t <= 12.0 + 1e-12; t += 0.5) pts.push_back({t, fit::boltzmann_eval(truth, t)});
  const fit::FitResult r = fit::fit_boltzmann(pts);
  const double err = std::max({std::abs(r.params.A1 - truth.A1), std::abs(r.params.A2 - truth.A2),
                               std::abs(r.params.t0 - truth.t0), std::abs(r.params.dt - truth.dt)});
  const bool round_trip = err <= 1e-6 && std::abs(r.r_squared - 1.0) <= 1e-12;

  const eval::BaselineCycle c = eval::build_baseline_cycle(eval::BaselineTag::FittedOtto);
  const std::vector<Action> actions = fitted_run().actions();
  double r2 = NAN;
  for (const fit::SegmentFit& s : fit::fit_cycle(actions).segments) {
    if (s.label == fit::SegmentLabel::Working2 && s.fit) r2 = s.fit->r_squared;
  }
  return pass_if(round_trip && r2 >= 0.98,
                 fmt::format("max param error={:.2e} R2={:.15f}; working-2 R2={:.6f} (>= 0.98)", err,
                             r.r_squared, r2));
}

sac::TrainConfig reference_training(std::int64_t steps) {
  sac::TrainConfig c;
  c.total_steps = steps;
  return c;
}

/// Best deterministic evaluation power of independent training runs.
std::vector<double> train_seeds(std::int64_t steps, int seeds) {
  std::vector<double> best;
  for (int s = 1; s <= seeds; ++s) {
    sac::Trainer t(reference_training(steps), static_cast<std::uint64_t>(s));
    t.run([&](const sac::TrainLogRow& row) {
      fmt::print(stderr, "  seed {} step {} eval {:.6f}\n", s, row.step, row.eval_avg_power);
    });
    best.push_back(t.best_eval_power());
  }
  return best;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (double x : v) out += fmt::format("{}{:.4f}", out.empty() ? "" : ",", x);
  return out;
}

Result training_smoke() {
  const std::vector<double> best = train_seeds(100000, 5);
  const auto hits = std::count_if(best.begin(), best.end(), [](double p) { return p >= 0.60; });
  return pass_if(hits >= 3, fmt::format("best eval <P> per seed [{}]; {} of 5 >= 0.60 (need 3)", join(best), hits));
}

Result full_reproduction() {
  const std::vector<double> best = train_seeds(500000, 5);
  double mean = 0.0;
  for (double p : best) mean += p / static_cast<double>(best.size());
  return pass_if(std::abs(mean / 0.91 - 1.0) <= 0.10,
                 fmt::format("best eval <P> per seed [{}]; mean {:.4f} target 0.91 +-10%, ratio vs steady {:.3f}",
                             join(best), mean, eval::compare_to_steady(mean).ratio));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  bool slow = false;
  bool full = false;
  app.add_option("--only", only, "run only these criteria");
  app.add_flag("--slow", slow, "run the training smoke criterion (hours)");
  app.add_flag("--full", full, "run the full reproduction criterion (many hours)");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "fitted-cycle power", 10.0, fitted_power},
      {2, "fitted-cycle efficiency", 10.0, fitted_efficiency},
      {3, "thermalization fixed points", 2.0, thermalization},
      {4, "property suite", 30.0, property_suite},
      {5, "gradient checks", 30.0, gradient_suite},
      {6, "fit round trip", 5.0, fit_round_trip},
      {7, "training smoke (slow tier)", 0.0, slow ? std::function<Result()>(training_smoke) : nullptr},
      {8, "full reproduction (optional tier)", 0.0, full ? std::function<Result()>(full_reproduction) : nullptr},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    if (!c.run) {
      fmt::print("criterion {}: SKIP {} (needs {})\n", c.id, c.title, c.id == 7 ? "--slow" : "--full");
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    Result r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r = {Verdict::Fail, fmt::format("threw: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = fmt::format("{:.2f}s", secs);
    if (c.budget_seconds > 0.0) {
      timing += fmt::format(" of {:.0f}s budget", c.budget_seconds);
      if (secs > c.budget_seconds && r.verdict == Verdict::Pass) {
        r.verdict = Verdict::Fail;
        r.measured += "; over runtime budget";
      }
    }
    const char* word = r.verdict == Verdict::Pass ? "PASS" : r.verdict == Verdict::Fail ? "FAIL" : "SKIP";
    failures += r.verdict == Verdict::Fail;
    fmt::print("criterion {}: {} {} | {} | {}\n", c.id, word, c.title, r.measured, timing);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
