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

#include "commands.hpp"

#include "qhe/checkpoint.hpp"
#include "qhe/config.hpp"
#include "qhe/csv.hpp"
#include "qhe/errors.hpp"
#include "qhe/eval.hpp"
#include "qhe/fit.hpp"
#include "qhe/sac.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace qhe::cli {

namespace fs = std::filesystem;

namespace {

config::RunConfig load_config(const std::optional<std::string>& path) {
  return path ? config::load(*path) : config::defaults();
}

std::string fmt_double(double v) { return eval::format_double(v); }

eval::KeyValues trajectory_report(const env::Trajectory& traj, double gamma,
                                  const qdyn::EngineSpec& spec) {
  const std::vector<double> sigma = eval::entropy_production_trace(traj, gamma, spec);
  return eval::report(traj.final_avg_power(), sigma.empty() ? 0.0 : sigma.back(), spec);
}

bool efficiency_defined(const env::Trajectory& traj) { return traj.final_avg_power() > 0.0; }

}  // namespace

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  config::RunConfig cfg;
  std::optional<checkpoint::Checkpoint> resume;
  try {
    cfg = load_config(args.config);
    if (args.seed) cfg.run.seed = *args.seed;
    if (args.out) cfg.run.output_dir = *args.out;
    if (args.steps) cfg.train.total_steps = *args.steps;
    if (args.resume) resume = checkpoint::load(*args.resume);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const IntegrityError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kConfigError;
  } catch (const VersionError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kConfigError;
  }

  const fs::path dir(cfg.run.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  const std::string tag = fmt::format("seed{}", cfg.run.seed);
  const fs::path log_path = dir / fmt::format("train_log_{}.csv", tag);
  const fs::path ckpt_path = dir / fmt::format("checkpoint_{}.json", tag);
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) {
    err << "cannot write " << log_path.string() << '\n';
    return kConfigError;
  }
  csv::write_train_log_header(log);

  std::optional<sac::Trainer> trainer;
  if (resume) {
    trainer.emplace(cfg.train, resume->state, cfg.engine);
  } else {
    trainer.emplace(cfg.train, cfg.run.seed, cfg.engine);
  }
  const nlohmann::json echo = config::to_json(cfg);
  auto save = [&] { checkpoint::save(ckpt_path, {echo, trainer->snapshot()}); };

  try {
    while (trainer->step_count() < cfg.train.total_steps) {
      if (auto row = trainer->step()) {
        csv::write_train_log_row(log, *row);
        log.flush();
        out << fmt::format("step {} eval_avg_power {}\n", row->step, fmt_double(row->eval_avg_power));
      }
      if (trainer->step_count() % cfg.run.checkpoint_every == 0) save();
    }
  } catch (const NonFiniteError& e) {
    save();
    err << "training diverged at step " << trainer->step_count() << ": " << e.what()
        << "; checkpoint written to " << ckpt_path.string() << '\n';
    return kDivergence;
  }
  save();

  if (const auto& best = trainer->best_trajectory()) {
    const eval::KeyValues kv = trajectory_report(*best, cfg.train.gamma, cfg.engine);
    std::ofstream traj_out(dir / fmt::format("best_eval_{}.csv", tag), std::ios::trunc);
    csv::write_trajectory(traj_out, *best, kv);
    std::ofstream rep(dir / fmt::format("report_{}.txt", tag), std::ios::trunc);
    rep << "best_eval_step=" << trainer->snapshot().best_eval_step << '\n' << eval::format_key_values(kv);
    out << eval::format_key_values(kv);
  }
  return kOk;
}

int cmd_replay(const ReplayArgs& args, std::ostream& out, std::ostream& err) {
  config::RunConfig cfg;
  try {
    cfg = load_config(args.config);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  const double gamma = args.gamma.value_or(cfg.eval.gamma);
  const std::int64_t steps = args.steps.value_or(cfg.eval.steps);
  if (!(gamma >= 0.0 && gamma < 1.0) || steps < 0) {
    err << "replay: gamma must lie in [0, 1) and steps must be non-negative\n";
    return kConfigError;
  }
  env::EnvOptions options;
  options.dt = cfg.train.dt;

  env::Trajectory traj;
  qdyn::EngineSpec spec = cfg.engine;
  const std::string prefix = "checkpoint:";
  if (args.cycle.rfind(prefix, 0) == 0) {
    const std::string path = args.cycle.substr(prefix.size());
    sac::PolicyNet policy;
    try {
      const checkpoint::Checkpoint c = checkpoint::load(path);
      if (c.config.is_object()) {
        const config::RunConfig saved = config::from_json(c.config);
        spec = saved.engine;
        options.dt = saved.train.dt;
      }
      policy = c.state.policy;
    } catch (const std::exception& e) {
      err << "cannot load checkpoint " << path << ": " << e.what() << '\n';
      return kConfigError;
    }
    env::EngineEnv engine(spec, options);
    Rng unused;
    traj = env::rollout(engine, static_cast<std::size_t>(steps), gamma,
                        [&](const env::Observation& obs, std::size_t) {
                          return sac::sample_action(policy, obs, sac::SampleMode::Deterministic, unused).action;
                        });
  } else {
    eval::BaselineTag tag;
    try {
      tag = eval::baseline_from_string(args.cycle);
    } catch (const DomainError& e) {
      err << e.what() << '\n';
      return kConfigError;
    }
    const eval::BaselineCycle cycle = eval::build_baseline_cycle(tag, cfg.baselines);
    traj = env::run_schedule(cycle.schedule, static_cast<std::size_t>(steps), gamma, spec, options);
  }

  const eval::KeyValues kv = trajectory_report(traj, gamma, spec);
  if (args.out) {
    std::ofstream file(*args.out, std::ios::trunc);
    if (!file) {
      err << "cannot write " << *args.out << '\n';
      return kConfigError;
    }
    csv::write_trajectory(file, traj, kv);
    out << eval::format_key_values(kv);
  } else {
    csv::write_trajectory(out, traj, kv);
  }
  if (!efficiency_defined(traj)) {
    err << "efficiency undefined: average power " << fmt_double(traj.final_avg_power())
        << " is not positive\n";
    return kUndefinedEfficiency;
  }
  return kOk;
}

int cmd_fit(const FitArgs& args, std::ostream& out, std::ostream& err) {
  config::RunConfig cfg;
  try {
    cfg = load_config(args.config);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  std::ifstream in(args.traj);
  if (!in) {
    err << "cannot open trajectory " << args.traj << '\n';
    return kConfigError;
  }
  csv::TrajectoryTable table;
  try {
    table = csv::read_trajectory(in);
  } catch (const IntegrityError& e) {
    err << e.what() << '\n';
    return kConfigError;
  }
  const std::vector<Action> actions = table.actions();
  fit::CycleFit cf;
  try {
    cf = fit::fit_cycle(actions, cfg.baselines.fitted.first_time, cfg.fit.max_period);
  } catch (const NoPeriodError& e) {
    err << "no period: " << e.what() << '\n';
    return kNoPeriod;
  }
  out << fmt::format("period={} onset={}\n", cf.period.period, cf.period.onset);
  out << "segment,steps,t_min,t_max,A1,A2,t0,dt,R2\n";
  for (const fit::SegmentFit& s : cf.segments) {
    const double t_min = s.points.front().t;
    const double t_max = s.points.back().t;
    if (s.fit) {
      const fit::BoltzmannParams& p = s.fit->params;
      out << fmt::format("{},{},{},{},{},{},{},{},{}\n", fit::to_string(s.label), s.steps, t_min, t_max,
                         fmt_double(p.A1), fmt_double(p.A2), fmt_double(p.t0), fmt_double(p.dt),
                         fmt_double(s.fit->r_squared));
    } else {
      out << fmt::format("{},{},{},{},u={},,,,\n", fit::to_string(s.label), s.steps, t_min, t_max,
                         fmt_double(s.points.front().u));
    }
  }
  return kOk;
}

int cmd_info(const std::optional<std::string>& config_path, std::ostream& out, std::ostream& err) {
  config::RunConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  const qdyn::EngineSpec& s = cfg.engine;
  out << "config=" << config::to_json(cfg).dump() << '\n';
  out << "eta_c=" << fmt_double(eval::carnot_efficiency(s.beta_c, s.beta_h)) << '\n';
  out << "eta_CA=" << fmt_double(eval::curzon_ahlborn_efficiency(s.beta_c, s.beta_h)) << '\n';
  out << "steady_reference_power=" << fmt_double(eval::kSteadyReferencePower) << '\n';
  for (double u : {qdyn::kUMin, 1.0, qdyn::kUMax}) {
    try {
      out << fmt::format("drive_frequency[u={}]={}\n", u, fmt_double(qdyn::drive_frequency(s, u)));
    } catch (const SingularityError& e) {
      out << fmt::format("drive_frequency[u={}]=undefined\n", u);
    }
  }
  const qdyn::DensityMatrix rho = qdyn::gibbs_state(s.free_hamiltonian(), 3.0);
  const auto pops = rho.populations();
  out << fmt::format("initial_populations={},{},{}\n", fmt_double(pops[0]), fmt_double(pops[1]),
                     fmt_double(pops[2]));
  return kOk;
}

int run(int argc, char** argv) {
  CLI::App app{"Three-level quantum heat engine: cycle replay, fitting and SAC training"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "train the hybrid SAC agent");
  t->add_option("config", train.config, "JSON configuration file");
  t->add_option("--seed", train.seed, "run seed");
  t->add_option("--out", train.out, "output directory");
  t->add_option("--steps", train.steps, "override train.total_steps");
  t->add_option("--resume", train.resume, "resume from a checkpoint");

  ReplayArgs replay;
  auto* r = app.add_subcommand("replay", "replay a reference cycle or a trained policy");
  r->add_option("--cycle", replay.cycle, "fitted|cycle1|cycle2|cycle3|checkpoint:PATH");
  r->add_option("--steps", replay.steps, "number of steps");
  r->add_option("--gamma", replay.gamma, "discount of the running averages");
  r->add_option("--config", replay.config, "JSON configuration file");
  r->add_option("--out", replay.out, "trajectory CSV path (stdout when absent)");

  FitArgs fitargs;
  auto* f = app.add_subcommand("fit", "fit sigmoids to the work strokes of a trajectory");
  f->add_option("--traj", fitargs.traj, "trajectory CSV")->required();
  f->add_option("--config", fitargs.config, "JSON configuration file");

  std::optional<std::string> info_config;
  auto* i = app.add_subcommand("info", "print the resolved configuration and derived constants");
  i->add_option("--config", info_config, "JSON configuration file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  try {
    if (*t) return cmd_train(train, std::cout, std::cerr);
    if (*r) return cmd_replay(replay, std::cout, std::cerr);
    if (*f) return cmd_fit(fitargs, std::cout, std::cerr);
    if (*i) return cmd_info(info_config, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}

}  // namespace qhe::cli
