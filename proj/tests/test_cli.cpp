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
#include "test_util.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

using namespace qhe;
namespace fs = std::filesystem;

namespace {

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(fs::temp_directory_path() / ("qhe_test_" + name + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

const char* kTinyConfig = R"({
  "train": {"total_steps": 60, "warmup_steps": 20, "update_every": 10, "updates_per_round": 2,
            "batch_size": 8, "buffer_capacity": 64, "eval_every": 30, "eval_length": 20,
            "q_hidden": [8], "policy_hidden": [8]},
  "run": {"checkpoint_every": 30}
})";

sac::TrainerState tiny_state(std::uint64_t seed, std::int64_t steps) {
  sac::TrainConfig c = config::from_json(nlohmann::json::parse(kTinyConfig)).train;
  c.total_steps = steps;
  sac::Trainer t(c, seed);
  t.run();
  return t.snapshot();
}

}  // namespace

TEST_CASE("empty configuration gives the reference defaults") {
  const config::RunConfig c = config::from_json(nlohmann::json::object());
  CHECK(c.train.gamma == 0.995);
  CHECK(c.train.batch_size == 512);
  CHECK(c.train.buffer_capacity == 160000);
  CHECK(c.train.total_steps == 500000);
  CHECK(c.train.tau == 0.005);
  CHECK(c.train.adam.learning_rate == 3e-4);
  CHECK(c.train.q_hidden == std::vector<int>{256, 256});
  CHECK(c.engine.beta_c == 5.0);
  CHECK(c.engine.beta_h == 1.0);
  CHECK(c.eval.steps == 1000);
  CHECK(config::from_json(config::to_json(c)).train.entropy.d_init == c.train.entropy.d_init);
  CHECK(config::to_json(config::from_json(config::to_json(c))) == config::to_json(c));
}

TEST_CASE("invalid entries are rejected with their key path") {
  auto key_of = [](const char* text) {
    try {
      config::from_json(nlohmann::json::parse(text));
    } catch (const ConfigError& e) {
      return e.key_path();
    }
    return std::string("<accepted>");
  };
  CHECK(key_of(R"({"train": {"gamma": 1.5}})") == "train.gamma");
  CHECK(key_of(R"({"train": {"batch_size": 0}})") == "train.batch_size");
  CHECK(key_of(R"({"train": {"batch_size": "big"}})") == "train.batch_size");
  CHECK(key_of(R"({"train": {"q_hidden": [8, -1]}})") == "train.q_hidden");
  CHECK(key_of(R"({"train": {"learning_rat": 0.1}})") == "train.learning_rat");
  CHECK(key_of(R"({"engine": {"beta_h": 7}})") == "engine.beta_h");
  CHECK(key_of(R"({"trian": {}})") == "trian");
  CHECK(key_of(R"({"run": {"output_dir": ""}})") == "run.output_dir");
  CHECK(key_of(R"({"eval": {"steps": 10}})") == "<accepted>");
}

TEST_CASE("environment overrides replace configuration entries") {
  nlohmann::json doc = nlohmann::json::parse(R"({"train": {"batch_size": 32}})");
  config::apply_overrides(doc, {{"QHE_TRAIN__BATCH_SIZE", "64"},
                                {"QHE_TRAIN__POLICY_HIDDEN", "[16,16]"},
                                {"QHE_RUN__OUTPUT_DIR", "elsewhere"},
                                {"OTHER_TRAIN__BATCH_SIZE", "1"},
                                {"QHE_MALFORMED", "1"}});
  const config::RunConfig c = config::from_json(doc);
  CHECK(c.train.batch_size == 64);
  CHECK(c.train.policy.hidden_dims == std::vector<int>{16, 16});
  CHECK(c.run.output_dir == "elsewhere");
}

TEST_CASE("loading a missing or malformed file names the path") {
  TempDir dir("config");
  try {
    config::load(dir / "absent.json", false);
    FAIL("expected a configuration error");
  } catch (const ConfigError& e) {
    CHECK(e.key_path() == (dir / "absent.json").string());
  }
  write_file(dir / "bad.json", "{ not json");
  CHECK_THROWS_AS(config::load(dir / "bad.json", false), ConfigError);
}

TEST_CASE("checkpoints round-trip bit for bit") {
  TempDir dir("ckpt");
  const sac::TrainerState s = tiny_state(3, 45);
  const nlohmann::json echo = config::to_json(config::defaults(false));
  checkpoint::save(dir / "c.json", {echo, s});
  const checkpoint::Checkpoint back = checkpoint::load(dir / "c.json");
  CHECK(checkpoint::operator==(back.state, s));
  CHECK(back.config == echo);
  CHECK(checkpoint::encode(back) == checkpoint::encode({echo, s}));
  CHECK_FALSE(fs::exists(dir / "c.json.tmp"));
}

TEST_CASE("a resumed trainer continues from the saved counters") {
  sac::TrainConfig c = config::from_json(nlohmann::json::parse(kTinyConfig)).train;
  const sac::TrainerState s = tiny_state(4, 40);
  const checkpoint::Checkpoint back = checkpoint::decode(checkpoint::encode({nullptr, s}));
  sac::Trainer resumed(c, back.state);
  CHECK(resumed.step_count() == 40);
  CHECK(resumed.update_count() == s.updates);
  CHECK(resumed.policy() == s.policy);
  resumed.run();
  CHECK(resumed.step_count() == 60);
}

TEST_CASE("corrupt checkpoints are integrity errors") {
  const std::string text = checkpoint::encode({nullptr, tiny_state(5, 25)});
  CHECK_THROWS_AS(checkpoint::decode(text.substr(0, text.size() / 2)), IntegrityError);
  CHECK_THROWS_AS(checkpoint::decode("{}"), IntegrityError);

  nlohmann::json doc = nlohmann::json::parse(text);
  doc["payload"]["state"]["step"] = 999;
  CHECK_THROWS_AS(checkpoint::decode(doc.dump()), IntegrityError);

  TempDir dir("trunc");
  write_file(dir / "t.json", text.substr(0, 100));
  CHECK_THROWS_AS(checkpoint::load(dir / "t.json"), IntegrityError);
  CHECK_THROWS_AS(checkpoint::load(dir / "missing.json"), IntegrityError);
}

TEST_CASE("a newer checkpoint version is rejected naming both versions") {
  nlohmann::json doc = nlohmann::json::parse(checkpoint::encode({nullptr, tiny_state(6, 21)}));
  doc["version"] = checkpoint::kFormatVersion + 1;
  try {
    checkpoint::decode(doc.dump());
    FAIL("expected a version error");
  } catch (const VersionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(std::to_string(checkpoint::kFormatVersion + 1)) != std::string::npos);
    CHECK(msg.find(std::to_string(checkpoint::kFormatVersion)) != std::string::npos);
    CHECK(e.found() == 2);
    CHECK(e.supported() == 1);
  }
}

TEST_CASE("trajectory CSV has a fixed header and round-trip floats") {
  const eval::BaselineCycle c = eval::build_baseline_cycle(eval::BaselineTag::FittedOtto);
  const env::Trajectory traj = env::run_schedule(c.schedule, 30, 0.995);
  std::stringstream ss;
  csv::write_trajectory(ss, traj, {{"power", "x"}});
  std::string first;
  std::getline(ss, first);
  CHECK(first == csv::kTrajectoryHeader);
  ss.seekg(0);
  const csv::TrajectoryTable table = csv::read_trajectory(ss);
  REQUIRE(table.rows.size() == 30);
  for (std::size_t i = 0; i < 30; ++i) {
    CHECK(table.rows[i].step == i);
    CHECK(table.rows[i].action == traj.records[i].action);
    CHECK(table.rows[i].reward == traj.records[i].reward);
    CHECK(table.rows[i].avg_power == traj.avg_power[i]);
  }
  CHECK(table.trailer == eval::KeyValues{{"power", "x"}});

  std::stringstream bad("step,d,u\n0,work,1\n");
  CHECK_THROWS_AS(csv::read_trajectory(bad), IntegrityError);
}

TEST_CASE("training log CSV header and NaN rendering") {
  std::stringstream ss;
  csv::write_train_log_header(ss);
  sac::TrainLogRow row;
  row.step = 7;
  row.alpha_d = 0.1;
  csv::write_train_log_row(ss, row);
  std::string header, line;
  std::getline(ss, header);
  std::getline(ss, line);
  CHECK(header == csv::kTrainLogHeader);
  CHECK(line.rfind("7,", 0) == 0);
  CHECK(std::count(line.begin(), line.end(), ',') == 9);
  CHECK(line.find("0.10000000000000001") != std::string::npos);
}

TEST_CASE("train with a missing config exits with the configuration code") {
  std::ostringstream out, err;
  cli::TrainArgs a;
  a.config = "/nonexistent/qhe.json";
  CHECK(cli::cmd_train(a, out, err) == cli::kConfigError);
  CHECK(err.str().find("/nonexistent/qhe.json") != std::string::npos);
}

TEST_CASE("same config and seed produce byte-identical logs") {
  TempDir dir("train");
  write_file(dir / "tiny.json", kTinyConfig);
  std::ostringstream out, err;
  cli::TrainArgs a;
  a.config = (dir / "tiny.json").string();
  a.seed = 9;
  a.out = (dir / "a").string();
  REQUIRE(cli::cmd_train(a, out, err) == cli::kOk);
  a.out = (dir / "b").string();
  REQUIRE(cli::cmd_train(a, out, err) == cli::kOk);
  for (const char* name : {"train_log_seed9.csv", "best_eval_seed9.csv", "report_seed9.txt"}) {
    CHECK(fs::exists(dir / "a" / name));
    CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
  }
  // the checkpoint echoes the output directory, so compare its state
  CHECK(checkpoint::operator==(checkpoint::load(dir / "a" / "checkpoint_seed9.json").state,
                               checkpoint::load(dir / "b" / "checkpoint_seed9.json").state));
  const std::string log = slurp(dir / "a" / "train_log_seed9.csv");
  CHECK(std::count(log.begin(), log.end(), '\n') == 3);

  cli::TrainArgs r = a;
  r.resume = (dir / "a" / "checkpoint_seed9.json").string();
  r.steps = 90;
  r.out = (dir / "c").string();
  CHECK(cli::cmd_train(r, out, err) == cli::kOk);
  const sac::TrainerState resumed = checkpoint::load(dir / "c" / "checkpoint_seed9.json").state;
  CHECK(resumed.step == 90);
}

TEST_CASE("training divergence exits with the divergence code and keeps a checkpoint") {
  TempDir dir("diverge");
  nlohmann::json doc = nlohmann::json::parse(kTinyConfig);
  doc["train"]["learning_rate"] = 1e300;
  doc["train"]["init_log_alpha_d"] = 700.0;
  write_file(dir / "wild.json", doc.dump());
  std::ostringstream out, err;
  cli::TrainArgs a;
  a.config = (dir / "wild.json").string();
  a.out = (dir / "o").string();
  CHECK(cli::cmd_train(a, out, err) == cli::kDivergence);
  CHECK(fs::exists(dir / "o" / "checkpoint_seed1.json"));
  CHECK(err.str().find("diverged") != std::string::npos);
}

TEST_CASE("replay exit codes and outputs") {
  TempDir dir("replay");
  std::ostringstream out, err;
  cli::ReplayArgs a;
  a.steps = 0;
  CHECK(cli::cmd_replay(a, out, err) == cli::kUndefinedEfficiency);
  CHECK(out.str().find("eta=undefined") != std::string::npos);

  a.cycle = "cycle3";
  a.steps = 21;
  a.out = (dir / "c3.csv").string();
  cli::cmd_replay(a, out, err);
  std::ifstream in(dir / "c3.csv");
  const csv::TrajectoryTable t = csv::read_trajectory(in);
  REQUIRE(t.rows.size() == 21);
  for (std::size_t i = 0; i + 7 < 21; ++i) CHECK(t.rows[i].action == t.rows[i + 7].action);

  a.cycle = "cycle9";
  CHECK(cli::cmd_replay(a, out, err) == cli::kConfigError);
  a.cycle = "checkpoint:" + (dir / "none.json").string();
  CHECK(cli::cmd_replay(a, out, err) == cli::kConfigError);
}

TEST_CASE("replaying a checkpoint policy is deterministic") {
  TempDir dir("policy");
  checkpoint::save(dir / "p.json", {nullptr, tiny_state(10, 25)});
  cli::ReplayArgs a;
  a.cycle = "checkpoint:" + (dir / "p.json").string();
  a.steps = 15;
  std::ostringstream o1, o2, err;
  cli::cmd_replay(a, o1, err);
  cli::cmd_replay(a, o2, err);
  CHECK(o1.str() == o2.str());
  std::istringstream in(o1.str());
  CHECK(csv::read_trajectory(in).rows.size() == 15);
}

TEST_CASE("fit of a replayed fitted cycle returns its parameters") {
  TempDir dir("fit");
  std::ostringstream out, err;
  cli::ReplayArgs a;
  a.cycle = "fitted";
  a.steps = 70;
  a.out = (dir / "f.csv").string();
  cli::cmd_replay(a, out, err);
  std::ostringstream fout;
  REQUIRE(cli::cmd_fit({(dir / "f.csv").string(), std::nullopt}, fout, err) == cli::kOk);
  std::istringstream lines(fout.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line.rfind("period=7", 0) == 0);
  bool found = false;
  while (std::getline(lines, line)) {
    if (line.rfind("working-2,", 0) != 0) continue;
    found = true;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    REQUIRE(f.size() == 9);
    CHECK(std::abs(std::stod(f[4]) - 1.497) <= 1e-3);
    CHECK(std::abs(std::stod(f[5]) - 0.300) <= 1e-3);
    CHECK(std::abs(std::stod(f[6]) - 10.25) <= 1e-3);
    CHECK(std::abs(std::stod(f[7]) - 0.25) <= 1e-3);
    CHECK(std::stod(f[8]) >= 0.99);
  }
  CHECK(found);
}

TEST_CASE("fit of an all-hot trajectory exits with the no-period code") {
  TempDir dir("hot");
  const env::Trajectory traj =
      env::run_schedule(env::CycleSchedule({{Process::Hot, 1.2}}), 20, 0.995);
  {
    std::ofstream f(dir / "hot.csv");
    csv::write_trajectory(f, traj);
  }
  std::ostringstream out, err;
  CHECK(cli::cmd_fit({(dir / "hot.csv").string(), std::nullopt}, out, err) == cli::kNoPeriod);
  CHECK(cli::cmd_fit({(dir / "absent.csv").string(), std::nullopt}, out, err) == cli::kConfigError);
}

TEST_CASE("info prints the derived constants") {
  std::ostringstream out, err;
  CHECK(cli::cmd_info(std::nullopt, out, err) == cli::kOk);
  CHECK(out.str().find("eta_c=0.80000000000000004") != std::string::npos);
  CHECK(out.str().find("steady_reference_power=0.39900000000000002") != std::string::npos);
}
