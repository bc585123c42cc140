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

#include "qhe/config.hpp"

#include "qhe/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

extern char** environ;

namespace qhe::config {

using nlohmann::json;

namespace {

class Section {
 public:
  Section(const json& doc, std::string name) : name_(std::move(name)) {
    if (doc.contains(name_)) {
      obj_ = doc.at(name_);
      if (!obj_.is_object()) throw ConfigError(name_, "expected an object");
    } else {
      obj_ = json::object();
    }
  }

  std::string path(const std::string& key) const { return name_ + "." + key; }

  double number(const std::string& key, double fallback) {
    seen_.insert(key);
    if (!obj_.contains(key)) return fallback;
    const json& v = obj_.at(key);
    if (!v.is_number()) throw ConfigError(path(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(path(key), "must be finite");
    return x;
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback, std::int64_t min) {
    seen_.insert(key);
    std::int64_t x = fallback;
    if (obj_.contains(key)) {
      const json& v = obj_.at(key);
      if (!v.is_number_integer()) throw ConfigError(path(key), "expected an integer");
      x = v.get<std::int64_t>();
    }
    if (x < min) throw ConfigError(path(key), "must be at least " + std::to_string(min));
    return x;
  }

  bool boolean(const std::string& key, bool fallback) {
    seen_.insert(key);
    if (!obj_.contains(key)) return fallback;
    const json& v = obj_.at(key);
    if (!v.is_boolean()) throw ConfigError(path(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    seen_.insert(key);
    if (!obj_.contains(key)) return fallback;
    const json& v = obj_.at(key);
    if (!v.is_string()) throw ConfigError(path(key), "expected a string");
    return v.get<std::string>();
  }

  std::vector<int> dims(const std::string& key, const std::vector<int>& fallback) {
    seen_.insert(key);
    if (!obj_.contains(key)) return fallback;
    const json& v = obj_.at(key);
    if (!v.is_array() || v.empty()) throw ConfigError(path(key), "expected a non-empty array of integers");
    std::vector<int> out;
    for (const json& e : v) {
      if (!e.is_number_integer() || e.get<std::int64_t>() <= 0) {
        throw ConfigError(path(key), "layer widths must be positive integers");
      }
      out.push_back(e.get<int>());
    }
    return out;
  }

  void require(bool ok, const std::string& key, const std::string& what) const {
    if (!ok) throw ConfigError(path(key), what);
  }

  void reject_unknown() const {
    for (const auto& [k, v] : obj_.items()) {
      if (!seen_.count(k)) throw ConfigError(path(k), "unknown key");
    }
  }

 private:
  std::string name_;
  json obj_;
  std::set<std::string> seen_;
};

}  // namespace

RunConfig from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("", "configuration must be a JSON object");
  for (const auto& [k, v] : doc.items()) {
    if (k != "engine" && k != "train" && k != "eval" && k != "fit" && k != "run") {
      throw ConfigError(k, "unknown section");
    }
  }
  RunConfig c;

  Section e(doc, "engine");
  c.engine.omega0 = e.number("omega0", c.engine.omega0);
  c.engine.omega1 = e.number("omega1", c.engine.omega1);
  c.engine.omega2 = e.number("omega2", c.engine.omega2);
  c.engine.lambda = e.number("lambda", c.engine.lambda);
  c.engine.beta_c = e.number("beta_c", c.engine.beta_c);
  c.engine.beta_h = e.number("beta_h", c.engine.beta_h);
  c.engine.g1 = e.number("g1", c.engine.g1);
  c.engine.g2 = e.number("g2", c.engine.g2);
  e.require(c.engine.omega0 < c.engine.omega1, "omega1", "must exceed omega0");
  e.require(c.engine.omega1 < c.engine.omega2, "omega2", "must exceed omega1");
  e.require(c.engine.beta_c >= 0.0, "beta_c", "must be non-negative");
  e.require(c.engine.beta_h >= 0.0, "beta_h", "must be non-negative");
  e.require(c.engine.beta_h < c.engine.beta_c, "beta_h", "hot bath must be hotter than the cold bath");
  e.reject_unknown();

  Section t(doc, "train");
  sac::TrainConfig& tr = c.train;
  tr.gamma = t.number("gamma", tr.gamma);
  t.require(tr.gamma >= 0.0 && tr.gamma < 1.0, "gamma", "must lie in [0, 1)");
  tr.dt = t.number("dt", tr.dt);
  t.require(tr.dt > 0.0, "dt", "must be positive");
  tr.tau = t.number("tau", tr.tau);
  t.require(tr.tau > 0.0 && tr.tau <= 1.0, "tau", "must lie in (0, 1]");
  tr.total_steps = t.integer("total_steps", tr.total_steps, 0);
  tr.warmup_steps = t.integer("warmup_steps", tr.warmup_steps, 0);
  tr.update_every = t.integer("update_every", tr.update_every, 1);
  tr.updates_per_round = t.integer("updates_per_round", tr.updates_per_round, 0);
  tr.batch_size = static_cast<std::size_t>(t.integer("batch_size", static_cast<std::int64_t>(tr.batch_size), 1));
  tr.buffer_capacity = static_cast<std::size_t>(
      t.integer("buffer_capacity", static_cast<std::int64_t>(tr.buffer_capacity), 1));
  t.require(tr.buffer_capacity >= tr.batch_size, "buffer_capacity", "must hold at least one batch");
  tr.eval_every = t.integer("eval_every", tr.eval_every, 1);
  tr.eval_length = t.integer("eval_length", tr.eval_length, 1);
  tr.target_samples = static_cast<int>(t.integer("target_samples", tr.target_samples, 1));
  tr.q_hidden = t.dims("q_hidden", tr.q_hidden);
  tr.policy.hidden_dims = t.dims("policy_hidden", tr.policy.hidden_dims);
  tr.policy.shared_trunk = t.boolean("shared_trunk", tr.policy.shared_trunk);
  tr.adam.learning_rate = t.number("learning_rate", tr.adam.learning_rate);
  t.require(tr.adam.learning_rate > 0.0, "learning_rate", "must be positive");
  tr.adam.beta1 = t.number("adam_beta1", tr.adam.beta1);
  t.require(tr.adam.beta1 >= 0.0 && tr.adam.beta1 < 1.0, "adam_beta1", "must lie in [0, 1)");
  tr.adam.beta2 = t.number("adam_beta2", tr.adam.beta2);
  t.require(tr.adam.beta2 >= 0.0 && tr.adam.beta2 < 1.0, "adam_beta2", "must lie in [0, 1)");
  tr.adam.eps = t.number("adam_eps", tr.adam.eps);
  t.require(tr.adam.eps > 0.0, "adam_eps", "must be positive");
  tr.init_log_alpha_d = t.number("init_log_alpha_d", tr.init_log_alpha_d);
  tr.init_log_alpha_c = t.number("init_log_alpha_c", tr.init_log_alpha_c);
  tr.entropy.d_init = t.number("entropy_d_init", tr.entropy.d_init);
  tr.entropy.d_final = t.number("entropy_d_final", tr.entropy.d_final);
  tr.entropy.d_decay = t.number("entropy_d_decay", tr.entropy.d_decay);
  t.require(tr.entropy.d_decay > 0.0, "entropy_d_decay", "must be positive");
  tr.entropy.c_init = t.number("entropy_c_init", tr.entropy.c_init);
  tr.entropy.c_final = t.number("entropy_c_final", tr.entropy.c_final);
  tr.entropy.c_decay = t.number("entropy_c_decay", tr.entropy.c_decay);
  t.require(tr.entropy.c_decay > 0.0, "entropy_c_decay", "must be positive");
  t.reject_unknown();

  Section v(doc, "eval");
  c.eval.gamma = v.number("gamma", c.eval.gamma);
  v.require(c.eval.gamma >= 0.0 && c.eval.gamma < 1.0, "gamma", "must lie in [0, 1)");
  c.eval.steps = v.integer("steps", c.eval.steps, 0);
  c.baselines.cycle1.up_steps = static_cast<std::size_t>(v.integer("cycle1_up_steps", 1, 1));
  c.baselines.cycle1.down_steps = static_cast<std::size_t>(v.integer("cycle1_down_steps", 2, 1));
  c.baselines.cycle2.up_steps = static_cast<std::size_t>(v.integer("cycle2_up_steps", 2, 1));
  c.baselines.cycle2.down_steps = static_cast<std::size_t>(v.integer("cycle2_down_steps", 6, 1));
  v.reject_unknown();

  Section f(doc, "fit");
  c.fit.max_period = static_cast<std::size_t>(f.integer("max_period", 256, 1));
  f.reject_unknown();

  Section r(doc, "run");
  c.run.seed = static_cast<std::uint64_t>(r.integer("seed", 1, 0));
  c.run.output_dir = r.string("output_dir", c.run.output_dir);
  r.require(!c.run.output_dir.empty(), "output_dir", "must not be empty");
  c.run.checkpoint_every = r.integer("checkpoint_every", c.run.checkpoint_every, 1);
  r.reject_unknown();
  return c;
}

json to_json(const RunConfig& c) {
  const sac::TrainConfig& tr = c.train;
  json doc;
  doc["engine"] = {{"omega0", c.engine.omega0}, {"omega1", c.engine.omega1},
                   {"omega2", c.engine.omega2}, {"lambda", c.engine.lambda},
                   {"beta_c", c.engine.beta_c}, {"beta_h", c.engine.beta_h},
                   {"g1", c.engine.g1},         {"g2", c.engine.g2}};
  doc["train"] = {{"gamma", tr.gamma},
                  {"dt", tr.dt},
                  {"tau", tr.tau},
                  {"total_steps", tr.total_steps},
                  {"warmup_steps", tr.warmup_steps},
                  {"update_every", tr.update_every},
                  {"updates_per_round", tr.updates_per_round},
                  {"batch_size", tr.batch_size},
                  {"buffer_capacity", tr.buffer_capacity},
                  {"eval_every", tr.eval_every},
                  {"eval_length", tr.eval_length},
                  {"target_samples", tr.target_samples},
                  {"q_hidden", tr.q_hidden},
                  {"policy_hidden", tr.policy.hidden_dims},
                  {"shared_trunk", tr.policy.shared_trunk},
                  {"learning_rate", tr.adam.learning_rate},
                  {"adam_beta1", tr.adam.beta1},
                  {"adam_beta2", tr.adam.beta2},
                  {"adam_eps", tr.adam.eps},
                  {"init_log_alpha_d", tr.init_log_alpha_d},
                  {"init_log_alpha_c", tr.init_log_alpha_c},
                  {"entropy_d_init", tr.entropy.d_init},
                  {"entropy_d_final", tr.entropy.d_final},
                  {"entropy_d_decay", tr.entropy.d_decay},
                  {"entropy_c_init", tr.entropy.c_init},
                  {"entropy_c_final", tr.entropy.c_final},
                  {"entropy_c_decay", tr.entropy.c_decay}};
  doc["eval"] = {{"gamma", c.eval.gamma},
                 {"steps", c.eval.steps},
                 {"cycle1_up_steps", c.baselines.cycle1.up_steps},
                 {"cycle1_down_steps", c.baselines.cycle1.down_steps},
                 {"cycle2_up_steps", c.baselines.cycle2.up_steps},
                 {"cycle2_down_steps", c.baselines.cycle2.down_steps}};
  doc["fit"] = {{"max_period", c.fit.max_period}};
  doc["run"] = {{"seed", c.run.seed},
                {"output_dir", c.run.output_dir},
                {"checkpoint_every", c.run.checkpoint_every}};
  return doc;
}

void apply_overrides(json& doc, const std::map<std::string, std::string>& env) {
  for (const auto& [name, value] : env) {
    if (name.rfind(kEnvPrefix, 0) != 0) continue;
    const std::string rest = name.substr(kEnvPrefix.size());
    const auto sep = rest.find("__");
    if (sep == std::string::npos || sep == 0 || sep + 2 >= rest.size()) continue;
    std::string section = rest.substr(0, sep);
    std::string key = rest.substr(sep + 2);
    auto lower = [](std::string& s) {
      std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
    };
    lower(section);
    lower(key);
    json parsed = json::parse(value, nullptr, false);
    if (parsed.is_discarded()) parsed = value;
    doc[section][key] = parsed;
  }
}

std::map<std::string, std::string> environment_overrides() {
  std::map<std::string, std::string> out;
  for (char** e = environ; e && *e; ++e) {
    const std::string entry(*e);
    if (entry.rfind(kEnvPrefix, 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    out[entry.substr(0, eq)] = entry.substr(eq + 1);
  }
  return out;
}

RunConfig load(const std::filesystem::path& path, bool use_environment) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open configuration file");
  json doc = json::parse(in, nullptr, false, true);
  if (doc.is_discarded()) throw ConfigError(path.string(), "not valid JSON");
  if (use_environment) apply_overrides(doc, environment_overrides());
  return from_json(doc);
}

RunConfig defaults(bool use_environment) {
  json doc = json::object();
  if (use_environment) apply_overrides(doc, environment_overrides());
  return from_json(doc);
}

}  // namespace qhe::config
