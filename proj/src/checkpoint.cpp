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

#include "qhe/checkpoint.hpp"

#include "qhe/errors.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <sstream>

namespace qhe::checkpoint {

using nlohmann::json;

namespace {

std::string fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

[[noreturn]] void corrupt(const std::string& where, const std::string& what) {
  throw IntegrityError("checkpoint " + where + ": " + what);
}

const json& field(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) corrupt(where, "missing field '" + key + "'");
  return j.at(key);
}

double number(const json& j, const std::string& key, const std::string& where) {
  const json& v = field(j, key, where);
  if (!v.is_number()) corrupt(where + "." + key, "expected a number");
  return v.get<double>();
}

std::int64_t integer(const json& j, const std::string& key, const std::string& where) {
  const json& v = field(j, key, where);
  if (!v.is_number_integer()) corrupt(where + "." + key, "expected an integer");
  return v.get<std::int64_t>();
}

std::vector<double> numbers(const json& v, const std::string& where, std::size_t expected) {
  if (!v.is_array()) corrupt(where, "expected an array");
  if (v.size() != expected) {
    corrupt(where, "length " + std::to_string(v.size()) + " does not match shape (expected " +
                       std::to_string(expected) + ")");
  }
  std::vector<double> out;
  out.reserve(expected);
  for (const json& e : v) {
    if (!e.is_number()) corrupt(where, "non-numeric entry");
    out.push_back(e.get<double>());
  }
  return out;
}

json spec_to_json(const nn::MlpSpec& s) {
  return {{"input_dim", s.input_dim}, {"hidden_dims", s.hidden_dims}, {"output_dim", s.output_dim}};
}

nn::MlpSpec spec_from_json(const json& j, const std::string& where) {
  nn::MlpSpec s;
  s.input_dim = static_cast<int>(integer(j, "input_dim", where));
  s.output_dim = static_cast<int>(integer(j, "output_dim", where));
  const json& h = field(j, "hidden_dims", where);
  if (!h.is_array()) corrupt(where + ".hidden_dims", "expected an array");
  s.hidden_dims.clear();
  for (const json& e : h) {
    if (!e.is_number_integer()) corrupt(where + ".hidden_dims", "expected integers");
    s.hidden_dims.push_back(e.get<int>());
  }
  try {
    s.validate();
  } catch (const DomainError& e) {
    corrupt(where, e.what());
  }
  return s;
}

json mlp_to_json(const nn::Mlp& m) {
  return {{"spec", spec_to_json(m.spec())}, {"params", params_to_json(m.params())}};
}

nn::Mlp mlp_from_json(const json& j, const std::string& where) {
  const nn::MlpSpec spec = spec_from_json(field(j, "spec", where), where + ".spec");
  nn::MlpParams params = params_from_json(field(j, "params", where), where + ".params");
  try {
    return nn::Mlp(spec, std::move(params));
  } catch (const DomainError& e) {
    corrupt(where, e.what());
  }
}

json adam_config_to_json(const nn::AdamConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps}};
}

nn::AdamConfig adam_config_from_json(const json& j, const std::string& where) {
  return {number(j, "learning_rate", where), number(j, "beta1", where), number(j, "beta2", where),
          number(j, "eps", where)};
}

json adam_to_json(const nn::AdamState& a) {
  return {{"config", adam_config_to_json(a.config)},
          {"step", a.step},
          {"m", params_to_json(a.m)},
          {"v", params_to_json(a.v)}};
}

nn::AdamState adam_from_json(const json& j, const std::string& where, const nn::MlpParams& shape) {
  nn::AdamState a;
  a.config = adam_config_from_json(field(j, "config", where), where + ".config");
  a.step = integer(j, "step", where);
  a.m = params_from_json(field(j, "m", where), where + ".m");
  a.v = params_from_json(field(j, "v", where), where + ".v");
  if (!a.m.same_shape(shape) || !a.v.same_shape(shape)) corrupt(where, "moment shapes do not match the network");
  return a;
}

json scalar_adam_to_json(const nn::ScalarAdam& a) {
  return {{"config", adam_config_to_json(a.config)}, {"m", a.m}, {"v", a.v}, {"step", a.step}};
}

nn::ScalarAdam scalar_adam_from_json(const json& j, const std::string& where) {
  nn::ScalarAdam a;
  a.config = adam_config_from_json(field(j, "config", where), where + ".config");
  a.m = number(j, "m", where);
  a.v = number(j, "v", where);
  a.step = integer(j, "step", where);
  return a;
}

json optional_double(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double optional_double_from(const json& j, const std::string& key, const std::string& where) {
  const json& v = field(j, key, where);
  if (v.is_null()) return -std::numeric_limits<double>::infinity();
  if (!v.is_number()) corrupt(where + "." + key, "expected a number or null");
  return v.get<double>();
}

Rng rng_from_json(const json& j, const std::string& key, const std::string& where) {
  const json& v = field(j, key, where);
  if (!v.is_string()) corrupt(where + "." + key, "expected a string");
  Rng r;
  try {
    r.set_state(v.get<std::string>());
  } catch (const std::invalid_argument&) {
    corrupt(where + "." + key, "malformed generator state");
  }
  return r;
}

json state_to_json(const sac::TrainerState& s) {
  json j;
  j["step"] = s.step;
  j["updates"] = s.updates;
  json policy;
  policy["shared_trunk"] = s.policy.config().shared_trunk;
  policy["hidden_dims"] = s.policy.config().hidden_dims;
  policy["nets"] = json::array();
  for (const nn::Mlp& m : s.policy.nets()) policy["nets"].push_back(mlp_to_json(m));
  policy["adam"] = json::array();
  for (const nn::AdamState& a : s.policy_adam) policy["adam"].push_back(adam_to_json(a));
  j["policy"] = policy;
  json q;
  for (std::size_t k = 0; k < 2; ++k) {
    q["online"].push_back(mlp_to_json(s.q.online[k]));
    q["target"].push_back(mlp_to_json(s.q.target[k]));
    q["adam"].push_back(adam_to_json(s.q.adam[k]));
  }
  j["q"] = q;
  j["temperatures"] = {{"log_alpha_d", s.temps.log_alpha_d},
                       {"log_alpha_c", s.temps.log_alpha_c},
                       {"adam_d", scalar_adam_to_json(s.temps.adam_d)},
                       {"adam_c", scalar_adam_to_json(s.temps.adam_c)}};
  j["rng"] = {{"action", s.action_rng.state()},
              {"buffer", s.buffer_rng.state()},
              {"noise", s.noise_rng.state()}};
  json rho_re = json::array();
  json rho_im = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      rho_re.push_back(s.env.rho(r, c).real());
      rho_im.push_back(s.env.rho(r, c).imag());
    }
  }
  j["env"] = {{"rho_re", rho_re},
              {"rho_im", rho_im},
              {"u_prev", s.env.u_prev},
              {"d_prev", s.env.d_prev ? json(std::string(qdyn::to_string(*s.env.d_prev))) : json(nullptr)},
              {"energy", s.env.energy}};
  j["best_eval_power"] = optional_double(s.best_eval_power);
  j["best_eval_step"] = s.best_eval_step;
  return j;
}

sac::TrainerState state_from_json(const json& j) {
  sac::TrainerState s;
  s.step = integer(j, "step", "payload");
  s.updates = integer(j, "updates", "payload");

  const json& p = field(j, "policy", "payload");
  sac::PolicyConfig pc;
  const json& shared = field(p, "shared_trunk", "policy");
  if (!shared.is_boolean()) corrupt("policy.shared_trunk", "expected a boolean");
  pc.shared_trunk = shared.get<bool>();
  pc.hidden_dims = spec_from_json({{"input_dim", 1}, {"output_dim", 1},
                                   {"hidden_dims", field(p, "hidden_dims", "policy")}},
                                  "policy")
                       .hidden_dims;
  const json& nets = field(p, "nets", "policy");
  const json& adams = field(p, "adam", "policy");
  if (!nets.is_array() || !adams.is_array() || nets.size() != adams.size()) {
    corrupt("policy", "network and optimizer counts differ");
  }
  std::vector<nn::Mlp> mlps;
  for (std::size_t i = 0; i < nets.size(); ++i) {
    mlps.push_back(mlp_from_json(nets[i], "policy.nets[" + std::to_string(i) + "]"));
    s.policy_adam.push_back(
        adam_from_json(adams[i], "policy.adam[" + std::to_string(i) + "]", mlps.back().params()));
  }
  try {
    s.policy = sac::PolicyNet(pc, std::move(mlps));
  } catch (const DomainError& e) {
    corrupt("policy", e.what());
  }

  const json& q = field(j, "q", "payload");
  for (const char* key : {"online", "target", "adam"}) {
    const json& arr = field(q, key, "q");
    if (!arr.is_array() || arr.size() != 2) corrupt(std::string("q.") + key, "expected two entries");
  }
  for (std::size_t k = 0; k < 2; ++k) {
    const std::string idx = "[" + std::to_string(k) + "]";
    s.q.online[k] = mlp_from_json(q["online"][k], "q.online" + idx);
    s.q.target[k] = mlp_from_json(q["target"][k], "q.target" + idx);
    if (s.q.target[k].spec() != s.q.online[k].spec()) corrupt("q.target" + idx, "shape differs from online net");
    s.q.adam[k] = adam_from_json(q["adam"][k], "q.adam" + idx, s.q.online[k].params());
  }

  const json& t = field(j, "temperatures", "payload");
  s.temps.log_alpha_d = number(t, "log_alpha_d", "temperatures");
  s.temps.log_alpha_c = number(t, "log_alpha_c", "temperatures");
  s.temps.adam_d = scalar_adam_from_json(field(t, "adam_d", "temperatures"), "temperatures.adam_d");
  s.temps.adam_c = scalar_adam_from_json(field(t, "adam_c", "temperatures"), "temperatures.adam_c");

  const json& r = field(j, "rng", "payload");
  s.action_rng = rng_from_json(r, "action", "rng");
  s.buffer_rng = rng_from_json(r, "buffer", "rng");
  s.noise_rng = rng_from_json(r, "noise", "rng");

  const json& e = field(j, "env", "payload");
  const std::vector<double> re = numbers(field(e, "rho_re", "env"), "env.rho_re", 9);
  const std::vector<double> im = numbers(field(e, "rho_im", "env"), "env.rho_im", 9);
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) s.env.rho(a, b) = {re[static_cast<std::size_t>(3 * a + b)], im[static_cast<std::size_t>(3 * a + b)]};
  }
  s.env.u_prev = number(e, "u_prev", "env");
  s.env.energy = number(e, "energy", "env");
  const json& dp = field(e, "d_prev", "env");
  if (dp.is_string()) {
    try {
      s.env.d_prev = qdyn::process_from_string(dp.get<std::string>());
    } catch (const DomainError& ex) {
      corrupt("env.d_prev", ex.what());
    }
  } else if (!dp.is_null()) {
    corrupt("env.d_prev", "expected a process name or null");
  }
  s.best_eval_power = optional_double_from(j, "best_eval_power", "payload");
  s.best_eval_step = integer(j, "best_eval_step", "payload");
  return s;
}

}  // namespace

json params_to_json(const nn::MlpParams& p) {
  json layers = json::array();
  for (const nn::Layer& l : p.layers) {
    json w = json::array();
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
    }
    json b = json::array();
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) b.push_back(l.bias(i));
    layers.push_back({{"rows", l.weight.rows()}, {"cols", l.weight.cols()}, {"weight", w}, {"bias", b}});
  }
  return layers;
}

nn::MlpParams params_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) corrupt(where, "expected an array of layers");
  nn::MlpParams p;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    const std::int64_t rows = integer(j[i], "rows", w);
    const std::int64_t cols = integer(j[i], "cols", w);
    if (rows <= 0 || cols <= 0) corrupt(w, "non-positive shape");
    const auto n = static_cast<std::size_t>(rows * cols);
    const std::vector<double> wv = numbers(field(j[i], "weight", w), w + ".weight", n);
    const std::vector<double> bv = numbers(field(j[i], "bias", w), w + ".bias", static_cast<std::size_t>(rows));
    nn::Layer l{nn::Matrix(rows, cols), nn::Vector(rows)};
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) l.weight(r, c) = wv[static_cast<std::size_t>(r * cols + c)];
      l.bias(r) = bv[static_cast<std::size_t>(r)];
    }
    if (!p.layers.empty() && p.layers.back().weight.rows() != cols) corrupt(w, "input width does not match previous layer");
    p.layers.push_back(std::move(l));
  }
  return p;
}

std::string encode(const Checkpoint& c) {
  json payload = {{"config", c.config}, {"state", state_to_json(c.state)}};
  const std::string body = payload.dump();
  json doc = {{"format", kFormatName}, {"version", kFormatVersion}, {"checksum", fnv1a(body)},
              {"payload", std::move(payload)}};
  return doc.dump() + "\n";
}

Checkpoint decode(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) corrupt("document", "not valid JSON (truncated or corrupt)");
  const json& fmt_name = field(doc, "format", "document");
  if (!fmt_name.is_string() || fmt_name.get<std::string>() != kFormatName) corrupt("document", "unknown format");
  const std::int64_t version = integer(doc, "version", "document");
  if (version > kFormatVersion) throw VersionError(static_cast<int>(version), kFormatVersion);
  if (version < 1) corrupt("document", "invalid version " + std::to_string(version));
  const json& payload = field(doc, "payload", "document");
  const json& sum = field(doc, "checksum", "document");
  if (!sum.is_string() || sum.get<std::string>() != fnv1a(payload.dump())) {
    corrupt("document", "checksum mismatch");
  }
  Checkpoint c;
  c.config = field(payload, "config", "payload");
  c.state = state_from_json(field(payload, "state", "payload"));
  return c;
}

void save(const std::filesystem::path& path, const Checkpoint& c) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    out << encode(c);
    if (!out) throw std::runtime_error("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IntegrityError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode(ss.str());
}

bool operator==(const sac::TrainerState& a, const sac::TrainerState& b) {
  auto adam_eq = [](const nn::AdamState& x, const nn::AdamState& y) {
    return x.step == y.step && x.m == y.m && x.v == y.v && x.config.learning_rate == y.config.learning_rate &&
           x.config.beta1 == y.config.beta1 && x.config.beta2 == y.config.beta2 && x.config.eps == y.config.eps;
  };
  auto sadam_eq = [](const nn::ScalarAdam& x, const nn::ScalarAdam& y) {
    return x.step == y.step && x.m == y.m && x.v == y.v && x.config.learning_rate == y.config.learning_rate;
  };
  if (a.step != b.step || a.updates != b.updates || !(a.policy == b.policy)) return false;
  if (a.policy_adam.size() != b.policy_adam.size()) return false;
  for (std::size_t i = 0; i < a.policy_adam.size(); ++i) {
    if (!adam_eq(a.policy_adam[i], b.policy_adam[i])) return false;
  }
  for (std::size_t k = 0; k < 2; ++k) {
    if (!(a.q.online[k].params() == b.q.online[k].params()) ||
        !(a.q.target[k].params() == b.q.target[k].params()) || !adam_eq(a.q.adam[k], b.q.adam[k])) {
      return false;
    }
  }
  return a.temps.log_alpha_d == b.temps.log_alpha_d && a.temps.log_alpha_c == b.temps.log_alpha_c &&
         sadam_eq(a.temps.adam_d, b.temps.adam_d) && sadam_eq(a.temps.adam_c, b.temps.adam_c) &&
         a.action_rng == b.action_rng && a.buffer_rng == b.buffer_rng && a.noise_rng == b.noise_rng &&
         a.env.rho == b.env.rho && a.env.u_prev == b.env.u_prev && a.env.d_prev == b.env.d_prev &&
         a.env.energy == b.env.energy && a.best_eval_power == b.best_eval_power &&
         a.best_eval_step == b.best_eval_step;
}

}  // namespace qhe::checkpoint
