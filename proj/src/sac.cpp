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

#include "qhe/sac.hpp"

#include "qhe/errors.hpp"

#include <algorithm>
#include <string>

namespace qhe::sac {

Batch Batch::from(const std::vector<Transition>& transitions) {
  const auto n = static_cast<Eigen::Index>(transitions.size());
  Batch b;
  b.obs.resize(env::kObservationDim, n);
  b.next_obs.resize(env::kObservationDim, n);
  b.d.resize(transitions.size());
  b.u.resize(n);
  b.reward.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& t = transitions[static_cast<std::size_t>(i)];
    for (int k = 0; k < env::kObservationDim; ++k) {
      b.obs(k, i) = t.obs.values[static_cast<std::size_t>(k)];
      b.next_obs(k, i) = t.next_obs.values[static_cast<std::size_t>(k)];
    }
    b.d[static_cast<std::size_t>(i)] = static_cast<int>(t.action.d);
    b.u(i) = t.action.u;
    b.reward(i) = t.reward;
  }
  return b;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) {
  if (capacity == 0) throw DomainError("replay buffer capacity must be positive");
  data_.resize(capacity);
}

void ReplayBuffer::push(const Transition& t) {
  data_[head_] = t;
  head_ = (head_ + 1) % data_.size();
  size_ = std::min(size_ + 1, data_.size());
  ++inserted_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw DomainError("replay buffer index out of range");
  const std::size_t oldest = (head_ + data_.size() - size_) % data_.size();
  return data_[(oldest + i) % data_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch_size, Rng& rng) const {
  if (batch_size == 0 || size_ < batch_size) {
    throw DomainError("cannot sample " + std::to_string(batch_size) + " transitions from a buffer of " +
                      std::to_string(size_));
  }
  std::vector<std::size_t> idx(batch_size);
  for (std::size_t& i : idx) i = static_cast<std::size_t>(rng.below(size_));
  return idx;
}

Batch ReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
  std::vector<Transition> picked;
  picked.reserve(batch_size);
  for (std::size_t i : sample_indices(batch_size, rng)) picked.push_back(at(i));
  return Batch::from(picked);
}

nn::MlpSpec q_spec(const std::vector<int>& hidden_dims) {
  return {kQInputDim, hidden_dims, kNumProcesses};
}

Matrix q_input(const Matrix& obs, const Eigen::RowVectorXd& u_unit) {
  if (obs.cols() != u_unit.size()) throw DomainError("q_input: column count mismatch");
  Matrix x(kQInputDim, obs.cols());
  x.topRows(env::kObservationDim) = obs;
  x.row(env::kObservationDim) = u_unit;
  return x;
}

QNetPair QNetPair::create(const std::vector<int>& hidden_dims, Rng& rng,
                          const nn::AdamConfig& adam) {
  QNetPair q;
  for (std::size_t j = 0; j < 2; ++j) {
    q.online[j] = nn::Mlp(q_spec(hidden_dims), rng);
    q.target[j] = nn::Mlp(q.online[j].spec(), q.online[j].params());
    q.adam[j] = nn::AdamState::for_params(q.online[j].params(), adam);
  }
  return q;
}

Temperatures Temperatures::create(double log_alpha_d, double log_alpha_c,
                                  const nn::AdamConfig& adam) {
  Temperatures t;
  t.log_alpha_d = log_alpha_d;
  t.log_alpha_c = log_alpha_c;
  t.adam_d.config = adam;
  t.adam_c.config = adam;
  return t;
}

void EntropySchedule::validate() const {
  if (!(d_decay > 0.0) || !(c_decay > 0.0)) throw DomainError("entropy decay constants must be positive");
  for (double v : {d_init, d_final, c_init, c_final}) {
    if (!std::isfinite(v)) throw DomainError("entropy targets must be finite");
  }
}

TargetEntropy target_entropy_at(const EntropySchedule& s, std::int64_t n) {
  if (n < 0) throw DomainError("target_entropy_at: negative step count");
  auto at = [n](double init, double fin, double decay) {
    const double w = std::exp(-static_cast<double>(n) / decay);
    const double v = w * init + (1.0 - w) * fin;
    return std::clamp(v, std::min(init, fin), std::max(init, fin));
  };
  return {at(s.d_init, s.d_final, s.d_decay), at(s.c_init, s.c_final, s.c_decay)};
}

void TrainConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in [0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw DomainError("tau must lie in (0, 1]");
  if (!(dt > 0.0)) throw DomainError("dt must be positive");
  if (total_steps < 0 || warmup_steps < 0) throw DomainError("step counts must be non-negative");
  if (update_every <= 0 || updates_per_round < 0) throw DomainError("update schedule must be positive");
  if (batch_size == 0 || buffer_capacity < batch_size) {
    throw DomainError("buffer capacity must hold at least one batch");
  }
  if (eval_every <= 0 || eval_length <= 0) throw DomainError("evaluation schedule must be positive");
  if (target_samples <= 0) throw DomainError("target_samples must be positive");
  nn::MlpSpec{1, q_hidden, 1}.validate();
  nn::MlpSpec{1, policy.hidden_dims, 1}.validate();
  if (!(adam.learning_rate > 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
      !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.eps > 0.0)) {
    throw DomainError("invalid Adam hyperparameters");
  }
  if (!std::isfinite(init_log_alpha_d) || !std::isfinite(init_log_alpha_c)) {
    throw DomainError("initial log temperatures must be finite");
  }
  entropy.validate();
}

std::vector<Matrix> draw_noise(int samples, Eigen::Index n, Rng& rng) {
  std::vector<Matrix> xi(static_cast<std::size_t>(samples), Matrix(kNumProcesses, n));
  for (Matrix& m : xi) {
    for (Eigen::Index b = 0; b < n; ++b) {
      for (int d = 0; d < kNumProcesses; ++d) m(d, b) = rng.normal();
    }
  }
  return xi;
}

namespace {

struct BranchSample {
  Matrix z;       // pre-squash
  Matrix t;       // tanh z, the Q-net's u input
  Matrix log_pc;  // log pi_C(u_d | d, s)
};

BranchSample sample_branches(const PolicyHeads& h, const Matrix& xi) {
  if (xi.rows() != kNumProcesses || xi.cols() != h.mu.cols()) {
    throw DomainError("noise shape does not match the batch");
  }
  BranchSample s;
  s.z = h.mu.array() + h.log_sigma.array().exp() * xi.array();
  s.t = s.z.array().tanh();
  s.log_pc.resize(kNumProcesses, h.mu.cols());
  for (Eigen::Index i = 0; i < xi.size(); ++i) {
    s.log_pc(i) = squashed_log_density(xi(i), h.mu(i), h.log_sigma(i));
  }
  return s;
}

// Columns [d n, (d + 1) n) hold every sample paired with branch d's u.
Matrix stacked_q_input(const Matrix& obs, const Matrix& t) {
  const Eigen::Index n = obs.cols();
  Matrix x(kQInputDim, kNumProcesses * n);
  for (int d = 0; d < kNumProcesses; ++d) {
    x.block(0, d * n, env::kObservationDim, n) = obs;
    x.block(env::kObservationDim, d * n, 1, n) = t.row(d);
  }
  return x;
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NonFiniteError(std::string(what) + " is not finite");
}

}  // namespace

Vector compute_q_target(const Batch& batch, const QNetPair& q, const PolicyNet& policy,
                        const Temperatures& temps, double gamma, const std::vector<Matrix>& xi) {
  if (xi.empty()) throw DomainError("compute_q_target: no noise samples");
  const Eigen::Index n = batch.size();
  const PolicyHeads h = policy.evaluate(batch.next_obs);
  Matrix min_q = Matrix::Zero(kNumProcesses, n);
  Matrix log_pc = Matrix::Zero(kNumProcesses, n);
  for (const Matrix& noise : xi) {
    const BranchSample s = sample_branches(h, noise);
    const Matrix x = stacked_q_input(batch.next_obs, s.t);
    const Matrix q1 = q.target[0].evaluate(x);
    const Matrix q2 = q.target[1].evaluate(x);
    for (int d = 0; d < kNumProcesses; ++d) {
      for (Eigen::Index b = 0; b < n; ++b) {
        min_q(d, b) += std::min(q1(d, d * n + b), q2(d, d * n + b));
      }
    }
    log_pc += s.log_pc;
  }
  const double k = static_cast<double>(xi.size());
  min_q /= k;
  log_pc /= k;
  const double ad = temps.alpha_d();
  const double ac = temps.alpha_c();
  Vector y(n);
  for (Eigen::Index b = 0; b < n; ++b) {
    double v = 0.0;
    for (int d = 0; d < kNumProcesses; ++d) {
      v += h.probs(d, b) * (min_q(d, b) - ac * log_pc(d, b) - ad * h.log_probs(d, b));
    }
    y(b) = batch.reward(b) + gamma * v;
  }
  return y;
}

Vector compute_q_target(const Batch& batch, const QNetPair& q, const PolicyNet& policy,
                        const Temperatures& temps, double gamma, int samples, Rng& rng) {
  return compute_q_target(batch, q, policy, temps, gamma, draw_noise(samples, batch.size(), rng));
}

CriticResult critic_loss_and_grad(const Batch& batch, const QNetPair& q, const Vector& y) {
  const Eigen::Index n = batch.size();
  if (y.size() != n) throw DomainError("critic target length does not match the batch");
  Eigen::RowVectorXd u_unit(n);
  for (Eigen::Index b = 0; b < n; ++b) u_unit(b) = env::scale_to_unit(batch.u(b));
  const Matrix x = q_input(batch.obs, u_unit);
  CriticResult r;
  for (std::size_t j = 0; j < 2; ++j) {
    const nn::ForwardCache cache = q.online[j].forward(x);
    Matrix g = Matrix::Zero(kNumProcesses, n);
    double loss = 0.0;
    for (Eigen::Index b = 0; b < n; ++b) {
      const int d = batch.d[static_cast<std::size_t>(b)];
      const double diff = cache.output(d, b) - y(b);
      loss += 0.5 * diff * diff;
      g(d, b) = diff / static_cast<double>(n);
    }
    r.losses[j] = loss / static_cast<double>(n);
    r.grads[j] = q.online[j].backward(cache, g).params;
  }
  return r;
}

double critic_update(const Batch& batch, QNetPair& q, const Vector& y) {
  CriticResult r = critic_loss_and_grad(batch, q, y);
  require_finite(r.losses[0], "critic loss");
  require_finite(r.losses[1], "critic loss");
  for (std::size_t j = 0; j < 2; ++j) nn::adam_step(q.online[j], r.grads[j], q.adam[j]);
  return r.mean_loss();
}

ActorResult actor_loss_and_grad(const Batch& batch, const PolicyNet& policy, const QNetPair& q,
                                const Temperatures& temps, const Matrix& xi) {
  const Eigen::Index n = batch.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const PolicyForward fwd = policy.forward(batch.obs);
  const PolicyHeads& h = fwd.heads;
  const BranchSample s = sample_branches(h, xi);
  const Matrix x = stacked_q_input(batch.obs, s.t);
  const std::array<nn::ForwardCache, 2> qc{q.online[0].forward(x), q.online[1].forward(x)};

  const double ad = temps.alpha_d();
  const double ac = temps.alpha_c();
  std::array<Matrix, 2> sel{Matrix::Zero(kNumProcesses, kNumProcesses * n),
                            Matrix::Zero(kNumProcesses, kNumProcesses * n)};
  Matrix f(kNumProcesses, n);
  ActorResult r;
  double loss = 0.0;
  double hd = 0.0;
  double hc = 0.0;
  for (Eigen::Index b = 0; b < n; ++b) {
    for (int d = 0; d < kNumProcesses; ++d) {
      const Eigen::Index col = d * n + b;
      const double q1 = qc[0].output(d, col);
      const double q2 = qc[1].output(d, col);
      const std::size_t j = q2 < q1 ? 1 : 0;
      sel[j](d, col) = 1.0;
      f(d, b) = ad * h.log_probs(d, b) + ac * s.log_pc(d, b) - std::min(q1, q2);
      loss += h.probs(d, b) * f(d, b);
      hd -= h.probs(d, b) * h.log_probs(d, b);
      hc -= h.probs(d, b) * s.log_pc(d, b);
    }
  }
  r.loss = loss * inv_n;
  r.entropies = {hd * inv_n, hc * inv_n};

  // d min_j Q / d tanh(z), read from the u row of the input gradient.
  Matrix dq_dt = Matrix::Zero(kNumProcesses, n);
  for (std::size_t j = 0; j < 2; ++j) {
    const Matrix gin = q.online[j].input_gradient(qc[j], sel[j]);
    for (int d = 0; d < kNumProcesses; ++d) {
      dq_dt.row(d) += gin.block(env::kObservationDim, d * n, 1, n);
    }
  }

  Matrix d_logits(kNumProcesses, n);
  Matrix d_mu(kNumProcesses, n);
  Matrix d_log_sigma(kNumProcesses, n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const double mean_f = h.probs.col(b).dot(f.col(b));
    for (int d = 0; d < kNumProcesses; ++d) {
      const double p = h.probs(d, b);
      const double t = s.t(d, b);
      d_logits(d, b) = p * (f(d, b) - mean_f) * inv_n;
      const double dl_dz = p * (ac * 2.0 * t - dq_dt(d, b) * (1.0 - t * t)) * inv_n;
      d_mu(d, b) = dl_dz;
      d_log_sigma(d, b) = -p * ac * inv_n + dl_dz * std::exp(h.log_sigma(d, b)) * xi(d, b);
    }
  }
  r.grads = policy.backward(fwd, d_logits, d_mu, d_log_sigma);
  return r;
}

std::vector<nn::AdamState> policy_adam_states(const PolicyNet& policy,
                                              const nn::AdamConfig& config) {
  std::vector<nn::AdamState> states;
  for (const nn::Mlp& net : policy.nets()) states.push_back(nn::AdamState::for_params(net.params(), config));
  return states;
}

ActorResult actor_update(const Batch& batch, PolicyNet& policy, std::vector<nn::AdamState>& adam,
                         const QNetPair& q, const Temperatures& temps, Rng& rng) {
  const Matrix xi = draw_noise(1, batch.size(), rng).front();
  ActorResult r = actor_loss_and_grad(batch, policy, q, temps, xi);
  require_finite(r.loss, "actor loss");
  if (adam.size() != policy.nets().size()) throw DomainError("policy optimizer state mismatch");
  for (std::size_t i = 0; i < adam.size(); ++i) {
    nn::adam_step(policy.mutable_nets()[i], r.grads[i], adam[i]);
  }
  return r;
}

TemperatureLoss temperature_loss_and_grad(const PolicyEntropies& h, const Temperatures& temps,
                                          const TargetEntropy& target) {
  TemperatureLoss l;
  l.loss_d = temps.alpha_d() * (h.discrete - target.discrete);
  l.loss_c = temps.alpha_c() * (h.continuous - target.continuous);
  l.grad_log_alpha_d = l.loss_d;
  l.grad_log_alpha_c = l.loss_c;
  return l;
}

TemperatureLoss temperature_update(const PolicyEntropies& h, Temperatures& temps,
                                   const TargetEntropy& target) {
  const TemperatureLoss l = temperature_loss_and_grad(h, temps, target);
  require_finite(l.loss_d, "discrete temperature loss");
  require_finite(l.loss_c, "continuous temperature loss");
  temps.adam_d.apply(temps.log_alpha_d, l.grad_log_alpha_d);
  temps.adam_c.apply(temps.log_alpha_c, l.grad_log_alpha_c);
  return l;
}

void polyak_update(const nn::MlpParams& online, nn::MlpParams& target, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw DomainError("polyak coefficient must lie in [0, 1]");
  if (!online.same_shape(target)) throw DomainError("polyak_update: shape mismatch");
  for (std::size_t i = 0; i < online.layers.size(); ++i) {
    nn::Layer& t = target.layers[i];
    const nn::Layer& o = online.layers[i];
    t.weight = tau * o.weight + (1.0 - tau) * t.weight;
    t.bias = tau * o.bias + (1.0 - tau) * t.bias;
  }
}

void polyak_update(QNetPair& q, double tau) {
  for (std::size_t j = 0; j < 2; ++j) {
    polyak_update(q.online[j].params(), q.target[j].mutable_params(), tau);
  }
}

namespace {

env::EnvOptions with_dt(env::EnvOptions options, double dt) {
  options.dt = dt;
  return options;
}

}  // namespace

Trainer::Trainer(TrainConfig config, std::uint64_t seed, qdyn::EngineSpec spec,
                 env::EnvOptions options)
    : config_(std::move(config)),
      spec_(spec),
      options_(with_dt(options, config_.dt)),
      env_(spec_, options_),
      buffer_(config_.buffer_capacity) {
  config_.validate();
  Rng init = Rng::derive(seed, 0);
  s_.policy = PolicyNet(config_.policy, init);
  s_.policy_adam = policy_adam_states(s_.policy, config_.adam);
  s_.q = QNetPair::create(config_.q_hidden, init, config_.adam);
  s_.temps = Temperatures::create(config_.init_log_alpha_d, config_.init_log_alpha_c, config_.adam);
  s_.action_rng = Rng::derive(seed, 1);
  s_.buffer_rng = Rng::derive(seed, 2);
  s_.noise_rng = Rng::derive(seed, 3);
  obs_ = env_.reset();
}

Trainer::Trainer(TrainConfig config, TrainerState state, qdyn::EngineSpec spec,
                 env::EnvOptions options)
    : config_(std::move(config)),
      spec_(spec),
      options_(with_dt(options, config_.dt)),
      s_(std::move(state)),
      env_(spec_, options_),
      buffer_(config_.buffer_capacity) {
  config_.validate();
  env_.restore(qdyn::DensityMatrix::from_matrix(s_.env.rho), s_.env.u_prev, s_.env.d_prev,
               s_.env.energy);
  obs_ = env_.observe();
}

TrainerState Trainer::snapshot() const {
  TrainerState st = s_;
  st.env.rho = env_.state().matrix();
  st.env.u_prev = env_.u_prev();
  st.env.d_prev = env_.d_prev();
  st.env.energy = env_.energy();
  return st;
}

void Trainer::update_round() {
  double lq = 0.0;
  double lpi = 0.0;
  PolicyEntropies h{0.0, 0.0};
  const TargetEntropy target = target_entropy_at(config_.entropy, s_.step);
  for (std::int64_t r = 0; r < config_.updates_per_round; ++r) {
    const Batch batch = buffer_.sample(config_.batch_size, s_.buffer_rng);
    const Vector y = compute_q_target(batch, s_.q, s_.policy, s_.temps, config_.gamma,
                                      config_.target_samples, s_.noise_rng);
    lq += critic_update(batch, s_.q, y);
    const ActorResult a = actor_update(batch, s_.policy, s_.policy_adam, s_.q, s_.temps, s_.noise_rng);
    lpi += a.loss;
    h.discrete += a.entropies.discrete;
    h.continuous += a.entropies.continuous;
    temperature_update(a.entropies, s_.temps, target);
    polyak_update(s_.q, config_.tau);
    ++s_.updates;
  }
  if (config_.updates_per_round > 0) {
    const double k = static_cast<double>(config_.updates_per_round);
    last_loss_q_ = lq / k;
    last_loss_pi_ = lpi / k;
    last_entropy_ = {h.discrete / k, h.continuous / k};
  }
}

std::optional<TrainLogRow> Trainer::step() {
  Action action;
  if (s_.step < config_.warmup_steps) {
    action.d = static_cast<Process>(s_.action_rng.below(kNumProcesses));
    action.u = s_.action_rng.uniform(qdyn::kUMin, qdyn::kUMax);
  } else {
    action = sample_action(s_.policy, obs_, SampleMode::Stochastic, s_.action_rng).action;
  }
  const env::StepResult res = env_.step(action);
  buffer_.push({obs_, action, res.reward, res.obs});
  obs_ = res.obs;
  ++s_.step;

  if (s_.step >= config_.warmup_steps && s_.step % config_.update_every == 0 &&
      buffer_.size() >= config_.batch_size) {
    update_round();
  }
  if (s_.step % config_.eval_every != 0) return std::nullopt;

  env::Trajectory traj = evaluate();
  TrainLogRow row;
  row.step = s_.step;
  row.loss_q = last_loss_q_;
  row.loss_pi = last_loss_pi_;
  row.alpha_d = s_.temps.alpha_d();
  row.alpha_c = s_.temps.alpha_c();
  row.entropy_d = last_entropy_.discrete;
  row.entropy_c = last_entropy_.continuous;
  const TargetEntropy target = target_entropy_at(config_.entropy, s_.step);
  row.target_entropy_d = target.discrete;
  row.target_entropy_c = target.continuous;
  row.eval_avg_power = traj.final_avg_power();
  if (row.eval_avg_power > s_.best_eval_power) {
    s_.best_eval_power = row.eval_avg_power;
    s_.best_eval_step = s_.step;
    best_traj_ = std::move(traj);
  }
  return row;
}

void Trainer::run(const std::function<void(const TrainLogRow&)>& on_log) {
  while (s_.step < config_.total_steps) {
    if (auto row = step(); row && on_log) on_log(*row);
  }
}

env::Trajectory Trainer::evaluate() const {
  env::EngineEnv eval_env(spec_, options_);
  Rng unused;
  const PolicyNet& policy = s_.policy;
  return env::rollout(eval_env, static_cast<std::size_t>(config_.eval_length), config_.gamma,
                      [&](const env::Observation& obs, std::size_t) {
                        return sample_action(policy, obs, SampleMode::Deterministic, unused).action;
                      });
}

}  // namespace qhe::sac
