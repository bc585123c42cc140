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

// Hybrid soft actor-critic: twin Q-nets with polyak targets, the hybrid
// policy, two learned entropy temperatures with decaying targets, and the
// training loop that ties them to the engine.
//
// Every loss is available in a fixed-noise form returning its gradient so
// that the reverse passes can be checked against finite differences.

#include "qhe/engine_env.hpp"
#include "qhe/nn.hpp"
#include "qhe/policy.hpp"
#include "qhe/rng.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

namespace qhe::sac {

inline constexpr int kQInputDim = env::kObservationDim + 1;

struct Transition {
  env::Observation obs;
  Action action;
  double reward = 0.0;
  env::Observation next_obs;
};

/// Column-major batch: obs and next_obs are 13 x n.
struct Batch {
  Matrix obs;
  Matrix next_obs;
  std::vector<int> d;
  Vector u;
  Vector reward;

  Eigen::Index size() const { return reward.size(); }
  static Batch from(const std::vector<Transition>& transitions);
};

/// Fixed-capacity FIFO ring; the oldest transition is evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(const Transition& t);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return data_.size(); }
  std::uint64_t total_inserted() const { return inserted_; }
  /// i = 0 is the oldest stored transition.
  const Transition& at(std::size_t i) const;

  /// Uniform with replacement. Throws DomainError when fewer than
  /// `batch_size` transitions are stored.
  std::vector<std::size_t> sample_indices(std::size_t batch_size, Rng& rng) const;
  Batch sample(std::size_t batch_size, Rng& rng) const;

 private:
  std::vector<Transition> data_;
  std::size_t head_ = 0;  // next write position
  std::size_t size_ = 0;
  std::uint64_t inserted_ = 0;
};

/// Q-net: (observation, u mapped to [-1, 1]) -> one value per process.
nn::MlpSpec q_spec(const std::vector<int>& hidden_dims);
/// Stacks a 13 x n observation block over a row of scaled u values.
Matrix q_input(const Matrix& obs, const Eigen::RowVectorXd& u_unit);

struct QNetPair {
  std::array<nn::Mlp, 2> online;
  std::array<nn::Mlp, 2> target;
  std::array<nn::AdamState, 2> adam;

  /// Targets start as copies of the online nets.
  static QNetPair create(const std::vector<int>& hidden_dims, Rng& rng,
                         const nn::AdamConfig& adam = {});
};

struct Temperatures {
  double log_alpha_d = 0.0;
  double log_alpha_c = 0.0;
  nn::ScalarAdam adam_d;
  nn::ScalarAdam adam_c;

  double alpha_d() const { return std::exp(log_alpha_d); }
  double alpha_c() const { return std::exp(log_alpha_c); }

  static Temperatures create(double log_alpha_d, double log_alpha_c,
                             const nn::AdamConfig& adam = {});
};

/// Targets decay from init to final with time constant `decay` env steps.
struct EntropySchedule {
  double d_init = 0.98 * 1.0986122886681098;  // 0.98 ln 3
  double d_final = 0.03;
  double d_decay = 144000.0;
  double c_init = -0.72;
  double c_final = -3.8;
  double c_decay = 144000.0;

  void validate() const;
};

struct TargetEntropy {
  double discrete = 0.0;
  double continuous = 0.0;
};

/// final + (init - final) * exp(-n / decay), for each head.
TargetEntropy target_entropy_at(const EntropySchedule& schedule, std::int64_t n);

struct TrainConfig {
  double gamma = 0.995;
  double dt = 0.5;
  double tau = 0.005;
  std::int64_t total_steps = 500000;
  std::int64_t warmup_steps = 5000;
  std::int64_t update_every = 50;
  std::int64_t updates_per_round = 50;
  std::size_t batch_size = 512;
  std::size_t buffer_capacity = 160000;
  std::int64_t eval_every = 5000;
  std::int64_t eval_length = 1000;
  /// u' samples per branch in the soft target.
  int target_samples = 1;
  std::vector<int> q_hidden{256, 256};
  PolicyConfig policy;
  nn::AdamConfig adam;
  double init_log_alpha_d = 0.0;
  double init_log_alpha_c = 0.0;
  EntropySchedule entropy;

  void validate() const;
};

/// Standard normal noise, 3 x n per sample, for the target's u' draws.
std::vector<Matrix> draw_noise(int samples, Eigen::Index n, Rng& rng);

/// Soft Bellman target
/// y = r + gamma * sum_d' pi_D(d'|s') [min_j Qbar_j(s', d', u'_d') - alpha_C log pi_C(u'_d')]
///       + gamma * alpha_D * H_D(s'),
/// with u'_d' from the squashed Gaussian of branch d' driven by `xi`
/// (averaged over the entries of `xi`).
Vector compute_q_target(const Batch& batch, const QNetPair& q, const PolicyNet& policy,
                        const Temperatures& temps, double gamma, const std::vector<Matrix>& xi);
Vector compute_q_target(const Batch& batch, const QNetPair& q, const PolicyNet& policy,
                        const Temperatures& temps, double gamma, int samples, Rng& rng);

struct CriticResult {
  std::array<double, 2> losses{};
  std::array<nn::MlpParams, 2> grads;
  double mean_loss() const { return 0.5 * (losses[0] + losses[1]); }
};

/// Mean over the batch of (Q_j(s, u)[d] - y)^2 / 2 for each online net.
CriticResult critic_loss_and_grad(const Batch& batch, const QNetPair& q, const Vector& y);
/// Adam step on both online nets; returns the mean of the two losses.
/// Throws NonFiniteError on a non-finite loss.
double critic_update(const Batch& batch, QNetPair& q, const Vector& y);

/// Batch means of H_D = -sum_d p_d log p_d and H_C = -sum_d p_d log pi_C(u_d).
struct PolicyEntropies {
  double discrete = 0.0;
  double continuous = 0.0;
};

struct ActorResult {
  double loss = 0.0;
  std::vector<nn::MlpParams> grads;
  PolicyEntropies entropies;
};

/// E_s sum_d pi_D(d|s) [alpha_D log pi_D(d|s) + alpha_C log pi_C(u_d|s) - min_j Q_j(s, d, u_d)]
/// with u_d = squash(mu_d + sigma_d * xi_d), xi being 3 x n.
ActorResult actor_loss_and_grad(const Batch& batch, const PolicyNet& policy, const QNetPair& q,
                                const Temperatures& temps, const Matrix& xi);
ActorResult actor_update(const Batch& batch, PolicyNet& policy,
                         std::vector<nn::AdamState>& adam, const QNetPair& q,
                         const Temperatures& temps, Rng& rng);
std::vector<nn::AdamState> policy_adam_states(const PolicyNet& policy,
                                              const nn::AdamConfig& config = {});

struct TemperatureLoss {
  double loss_d = 0.0;
  double loss_c = 0.0;
  double grad_log_alpha_d = 0.0;
  double grad_log_alpha_c = 0.0;
};

/// L = alpha * (H - Hbar) for each head, differentiated w.r.t. log alpha.
TemperatureLoss temperature_loss_and_grad(const PolicyEntropies& h, const Temperatures& temps,
                                          const TargetEntropy& target);
TemperatureLoss temperature_update(const PolicyEntropies& h, Temperatures& temps,
                                   const TargetEntropy& target);

/// target <- tau * online + (1 - tau) * target. Throws DomainError on a
/// shape mismatch or tau outside [0, 1].
void polyak_update(const nn::MlpParams& online, nn::MlpParams& target, double tau);
void polyak_update(QNetPair& q, double tau);

struct TrainLogRow {
  std::int64_t step = 0;
  double loss_q = std::numeric_limits<double>::quiet_NaN();
  double loss_pi = std::numeric_limits<double>::quiet_NaN();
  double alpha_d = 0.0;
  double alpha_c = 0.0;
  double entropy_d = std::numeric_limits<double>::quiet_NaN();
  double entropy_c = std::numeric_limits<double>::quiet_NaN();
  double target_entropy_d = 0.0;
  double target_entropy_c = 0.0;
  double eval_avg_power = 0.0;
};

/// Environment state carried between steps of the training trajectory.
struct EnvSnapshot {
  qdyn::Matrix3 rho = qdyn::Matrix3::Zero();
  double u_prev = 1.0;
  std::optional<Process> d_prev;
  double energy = 0.0;
};

/// Everything a checkpoint persists (the replay buffer is not included).
struct TrainerState {
  std::int64_t step = 0;
  std::int64_t updates = 0;
  PolicyNet policy;
  std::vector<nn::AdamState> policy_adam;
  QNetPair q;
  Temperatures temps;
  Rng action_rng;
  Rng buffer_rng;
  Rng noise_rng;
  EnvSnapshot env;
  double best_eval_power = -std::numeric_limits<double>::infinity();
  std::int64_t best_eval_step = -1;
};

/// Single-threaded training loop over one continuing trajectory.
class Trainer {
 public:
  Trainer(TrainConfig config, std::uint64_t seed, qdyn::EngineSpec spec = {},
          env::EnvOptions options = {});
  /// Resumes from a saved state with an empty replay buffer.
  Trainer(TrainConfig config, TrainerState state, qdyn::EngineSpec spec = {},
          env::EnvOptions options = {});

  /// One environment step, followed by an update round and an evaluation
  /// when due. Returns the log row when an evaluation ran.
  std::optional<TrainLogRow> step();
  /// Steps until config.total_steps, reporting each log row.
  void run(const std::function<void(const TrainLogRow&)>& on_log = {});

  /// Deterministic-policy rollout from reset.
  env::Trajectory evaluate() const;

  TrainerState snapshot() const;
  const TrainConfig& config() const { return config_; }
  const PolicyNet& policy() const { return s_.policy; }
  const QNetPair& q() const { return s_.q; }
  const Temperatures& temps() const { return s_.temps; }
  const ReplayBuffer& buffer() const { return buffer_; }
  std::int64_t step_count() const { return s_.step; }
  std::int64_t update_count() const { return s_.updates; }
  double best_eval_power() const { return s_.best_eval_power; }
  const std::optional<env::Trajectory>& best_trajectory() const { return best_traj_; }

 private:
  void update_round();

  TrainConfig config_;
  qdyn::EngineSpec spec_;
  env::EnvOptions options_;
  TrainerState s_;
  env::EngineEnv env_;
  env::Observation obs_;
  ReplayBuffer buffer_;
  std::optional<env::Trajectory> best_traj_;
  double last_loss_q_ = std::numeric_limits<double>::quiet_NaN();
  double last_loss_pi_ = std::numeric_limits<double>::quiet_NaN();
  PolicyEntropies last_entropy_{std::numeric_limits<double>::quiet_NaN(),
                                std::numeric_limits<double>::quiet_NaN()};
};

}  // namespace qhe::sac
