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

// Hybrid policy: softmax over the three strokes, and for each stroke a
// tanh-squashed Gaussian over u mapped onto [kUMin, kUMax].

#include "qhe/action.hpp"
#include "qhe/engine_env.hpp"
#include "qhe/nn.hpp"
#include "qhe/rng.hpp"

#include <array>
#include <vector>

namespace qhe::sac {

using nn::Matrix;
using nn::Vector;

inline constexpr int kNumProcesses = 3;
inline constexpr double kLogSigmaMin = -20.0;
inline constexpr double kLogSigmaMax = 2.0;

struct PolicyConfig {
  std::vector<int> hidden_dims{256, 256};
  /// One trunk for all heads; false gives separate discrete and continuous nets.
  bool shared_trunk = true;

  friend bool operator==(const PolicyConfig&, const PolicyConfig&) = default;
};

/// Head values for a batch; every matrix is 3 x batch.
struct PolicyHeads {
  Matrix logits;
  Matrix mu;
  Matrix log_sigma;      // clamped
  Matrix raw_log_sigma;  // before clamping
  Matrix probs;
  Matrix log_probs;
};

struct PolicyForward {
  PolicyHeads heads;
  std::vector<nn::ForwardCache> caches;
};

class PolicyNet {
 public:
  PolicyNet() = default;
  PolicyNet(const PolicyConfig& config, Rng& rng);
  /// Wraps existing networks (one shared, or discrete then continuous).
  PolicyNet(const PolicyConfig& config, std::vector<nn::Mlp> nets);

  const PolicyConfig& config() const { return config_; }
  const std::vector<nn::Mlp>& nets() const { return nets_; }
  std::vector<nn::Mlp>& mutable_nets() { return nets_; }

  PolicyHeads evaluate(const Matrix& obs) const;
  PolicyForward forward(const Matrix& obs) const;

  /// Parameter gradients, one MlpParams per net, for a loss whose head
  /// gradients are given (each 3 x batch, w.r.t. the clamped log sigma).
  std::vector<nn::MlpParams> backward(const PolicyForward& fwd, const Matrix& d_logits,
                                      const Matrix& d_mu, const Matrix& d_log_sigma) const;

  friend bool operator==(const PolicyNet& a, const PolicyNet& b);

 private:
  PolicyHeads heads_from(const Matrix& out0, const Matrix* out1) const;

  PolicyConfig config_;
  std::vector<nn::Mlp> nets_;
};

/// Observation batch as a 13 x n matrix.
Matrix observation_matrix(const std::vector<env::Observation>& obs);
Matrix observation_matrix(const env::Observation& obs);

/// u = kUMin + (kUMax - kUMin) * (tanh z + 1) / 2, clamped to the bounds.
double squash(double z);
/// log(1 - tanh(z)^2) without cancellation for large |z|.
double log1m_tanh2(double z);
/// Log-density of u = squash(mu + sigma * xi) for a standard normal xi.
double squashed_log_density(double xi, double mu, double log_sigma);
/// Same density expressed in u; -inf outside the open interval.
double squashed_log_density_at(double u, double mu, double log_sigma);

enum class SampleMode { Stochastic, Deterministic };

struct SampledAction {
  Action action;
  double log_prob_d = 0.0;
  double log_prob_u = 0.0;
};

/// Stochastic: d from the softmax and u from the squashed Gaussian of
/// branch d. Deterministic: argmax d and u = squash(mu_d).
SampledAction sample_action(const PolicyNet& policy, const env::Observation& obs, SampleMode mode,
                            Rng& rng);

}  // namespace qhe::sac
