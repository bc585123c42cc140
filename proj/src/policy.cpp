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

#include "qhe/policy.hpp"

#include "qhe/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace qhe::sac {

namespace {

nn::MlpSpec spec_for(const PolicyConfig& config, int output_dim) {
  return {env::kObservationDim, config.hidden_dims, output_dim};
}

int heads_per_net(const PolicyConfig& config, std::size_t index) {
  if (config.shared_trunk) return 3 * kNumProcesses;
  return index == 0 ? kNumProcesses : 2 * kNumProcesses;
}

}  // namespace

PolicyNet::PolicyNet(const PolicyConfig& config, Rng& rng) : config_(config) {
  const std::size_t n = config.shared_trunk ? 1 : 2;
  for (std::size_t i = 0; i < n; ++i) {
    nets_.emplace_back(spec_for(config, heads_per_net(config, i)), rng);
  }
}

PolicyNet::PolicyNet(const PolicyConfig& config, std::vector<nn::Mlp> nets)
    : config_(config), nets_(std::move(nets)) {
  const std::size_t n = config.shared_trunk ? 1 : 2;
  if (nets_.size() != n) throw DomainError("policy network count does not match the trunk layout");
  for (std::size_t i = 0; i < n; ++i) {
    if (nets_[i].spec() != spec_for(config, heads_per_net(config, i))) {
      throw DomainError("policy network shape does not match the configuration");
    }
  }
}

PolicyHeads PolicyNet::heads_from(const Matrix& out0, const Matrix* out1) const {
  PolicyHeads h;
  const Matrix& cont = out1 ? *out1 : out0;
  const Eigen::Index off = out1 ? 0 : kNumProcesses;
  h.logits = out0.topRows(kNumProcesses);
  h.mu = cont.middleRows(off, kNumProcesses);
  h.raw_log_sigma = cont.middleRows(off + kNumProcesses, kNumProcesses);
  h.log_sigma = h.raw_log_sigma.cwiseMax(kLogSigmaMin).cwiseMin(kLogSigmaMax);
  h.probs.resize(kNumProcesses, out0.cols());
  h.log_probs.resize(kNumProcesses, out0.cols());
  for (Eigen::Index b = 0; b < out0.cols(); ++b) {
    const double m = h.logits.col(b).maxCoeff();
    const double lse = m + std::log((h.logits.col(b).array() - m).exp().sum());
    h.log_probs.col(b) = h.logits.col(b).array() - lse;
    h.probs.col(b) = h.log_probs.col(b).array().exp();
  }
  return h;
}

PolicyHeads PolicyNet::evaluate(const Matrix& obs) const {
  if (nets_.size() == 1) return heads_from(nets_[0].evaluate(obs), nullptr);
  const Matrix cont = nets_[1].evaluate(obs);
  return heads_from(nets_[0].evaluate(obs), &cont);
}

PolicyForward PolicyNet::forward(const Matrix& obs) const {
  PolicyForward f;
  for (const nn::Mlp& net : nets_) f.caches.push_back(net.forward(obs));
  f.heads = heads_from(f.caches[0].output, f.caches.size() > 1 ? &f.caches[1].output : nullptr);
  return f;
}

std::vector<nn::MlpParams> PolicyNet::backward(const PolicyForward& fwd, const Matrix& d_logits,
                                               const Matrix& d_mu,
                                               const Matrix& d_log_sigma) const {
  const Matrix& raw = fwd.heads.raw_log_sigma;
  Matrix d_raw = d_log_sigma;
  for (Eigen::Index j = 0; j < raw.size(); ++j) {
    if (raw(j) < kLogSigmaMin || raw(j) > kLogSigmaMax) d_raw(j) = 0.0;
  }
  std::vector<nn::MlpParams> grads;
  if (nets_.size() == 1) {
    Matrix g(3 * kNumProcesses, d_logits.cols());
    g << d_logits, d_mu, d_raw;
    grads.push_back(nets_[0].backward(fwd.caches[0], g).params);
  } else {
    Matrix g(2 * kNumProcesses, d_mu.cols());
    g << d_mu, d_raw;
    grads.push_back(nets_[0].backward(fwd.caches[0], d_logits).params);
    grads.push_back(nets_[1].backward(fwd.caches[1], g).params);
  }
  return grads;
}

bool operator==(const PolicyNet& a, const PolicyNet& b) {
  if (!(a.config_ == b.config_) || a.nets_.size() != b.nets_.size()) return false;
  for (std::size_t i = 0; i < a.nets_.size(); ++i) {
    if (!(a.nets_[i].params() == b.nets_[i].params())) return false;
  }
  return true;
}

Matrix observation_matrix(const std::vector<env::Observation>& obs) {
  Matrix m(env::kObservationDim, static_cast<Eigen::Index>(obs.size()));
  for (std::size_t b = 0; b < obs.size(); ++b) {
    for (int i = 0; i < env::kObservationDim; ++i) {
      m(i, static_cast<Eigen::Index>(b)) = obs[b].values[static_cast<std::size_t>(i)];
    }
  }
  return m;
}

Matrix observation_matrix(const env::Observation& obs) {
  return observation_matrix(std::vector<env::Observation>{obs});
}

double squash(double z) {
  const double u = qdyn::kUMin + (qdyn::kUMax - qdyn::kUMin) * 0.5 * (std::tanh(z) + 1.0);
  return std::clamp(u, qdyn::kUMin, qdyn::kUMax);
}

double log1m_tanh2(double z) {
  const double a = std::abs(z);
  return 2.0 * (std::numbers::ln2 - a - std::log1p(std::exp(-2.0 * a)));
}

double squashed_log_density(double xi, double mu, double log_sigma) {
  const double z = mu + std::exp(log_sigma) * xi;
  const double half_range = 0.5 * (qdyn::kUMax - qdyn::kUMin);
  return -0.5 * xi * xi - log_sigma - 0.5 * std::log(2.0 * std::numbers::pi) -
         std::log(half_range) - log1m_tanh2(z);
}

double squashed_log_density_at(double u, double mu, double log_sigma) {
  if (!(u > qdyn::kUMin && u < qdyn::kUMax)) return -std::numeric_limits<double>::infinity();
  const double t = 2.0 * (u - qdyn::kUMin) / (qdyn::kUMax - qdyn::kUMin) - 1.0;
  const double z = std::atanh(t);
  return squashed_log_density((z - mu) / std::exp(log_sigma), mu, log_sigma);
}

SampledAction sample_action(const PolicyNet& policy, const env::Observation& obs, SampleMode mode,
                            Rng& rng) {
  const PolicyHeads h = policy.evaluate(observation_matrix(obs));
  int d = 0;
  if (mode == SampleMode::Deterministic) {
    h.probs.col(0).maxCoeff(&d);
  } else {
    const double r = rng.uniform();
    double acc = 0.0;
    d = kNumProcesses - 1;
    for (int k = 0; k < kNumProcesses; ++k) {
      acc += h.probs(k, 0);
      if (r < acc) {
        d = k;
        break;
      }
    }
  }
  const double xi = mode == SampleMode::Stochastic ? rng.normal() : 0.0;
  const double mu = h.mu(d, 0);
  const double ls = h.log_sigma(d, 0);
  SampledAction s;
  s.action = {static_cast<Process>(d), squash(mu + std::exp(ls) * xi)};
  s.log_prob_d = h.log_probs(d, 0);
  s.log_prob_u = squashed_log_density(xi, mu, ls);
  return s;
}

}  // namespace qhe::sac
