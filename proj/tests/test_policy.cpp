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

#include "qhe/errors.hpp"
#include "qhe/policy.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace qhe;
using namespace qhe::sac;
using qhe::testing::near;

namespace {

/// Shared-trunk policy whose heads are the given constants for every input.
PolicyNet constant_policy(const std::array<double, 3>& logits, const std::array<double, 3>& mu,
                          const std::array<double, 3>& log_sigma) {
  PolicyConfig cfg;
  cfg.hidden_dims = {4};
  Rng rng(0);
  PolicyNet p(cfg, rng);
  nn::MlpParams& params = p.mutable_nets()[0].mutable_params();
  for (auto s : params.tensors()) std::fill(s.begin(), s.end(), 0.0);
  Vector& b = params.layers.back().bias;
  for (int k = 0; k < 3; ++k) {
    b(k) = logits[k];
    b(3 + k) = mu[k];
    b(6 + k) = log_sigma[k];
  }
  return p;
}

env::Observation some_observation() {
  env::Observation o;
  for (std::size_t i = 0; i < o.values.size(); ++i) o.values[i] = 0.1 * static_cast<double>(i) - 0.4;
  return o;
}

double normal_pdf(double x, double mu, double sigma) {
  const double r = (x - mu) / sigma;
  return std::exp(-0.5 * r * r) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace

TEST_CASE("uniform logits sample every stroke about equally") {
  const PolicyNet p = constant_policy({0, 0, 0}, {0, 0, 0}, {0, 0, 0});
  Rng rng(11);
  std::array<int, 3> counts{};
  const int n = 100000;
  const env::Observation obs = some_observation();
  for (int i = 0; i < n; ++i) {
    const SampledAction s = sample_action(p, obs, SampleMode::Stochastic, rng);
    ++counts[static_cast<std::size_t>(s.action.d)];
    CHECK(near(s.log_prob_d, -std::log(3.0), 1e-14));
  }
  for (int c : counts) CHECK(std::abs(c / static_cast<double>(n) - 1.0 / 3.0) <= 0.02);
}

TEST_CASE("sampled controls stay inside the bounds") {
  const PolicyNet p = constant_policy({0.5, -1, 2}, {3, -3, 0}, {2, 2, 2});
  Rng rng(12);
  for (int i = 0; i < 20000; ++i) {
    const SampledAction s = sample_action(p, some_observation(), SampleMode::Stochastic, rng);
    CHECK(s.action.u >= qdyn::kUMin);
    CHECK(s.action.u <= qdyn::kUMax);
    CHECK(std::isfinite(s.log_prob_u));
  }
}

TEST_CASE("squash endpoints and midpoint") {
  CHECK(near(squash(0.0), 0.9, 1e-15));
  CHECK(squash(50.0) == qdyn::kUMax);
  CHECK(squash(-50.0) == qdyn::kUMin);
  CHECK(squash(1e300) == qdyn::kUMax);
}

TEST_CASE("large mean drives the deterministic control to the upper bound") {
  const PolicyNet p = constant_policy({0, 5, 0}, {0, 60, 0}, {-1, -1, -1});
  Rng rng(1);
  const Rng before = rng;
  const SampledAction s = sample_action(p, some_observation(), SampleMode::Deterministic, rng);
  CHECK(s.action.d == Process::Cold);
  CHECK(near(s.action.u, 1.5, 1e-12));
  CHECK(std::isfinite(s.log_prob_u));
  CHECK(rng == before);
}

TEST_CASE("deterministic mode takes the argmax stroke and the squashed mean") {
  const PolicyNet p = constant_policy({2, 1, 0}, {0.3, 0, 0}, {0, 0, 0});
  Rng rng(1);
  const SampledAction s = sample_action(p, some_observation(), SampleMode::Deterministic, rng);
  CHECK(s.action.d == Process::Hot);
  CHECK(near(s.action.u, squash(0.3), 1e-15));
}

TEST_CASE("log(1 - tanh^2) is accurate and finite for large arguments") {
  for (double z : {-3.0, -0.7, 0.0, 0.2, 1.5, 4.0}) {
    const double t = std::tanh(z);
    CHECK(near(log1m_tanh2(z), std::log(1.0 - t * t), 1e-12));
  }
  CHECK(near(log1m_tanh2(400.0), 2.0 * std::numbers::ln2 - 800.0, 1e-9));
  CHECK(std::isfinite(log1m_tanh2(-1e6)));
}

TEST_CASE("squashed density matches the change-of-variables formula") {
  for (double mu : {-1.0, 0.0, 0.8}) {
    for (double ls : {-1.5, 0.0, 0.7}) {
      for (double xi : {-2.0, -0.3, 0.0, 1.1}) {
        const double sigma = std::exp(ls);
        const double z = mu + sigma * xi;
        const double t = std::tanh(z);
        const double expected = normal_pdf(z, mu, sigma) / (0.6 * (1.0 - t * t));
        CHECK(near(std::exp(squashed_log_density(xi, mu, ls)) / expected, 1.0, 1e-10));
      }
    }
  }
}

TEST_CASE("squashed density integrates to one over the control range") {
  for (auto [mu, ls] : {std::pair{0.0, -0.5}, std::pair{0.7, -1.0}, std::pair{-0.4, -0.2}}) {
    const int n = 400000;
    const double h = (qdyn::kUMax - qdyn::kUMin) / n;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      sum += std::exp(squashed_log_density_at(qdyn::kUMin + (i + 0.5) * h, mu, ls));
    }
    CHECK(std::abs(sum * h - 1.0) <= 1e-3);
  }
  CHECK(std::isinf(squashed_log_density_at(0.2, 0.0, 0.0)));
  CHECK(std::isinf(squashed_log_density_at(1.5, 0.0, 0.0)));
}

TEST_CASE("sampled log-density agrees with the density at the sampled control") {
  const PolicyNet p = constant_policy({0, 0, 0}, {0.2, -0.3, 0.1}, {-1, -0.8, -1.2});
  Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    const SampledAction s = sample_action(p, some_observation(), SampleMode::Stochastic, rng);
    const int d = static_cast<int>(s.action.d);
    const double mu = std::array{0.2, -0.3, 0.1}[d];
    const double ls = std::array{-1.0, -0.8, -1.2}[d];
    CHECK(near(s.log_prob_u, squashed_log_density_at(s.action.u, mu, ls), 1e-6));
  }
}

TEST_CASE("softmax is stable for large logits") {
  const PolicyNet p = constant_policy({1000, 999, -1000}, {0, 0, 0}, {0, 0, 0});
  const PolicyHeads h = p.evaluate(observation_matrix(some_observation()));
  // one ulp of a logit near 1000 is about 1e-13
  CHECK(near(h.probs.col(0).sum(), 1.0, 1e-12));
  CHECK(near(h.log_probs(0, 0), -std::log1p(std::exp(-1.0)), 1e-12));
  CHECK(h.probs(2, 0) == 0.0);
}

TEST_CASE("log sigma is clamped and clamped entries get no gradient") {
  const PolicyNet p = constant_policy({0, 0, 0}, {0, 0, 0}, {5, -30, 0.5});
  const PolicyForward f = p.forward(observation_matrix(some_observation()));
  CHECK(f.heads.log_sigma(0, 0) == kLogSigmaMax);
  CHECK(f.heads.log_sigma(1, 0) == kLogSigmaMin);
  CHECK(f.heads.log_sigma(2, 0) == 0.5);
  const Matrix zero = Matrix::Zero(3, 1);
  const Matrix ones = Matrix::Ones(3, 1);
  const auto g = p.backward(f, zero, zero, ones);
  const Vector& db = g[0].layers.back().bias;
  CHECK(db(6) == 0.0);
  CHECK(db(7) == 0.0);
  CHECK(db(8) == 1.0);
}

TEST_CASE("split networks have the documented shapes") {
  PolicyConfig cfg;
  cfg.hidden_dims = {8};
  cfg.shared_trunk = false;
  Rng rng(2);
  const PolicyNet p(cfg, rng);
  REQUIRE(p.nets().size() == 2);
  CHECK(p.nets()[0].spec().output_dim == 3);
  CHECK(p.nets()[1].spec().output_dim == 6);
  CHECK_THROWS_AS(PolicyNet(cfg, std::vector<nn::Mlp>{p.nets()[0]}), DomainError);
  CHECK_THROWS_AS(PolicyNet(cfg, std::vector<nn::Mlp>{p.nets()[1], p.nets()[0]}), DomainError);
}

TEST_CASE("policy backward matches central differences") {
  for (bool shared : {true, false}) {
    PolicyConfig cfg;
    cfg.hidden_dims = {8, 8};
    cfg.shared_trunk = shared;
    Rng rng(shared ? 21 : 22);
    PolicyNet p(cfg, rng);
    Matrix obs(env::kObservationDim, 4);
    for (Eigen::Index i = 0; i < obs.size(); ++i) obs(i) = rng.normal();
    Matrix a(3, 4), b(3, 4), c(3, 4);
    for (Matrix* m : {&a, &b, &c}) {
      for (Eigen::Index i = 0; i < m->size(); ++i) (*m)(i) = rng.normal();
    }
    const auto grads = p.backward(p.forward(obs), a, b, c);
    std::vector<std::span<double>> spans;
    for (nn::Mlp& net : p.mutable_nets()) {
      for (auto s : net.mutable_params().tensors()) spans.push_back(s);
    }
    auto loss = [&] {
      const PolicyHeads h = p.evaluate(obs);
      return h.logits.cwiseProduct(a).sum() + h.mu.cwiseProduct(b).sum() +
             h.log_sigma.cwiseProduct(c).sum();
    };
    const Eigen::VectorXd fd = qhe::testing::central_differences(spans, loss);
    Eigen::VectorXd analytic(fd.size());
    Eigen::Index k = 0;
    for (const auto& g : grads) {
      const Eigen::VectorXd f = qhe::testing::flatten(g);
      analytic.segment(k, f.size()) = f;
      k += f.size();
    }
    CHECK(qhe::testing::relative_error(analytic, fd) <= 1e-4);
  }
}
