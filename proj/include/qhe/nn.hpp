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

// Dense ReLU network with a hand-written reverse pass, and Adam.
//
// Batches are column-major: an input matrix is input_dim x batch.

#include "qhe/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace qhe::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden_dims{256, 256};
  int output_dim = 1;

  void validate() const;
  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

struct Layer {
  Matrix weight;  // out x in
  Vector bias;
};

struct MlpParams {
  std::vector<Layer> layers;

  static MlpParams zeros_like(const MlpParams& other);
  std::size_t parameter_count() const;
  bool all_finite() const;
  bool same_shape(const MlpParams& other) const;

  /// Every weight and bias tensor as a flat span, in layer order.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;

  MlpParams& operator+=(const MlpParams& other);
  friend bool operator==(const MlpParams& a, const MlpParams& b);
};

/// Weights uniform in +-1/sqrt(fan_in), biases zero.
MlpParams init(const MlpSpec& spec, Rng& rng);
MlpParams init(const MlpSpec& spec, std::uint64_t seed);

/// Stateless evaluation.
Matrix forward(const MlpParams& params, const Matrix& x);

class Mlp;

/// Activations saved by Mlp::forward for the matching backward pass.
struct ForwardCache {
  std::vector<Matrix> inputs;  // input of each layer
  std::vector<Matrix> pre;     // pre-activation of each hidden layer
  Matrix output;
  const Mlp* owner = nullptr;
  std::uint64_t revision = 0;
};

struct Gradients {
  MlpParams params;
  Matrix input;  // empty unless requested
};

/// A network that knows when its parameters changed, so a cache taken
/// before an update is rejected by backward().
class Mlp {
 public:
  Mlp() = default;
  Mlp(MlpSpec spec, MlpParams params);
  Mlp(const MlpSpec& spec, Rng& rng) : Mlp(spec, init(spec, rng)) {}

  const MlpSpec& spec() const { return spec_; }
  const MlpParams& params() const { return params_; }
  /// Mutable access; invalidates outstanding caches.
  MlpParams& mutable_params() {
    ++revision_;
    return params_;
  }
  std::uint64_t revision() const { return revision_; }

  ForwardCache forward(const Matrix& x) const;
  Matrix evaluate(const Matrix& x) const { return nn::forward(params_, x); }

  /// Reverse pass for the loss whose gradient w.r.t. the output is
  /// `grad_output` (output_dim x batch). Throws DomainError on a stale cache.
  Gradients backward(const ForwardCache& cache, const Matrix& grad_output,
                     bool want_input_grad = false) const;
  /// Gradient w.r.t. the input only; skips the weight gradients.
  Matrix input_gradient(const ForwardCache& cache, const Matrix& grad_output) const;

 private:
  void check_cache(const ForwardCache& cache) const;

  MlpSpec spec_;
  MlpParams params_;
  std::uint64_t revision_ = 0;
};

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  MlpParams m;
  MlpParams v;
  std::int64_t step = 0;

  static AdamState for_params(const MlpParams& params, const AdamConfig& config = {});
};

/// Bias-corrected Adam. Throws NonFiniteError (leaving everything untouched)
/// if any gradient is not finite.
void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state);
void adam_step(Mlp& net, const MlpParams& grads, AdamState& state);

/// Adam on a single scalar parameter.
struct ScalarAdam {
  AdamConfig config;
  double m = 0.0;
  double v = 0.0;
  std::int64_t step = 0;

  void apply(double& param, double grad);
};

}  // namespace qhe::nn
