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

#include "qhe/nn.hpp"

#include "qhe/errors.hpp"

#include <cmath>
#include <string>

namespace qhe::nn {

void MlpSpec::validate() const {
  if (input_dim <= 0 || output_dim <= 0) throw DomainError("MLP dimensions must be positive");
  for (int h : hidden_dims) {
    if (h <= 0) throw DomainError("MLP hidden dimensions must be positive");
  }
}

MlpParams MlpParams::zeros_like(const MlpParams& other) {
  MlpParams z;
  z.layers.reserve(other.layers.size());
  for (const Layer& l : other.layers) {
    z.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
  }
  return z;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

bool MlpParams::all_finite() const {
  for (const Layer& l : layers) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

bool MlpParams::same_shape(const MlpParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].weight.rows() != other.layers[i].weight.rows() ||
        layers[i].weight.cols() != other.layers[i].weight.cols() ||
        layers[i].bias.size() != other.layers[i].bias.size()) {
      return false;
    }
  }
  return true;
}

std::vector<std::span<double>> MlpParams::tensors() {
  std::vector<std::span<double>> out;
  for (Layer& l : layers) {
    out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
  return out;
}

std::vector<std::span<const double>> MlpParams::tensors() const {
  std::vector<std::span<const double>> out;
  for (const Layer& l : layers) {
    out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
  return out;
}

MlpParams& MlpParams::operator+=(const MlpParams& other) {
  if (!same_shape(other)) throw DomainError("parameter shape mismatch");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].weight += other.layers[i].weight;
    layers[i].bias += other.layers[i].bias;
  }
  return *this;
}

bool operator==(const MlpParams& a, const MlpParams& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].weight != b.layers[i].weight || a.layers[i].bias != b.layers[i].bias) return false;
  }
  return true;
}

MlpParams init(const MlpSpec& spec, Rng& rng) {
  spec.validate();
  MlpParams p;
  int fan_in = spec.input_dim;
  std::vector<int> outs = spec.hidden_dims;
  outs.push_back(spec.output_dim);
  for (int fan_out : outs) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Layer l{Matrix(fan_out, fan_in), Vector::Zero(fan_out)};
    for (Eigen::Index j = 0; j < l.weight.cols(); ++j) {
      for (Eigen::Index i = 0; i < l.weight.rows(); ++i) l.weight(i, j) = rng.uniform(-bound, bound);
    }
    p.layers.push_back(std::move(l));
    fan_in = fan_out;
  }
  return p;
}

MlpParams init(const MlpSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  return init(spec, rng);
}

Matrix forward(const MlpParams& params, const Matrix& x) {
  if (params.layers.empty()) throw DomainError("empty network");
  if (x.rows() != params.layers.front().weight.cols()) {
    throw DomainError("input dimension " + std::to_string(x.rows()) + " does not match network input " +
                      std::to_string(params.layers.front().weight.cols()));
  }
  Matrix a = x;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const Layer& l = params.layers[i];
    Matrix z = l.weight * a;
    z.colwise() += l.bias;
    if (i + 1 < params.layers.size()) {
      a = z.cwiseMax(0.0);
    } else {
      a = std::move(z);
    }
  }
  return a;
}

Mlp::Mlp(MlpSpec spec, MlpParams params) : spec_(std::move(spec)), params_(std::move(params)) {
  spec_.validate();
  if (params_.layers.size() != spec_.hidden_dims.size() + 1) {
    throw DomainError("parameter layer count does not match the network shape");
  }
  int fan_in = spec_.input_dim;
  for (std::size_t i = 0; i < params_.layers.size(); ++i) {
    const int fan_out = i < spec_.hidden_dims.size() ? spec_.hidden_dims[i] : spec_.output_dim;
    const Layer& l = params_.layers[i];
    if (l.weight.rows() != fan_out || l.weight.cols() != fan_in || l.bias.size() != fan_out) {
      throw DomainError("parameter shapes do not match the network shape at layer " + std::to_string(i));
    }
    fan_in = fan_out;
  }
}

ForwardCache Mlp::forward(const Matrix& x) const {
  if (x.rows() != spec_.input_dim) {
    throw DomainError("input dimension " + std::to_string(x.rows()) + " does not match network input " +
                      std::to_string(spec_.input_dim));
  }
  ForwardCache c;
  c.owner = this;
  c.revision = revision_;
  const std::size_t n = params_.layers.size();
  c.inputs.reserve(n);
  c.pre.reserve(n - 1);
  c.inputs.push_back(x);
  for (std::size_t i = 0; i < n; ++i) {
    const Layer& l = params_.layers[i];
    Matrix z = l.weight * c.inputs.back();
    z.colwise() += l.bias;
    if (i + 1 < n) {
      c.inputs.push_back(z.cwiseMax(0.0));
      c.pre.push_back(std::move(z));
    } else {
      c.output = std::move(z);
    }
  }
  return c;
}

void Mlp::check_cache(const ForwardCache& cache) const {
  if (cache.owner != this || cache.revision != revision_) {
    throw DomainError("stale forward cache: network changed since forward()");
  }
}

Gradients Mlp::backward(const ForwardCache& cache, const Matrix& grad_output, bool want_input_grad) const {
  check_cache(cache);
  if (grad_output.rows() != cache.output.rows() || grad_output.cols() != cache.output.cols()) {
    throw DomainError("output gradient shape mismatch");
  }
  Gradients g;
  g.params.layers.resize(params_.layers.size());
  Matrix delta = grad_output;
  for (std::size_t i = params_.layers.size(); i-- > 0;) {
    const Layer& l = params_.layers[i];
    g.params.layers[i].weight.noalias() = delta * cache.inputs[i].transpose();
    g.params.layers[i].bias = delta.rowwise().sum();
    if (i > 0 || want_input_grad) {
      Matrix back = l.weight.transpose() * delta;
      if (i > 0) back = back.cwiseProduct((cache.pre[i - 1].array() > 0.0).cast<double>().matrix());
      delta = std::move(back);
    }
  }
  if (want_input_grad) g.input = std::move(delta);
  return g;
}

Matrix Mlp::input_gradient(const ForwardCache& cache, const Matrix& grad_output) const {
  check_cache(cache);
  Matrix delta = grad_output;
  for (std::size_t i = params_.layers.size(); i-- > 0;) {
    Matrix back = params_.layers[i].weight.transpose() * delta;
    if (i > 0) back = back.cwiseProduct((cache.pre[i - 1].array() > 0.0).cast<double>().matrix());
    delta = std::move(back);
  }
  return delta;
}

AdamState AdamState::for_params(const MlpParams& params, const AdamConfig& config) {
  return {config, MlpParams::zeros_like(params), MlpParams::zeros_like(params), 0};
}

namespace {

void adam_update(std::span<double> p, std::span<const double> g, std::span<double> m,
                 std::span<double> v, double lr_t, const AdamConfig& c, double v_correction) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
    p[i] -= lr_t * m[i] / (std::sqrt(v[i] / v_correction) + c.eps);
  }
}

}  // namespace

void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state) {
  if (!params.same_shape(grads) || !params.same_shape(state.m) || !params.same_shape(state.v)) {
    throw DomainError("adam_step: shape mismatch");
  }
  if (!grads.all_finite()) throw NonFiniteError("adam_step: non-finite gradient");
  ++state.step;
  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.step);
  const double m_correction = 1.0 - std::pow(c.beta1, t);
  const double v_correction = 1.0 - std::pow(c.beta2, t);
  const double lr_t = c.learning_rate / m_correction;
  auto p = params.tensors();
  auto g = grads.tensors();
  auto m = state.m.tensors();
  auto v = state.v.tensors();
  for (std::size_t k = 0; k < p.size(); ++k) adam_update(p[k], g[k], m[k], v[k], lr_t, c, v_correction);
}

void adam_step(Mlp& net, const MlpParams& grads, AdamState& state) {
  adam_step(net.mutable_params(), grads, state);
}

void ScalarAdam::apply(double& param, double grad) {
  if (!std::isfinite(grad)) throw NonFiniteError("ScalarAdam: non-finite gradient");
  ++step;
  const double t = static_cast<double>(step);
  m = config.beta1 * m + (1.0 - config.beta1) * grad;
  v = config.beta2 * v + (1.0 - config.beta2) * grad * grad;
  const double m_hat = m / (1.0 - std::pow(config.beta1, t));
  const double v_hat = v / (1.0 - std::pow(config.beta2, t));
  param -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.eps);
}

}  // namespace qhe::nn
