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

#include "qhe/qdyn.hpp"

#include "qhe/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <complex>
#include <string>

namespace qhe::qdyn {
namespace {

using cd = std::complex<double>;
constexpr cd kI{0.0, 1.0};

void require_scale(double u) {
  if (!(u >= kUMin && u <= kUMax)) {
    throw DomainError("scale factor u = " + std::to_string(u) + " outside [" +
                      std::to_string(kUMin) + ", " + std::to_string(kUMax) + "]");
  }
}

double hermiticity_defect(const Matrix3& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

Matrix3 hermitian_part(const Matrix3& m) { return 0.5 * (m + m.adjoint()); }

Matrix3 hamiltonian_with_frequency(const EngineSpec& spec, double u, double tau, bool drive_on,
                                   double omega) {
  Matrix3 h = u * spec.free_hamiltonian();
  if (drive_on) {
    const cd coupling = spec.lambda * std::exp(kI * (omega * tau));
    h(1, 2) = coupling;
    h(2, 1) = std::conj(coupling);
  }
  return h;
}

// D[rho] = rate * (L rho L^+ - {L^+ L, rho} / 2)
void add_dissipator(Matrix3& out, const Matrix3& op, double rate, const Matrix3& rho) {
  if (rate == 0.0) return;
  const Matrix3 op_dag = op.adjoint();
  const Matrix3 n = op_dag * op;
  out.noalias() += rate * (op * rho * op_dag);
  out.noalias() -= (0.5 * rate) * (n * rho + rho * n);
}

}  // namespace

Matrix3 EngineSpec::free_hamiltonian() const {
  Matrix3 h = Matrix3::Zero();
  h(0, 0) = omega0;
  h(1, 1) = omega1;
  h(2, 2) = omega2;
  return h;
}

void EngineSpec::validate() const {
  for (double v : {omega0, omega1, omega2, lambda, beta_c, beta_h, g1, g2}) {
    if (!std::isfinite(v)) throw DomainError("engine parameters must be finite");
  }
  if (!(omega0 < omega1 && omega1 < omega2)) {
    throw DomainError("engine levels must satisfy omega0 < omega1 < omega2");
  }
  if (beta_c < 0.0 || beta_h < 0.0) throw DomainError("inverse temperatures must be >= 0");
}

std::string_view to_string(Process p) {
  switch (p) {
    case Process::Hot:
      return "hot";
    case Process::Cold:
      return "cold";
    case Process::Work:
      return "work";
  }
  return "?";
}

Process process_from_string(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "hot") return Process::Hot;
  if (lower == "cold") return Process::Cold;
  if (lower == "work") return Process::Work;
  throw DomainError("unknown process '" + std::string(name) + "'");
}

ProcessParams ProcessParams::hot(const EngineSpec& spec, double gamma) {
  return {Process::Hot, 0.0, gamma, false, spec.beta_h};
}

ProcessParams ProcessParams::cold(const EngineSpec& spec, double gamma) {
  return {Process::Cold, gamma, 0.0, false, spec.beta_c};
}

ProcessParams ProcessParams::work() { return {Process::Work, 0.0, 0.0, true, std::nullopt}; }

ProcessParams ProcessParams::for_process(Process kind, const EngineSpec& spec) {
  switch (kind) {
    case Process::Hot:
      return hot(spec);
    case Process::Cold:
      return cold(spec);
    case Process::Work:
      return work();
  }
  throw DomainError("unknown process");
}

StateDefects inspect_state(const Matrix3& rho) {
  StateDefects d;
  d.hermiticity = hermiticity_defect(rho);
  d.trace = std::abs(rho.trace() - cd{1.0, 0.0});
  Eigen::SelfAdjointEigenSolver<Matrix3> es(hermitian_part(rho), Eigen::EigenvaluesOnly);
  d.min_eigenvalue = es.eigenvalues().minCoeff();
  return d;
}

DensityMatrix::DensityMatrix() : m_(Matrix3::Zero()) { m_(0, 0) = 1.0; }

DensityMatrix DensityMatrix::from_matrix(const Matrix3& m) {
  if (!m.allFinite()) throw DomainError("density matrix has non-finite entries");
  const StateDefects d = inspect_state(m);
  if (d.hermiticity > kHermiticityTol) {
    throw DomainError("density matrix is not Hermitian (defect " + std::to_string(d.hermiticity) + ")");
  }
  if (d.trace > kTraceTol) {
    throw DomainError("density matrix trace differs from 1 by " + std::to_string(d.trace));
  }
  if (d.min_eigenvalue < -kPositivityTol) {
    throw DomainError("density matrix has negative eigenvalue " + std::to_string(d.min_eigenvalue));
  }
  return DensityMatrix(m);
}

DensityMatrix DensityMatrix::maximally_mixed() { return DensityMatrix(Matrix3::Identity() / 3.0); }

Eigen::Vector3d DensityMatrix::eigenvalues() const {
  Eigen::SelfAdjointEigenSolver<Matrix3> es(m_, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

Matrix3 bare_operator(BareOperator which) {
  Matrix3 op = Matrix3::Zero();
  op(0, which == BareOperator::Cold ? 1 : 2) = 1.0;
  return op;
}

double drive_frequency(const EngineSpec& spec, double u) {
  const double denom = spec.omega2 - spec.omega1;
  if (denom == 0.0) throw SingularityError("omega2 == omega1: drive frequency undefined");
  // Eigenvalues of [[u w1, l], [l, u w2]] differ by sqrt(detuning^2 + 4 l^2).
  const double detuning = u * (spec.omega2 - spec.omega1);
  const double gap = std::sqrt(detuning * detuning + 4.0 * spec.lambda * spec.lambda);
  if (gap == 0.0) throw SingularityError("degenerate 1-2 gap: drive frequency undefined");
  const double g = spec.g1 + spec.g2;
  return (gap * gap + 0.25 * g * g) / denom;
}

Matrix3 build_hamiltonian(const EngineSpec& spec, double u, double tau, bool drive_on) {
  require_scale(u);
  if (!(tau >= 0.0)) throw DomainError("tau must be >= 0");
  const double omega = drive_on ? drive_frequency(spec, u) : 0.0;
  return hamiltonian_with_frequency(spec, u, tau, drive_on, omega);
}

std::vector<JumpChannel> projected_jump_operators(const Matrix3& H, BareOperator which,
                                                  const ProcessParams& process) {
  if (!H.allFinite() || hermiticity_defect(H) > 1e-12) {
    throw DomainError("projected_jump_operators: Hamiltonian is not Hermitian");
  }
  const double rate = which == BareOperator::Cold ? process.gamma_c_10 : process.gamma_h_20;
  if (rate == 0.0) return {};
  if (rate < 0.0) throw DomainError("coupling rates must be non-negative");
  if (!process.beta_active) throw DomainError("dissipative process without a reservoir temperature");
  const double beta = *process.beta_active;

  Eigen::SelfAdjointEigenSolver<Matrix3> es(H);
  const Eigen::Vector3d& energies = es.eigenvalues();
  const Matrix3& vecs = es.eigenvectors();

  // Spectral projectors of H with near-degenerate eigenvalues merged.
  std::vector<double> level;
  std::vector<Matrix3> projector;
  for (int k = 0; k < 3; ++k) {
    const Matrix3 p = vecs.col(k) * vecs.col(k).adjoint();
    if (!level.empty() && std::abs(energies(k) - level.back()) <= kGapTolerance) {
      projector.back() += p;
    } else {
      level.push_back(energies(k));
      projector.push_back(p);
    }
  }

  const Matrix3 bare = bare_operator(which);
  std::vector<JumpChannel> channels;
  for (std::size_t m = 0; m < level.size(); ++m) {
    for (std::size_t n = 0; n < level.size(); ++n) {
      const double eps = level[m] - level[n];
      if (eps <= kGapTolerance) continue;
      const Matrix3 component = projector[n] * bare * projector[m];
      if (component.cwiseAbs().maxCoeff() < 1e-14) continue;
      auto same = std::find_if(channels.begin(), channels.end(), [&](const JumpChannel& c) {
        return std::abs(c.epsilon - eps) <= kGapTolerance;
      });
      if (same != channels.end()) {
        same->op += component;
      } else {
        channels.push_back({eps, component, rate, std::exp(-beta * eps) * rate});
      }
    }
  }
  return channels;
}

std::vector<JumpChannel> dissipative_channels(const Matrix3& H, const ProcessParams& process) {
  std::vector<JumpChannel> out = projected_jump_operators(H, BareOperator::Cold, process);
  std::vector<JumpChannel> hot = projected_jump_operators(H, BareOperator::Hot, process);
  out.insert(out.end(), hot.begin(), hot.end());
  return out;
}

Matrix3 lindblad_rhs(const Matrix3& rho, const Matrix3& H, std::span<const JumpChannel> channels) {
  Matrix3 out = -kI * (H * rho - rho * H);
  for (const JumpChannel& c : channels) {
    add_dissipator(out, c.op, c.rate_forward, rho);
    add_dissipator(out, c.op.adjoint(), c.rate_backward, rho);
  }
  return out;
}

double heat_current(const Matrix3& rho, const Matrix3& H, std::span<const JumpChannel> channels) {
  Matrix3 d = Matrix3::Zero();
  for (const JumpChannel& c : channels) {
    add_dissipator(d, c.op, c.rate_forward, rho);
    add_dissipator(d, c.op.adjoint(), c.rate_backward, rho);
  }
  return (H * d).trace().real();
}

DensityMatrix lindblad_propagate(const DensityMatrix& rho, const ProcessParams& process, double u,
                                 double dt, const EngineSpec& spec,
                                 const PropagationOptions& options) {
  require_scale(u);
  if (!(dt >= 0.0) || !std::isfinite(dt)) throw DomainError("dt must be finite and >= 0");
  if (!(options.max_substep > 0.0)) throw DomainError("max_substep must be > 0");
  if (dt == 0.0) return rho;

  const double omega = process.drive_on ? drive_frequency(spec, u) : 0.0;
  const auto hamiltonian = [&](double tau) {
    return hamiltonian_with_frequency(spec, u, tau, process.drive_on, omega);
  };
  // Without the drive H is constant over the stroke, and so are the channels.
  const bool time_dependent = process.drive_on;
  const std::vector<JumpChannel> fixed_channels =
      process.dissipative() ? dissipative_channels(hamiltonian(0.0), process) : std::vector<JumpChannel>{};
  const auto rhs = [&](double tau, const Matrix3& state) {
    const Matrix3 h = hamiltonian(tau);
    if (time_dependent && process.dissipative()) {
      const std::vector<JumpChannel> channels = dissipative_channels(h, process);
      return lindblad_rhs(state, h, channels);
    }
    return lindblad_rhs(state, h, fixed_channels);
  };

  const long steps = static_cast<long>(std::ceil(dt / options.max_substep - 1e-9));
  const double h = dt / static_cast<double>(steps);
  Matrix3 state = rho.matrix();
  for (long k = 0; k < steps; ++k) {
    const double tau = static_cast<double>(k) * h;
    const Matrix3 k1 = rhs(tau, state);
    const Matrix3 k2 = rhs(tau + 0.5 * h, state + (0.5 * h) * k1);
    const Matrix3 k3 = rhs(tau + 0.5 * h, state + (0.5 * h) * k2);
    const Matrix3 k4 = rhs(tau + h, state + h * k3);
    state += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  if (!state.allFinite()) throw IntegrationError("propagation produced non-finite entries");
  const StateDefects d = inspect_state(state);
  if (d.hermiticity > 1e-9 || d.trace > 1e-9) {
    throw IntegrationError("propagation drifted (hermiticity " + std::to_string(d.hermiticity) +
                           ", trace " + std::to_string(d.trace) + "); reduce the substep");
  }
  if (d.min_eigenvalue < -DensityMatrix::kPositivityTol) {
    throw IntegrationError("propagation produced eigenvalue " + std::to_string(d.min_eigenvalue) +
                           "; reduce the substep");
  }
  if (d.hermiticity > 1e-12) state = hermitian_part(state);
  if (d.trace > 1e-12) state /= state.trace().real();
  return DensityMatrix::from_matrix(state);
}

DensityMatrix gibbs_state(const Matrix3& H, double beta) {
  if (!(beta >= 0.0)) throw DomainError("gibbs_state: beta must be >= 0");
  if (hermiticity_defect(H) > 1e-12) throw DomainError("gibbs_state: Hamiltonian is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Matrix3> es(H);
  const Eigen::Vector3d& e = es.eigenvalues();
  // Shift by the ground energy so the largest weight is exactly 1.
  Eigen::Vector3d w = (-beta * (e.array() - e.minCoeff())).exp();
  if (std::isinf(beta)) w = (e.array() == e.minCoeff()).cast<double>();
  w /= w.sum();
  Matrix3 rho = es.eigenvectors() * w.cast<cd>().asDiagonal() * es.eigenvectors().adjoint();
  rho = hermitian_part(rho);
  rho /= rho.trace().real();
  return DensityMatrix::from_matrix(rho);
}

double expectation_energy(const DensityMatrix& rho, const Matrix3& H) {
  const cd e = (rho.matrix() * H).trace();
  if (std::abs(e.imag()) > 1e-12 * std::max(1.0, std::abs(e.real()))) {
    throw DomainError("expectation_energy: non-real energy, Hamiltonian not Hermitian?");
  }
  return e.real();
}

RealCoords to_real_coords(const Matrix3& m) {
  RealCoords x;
  x << m(0, 0).real(), m(1, 1).real(), m(2, 2).real(), m(0, 1).real(), m(0, 1).imag(),
      m(0, 2).real(), m(0, 2).imag(), m(1, 2).real(), m(1, 2).imag();
  return x;
}

Matrix3 from_real_coords(const RealCoords& x) {
  Matrix3 m = Matrix3::Zero();
  m(0, 0) = x(0);
  m(1, 1) = x(1);
  m(2, 2) = x(2);
  m(0, 1) = cd{x(3), x(4)};
  m(0, 2) = cd{x(5), x(6)};
  m(1, 2) = cd{x(7), x(8)};
  m(1, 0) = std::conj(m(0, 1));
  m(2, 0) = std::conj(m(0, 2));
  m(2, 1) = std::conj(m(1, 2));
  return m;
}

Liouvillian Liouvillian::from_channels(const Matrix3& H, std::span<const JumpChannel> channels) {
  RealGenerator g;
  for (int k = 0; k < 9; ++k) {
    RealCoords e = RealCoords::Zero();
    e(k) = 1.0;
    g.col(k) = to_real_coords(lindblad_rhs(from_real_coords(e), H, channels));
  }
  return Liouvillian(g);
}

Liouvillian Liouvillian::for_processes(const EngineSpec& spec, double u,
                                       std::span<const ProcessParams> processes) {
  const Matrix3 h = build_hamiltonian(spec, u, 0.0, false);
  std::vector<JumpChannel> channels;
  for (const ProcessParams& p : processes) {
    if (p.drive_on) throw DomainError("time-independent generator requested for a driven process");
    const std::vector<JumpChannel> c = dissipative_channels(h, p);
    channels.insert(channels.end(), c.begin(), c.end());
  }
  return from_channels(h, channels);
}

Matrix3 Liouvillian::apply(const Matrix3& rho) const {
  return from_real_coords(matrix_ * to_real_coords(rho));
}

DensityMatrix steady_state(const Liouvillian& generator) {
  Eigen::JacobiSVD<RealGenerator> svd(generator.matrix(), Eigen::ComputeFullV);
  const Eigen::Matrix<double, 9, 1>& s = svd.singularValues();
  const double cutoff = 1e-10 * std::max(1.0, s(0));
  const auto kernel_dim = static_cast<std::size_t>((s.array() <= cutoff).count());
  if (kernel_dim != 1) {
    throw DegenerateSteadyStateError(
        "generator kernel has dimension " + std::to_string(kernel_dim) + " (expected 1)", kernel_dim);
  }
  const RealCoords null = svd.matrixV().col(8);
  const double trace = null(0) + null(1) + null(2);
  if (std::abs(trace) < 1e-12) {
    throw DegenerateSteadyStateError("kernel vector is traceless", kernel_dim);
  }
  Matrix3 rho = from_real_coords(null / trace);
  return DensityMatrix::from_matrix(rho);
}

}  // namespace qhe::qdyn
