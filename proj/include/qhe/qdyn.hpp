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

// Dissipative dynamics of the coherent three-level engine: Hamiltonians,
// projected jump operators obeying detailed balance, and fixed-step GKLS
// propagation of the 3x3 density matrix over one control interval.

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace qhe::qdyn {

using Matrix3 = Eigen::Matrix3cd;
using RealCoords = Eigen::Matrix<double, 9, 1>;
using RealGenerator = Eigen::Matrix<double, 9, 9>;

/// Admissible range of the Hamiltonian scale factor u.
inline constexpr double kUMin = 0.3;
inline constexpr double kUMax = 1.5;

/// Level structure, drive and reservoir temperatures, in units of omega10.
struct EngineSpec {
  double omega0 = 0.0;
  double omega1 = 1.0;
  double omega2 = 2.5;
  double lambda = 0.5;
  double beta_c = 5.0;
  double beta_h = 1.0;
  double g1 = 0.0;
  double g2 = 0.0;

  double omega10() const { return omega1 - omega0; }
  double omega20() const { return omega2 - omega0; }
  /// diag(omega0, omega1, omega2).
  Matrix3 free_hamiltonian() const;
  /// Throws DomainError unless all fields are finite, the levels are
  /// strictly ordered and both inverse temperatures are non-negative.
  void validate() const;
};

enum class Process : int { Hot = 0, Cold = 1, Work = 2 };

inline constexpr int kNumProcesses = 3;

std::string_view to_string(Process p);
/// Accepts "hot", "cold", "work" (case-insensitive); throws DomainError.
Process process_from_string(std::string_view name);

/// Reservoir couplings and drive switch for one stroke type.
struct ProcessParams {
  Process kind = Process::Work;
  double gamma_c_10 = 0.0;
  double gamma_h_20 = 0.0;
  bool drive_on = false;
  std::optional<double> beta_active;

  static ProcessParams hot(const EngineSpec& spec, double gamma = 2.0);
  static ProcessParams cold(const EngineSpec& spec, double gamma = 2.0);
  static ProcessParams work();
  static ProcessParams for_process(Process kind, const EngineSpec& spec);

  bool dissipative() const { return gamma_c_10 > 0.0 || gamma_h_20 > 0.0; }
};

/// Deviation of a matrix from the set of density matrices.
struct StateDefects {
  double hermiticity = 0.0;     // max |rho - rho^dagger|
  double trace = 0.0;           // |tr rho - 1|
  double min_eigenvalue = 0.0;  // of the Hermitian part
};

StateDefects inspect_state(const Matrix3& rho);

/// Hermitian, unit-trace, positive semidefinite 3x3 matrix.
class DensityMatrix {
 public:
  static constexpr double kHermiticityTol = 1e-12;
  static constexpr double kTraceTol = 1e-9;
  static constexpr double kPositivityTol = 1e-9;

  /// Ground-state projector |0><0|.
  DensityMatrix();

  /// Validates against the tolerances above; throws DomainError.
  static DensityMatrix from_matrix(const Matrix3& m);
  static DensityMatrix maximally_mixed();

  const Matrix3& matrix() const { return m_; }
  Eigen::Vector3d populations() const { return m_.diagonal().real(); }
  /// Ascending eigenvalues.
  Eigen::Vector3d eigenvalues() const;

 private:
  explicit DensityMatrix(const Matrix3& m) : m_(m) {}
  Matrix3 m_;
};

enum class BareOperator {
  Cold,  // |0><1|
  Hot,   // |0><2|
};

Matrix3 bare_operator(BareOperator which);

/// One transition frequency of a bath coupling, resolved in the
/// instantaneous eigenbasis. `op` lowers the energy by `epsilon`; its
/// adjoint carries the backward rate.
struct JumpChannel {
  double epsilon = 0.0;
  Matrix3 op = Matrix3::Zero();
  double rate_forward = 0.0;
  double rate_backward = 0.0;
};

/// u * H_free + V(tau). V couples |1> and |2> with amplitude lambda and the
/// phase exp(i*omega*tau), omega = drive_frequency(spec, u), and is absent
/// when `drive_on` is false. tau is measured from the start of the stroke.
Matrix3 build_hamiltonian(const EngineSpec& spec, double u, double tau, bool drive_on);

/// (eps21^2 + (g1 + g2)^2 / 4) / (omega2 - omega1), where eps21 is the gap
/// of the coupled {|1>, |2>} block of u * H_free + V(0).
double drive_frequency(const EngineSpec& spec, double u);

/// Groups eigenvalues closer than this when resolving jump operators.
inline constexpr double kGapTolerance = 1e-9;

/// Projects `which` onto the eigenbasis of H. Only components that lower
/// the energy (epsilon > kGapTolerance) become channels; the rate is the
/// process coupling for that bath and the backward rate obeys
/// rate_backward = exp(-beta * epsilon) * rate_forward.
std::vector<JumpChannel> projected_jump_operators(const Matrix3& H, BareOperator which,
                                                  const ProcessParams& process);

/// Channels of every bath the process couples to.
std::vector<JumpChannel> dissipative_channels(const Matrix3& H, const ProcessParams& process);

/// -i[H, rho] + sum over channels of both dissipator directions.
Matrix3 lindblad_rhs(const Matrix3& rho, const Matrix3& H, std::span<const JumpChannel> channels);

/// tr(H D[rho]) summed over the given channels: energy current into the
/// system from the baths they describe.
double heat_current(const Matrix3& rho, const Matrix3& H, std::span<const JumpChannel> channels);

struct PropagationOptions {
  double max_substep = 0.01;
};

/// Integrates the GKLS equation over `dt` with classical RK4 on a uniform
/// grid of ceil(dt / max_substep) substeps. The drive phase restarts at
/// zero. Throws IntegrationError when the result drifts from a density
/// matrix by more than 1e-9.
DensityMatrix lindblad_propagate(const DensityMatrix& rho, const ProcessParams& process, double u,
                                 double dt, const EngineSpec& spec,
                                 const PropagationOptions& options = {});

/// exp(-beta H) / tr exp(-beta H). Throws DomainError for beta < 0.
DensityMatrix gibbs_state(const Matrix3& H, double beta);

/// Re tr(rho H).
double expectation_energy(const DensityMatrix& rho, const Matrix3& H);

/// Hermitian coordinates: (rho00, rho11, rho22, Re rho01, Im rho01,
/// Re rho02, Im rho02, Re rho12, Im rho12).
RealCoords to_real_coords(const Matrix3& m);
Matrix3 from_real_coords(const RealCoords& x);

/// GKLS generator as a real 9x9 map on Hermitian coordinates.
class Liouvillian {
 public:
  static Liouvillian from_channels(const Matrix3& H, std::span<const JumpChannel> channels);
  /// Time-independent generator at scale u with every listed process
  /// coupled simultaneously. Drive-on processes are rejected.
  static Liouvillian for_processes(const EngineSpec& spec, double u,
                                   std::span<const ProcessParams> processes);

  const RealGenerator& matrix() const { return matrix_; }
  Matrix3 apply(const Matrix3& rho) const;

 private:
  explicit Liouvillian(const RealGenerator& m) : matrix_(m) {}
  RealGenerator matrix_;
};

/// Unit-trace null vector of the generator. Throws DegenerateSteadyStateError
/// if the numerical kernel is not one-dimensional.
DensityMatrix steady_state(const Liouvillian& generator);

}  // namespace qhe::qdyn
