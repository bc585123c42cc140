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

// Sigmoid ("Boltzmann") fits of work-stroke u(t) profiles and the
// segmentation of periodic trajectories into Otto-like strokes.

#include "qhe/action.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qhe::fit {

/// u(t) = (A1 - A2) / (1 + exp((t - t0) / dt)) + A2
struct BoltzmannParams {
  double A1 = 0.0;
  double A2 = 0.0;
  double t0 = 0.0;
  double dt = 1.0;
};

/// Throws DomainError for dt == 0.
double boltzmann_eval(const BoltzmannParams& p, double t);

struct Point {
  double t = 0.0;
  double u = 0.0;
};

enum class SegmentLabel { Working1, Working2, Working, Hot, Cold };

std::string_view to_string(SegmentLabel label);

struct FitResult {
  BoltzmannParams params;
  double r_squared = 0.0;
  double ss_res = 0.0;
  double t_min = 0.0;
  double t_max = 0.0;
  int iterations = 0;
};

/// Every start tried by the multi-start solver and what it converged to.
struct FitStart {
  BoltzmannParams initial;
  FitResult result;
  bool ok = false;
};

struct FitReport {
  FitResult best;
  std::vector<FitStart> starts;
};

/// Every start failed; carries the best iterate seen.
class NoConvergenceError : public std::runtime_error {
 public:
  NoConvergenceError(const std::string& what, FitResult best)
      : std::runtime_error(what), best_(best) {}
  const FitResult& best() const noexcept { return best_; }

 private:
  FitResult best_;
};

/// Least-squares fit by multi-start damped Gauss-Newton with dt kept
/// positive. Starts take A1/A2 from the end values in both orders, t0 at
/// the steepest step, dt from a tenth of the span (also x0.3 and x3).
/// Constant data returns A1 = A2 = c with R^2 = 1.
/// Throws UnderdeterminedError for fewer than 4 points and DomainError for
/// repeated t values.
FitReport fit_boltzmann_detailed(std::span<const Point> points);
FitResult fit_boltzmann(std::span<const Point> points);

/// Coefficient of determination of `p` on the points (1 when SS_tot = 0
/// and the fit is exact).
double r_squared(const BoltzmannParams& p, std::span<const Point> points);

struct Segment {
  SegmentLabel label = SegmentLabel::Working;
  Process d = Process::Work;
  std::size_t first_step = 0;
  std::vector<Point> points;  // t is the step index
};

struct PeriodInfo {
  std::size_t period = 0;
  std::size_t onset = 0;  // first step from which the sequence repeats
};

/// Smallest period of the (d, u rounded to 1e-3) sequence, with at least
/// two full repetitions after its onset. Throws NoPeriodError.
PeriodInfo detect_period(std::span<const Action> actions, std::size_t max_period = 256);

/// Splits every complete period after the onset into constant-d segments.
/// Periods are aligned to begin at a process change so segments are never
/// cut. Work segments between Cold and Hot are working-1, between Hot and
/// Cold working-2.
std::vector<std::vector<Segment>> segment_trajectory(std::span<const Action> actions,
                                                     std::size_t max_period = 256);

/// The four-stroke cycle reconstructed from fitted work segments. Durations
/// are in steps of dt; working-1 is first sampled at `first_time`.
struct FittedCycle {
  int tau1 = 1;  // working-1
  int tau2 = 1;  // heating
  int tau3 = 4;  // working-2
  int tau4 = 1;  // cooling
  double heating_u = 1.495;
  double cooling_u = 0.300;
  BoltzmannParams working1{0.300, 1.495, 6.75, 0.05};
  BoltzmannParams working2{1.497, 0.300, 10.25, 0.25};
  double first_time = 7.0;

  int period() const { return tau1 + tau2 + tau3 + tau4; }
};

struct SegmentFit {
  SegmentLabel label = SegmentLabel::Working;
  std::size_t steps = 0;
  std::vector<Point> points;     // t in cycle time
  std::optional<FitResult> fit;  // empty when the segment has < 4 points
  std::string note;
};

struct CycleFit {
  PeriodInfo period;
  std::size_t anchor_step = 0;  // trajectory step mapped to first_time
  std::vector<SegmentFit> segments;
};

/// Segments the last complete period and fits every work segment. Cycle
/// time places the first working-1 step (else the period start) at
/// `first_time`. Throws NoPeriodError when no period or no work segment
/// is found.
CycleFit fit_cycle(std::span<const Action> actions, double first_time = 7.0,
                   std::size_t max_period = 256);

}  // namespace qhe::fit
