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

#include "qhe/fit.hpp"

#include "qhe/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>

namespace qhe::fit {
namespace {

constexpr int kMaxIterations = 2000;
constexpr int kMaxDampingRetries = 60;

// 1 / (1 + e^z) without overflow.
double logistic_complement(double z) {
  if (z > 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

// Internal coordinates: (A1, A2, t0, log dt).
BoltzmannParams to_params(const Vec4& x) { return {x(0), x(1), x(2), std::exp(x(3))}; }

double sum_sq_residuals(const BoltzmannParams& p, std::span<const Point> pts) {
  double s = 0.0;
  for (const Point& q : pts) {
    const double r = boltzmann_eval(p, q.t) - q.u;
    s += r * r;
  }
  return s;
}

struct Solve {
  Vec4 x;
  double ssr = 0.0;
  int iterations = 0;
  bool finite = true;
};

Solve damped_gauss_newton(Vec4 x, std::span<const Point> pts, double log_dt_min, double log_dt_max) {
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixX4d jac(n, 4);
  Eigen::VectorXd res(n);

  const auto linearize = [&](const Vec4& at) {
    const double dt = std::exp(at(3));
    for (Eigen::Index i = 0; i < n; ++i) {
      const double z = (pts[static_cast<std::size_t>(i)].t - at(2)) / dt;
      const double s = logistic_complement(z);
      const double amp = at(0) - at(1);
      const double slope = amp * s * (1.0 - s);
      res(i) = amp * s + at(1) - pts[static_cast<std::size_t>(i)].u;
      jac(i, 0) = s;
      jac(i, 1) = 1.0 - s;
      jac(i, 2) = slope / dt;
      jac(i, 3) = slope * z;
    }
  };

  Solve out{x, sum_sq_residuals(to_params(x), pts), 0, true};
  linearize(x);
  Mat4 jtj = jac.transpose() * jac;
  Vec4 jtr = jac.transpose() * res;
  double mu = 1e-3 * std::max(jtj.diagonal().maxCoeff(), 1e-12);

  for (int it = 0; it < kMaxIterations; ++it) {
    out.iterations = it + 1;
    if (out.ssr == 0.0) break;
    bool improved = false;
    Vec4 step = Vec4::Zero();
    for (int retry = 0; retry < kMaxDampingRetries; ++retry) {
      Mat4 a = jtj;
      for (int k = 0; k < 4; ++k) a(k, k) += mu * std::max(jtj(k, k), 1e-12);
      step = a.ldlt().solve(-jtr);
      if (!step.allFinite()) {
        mu *= 4.0;
        continue;
      }
      Vec4 trial = x + step;
      trial(3) = std::clamp(trial(3), log_dt_min, log_dt_max);
      const double ssr = sum_sq_residuals(to_params(trial), pts);
      if (std::isfinite(ssr) && ssr < out.ssr) {
        x = trial;
        out.x = x;
        out.ssr = ssr;
        mu = std::max(mu / 3.0, 1e-15);
        improved = true;
        break;
      }
      mu *= 2.0;
    }
    if (!improved) break;
    const double rel = (step.cwiseAbs().array() / (x.cwiseAbs().array() + 1e-12)).maxCoeff();
    if (rel < 1e-15) break;
    linearize(x);
    jtj = jac.transpose() * jac;
    jtr = jac.transpose() * res;
  }
  out.finite = out.x.allFinite() && std::isfinite(out.ssr);
  return out;
}

std::vector<Point> sorted_checked(std::span<const Point> points) {
  if (points.size() < 4) {
    throw UnderdeterminedError("Boltzmann fit needs at least 4 points, got " +
                               std::to_string(points.size()));
  }
  std::vector<Point> pts(points.begin(), points.end());
  for (const Point& p : pts) {
    if (!std::isfinite(p.t) || !std::isfinite(p.u)) throw DomainError("fit points must be finite");
  }
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.t < b.t; });
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (pts[i].t == pts[i - 1].t) throw DomainError("fit points must have distinct t values");
  }
  return pts;
}

FitResult make_result(const BoltzmannParams& p, std::span<const Point> pts, int iterations) {
  FitResult r;
  r.params = p;
  r.ss_res = sum_sq_residuals(p, pts);
  r.r_squared = r_squared(p, pts);
  r.t_min = pts.front().t;
  r.t_max = pts.back().t;
  r.iterations = iterations;
  return r;
}

}  // namespace

double boltzmann_eval(const BoltzmannParams& p, double t) {
  if (p.dt == 0.0) throw DomainError("boltzmann_eval: dt must be non-zero");
  return (p.A1 - p.A2) * logistic_complement((t - p.t0) / p.dt) + p.A2;
}

std::string_view to_string(SegmentLabel label) {
  switch (label) {
    case SegmentLabel::Working1:
      return "working-1";
    case SegmentLabel::Working2:
      return "working-2";
    case SegmentLabel::Working:
      return "working";
    case SegmentLabel::Hot:
      return "heating";
    case SegmentLabel::Cold:
      return "cooling";
  }
  return "?";
}

double r_squared(const BoltzmannParams& p, std::span<const Point> points) {
  double mean = 0.0;
  for (const Point& q : points) mean += q.u;
  mean /= static_cast<double>(points.size());
  double ss_tot = 0.0;
  for (const Point& q : points) ss_tot += (q.u - mean) * (q.u - mean);
  const double ss_res = sum_sq_residuals(p, points);
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

FitReport fit_boltzmann_detailed(std::span<const Point> points) {
  const std::vector<Point> pts = sorted_checked(points);
  const double t_min = pts.front().t;
  const double t_max = pts.back().t;
  const double span = t_max - t_min;

  FitReport report;
  const bool constant = std::all_of(pts.begin(), pts.end(),
                                    [&](const Point& p) { return p.u == pts.front().u; });
  if (constant) {
    const double c = pts.front().u;
    report.best = make_result({c, c, 0.5 * (t_min + t_max), span / 10.0}, pts, 0);
    report.starts.push_back({report.best.params, report.best, true});
    return report;
  }

  std::size_t steep = 0;
  double steepest = -1.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double g = std::abs(pts[i + 1].u - pts[i].u) / (pts[i + 1].t - pts[i].t);
    if (g > steepest) {
      steepest = g;
      steep = i;
    }
  }
  const double t0_start = 0.5 * (pts[steep].t + pts[steep + 1].t);
  const double u_first = pts.front().u;
  const double u_last = pts.back().u;
  const double log_dt_min = std::log(span * 1e-6);
  const double log_dt_max = std::log(span * 1e3);

  std::optional<FitResult> best;
  for (auto [a1, a2] : {std::pair{u_first, u_last}, std::pair{u_last, u_first}}) {
    for (double scale : {1.0, 0.3, 3.0}) {
      const BoltzmannParams initial{a1, a2, t0_start, span / 10.0 * scale};
      const Vec4 x0(initial.A1, initial.A2, initial.t0, std::log(initial.dt));
      const Solve s = damped_gauss_newton(x0, pts, log_dt_min, log_dt_max);
      FitStart start{initial, {}, s.finite};
      if (s.finite) {
        start.result = make_result(to_params(s.x), pts, s.iterations);
        if (!best || start.result.ss_res < best->ss_res) best = start.result;
      }
      report.starts.push_back(start);
    }
  }
  if (!best) {
    FitResult fallback = make_result({u_first, u_last, t0_start, span / 10.0}, pts, 0);
    throw NoConvergenceError("Boltzmann fit failed from every start", fallback);
  }
  report.best = *best;
  return report;
}

FitResult fit_boltzmann(std::span<const Point> points) { return fit_boltzmann_detailed(points).best; }

namespace {

using Key = std::pair<int, std::int64_t>;

std::vector<Key> sequence_keys(std::span<const Action> actions) {
  std::vector<Key> keys;
  keys.reserve(actions.size());
  for (const Action& a : actions) {
    keys.emplace_back(static_cast<int>(a.d), std::llround(a.u * 1e3));
  }
  return keys;
}

}  // namespace

PeriodInfo detect_period(std::span<const Action> actions, std::size_t max_period) {
  const std::vector<Key> keys = sequence_keys(actions);
  const std::size_t n = keys.size();
  for (std::size_t p = 1; p <= max_period && 2 * p <= n; ++p) {
    std::size_t onset = 0;
    for (std::size_t j = n - p; j-- > 0;) {
      if (keys[j] != keys[j + p]) {
        onset = j + 1;
        break;
      }
    }
    if (n - onset >= 2 * p) return {p, onset};
  }
  throw NoPeriodError("no repeating (d, u) pattern within " + std::to_string(n) + " steps");
}

std::vector<std::vector<Segment>> segment_trajectory(std::span<const Action> actions,
                                                     std::size_t max_period) {
  const PeriodInfo info = detect_period(actions, max_period);
  const std::size_t p = info.period;
  const std::size_t n = actions.size();

  // Start the first window on a process change so no run straddles a window edge.
  std::size_t start = info.onset;
  for (std::size_t i = info.onset; i < info.onset + p; ++i) {
    if (actions[i].d != actions[i + p - 1].d) {
      start = i;
      break;
    }
  }

  std::vector<std::vector<Segment>> periods;
  for (std::size_t w = start; w + p <= n; w += p) {
    std::vector<Segment> segs;
    for (std::size_t i = w; i < w + p; ++i) {
      if (segs.empty() || segs.back().d != actions[i].d) {
        Segment s;
        s.d = actions[i].d;
        s.first_step = i;
        segs.push_back(std::move(s));
      }
      segs.back().points.push_back({static_cast<double>(i), actions[i].u});
    }
    const std::size_t m = segs.size();
    for (std::size_t k = 0; k < m; ++k) {
      Segment& s = segs[k];
      if (s.d == Process::Hot) {
        s.label = SegmentLabel::Hot;
      } else if (s.d == Process::Cold) {
        s.label = SegmentLabel::Cold;
      } else if (m > 1) {
        const Process before = segs[(k + m - 1) % m].d;
        const Process after = segs[(k + 1) % m].d;
        if (before == Process::Cold && after == Process::Hot) {
          s.label = SegmentLabel::Working1;
        } else if (before == Process::Hot && after == Process::Cold) {
          s.label = SegmentLabel::Working2;
        }
      }
    }
    periods.push_back(std::move(segs));
  }
  return periods;
}

CycleFit fit_cycle(std::span<const Action> actions, double first_time, std::size_t max_period) {
  const std::vector<std::vector<Segment>> periods = segment_trajectory(actions, max_period);
  if (periods.empty()) throw NoPeriodError("no complete period in the trajectory");
  const std::vector<Segment>& last = periods.back();
  CycleFit out;
  out.period = detect_period(actions, max_period);
  out.anchor_step = last.front().first_step;
  for (const Segment& s : last) {
    if (s.label == SegmentLabel::Working1) {
      out.anchor_step = s.first_step;
      break;
    }
  }
  bool any_work = false;
  for (const Segment& s : last) {
    SegmentFit f;
    f.label = s.label;
    f.steps = s.points.size();
    for (const Point& p : s.points) {
      f.points.push_back({p.t - static_cast<double>(out.anchor_step) + first_time, p.u});
    }
    if (s.d == Process::Work) {
      any_work = true;
      try {
        f.fit = fit_boltzmann(f.points);
      } catch (const UnderdeterminedError& e) {
        f.note = e.what();
      } catch (const NoConvergenceError& e) {
        f.fit = e.best();
        f.note = e.what();
      }
    }
    out.segments.push_back(std::move(f));
  }
  if (!any_work) throw NoPeriodError("the periodic pattern contains no work segment");
  return out;
}

}  // namespace qhe::fit
