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

#include "checks.hpp"
#include "qhe/eval.hpp"

#include <doctest.h>

using namespace qhe;

namespace {

void require_ok(const checks::Outcome& o) {
  INFO("worst deviation ", o.worst, " first failure at ", o.detail);
  CHECK(o.ok);
}

}  // namespace

TEST_CASE("random strokes keep the state a density matrix") { require_ok(checks::cptp_random_steps(1000, 1)); }

TEST_CASE("every stroke is completely positive") { require_ok(checks::complete_positivity(30, 2)); }

TEST_CASE("Choi negativity at the default substep is fourth-order integrator error") {
  const qdyn::EngineSpec spec;
  qdyn::PropagationOptions coarse;
  qdyn::PropagationOptions half;
  half.max_substep = coarse.max_substep / 2;
  const double a = -checks::choi_min_eigenvalue(Process::Work, 1.5, spec, coarse);
  const double b = -checks::choi_min_eigenvalue(Process::Work, 1.5, spec, half);
  CHECK(a < 1e-7);
  CHECK(b > 0.0);
  CHECK(std::log2(a / b) == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("work strokes preserve the spectrum") { require_ok(checks::work_spectrum(200, 3)); }

TEST_CASE("discounted average recursion equals the explicit sum") { require_ok(checks::discount_recursion(4)); }

TEST_CASE("energy balance closes over a period at steady state") {
  require_ok(checks::first_law_closure(eval::build_baseline_cycle(eval::BaselineTag::FittedOtto).schedule, 10, 5));
}

TEST_CASE("soft target lies in the hull of the branch values") { require_ok(checks::target_convex_hull(20, 6)); }

TEST_CASE("sampled controls stay in bounds") { require_ok(checks::sampled_u_bounded(2000, 7)); }

TEST_CASE("entropy schedule endpoints are exact") { require_ok(checks::schedule_endpoints()); }

TEST_CASE("loss gradients match central differences") {
  const checks::GradientOutcome g = checks::gradient_cases(10, 8);
  require_ok(g.critic);
  require_ok(g.actor);
  require_ok(g.temperature);
}
