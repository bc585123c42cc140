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

#include "qhe/csv.hpp"

#include "qhe/errors.hpp"

#include <fmt/format.h>

#include <sstream>

namespace qhe::csv {

using eval::format_double;

void write_trajectory(std::ostream& out, const env::Trajectory& traj, const eval::KeyValues& trailer) {
  out << kTrajectoryHeader << '\n';
  for (std::size_t i = 0; i < traj.records.size(); ++i) {
    const env::StepRecord& r = traj.records[i];
    const qdyn::Matrix3& rho = r.rho_after;
    out << fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", i,
                       qdyn::to_string(r.action.d), r.action.u, r.reward, rho(0, 0).real(),
                       rho(1, 1).real(), rho(2, 2).real(), rho(1, 2).real(), rho(1, 2).imag(),
                       traj.avg_power[i]);
  }
  for (const auto& [k, v] : trailer) out << "# " << k << '=' << v << '\n';
}

std::vector<Action> TrajectoryTable::actions() const {
  std::vector<Action> a;
  a.reserve(rows.size());
  for (const TrajectoryRow& r : rows) a.push_back(r.action);
  return a;
}

namespace {

double parse_double(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw IntegrityError("trajectory line " + std::to_string(line) + ": bad number '" + s + "'");
}

}  // namespace

TrajectoryTable read_trajectory(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTrajectoryHeader) {
    throw IntegrityError("trajectory CSV must start with the header '" + std::string(kTrajectoryHeader) + "'");
  }
  TrajectoryTable t;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) t.trailer.emplace_back(line.substr(2, eq - 2), line.substr(eq + 1));
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 10) {
      throw IntegrityError("trajectory line " + std::to_string(lineno) + ": expected 10 columns");
    }
    TrajectoryRow r;
    r.step = static_cast<std::size_t>(parse_double(cells[0], lineno));
    try {
      r.action.d = qdyn::process_from_string(cells[1]);
    } catch (const DomainError&) {
      throw IntegrityError("trajectory line " + std::to_string(lineno) + ": unknown process '" + cells[1] + "'");
    }
    r.action.u = parse_double(cells[2], lineno);
    r.reward = parse_double(cells[3], lineno);
    r.avg_power = parse_double(cells[9], lineno);
    t.rows.push_back(r);
  }
  return t;
}

void write_train_log_header(std::ostream& out) { out << kTrainLogHeader << '\n'; }

void write_train_log_row(std::ostream& out, const sac::TrainLogRow& r) {
  out << r.step;
  for (double v : {r.loss_q, r.loss_pi, r.alpha_d, r.alpha_c, r.entropy_d, r.entropy_c,
                   r.target_entropy_d, r.target_entropy_c, r.eval_avg_power}) {
    out << ',' << format_double(v);
  }
  out << '\n';
}

}  // namespace qhe::csv
