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

#include "qhe/qdyn.hpp"

namespace qhe {

using qdyn::Process;

/// Control applied for one interval: which stroke, and the Hamiltonian scale.
struct Action {
  Process d = Process::Work;
  double u = 1.0;

  /// Throws DomainError when u lies outside [kUMin, kUMax].
  void validate() const;

  friend bool operator==(const Action&, const Action&) = default;
};

}  // namespace qhe
