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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qhe {

/// Argument outside the documented domain of an operation.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The instantaneous 1-2 gap vanished, so the drive frequency is undefined.
class SingularityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Propagated state left the set of density matrices by more than the
/// tolerated drift. The caller should reduce the integration substep.
class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The generator kernel is not one-dimensional.
class DegenerateSteadyStateError : public std::runtime_error {
 public:
  DegenerateSteadyStateError(const std::string& what, std::size_t kernel_dim)
      : std::runtime_error(what), kernel_dim_(kernel_dim) {}
  std::size_t kernel_dim() const noexcept { return kernel_dim_; }

 private:
  std::size_t kernel_dim_;
};

/// Efficiency requested for a non-positive average power.
class UndefinedEfficiencyError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A loss or gradient became NaN or infinite.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No repeating (d, u) pattern was found in the scanned window.
class NoPeriodError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fewer points than free parameters.
class UnderdeterminedError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Configuration rejected; `key_path()` names the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key_path, const std::string& what)
      : std::runtime_error(key_path.empty() ? what : key_path + ": " + what),
        key_path_(std::move(key_path)) {}
  const std::string& key_path() const noexcept { return key_path_; }

 private:
  std::string key_path_;
};

/// Corrupt or truncated persisted payload.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Persisted payload written by a newer format than this build understands.
class VersionError : public std::runtime_error {
 public:
  VersionError(int found, int supported)
      : std::runtime_error("checkpoint format version " + std::to_string(found) +
                           " is not supported (this build reads up to version " +
                           std::to_string(supported) + ")"),
        found_(found),
        supported_(supported) {}
  int found() const noexcept { return found_; }
  int supported() const noexcept { return supported_; }

 private:
  int found_;
  int supported_;
};

}  // namespace qhe
