// Copyright 2026 The nlbox developers
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

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace nlbox {

// ---------------------------------------------------------------------------
// Error taxonomy. Domain/validation errors exit the CLI with code 1, internal
// invariant failures with code 2.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Bad user-facing input: malformed tables, out-of-range parameters, ...
class DomainError : public Error {
public:
  using Error::Error;
};

/// A computed quantity violated an invariant the implementation guarantees.
class InternalError : public Error {
public:
  using Error::Error;
};

class NormalizationError : public DomainError {
public:
  using DomainError::DomainError;
};
class NegativeEntryError : public DomainError {
public:
  using DomainError::DomainError;
};
class SignalingBoxError : public DomainError {
public:
  using DomainError::DomainError;
};

class CausalityViolationError : public DomainError {
public:
  using DomainError::DomainError;
};
class WeightSumError : public DomainError {
public:
  using DomainError::DomainError;
};
class ResourceMismatchError : public DomainError {
public:
  using DomainError::DomainError;
};
class SignalingResourceError : public DomainError {
public:
  using DomainError::DomainError;
};
class ArityMismatchError : public DomainError {
public:
  using DomainError::DomainError;
};
class SpaceTooLargeError : public DomainError {
public:
  using DomainError::DomainError;
};
class DimensionBudgetError : public DomainError {
public:
  using DomainError::DomainError;
};

class NotProjectorError : public DomainError {
public:
  using DomainError::DomainError;
};
class NotComplementaryError : public DomainError {
public:
  using DomainError::DomainError;
};

class OptimizerDivergenceError : public InternalError {
public:
  using InternalError::InternalError;
};
class CounterexampleFoundError : public InternalError {
public:
  using InternalError::InternalError;
};

// ---------------------------------------------------------------------------
// Tolerances. Analytically constructed tables are held to 1e-12; tables that
// went through floating-point quantum simulation get 1e-9.
// ---------------------------------------------------------------------------

struct ToleranceProfile {
  double normalization;
  double non_signaling;

  static constexpr ToleranceProfile strict() { return {1e-12, 1e-12}; }
  static constexpr ToleranceProfile simulated() { return {1e-9, 1e-9}; }
};

inline constexpr double kIsotropyTol = 1e-9;
inline constexpr double kBoxEqualityTol = 1e-9;
inline constexpr std::uint64_t kDefaultSeed = 0x5EED;

// ---------------------------------------------------------------------------
// Seed derivation. Parallel trials draw their generator from
// derived_rng(seed, trial) so results do not depend on thread scheduling.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(stream)));
}

}  // namespace nlbox
