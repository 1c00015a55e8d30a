/*
 * Copyright 2026 The delay_lqr Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace delay_lqr {

/// Base class for every numerical failure raised by the solver modules.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A matrix that must be symmetric positive definite failed its Cholesky
/// factorization (Υ_k in the recursion, or an input weight).
class NotPositiveDefinite : public SolverError {
 public:
  using SolverError::SolverError;
};

/// The algebraic Riccati-ZXL iteration diverged or stalled: no positive
/// definite fixed point was found, so the plant is treated as not
/// mean-square stabilizable at this multiplier.
class NotStabilizable : public SolverError {
 public:
  using SolverError::SolverError;
};

/// A linear fixed-point iteration (steady-state sensitivities) ran out of
/// iterations.
class NoConvergence : public SolverError {
 public:
  using SolverError::SolverError;
};

/// Infinite-horizon cost accumulation under a feedback law that is not
/// mean-square stable.
class Diverging : public SolverError {
 public:
  using SolverError::SolverError;
};

/// Malformed input (dimension mismatch, invalid config, bad multipliers).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace delay_lqr
