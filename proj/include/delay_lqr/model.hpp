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

// Problem definition for discrete-time stochastic LQR with input delay,
// multiplicative noise and quadratic cost constraints:
//
//   x_{k+1} = (A + ω_k Ā) x_k + (B + ω_k B̄) u_{k-d},   E ω_k = 0, E ω_k² = σ²
//
//   minimize J_0(u)  subject to  J_i(u) ≤ c_i,  i = 1..m
//
// with J_i = E[Σ x_kᵀQ_i x_k + Σ u_{k-d}ᵀR_i u_{k-d} (+ x_{N+1}ᵀF_i x_{N+1})].

#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace delay_lqr {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// The delayed plant together with its initial data.
struct SystemModel {
  MatrixXd A;
  MatrixXd A_bar;
  MatrixXd B;
  MatrixXd B_bar;
  double sigma2 = 0.0;
  int delay = 1;
  VectorXd x0;
  /// Controls applied before time zero, oldest first: u_{-d}, ..., u_{-1}.
  std::vector<VectorXd> u_init;

  Index state_dim() const { return A.rows(); }
  Index input_dim() const { return B.cols(); }

  /// u_{-j} for j = 1..d.
  const VectorXd& past_control(int j) const { return u_init[static_cast<std::size_t>(delay - j)]; }
};

/// One quadratic weight triple. The objective carries no bound; each
/// constraint carries its bound c_i. F is present only for finite horizons.
struct CostTerm {
  MatrixXd Q;
  MatrixXd R;
  std::optional<MatrixXd> F;
  std::optional<double> bound;
};

struct FiniteHorizon {
  int N = 0;
};
struct InfiniteHorizon {};
using Horizon = std::variant<FiniteHorizon, InfiniteHorizon>;

struct ConstrainedProblem {
  SystemModel model;
  CostTerm objective;
  std::vector<CostTerm> constraints;
  Horizon horizon = InfiniteHorizon{};

  bool is_finite() const { return std::holds_alternative<FiniteHorizon>(horizon); }
  /// N for a finite horizon; throws InvalidInput for an infinite one.
  int horizon_length() const;
  Index num_constraints() const { return static_cast<Index>(constraints.size()); }
  /// (c_1, ..., c_m); a missing bound reads as 0.
  VectorXd bounds() const;
  /// Term i with the objective at index 0 and constraint i at index i.
  const CostTerm& term(Index i) const;
};

/// Lagrange multipliers λ ≥ 0, one per constraint.
class MultiplierVector {
 public:
  MultiplierVector() = default;
  /// Throws InvalidInput if any entry is negative or not finite.
  explicit MultiplierVector(VectorXd values);

  static MultiplierVector zeros(Index m) { return MultiplierVector(VectorXd::Zero(m)); }

  const VectorXd& values() const { return values_; }
  Index size() const { return values_.size(); }
  double operator[](Index i) const { return values_[i]; }

 private:
  VectorXd values_;
};

enum class ViolationKind {
  DimensionMismatch,
  NotSymmetric,
  NotPositiveDefinite,
  HorizonTooShort,
  TerminalWeightMismatch,
  InvalidParameter,
};

struct Violation {
  ViolationKind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(ViolationKind kind) const;
  /// All messages joined with "; ".
  std::string summary() const;
};

/// Checks dimensions, symmetry, positive definiteness and horizon rules.
/// Pure: never throws, never modifies its input.
ValidationReport validate(const ConstrainedProblem& problem);

/// Throws InvalidInput carrying the report summary if validation fails.
void require_valid(const ConstrainedProblem& problem);

/// Cholesky-based test with zero tolerance on pivot positivity. Only the
/// lower triangle is read; call on symmetric input.
bool is_positive_definite(const MatrixXd& M);

/// (M + Mᵀ)/2.
inline MatrixXd symmetric_part(const MatrixXd& M) { return 0.5 * (M + M.transpose()); }

/// Returns (M + Mᵀ)/2 when ‖M − Mᵀ‖max ≤ rel_tol·max(1, ‖M‖max), nullopt
/// otherwise (and for non-square input).
std::optional<MatrixXd> symmetrized(const MatrixXd& M, double rel_tol = 1e-12);

}  // namespace delay_lqr
