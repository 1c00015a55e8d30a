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

// Riccati-ZXL equations for the delayed multiplicative-noise LQR.
//
// Backward recursion, k = N, ..., d, from Z_{N+1} = X_{N+1} = F(λ):
//
//   Υ_k = BᵀZ_{k+1}B + σ²B̄ᵀX_{k+1}B̄ + R(λ)
//   M_k = BᵀZ_{k+1}A + σ²B̄ᵀX_{k+1}Ā
//   L_k = M_kᵀ Υ_k⁻¹ M_k
//   Z_k = AᵀZ_{k+1}A + σ²ĀᵀX_{k+1}Ā + Q(λ) − L_k
//   X_k = Z_k + Σ_{i=0}^{d-1} (Aᵀ)ⁱ L_{k+i} Aⁱ,   L_j := 0 for j > N
//
// The infinite-horizon solution is the fixed point of the same map.

#pragma once

#include <Eigen/Cholesky>
#include <optional>
#include <span>
#include <vector>

#include "delay_lqr/model.hpp"

namespace delay_lqr {

/// Multiplier-weighted cost matrices Q(λ), R(λ) and, for finite horizons, F(λ).
struct WeightedCosts {
  MatrixXd Q;
  MatrixXd R;
  std::optional<MatrixXd> F;
};

/// Q(λ) = Q_0 + Σ λ_i Q_i, and likewise for R and F (F only when every term has one).
WeightedCosts weighted_costs(const ConstrainedProblem& problem, const MultiplierVector& lambda);

/// Σ_j weights_j · terms_j, with no implicit objective. Used for pure
/// constraint problems and infeasibility certificates.
WeightedCosts combine_terms(std::span<const CostTerm> terms, const VectorXd& weights);

/// Per-stage quantities of the recursion. `gain` caches Υ_k⁻¹M_k.
struct RiccatiStage {
  MatrixXd Upsilon;
  MatrixXd M;
  MatrixXd L;
  MatrixXd gain;
  Eigen::LLT<MatrixXd> Upsilon_llt;
};

class RiccatiTrajectory {
 public:
  RiccatiTrajectory(int delay, int N) : delay_(delay), N_(N) {}

  int delay() const { return delay_; }
  int horizon() const { return N_; }

  /// k in [d, N+1].
  const MatrixXd& Z(int k) const { return Z_.at(static_cast<std::size_t>(k - delay_)); }
  const MatrixXd& X(int k) const { return X_.at(static_cast<std::size_t>(k - delay_)); }
  /// k in [d, N].
  const RiccatiStage& stage(int k) const { return stages_.at(static_cast<std::size_t>(k - delay_)); }
  /// L_k for k in [d, N], and the zero matrix for k > N.
  const MatrixXd& L(int k) const { return k > N_ ? zero_ : stage(k).L; }

 private:
  friend RiccatiTrajectory solve_finite(const SystemModel&, const WeightedCosts&, int);

  int delay_;
  int N_;
  std::vector<MatrixXd> Z_;
  std::vector<MatrixXd> X_;
  std::vector<RiccatiStage> stages_;
  MatrixXd zero_;
};

/// Throws NotPositiveDefinite if some Υ_k fails its Cholesky factorization,
/// InvalidInput if N < d or F(λ) is absent.
RiccatiTrajectory solve_finite(const SystemModel& model, const WeightedCosts& w, int N);

struct SteadySolution {
  MatrixXd Z;
  MatrixXd X;
  MatrixXd L;
  MatrixXd Upsilon;
  MatrixXd M;
  MatrixXd gain;
  Eigen::LLT<MatrixXd> Upsilon_llt;
  int iterations = 0;
  /// Max-abs residual of the algebraic equations at the returned point.
  double residual = 0.0;
};

struct InfiniteOptions {
  double tol = 1e-12;
  int max_iter = 100000;
  /// Any iterate entry above this magnitude is read as divergence.
  double divergence_cap = 1e12;
  /// Starting point instead of Z = X = Q(λ); the fixed point is unique, so
  /// this only changes the iteration count.
  std::optional<SteadySolution> warm_start;
};

/// Iterates the finite-horizon map from Z = X = Q(λ) until the max entrywise
/// change of (Z, X) drops below tol · max(1, max |X|). Throws NotStabilizable on divergence,
/// stalling, or a fixed point with Z not positive definite.
SteadySolution solve_infinite(const SystemModel& model, const WeightedCosts& w,
                              const InfiniteOptions& options);
SteadySolution solve_infinite(const SystemModel& model, const WeightedCosts& w, double tol,
                              int max_iter);

/// Max-abs residual of the algebraic Riccati-ZXL equations at `sol`.
double steady_residual(const SystemModel& model, const WeightedCosts& w, const SteadySolution& sol);

/// Σ_{i=0}^{d-1} (Aᵀ)ⁱ L_i Aⁱ for a window L_0, ..., L_{d-1} (Horner form).
MatrixXd delay_window_sum(const MatrixXd& A, std::span<const MatrixXd* const> window);

}  // namespace delay_lqr
