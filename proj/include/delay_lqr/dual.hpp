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

// Lagrange-dual solution of the constrained problem by projected gradient
// ascent on the multipliers:
//
//   λ^{n+1} = max{0, λ^n + α ∇φ(λ^n)},   stop when ‖λ^{n+1} − λ^n‖∞ ≤ e,
//
// where ∇_i φ(λ) = J_i(u*_λ) − c_i is assembled from the sensitivity
// recursions and exact initial-data moments.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "delay_lqr/evaluate.hpp"
#include "delay_lqr/model.hpp"
#include "delay_lqr/riccati.hpp"
#include "delay_lqr/sensitivity.hpp"

namespace delay_lqr {

/// Tolerances for the inner Riccati and sensitivity solves. Infinite-horizon
/// tolerances are relative to max(1, max |X|).
struct InnerSolveOptions {
  double tol = 1e-12;
  int max_iter = 100000;
  double divergence_cap = 1e12;
  /// Start each infinite-horizon solve from the previous multiplier's fixed point.
  bool warm_start = true;
  /// OpenMP threads used to fan out the per-constraint gradients.
  int threads = 1;
};

struct AscentConfig {
  double alpha = 0.01;
  double tol = 1e-9;
  int max_iter = 5000000;
  std::optional<MultiplierVector> lambda0;
  /// Any λ_i above this with a positive gradient declares infeasibility.
  double divergence_cap = 1e6;
  /// ‖λ‖∞ level at which the first Slater-violation certificate is tried;
  /// each later probe happens at ten times the previous level.
  double infeasibility_probe = 10.0;
  /// Halve α and retry whenever the dual value decreases.
  bool backtrack = false;
  std::size_t trace_cap = 100000;
  InnerSolveOptions inner;
};

enum class DualStatus { Optimal, Infeasible, NotStabilizable, IterationLimit };

const char* to_string(DualStatus status);

struct TraceEntry {
  int iteration = 0;
  VectorXd lambda;
  VectorXd gradient;
  double dual_value = 0.0;
};

struct KktReport {
  /// λ_i (J_i(u*) − c_i).
  VectorXd residuals;
  /// max_i |residual_i| / max(1, |c_i|).
  double max_scaled = 0.0;
};

struct DualResult {
  DualStatus status = DualStatus::IterationLimit;
  MultiplierVector lambda_star;
  int iterations = 0;
  std::vector<TraceEntry> trace;
  std::string message;

  // Filled when the final multiplier could be evaluated.
  std::optional<GainSchedule> gains;
  /// Z_d, X_d (finite) or the steady Z, X (infinite).
  MatrixXd Z;
  MatrixXd X;
  double dual_value = 0.0;
  /// Closed-loop J_0, J_1, ..., J_m at the final multiplier.
  VectorXd costs;
  KktReport kkt;

  // Filled on Infeasible.
  std::optional<VectorXd> infeasibility_direction;
  double certificate_value = 0.0;
};

/// φ(λ) and ∇φ(λ) for one problem; caches λ-independent moments and the
/// previous infinite-horizon solutions for warm starts. Not thread-safe.
class DualFunction {
 public:
  DualFunction(const ConstrainedProblem& problem, InnerSolveOptions options = {});

  struct Point {
    double value = 0.0;
    VectorXd gradient;
  };

  Point evaluate(const MultiplierVector& lambda);
  double value(const MultiplierVector& lambda);

 private:
  Point evaluate_finite(const MultiplierVector& lambda, bool with_gradient);
  Point evaluate_infinite(const MultiplierVector& lambda, bool with_gradient);

  const ConstrainedProblem& problem_;
  InnerSolveOptions options_;
  InitialMoments moments_;
  VectorXd bounds_;
  std::optional<SteadySolution> last_solution_;
  VectorXd last_lambda_;
  std::vector<std::optional<SteadyGradient>> last_gradients_;
};

/// ∇φ(λ) for a finite horizon:
///   g_i = Σ_{k<d} E[x_kᵀQ_i x_k] + E[x_dᵀ∂X_d x_d] − Σ_{j<d} E[x̂_{d|j}ᵀ(Aᵀ)ʲ∂L_{d+j}Aʲx̂_{d|j}] − c_i
VectorXd dual_gradient_finite(const ConstrainedProblem& problem, const MultiplierVector& lambda,
                              const InnerSolveOptions& options = {});

/// ∇φ(λ) for an infinite horizon:
///   g_i = x_0ᵀ∂Z x_0 + Σ_{k<d}[2u_{k-d}ᵀ∂M x̂ + x̂ᵀ∂L x̂ + u_{k-d}ᵀ(∂Υ − R_i)u_{k-d}] − c_i
/// Throws NotStabilizable.
VectorXd dual_gradient_infinite(const ConstrainedProblem& problem, const MultiplierVector& lambda,
                                const InnerSolveOptions& options = {});

/// φ(λ) = min_u J(λ, u), either horizon.
double dual_value(const ConstrainedProblem& problem, const MultiplierVector& lambda,
                  const InnerSolveOptions& options = {});

/// Projected gradient ascent. Never throws for numerical outcomes; they are
/// reported through DualResult::status.
DualResult ascend(const ConstrainedProblem& problem, const AscentConfig& config);

/// Complementary-slackness residuals λ_i (J_i(u) − c_i) under `gains`.
KktReport kkt_check(const ConstrainedProblem& problem, const MultiplierVector& lambda_star,
                    const GainSchedule& gains);

/// min_u Σ_i w_i (J_i(u) − c_i) over constraints only. A positive value for
/// some w ≥ 0, w ≠ 0 proves that no control meets every constraint.
/// Returns +inf if the weighted problem is not stabilizable.
double slater_certificate(const ConstrainedProblem& problem, const VectorXd& direction,
                          const InnerSolveOptions& options = {});

/// min_u J_i(u): the unconstrained problem with only constraint i's weights
/// (i ≥ 1), or the objective's (i = 0).
double term_minimum(const ConstrainedProblem& problem, Index i, const InnerSolveOptions& options = {});

/// Optimal gains and closed-loop costs J_0..J_m at a fixed multiplier.
struct FixedMultiplierSolution {
  GainSchedule gains;
  MatrixXd Z;
  MatrixXd X;
  double dual_value = 0.0;
  VectorXd costs;
};
FixedMultiplierSolution solve_at(const ConstrainedProblem& problem, const MultiplierVector& lambda,
                                 const InnerSolveOptions& options = {});

}  // namespace delay_lqr
