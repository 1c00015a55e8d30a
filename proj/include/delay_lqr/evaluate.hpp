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

// Controller gains, conditional-expectation predictors and exact expected
// costs. Every expectation is evaluated in closed form from first and second
// moments; nothing here samples noise.
//
// The closed loop is linear in the augmented state
//
//   ξ_k = (x_k, u_{k-1}, ..., u_{k-d})   of dimension n + d·m,
//
// because u_k = −K_k x̂_{k+d|k} and x̂_{k+d|k} = A^d x_k + Σ_{i=1}^d A^{i-1}B u_{k-i}
// are both linear in ξ_k. With ξ_{k+1} = (Φ + ω_k Φ̄) ξ_k, the second moment
// obeys S_{k+1} = Φ S_k Φᵀ + σ² Φ̄ S_k Φ̄ᵀ.

#pragma once

#include <span>
#include <vector>

#include "delay_lqr/model.hpp"
#include "delay_lqr/riccati.hpp"

namespace delay_lqr {

/// Feedback gains for u_k = −K_k x̂_{k+d|k}.
class GainSchedule {
 public:
  /// K_0, ..., K_{N-d}; no control is computed after index N−d.
  static GainSchedule finite(std::vector<MatrixXd> gains);
  /// One K for every k ≥ 0.
  static GainSchedule constant(MatrixXd gain);

  bool is_constant() const { return constant_; }
  /// Gain used at time k, or nullptr when no control is computed at k.
  const MatrixXd* at(int k) const;
  const std::vector<MatrixXd>& gains() const { return gains_; }

 private:
  std::vector<MatrixXd> gains_;
  bool constant_ = false;
};

struct MomentState {
  VectorXd mean;
  MatrixXd second;  // E[x xᵀ]
};

/// x̂_{k+d|k} = A^d x_k + Σ_{i=1}^d A^{i-1}B u_{k-i}; recent_controls[0] = u_{k-1}.
VectorXd predictor(const SystemModel& model, const VectorXd& x_k,
                   std::span<const VectorXd> recent_controls);

/// K_k = Υ_{k+d}⁻¹M_{k+d} for k = 0..N−d.
GainSchedule gains(const RiccatiTrajectory& traj);
/// K = Υ⁻¹M.
GainSchedule gains(const SteadySolution& sol);

/// Moments of x_0..x_horizon driven only by the initial controls (horizon ≤ d).
std::vector<MomentState> open_loop_moments(const SystemModel& model, int horizon);

/// λ-independent moments used by the dual value and its gradient.
struct InitialMoments {
  /// x_0, ..., x_d.
  std::vector<MomentState> open_loop;
  /// E[x̂_{d|i} x̂_{d|i}ᵀ] for i = 0..d−1, x̂_{d|i} = A^{d-i}x_i + Σ_{j=1}^{d-i} A^{j-1}B u_{-j}.
  std::vector<MatrixXd> predictor_second;
};
InitialMoments initial_moments(const SystemModel& model);

/// min_u J(λ, u) for a finite horizon:
///   Σ_{k<d} E[x_kᵀQ(λ)x_k] + E[x_dᵀX_d x_d] − Σ_{i<d} E[x̂_{d|i}ᵀ(Aᵀ)ⁱL_{d+i}Aⁱx̂_{d|i}] − λᵀc
double dual_value_finite(const RiccatiTrajectory& traj, const SystemModel& model,
                         const WeightedCosts& w, const MultiplierVector& lambda, const VectorXd& c);
double dual_value_finite(const RiccatiTrajectory& traj, const SystemModel& model,
                         const WeightedCosts& w, const MultiplierVector& lambda, const VectorXd& c,
                         const InitialMoments& moments);

/// min_u J̄(λ, u) for an infinite horizon:
///   x_0ᵀZx_0 + Σ_{k<d} [−u_{k-d}ᵀR(λ)u_{k-d} + 2u_{k-d}ᵀM x̂_{k|k-d} + x̂ᵀLx̂ + u_{k-d}ᵀΥu_{k-d}] − λᵀc
double dual_value_infinite(const SteadySolution& sol, const SystemModel& model,
                           const WeightedCosts& w, const MultiplierVector& lambda, const VectorXd& c);

/// Exact expected cost of `terms` under the feedback law. Finite horizons sum
/// to N+1 with the terminal weight; infinite horizons accumulate until the
/// per-step cost falls below 1e-12 of the running total. Throws Diverging if
/// the per-step cost is non-decreasing for 100 consecutive steps.
VectorXd closed_loop_costs(const SystemModel& model, const GainSchedule& gains,
                           std::span<const CostTerm> terms, const Horizon& horizon);
double closed_loop_cost(const SystemModel& model, const GainSchedule& gains, const CostTerm& term,
                        const Horizon& horizon);

/// Exact mean and second moment of x_0, ..., x_steps under the feedback law.
std::vector<MomentState> closed_loop_moments(const SystemModel& model, const GainSchedule& gains,
                                             int steps);

/// Building blocks of the augmented-state closed loop.
class AugmentedLoop {
 public:
  explicit AugmentedLoop(const SystemModel& model);

  Index dim() const { return dim_; }
  /// (x_0, u_{-1}, ..., u_{-d}).
  VectorXd initial_state() const;
  /// Row block mapping ξ_k to x̂_{k+d|k}.
  const MatrixXd& predictor_map() const { return predictor_; }
  /// Noise-free transition Φ with u_k = −K ξ-predictor (K may be null: u_k = 0).
  MatrixXd drift(const MatrixXd* gain) const;
  /// Noise-scaled transition Φ̄ (gain independent).
  const MatrixXd& noise() const { return noise_; }
  /// Stage-cost weight on ξ_k: Q on x_k, plus R on u_{k-d} when charge_control.
  MatrixXd stage_weight(const CostTerm& term, bool charge_control) const;
  /// Φ S Φᵀ + σ² Φ̄ S Φ̄ᵀ.
  MatrixXd propagate(const MatrixXd& S, const MatrixXd& drift) const;

 private:
  const SystemModel& model_;
  Index n_;
  Index m_;
  Index dim_;
  MatrixXd predictor_;
  MatrixXd noise_;
};

}  // namespace delay_lqr
