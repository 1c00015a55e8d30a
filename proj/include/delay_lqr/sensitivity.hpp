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

// Partial derivatives of the Riccati-ZXL quantities with respect to one
// multiplier λ_i. The recursion is linear in the perturbation (Q_i, R_i, F_i):
//
//   ∂Υ_k = Bᵀ∂Z_{k+1}B + σ²B̄ᵀ∂X_{k+1}B̄ + R_i
//   ∂M_k = Bᵀ∂Z_{k+1}A + σ²B̄ᵀ∂X_{k+1}Ā
//   ∂L_k = ∂M_kᵀG_k + G_kᵀ∂M_k − G_kᵀ∂Υ_k G_k,    G_k = Υ_k⁻¹M_k
//   ∂Z_k = Aᵀ∂Z_{k+1}A + σ²Āᵀ∂X_{k+1}Ā + Q_i − ∂L_k
//   ∂X_k = ∂Z_k + Σ_{j=0}^{d-1} (Aᵀ)ʲ ∂L_{k+j} Aʲ

#pragma once

#include <optional>
#include <vector>

#include "delay_lqr/model.hpp"
#include "delay_lqr/riccati.hpp"

namespace delay_lqr {

struct SensitivityStage {
  MatrixXd dUpsilon;
  MatrixXd dM;
  MatrixXd dL;
};

class GradientTrajectory {
 public:
  GradientTrajectory(int delay, int N) : delay_(delay), N_(N) {}

  int delay() const { return delay_; }
  int horizon() const { return N_; }

  /// k in [d, N+1].
  const MatrixXd& dZ(int k) const { return dZ_.at(static_cast<std::size_t>(k - delay_)); }
  const MatrixXd& dX(int k) const { return dX_.at(static_cast<std::size_t>(k - delay_)); }
  /// k in [d, N].
  const SensitivityStage& stage(int k) const { return stages_.at(static_cast<std::size_t>(k - delay_)); }
  /// ∂L_k, zero for k > N.
  const MatrixXd& dL(int k) const { return k > N_ ? zero_ : stage(k).dL; }

 private:
  friend GradientTrajectory gradient_finite(const RiccatiTrajectory&, const SystemModel&,
                                            const CostTerm&);
  int delay_;
  int N_;
  std::vector<MatrixXd> dZ_;
  std::vector<MatrixXd> dX_;
  std::vector<SensitivityStage> stages_;
  MatrixXd zero_;
};

/// Backward recursion from ∂Z_{N+1} = ∂X_{N+1} = F_i. `traj` must be the
/// trajectory at the multiplier where the derivative is wanted; its cached
/// Υ_k⁻¹M_k are reused. Throws InvalidInput if the term has no F.
GradientTrajectory gradient_finite(const RiccatiTrajectory& traj, const SystemModel& model,
                                   const CostTerm& term);

struct SteadyGradient {
  MatrixXd dZ;
  MatrixXd dX;
  MatrixXd dL;
  MatrixXd dUpsilon;
  MatrixXd dM;
  int iterations = 0;
  double residual = 0.0;
};

struct GradientOptions {
  double tol = 1e-12;
  int max_iter = 100000;
  std::optional<SteadyGradient> warm_start;
};

/// Solves the linear steady-state sensitivity equations by iteration from
/// ∂Z = ∂X = Q_i. Throws NoConvergence when max_iter is exhausted.
SteadyGradient gradient_infinite(const SteadySolution& sol, const SystemModel& model,
                                 const CostTerm& term, const GradientOptions& options);
SteadyGradient gradient_infinite(const SteadySolution& sol, const SystemModel& model,
                                 const CostTerm& term, double tol, int max_iter);

}  // namespace delay_lqr
