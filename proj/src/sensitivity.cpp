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

#include "delay_lqr/sensitivity.hpp"

#include <algorithm>
#include <deque>
#include <string>

#include "delay_lqr/errors.hpp"

namespace delay_lqr {

namespace {

// gain = Υ⁻¹M at the expansion point.
SensitivityStage sensitivity_stage(const SystemModel& sys, const MatrixXd& gain,
                                   const MatrixXd& R_i, const MatrixXd& dZ_next,
                                   const MatrixXd& dX_next) {
  SensitivityStage s;
  s.dUpsilon = symmetric_part(sys.B.transpose() * dZ_next * sys.B +
                              sys.sigma2 * sys.B_bar.transpose() * dX_next * sys.B_bar + R_i);
  s.dM = sys.B.transpose() * dZ_next * sys.A + sys.sigma2 * sys.B_bar.transpose() * dX_next * sys.A_bar;
  const MatrixXd cross = s.dM.transpose() * gain;
  s.dL = symmetric_part(cross + cross.transpose() - gain.transpose() * s.dUpsilon * gain);
  return s;
}

MatrixXd next_dZ(const SystemModel& sys, const MatrixXd& Q_i, const MatrixXd& dZ_next,
                 const MatrixXd& dX_next, const MatrixXd& dL) {
  return symmetric_part(sys.A.transpose() * dZ_next * sys.A +
                        sys.sigma2 * sys.A_bar.transpose() * dX_next * sys.A_bar + Q_i - dL);
}

}  // namespace

GradientTrajectory gradient_finite(const RiccatiTrajectory& traj, const SystemModel& model,
                                   const CostTerm& term) {
  if (!term.F) throw InvalidInput("gradient_finite requires a terminal weight F_i");
  const int d = traj.delay();
  const int N = traj.horizon();
  const auto count = static_cast<std::size_t>(N - d + 1);

  GradientTrajectory grad(d, N);
  grad.zero_ = MatrixXd::Zero(model.state_dim(), model.state_dim());
  grad.dZ_.resize(count + 1);
  grad.dX_.resize(count + 1);
  grad.stages_.resize(count);
  grad.dZ_[count] = symmetric_part(*term.F);
  grad.dX_[count] = grad.dZ_[count];

  std::vector<const MatrixXd*> window(static_cast<std::size_t>(d));
  for (int k = N; k >= d; --k) {
    const auto idx = static_cast<std::size_t>(k - d);
    grad.stages_[idx] =
        sensitivity_stage(model, traj.stage(k).gain, term.R, grad.dZ_[idx + 1], grad.dX_[idx + 1]);
    grad.dZ_[idx] = next_dZ(model, term.Q, grad.dZ_[idx + 1], grad.dX_[idx + 1], grad.stages_[idx].dL);
    for (int j = 0; j < d; ++j) window[static_cast<std::size_t>(j)] = &grad.dL(k + j);
    grad.dX_[idx] = symmetric_part(grad.dZ_[idx] + delay_window_sum(model.A, window));
  }
  return grad;
}

SteadyGradient gradient_infinite(const SteadySolution& sol, const SystemModel& model,
                                 const CostTerm& term, double tol, int max_iter) {
  GradientOptions options;
  options.tol = tol;
  options.max_iter = max_iter;
  return gradient_infinite(sol, model, term, options);
}

SteadyGradient gradient_infinite(const SteadySolution& sol, const SystemModel& model,
                                 const CostTerm& term, const GradientOptions& options) {
  const int d = model.delay;
  const Index n = model.state_dim();

  MatrixXd dZ = symmetric_part(term.Q);
  MatrixXd dX = dZ;
  std::deque<MatrixXd> history(static_cast<std::size_t>(d - 1), MatrixXd::Zero(n, n));
  if (options.warm_start) {
    dZ = options.warm_start->dZ;
    dX = options.warm_start->dX;
    std::fill(history.begin(), history.end(), options.warm_start->dL);
  }

  std::vector<const MatrixXd*> window(static_cast<std::size_t>(d));
  int iter = 0;
  bool converged = false;
  while (iter < options.max_iter) {
    ++iter;
    const SensitivityStage stage = sensitivity_stage(model, sol.gain, term.R, dZ, dX);
    MatrixXd dZ_new = next_dZ(model, term.Q, dZ, dX, stage.dL);
    window[0] = &stage.dL;
    for (int j = 1; j < d; ++j) window[static_cast<std::size_t>(j)] = &history[static_cast<std::size_t>(j - 1)];
    MatrixXd dX_new = symmetric_part(dZ_new + delay_window_sum(model.A, window));
    if (!dZ_new.allFinite() || !dX_new.allFinite()) break;

    const double change =
        std::max((dZ_new - dZ).cwiseAbs().maxCoeff(), (dX_new - dX).cwiseAbs().maxCoeff());
    if (d > 1) {
      history.push_front(stage.dL);
      history.pop_back();
    }
    const double scale = std::max(1.0, dX_new.cwiseAbs().maxCoeff());
    dZ = std::move(dZ_new);
    dX = std::move(dX_new);
    if (change < options.tol * scale) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw NoConvergence("steady-state sensitivity iteration did not converge in " +
                        std::to_string(iter) + " iterations");
  }

  SteadyGradient g;
  SensitivityStage stage = sensitivity_stage(model, sol.gain, term.R, dZ, dX);
  std::vector<const MatrixXd*> steady_window(static_cast<std::size_t>(d), &stage.dL);
  const MatrixXd rZ = dZ - next_dZ(model, term.Q, dZ, dX, stage.dL);
  const MatrixXd rX = dX - dZ - delay_window_sum(model.A, steady_window);
  g.residual = std::max(rZ.cwiseAbs().maxCoeff(), rX.cwiseAbs().maxCoeff());
  g.dZ = std::move(dZ);
  g.dX = std::move(dX);
  g.dL = std::move(stage.dL);
  g.dUpsilon = std::move(stage.dUpsilon);
  g.dM = std::move(stage.dM);
  g.iterations = iter;
  return g;
}

}  // namespace delay_lqr
