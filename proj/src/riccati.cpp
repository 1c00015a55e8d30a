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

#include "delay_lqr/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

#include "delay_lqr/errors.hpp"

namespace delay_lqr {

WeightedCosts weighted_costs(const ConstrainedProblem& problem, const MultiplierVector& lambda) {
  if (lambda.size() != problem.num_constraints()) {
    throw InvalidInput("multiplier length does not match the number of constraints");
  }
  std::vector<CostTerm> terms;
  terms.reserve(problem.constraints.size() + 1);
  terms.push_back(problem.objective);
  terms.insert(terms.end(), problem.constraints.begin(), problem.constraints.end());
  VectorXd weights(lambda.size() + 1);
  weights << 1.0, lambda.values();
  return combine_terms(terms, weights);
}

WeightedCosts combine_terms(std::span<const CostTerm> terms, const VectorXd& weights) {
  if (terms.empty() || static_cast<Index>(terms.size()) != weights.size()) {
    throw InvalidInput("combine_terms: need one weight per term");
  }
  WeightedCosts w;
  w.Q = MatrixXd::Zero(terms[0].Q.rows(), terms[0].Q.cols());
  w.R = MatrixXd::Zero(terms[0].R.rows(), terms[0].R.cols());
  const bool with_F = std::all_of(terms.begin(), terms.end(), [](const CostTerm& t) { return t.F.has_value(); });
  if (with_F) w.F = MatrixXd::Zero(terms[0].F->rows(), terms[0].F->cols());
  for (std::size_t j = 0; j < terms.size(); ++j) {
    const double a = weights[static_cast<Index>(j)];
    w.Q += a * terms[j].Q;
    w.R += a * terms[j].R;
    if (with_F) *w.F += a * *terms[j].F;
  }
  return w;
}

MatrixXd delay_window_sum(const MatrixXd& A, std::span<const MatrixXd* const> window) {
  MatrixXd acc = MatrixXd::Zero(A.rows(), A.cols());
  for (auto it = window.rbegin(); it != window.rend(); ++it) {
    acc = A.transpose() * acc * A + **it;
  }
  return symmetric_part(acc);
}

namespace {

RiccatiStage make_stage(const SystemModel& sys, const MatrixXd& R, const MatrixXd& Z_next,
                        const MatrixXd& X_next) {
  RiccatiStage s;
  s.Upsilon = symmetric_part(sys.B.transpose() * Z_next * sys.B +
                             sys.sigma2 * sys.B_bar.transpose() * X_next * sys.B_bar + R);
  s.M = sys.B.transpose() * Z_next * sys.A + sys.sigma2 * sys.B_bar.transpose() * X_next * sys.A_bar;
  s.Upsilon_llt.compute(s.Upsilon);
  if (s.Upsilon_llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("Upsilon is not positive definite");
  }
  s.gain = s.Upsilon_llt.solve(s.M);
  s.L = symmetric_part(s.M.transpose() * s.gain);
  return s;
}

MatrixXd next_Z(const SystemModel& sys, const MatrixXd& Q, const MatrixXd& Z_next,
                const MatrixXd& X_next, const MatrixXd& L) {
  return symmetric_part(sys.A.transpose() * Z_next * sys.A +
                        sys.sigma2 * sys.A_bar.transpose() * X_next * sys.A_bar + Q - L);
}

}  // namespace

RiccatiTrajectory solve_finite(const SystemModel& model, const WeightedCosts& w, int N) {
  const int d = model.delay;
  if (N < d) throw InvalidInput("solve_finite requires N >= d");
  if (!w.F) throw InvalidInput("solve_finite requires a terminal weight F");

  const Index n = model.state_dim();
  const auto count = static_cast<std::size_t>(N - d + 1);
  RiccatiTrajectory traj(d, N);
  traj.zero_ = MatrixXd::Zero(n, n);
  traj.Z_.resize(count + 1);
  traj.X_.resize(count + 1);
  traj.stages_.resize(count);
  traj.Z_[count] = symmetric_part(*w.F);
  traj.X_[count] = traj.Z_[count];

  std::vector<const MatrixXd*> window(static_cast<std::size_t>(d));
  for (int k = N; k >= d; --k) {
    const auto idx = static_cast<std::size_t>(k - d);
    traj.stages_[idx] = make_stage(model, w.R, traj.Z_[idx + 1], traj.X_[idx + 1]);
    traj.Z_[idx] = next_Z(model, w.Q, traj.Z_[idx + 1], traj.X_[idx + 1], traj.stages_[idx].L);
    for (int i = 0; i < d; ++i) window[static_cast<std::size_t>(i)] = &traj.L(k + i);
    traj.X_[idx] = symmetric_part(traj.Z_[idx] + delay_window_sum(model.A, window));
  }
  return traj;
}

SteadySolution solve_infinite(const SystemModel& model, const WeightedCosts& w, double tol,
                              int max_iter) {
  InfiniteOptions options;
  options.tol = tol;
  options.max_iter = max_iter;
  return solve_infinite(model, w, options);
}

SteadySolution solve_infinite(const SystemModel& model, const WeightedCosts& w,
                              const InfiniteOptions& options) {
  if (!(options.tol > 0.0)) throw InvalidInput("solve_infinite requires tol > 0");
  const int d = model.delay;
  const Index n = model.state_dim();

  MatrixXd Z = symmetric_part(w.Q);
  MatrixXd X = Z;
  // Most recent first: history[0] = L_{k+1}, ..., history[d-2] = L_{k+d-1}.
  std::deque<MatrixXd> history(static_cast<std::size_t>(d - 1), MatrixXd::Zero(n, n));
  if (options.warm_start) {
    Z = options.warm_start->Z;
    X = options.warm_start->X;
    std::fill(history.begin(), history.end(), options.warm_start->L);
  }

  std::vector<const MatrixXd*> window(static_cast<std::size_t>(d));
  int iter = 0;
  bool converged = false;
  while (iter < options.max_iter) {
    ++iter;
    const RiccatiStage stage = make_stage(model, w.R, Z, X);
    MatrixXd Z_new = next_Z(model, w.Q, Z, X, stage.L);
    window[0] = &stage.L;
    for (int i = 1; i < d; ++i) window[static_cast<std::size_t>(i)] = &history[static_cast<std::size_t>(i - 1)];
    MatrixXd X_new = symmetric_part(Z_new + delay_window_sum(model.A, window));

    if (!Z_new.allFinite() || !X_new.allFinite() ||
        std::max(Z_new.cwiseAbs().maxCoeff(), X_new.cwiseAbs().maxCoeff()) > options.divergence_cap) {
      throw NotStabilizable("Riccati-ZXL iteration diverged after " + std::to_string(iter) +
                            " iterations");
    }
    const double change =
        std::max((Z_new - Z).cwiseAbs().maxCoeff(), (X_new - X).cwiseAbs().maxCoeff());
    if (d > 1) {
      history.push_front(stage.L);
      history.pop_back();
    }
    const double scale = std::max(1.0, X_new.cwiseAbs().maxCoeff());
    Z = std::move(Z_new);
    X = std::move(X_new);
    if (change < options.tol * scale) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw NotStabilizable("Riccati-ZXL iteration did not converge in " +
                          std::to_string(options.max_iter) + " iterations");
  }
  if (!is_positive_definite(Z)) {
    throw NotStabilizable("Riccati-ZXL fixed point has Z not positive definite");
  }

  SteadySolution sol;
  RiccatiStage stage = make_stage(model, w.R, Z, X);
  sol.Z = std::move(Z);
  sol.X = std::move(X);
  sol.Upsilon = std::move(stage.Upsilon);
  sol.M = std::move(stage.M);
  sol.L = std::move(stage.L);
  sol.gain = std::move(stage.gain);
  sol.Upsilon_llt = std::move(stage.Upsilon_llt);
  sol.iterations = iter;
  sol.residual = steady_residual(model, w, sol);
  return sol;
}

double steady_residual(const SystemModel& model, const WeightedCosts& w, const SteadySolution& sol) {
  const RiccatiStage stage = make_stage(model, w.R, sol.Z, sol.X);
  std::vector<const MatrixXd*> window(static_cast<std::size_t>(model.delay), &stage.L);
  const MatrixXd rZ = sol.Z - next_Z(model, w.Q, sol.Z, sol.X, stage.L);
  const MatrixXd rX = sol.X - sol.Z - delay_window_sum(model.A, window);
  double r = std::max(rZ.cwiseAbs().maxCoeff(), rX.cwiseAbs().maxCoeff());
  r = std::max(r, (sol.L - stage.L).cwiseAbs().maxCoeff());
  r = std::max(r, (sol.Upsilon - stage.Upsilon).cwiseAbs().maxCoeff());
  r = std::max(r, (sol.M - stage.M).cwiseAbs().maxCoeff());
  return r;
}

}  // namespace delay_lqr
