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

#include "delay_lqr/evaluate.hpp"

#include <cmath>
#include <string>

#include "delay_lqr/errors.hpp"

namespace delay_lqr {

GainSchedule GainSchedule::finite(std::vector<MatrixXd> gains) {
  GainSchedule s;
  s.gains_ = std::move(gains);
  s.constant_ = false;
  return s;
}

GainSchedule GainSchedule::constant(MatrixXd gain) {
  GainSchedule s;
  s.gains_.push_back(std::move(gain));
  s.constant_ = true;
  return s;
}

const MatrixXd* GainSchedule::at(int k) const {
  if (k < 0) return nullptr;
  if (constant_) return &gains_.front();
  if (k >= static_cast<int>(gains_.size())) return nullptr;
  return &gains_[static_cast<std::size_t>(k)];
}

VectorXd predictor(const SystemModel& model, const VectorXd& x_k,
                   std::span<const VectorXd> recent_controls) {
  const int d = model.delay;
  if (static_cast<int>(recent_controls.size()) != d) {
    throw InvalidInput("predictor needs exactly d recent controls");
  }
  // Horner: x̂ = B u_{k-1} + A(B u_{k-2} + A(... + A(B u_{k-d} + A x_k)))
  VectorXd acc = x_k;
  for (int i = d; i >= 1; --i) {
    acc = model.A * acc + model.B * recent_controls[static_cast<std::size_t>(i - 1)];
  }
  return acc;
}

GainSchedule gains(const RiccatiTrajectory& traj) {
  const int d = traj.delay();
  const int N = traj.horizon();
  std::vector<MatrixXd> K;
  K.reserve(static_cast<std::size_t>(N - d + 1));
  for (int k = 0; k <= N - d; ++k) K.push_back(traj.stage(k + d).gain);
  return GainSchedule::finite(std::move(K));
}

GainSchedule gains(const SteadySolution& sol) { return GainSchedule::constant(sol.gain); }

std::vector<MomentState> open_loop_moments(const SystemModel& model, int horizon) {
  if (horizon < 0 || horizon > model.delay) {
    throw InvalidInput("open_loop_moments: horizon must lie in [0, d]");
  }
  const double s2 = model.sigma2;
  std::vector<MomentState> out;
  out.reserve(static_cast<std::size_t>(horizon + 1));
  out.push_back({model.x0, model.x0 * model.x0.transpose()});
  for (int k = 0; k < horizon; ++k) {
    const MomentState& cur = out.back();
    const VectorXd& u = model.u_init[static_cast<std::size_t>(k)];  // u_{k-d}
    const VectorXd Am = model.A * cur.mean;
    const VectorXd Abm = model.A_bar * cur.mean;
    const VectorXd Bu = model.B * u;
    const VectorXd Bbu = model.B_bar * u;
    MatrixXd S = model.A * cur.second * model.A.transpose() +
                 s2 * model.A_bar * cur.second * model.A_bar.transpose() +
                 Am * Bu.transpose() + Bu * Am.transpose() +
                 s2 * (Abm * Bbu.transpose() + Bbu * Abm.transpose()) + Bu * Bu.transpose() +
                 s2 * Bbu * Bbu.transpose();
    out.push_back({Am + Bu, symmetric_part(S)});
  }
  return out;
}

InitialMoments initial_moments(const SystemModel& model) {
  const int d = model.delay;
  InitialMoments im;
  im.open_loop = open_loop_moments(model, d);
  im.predictor_second.reserve(static_cast<std::size_t>(d));
  const Index n = model.state_dim();
  for (int i = 0; i < d; ++i) {
    // x̂_{d|i} = T x_i + c with T = A^{d-i}, c = Σ_{j=1}^{d-i} A^{j-1}B u_{-j}.
    MatrixXd T = MatrixXd::Identity(n, n);
    VectorXd c = VectorXd::Zero(n);
    for (int j = d - i; j >= 1; --j) {
      c = model.A * c + model.B * model.past_control(j);
    }
    for (int p = 0; p < d - i; ++p) T = model.A * T;
    const MomentState& mi = im.open_loop[static_cast<std::size_t>(i)];
    const VectorXd Tm = T * mi.mean;
    MatrixXd S = T * mi.second * T.transpose() + Tm * c.transpose() + c * Tm.transpose() +
                 c * c.transpose();
    im.predictor_second.push_back(symmetric_part(S));
  }
  return im;
}

double dual_value_finite(const RiccatiTrajectory& traj, const SystemModel& model,
                         const WeightedCosts& w, const MultiplierVector& lambda, const VectorXd& c) {
  return dual_value_finite(traj, model, w, lambda, c, initial_moments(model));
}

double dual_value_finite(const RiccatiTrajectory& traj, const SystemModel& model,
                         const WeightedCosts& w, const MultiplierVector& lambda, const VectorXd& c,
                         const InitialMoments& moments) {
  const int d = model.delay;
  double value = 0.0;
  for (int k = 0; k < d; ++k) {
    value += (w.Q * moments.open_loop[static_cast<std::size_t>(k)].second).trace();
  }
  value += (traj.X(d) * moments.open_loop[static_cast<std::size_t>(d)].second).trace();

  // −Σ_i E[x̂_{d|i}ᵀ (Aᵀ)ⁱ L_{d+i} Aⁱ x̂_{d|i}]; L_j = 0 past N.
  MatrixXd weight;
  MatrixXd Ai = MatrixXd::Identity(model.state_dim(), model.state_dim());
  for (int i = 0; i < d; ++i) {
    weight = Ai.transpose() * traj.L(d + i) * Ai;
    value -= (weight * moments.predictor_second[static_cast<std::size_t>(i)]).trace();
    Ai = model.A * Ai;
  }
  return value - lambda.values().dot(c);
}

double dual_value_infinite(const SteadySolution& sol, const SystemModel& model,
                           const WeightedCosts& w, const MultiplierVector& lambda, const VectorXd& c) {
  const int d = model.delay;
  double value = model.x0.dot(sol.Z * model.x0);
  VectorXd x_hat = model.x0;  // x̂_{k|k-d}, deterministic
  for (int k = 0; k < d; ++k) {
    const VectorXd& u = model.u_init[static_cast<std::size_t>(k)];  // u_{k-d}
    value += -u.dot(w.R * u) + 2.0 * u.dot(sol.M * x_hat) + x_hat.dot(sol.L * x_hat) +
             u.dot(sol.Upsilon * u);
    x_hat = model.A * x_hat + model.B * u;
  }
  return value - lambda.values().dot(c);
}

AugmentedLoop::AugmentedLoop(const SystemModel& model)
    : model_(model),
      n_(model.state_dim()),
      m_(model.input_dim()),
      dim_(model.state_dim() + model.delay * model.input_dim()) {
  const int d = model.delay;
  predictor_ = MatrixXd::Zero(n_, dim_);
  MatrixXd Ap = MatrixXd::Identity(n_, n_);
  for (int i = 1; i <= d; ++i) {
    predictor_.block(0, n_ + (i - 1) * m_, n_, m_) = Ap * model.B;
    Ap = model.A * Ap;
  }
  predictor_.leftCols(n_) = Ap;
  noise_ = MatrixXd::Zero(dim_, dim_);
  noise_.topLeftCorner(n_, n_) = model.A_bar;
  noise_.block(0, n_ + (d - 1) * m_, n_, m_) = model.B_bar;
}

VectorXd AugmentedLoop::initial_state() const {
  VectorXd xi(dim_);
  xi.head(n_) = model_.x0;
  for (int j = 1; j <= model_.delay; ++j) {
    xi.segment(n_ + (j - 1) * m_, m_) = model_.past_control(j);
  }
  return xi;
}

MatrixXd AugmentedLoop::drift(const MatrixXd* gain) const {
  const int d = model_.delay;
  MatrixXd Phi = MatrixXd::Zero(dim_, dim_);
  Phi.topLeftCorner(n_, n_) = model_.A;
  Phi.block(0, n_ + (d - 1) * m_, n_, m_) = model_.B;
  if (gain != nullptr) Phi.middleRows(n_, m_) = -(*gain) * predictor_;
  for (int j = 1; j < d; ++j) {
    Phi.block(n_ + j * m_, n_ + (j - 1) * m_, m_, m_).setIdentity();
  }
  return Phi;
}

MatrixXd AugmentedLoop::stage_weight(const CostTerm& term, bool charge_control) const {
  MatrixXd W = MatrixXd::Zero(dim_, dim_);
  W.topLeftCorner(n_, n_) = term.Q;
  if (charge_control) W.bottomRightCorner(m_, m_) = term.R;
  return W;
}

MatrixXd AugmentedLoop::propagate(const MatrixXd& S, const MatrixXd& drift) const {
  MatrixXd next = drift * S * drift.transpose();
  if (model_.sigma2 != 0.0) next += model_.sigma2 * noise_ * S * noise_.transpose();
  return symmetric_part(next);
}

namespace {

constexpr double kAccumulationRelTol = 1e-12;
constexpr int kDivergenceRun = 100;
constexpr int kMaxInfiniteSteps = 1000000;

}  // namespace

VectorXd closed_loop_costs(const SystemModel& model, const GainSchedule& gains,
                           std::span<const CostTerm> terms, const Horizon& horizon) {
  const AugmentedLoop loop(model);
  const int d = model.delay;
  const auto nterms = static_cast<Index>(terms.size());
  const VectorXd xi0 = loop.initial_state();
  MatrixXd S = xi0 * xi0.transpose();
  VectorXd total = VectorXd::Zero(nterms);

  std::vector<MatrixXd> W_early, W_late;
  for (const auto& t : terms) {
    W_early.push_back(loop.stage_weight(t, false));
    W_late.push_back(loop.stage_weight(t, true));
  }
  auto stage_costs = [&](int k) {
    VectorXd c(nterms);
    const auto& W = k >= d ? W_late : W_early;
    for (Index i = 0; i < nterms; ++i) c[i] = (W[static_cast<std::size_t>(i)].cwiseProduct(S)).sum();
    return c;
  };

  if (const auto* finite = std::get_if<FiniteHorizon>(&horizon)) {
    const int N = finite->N;
    for (int k = 0; k <= N; ++k) {
      total += stage_costs(k);
      S = loop.propagate(S, loop.drift(gains.at(k)));
    }
    const Index n = model.state_dim();
    for (Index i = 0; i < nterms; ++i) {
      const auto& F = terms[static_cast<std::size_t>(i)].F;
      if (!F) throw InvalidInput("finite-horizon closed_loop_cost needs a terminal weight");
      total[i] += (F->cwiseProduct(S.topLeftCorner(n, n))).sum();
    }
    return total;
  }

  // Infinite horizon: constant law after the transient; finite schedules run
  // open-loop past their last gain.
  const MatrixXd* K = gains.at(0);
  const MatrixXd Phi_const = loop.drift(K);
  double previous = -1.0;
  int non_decreasing = 0;
  for (int k = 0; k < kMaxInfiniteSteps; ++k) {
    const VectorXd c = stage_costs(k);
    total += c;
    const double step = c.cwiseAbs().sum();
    const double running = total.cwiseAbs().sum();
    if (k > d) {
      if (step == 0.0 || step < kAccumulationRelTol * running) return total;
      non_decreasing = step >= previous ? non_decreasing + 1 : 0;
      if (non_decreasing >= kDivergenceRun) {
        throw Diverging("closed loop is not mean-square stable (per-step cost grew for " +
                        std::to_string(kDivergenceRun) + " steps)");
      }
    }
    previous = step;
    S = loop.propagate(S, gains.is_constant() ? Phi_const : loop.drift(gains.at(k)));
    if (!S.allFinite()) throw Diverging("closed-loop second moment overflowed");
  }
  throw Diverging("closed-loop cost did not settle within the step cap");
}

double closed_loop_cost(const SystemModel& model, const GainSchedule& gains, const CostTerm& term,
                        const Horizon& horizon) {
  return closed_loop_costs(model, gains, std::span<const CostTerm>(&term, 1), horizon)[0];
}

std::vector<MomentState> closed_loop_moments(const SystemModel& model, const GainSchedule& gains,
                                             int steps) {
  const AugmentedLoop loop(model);
  const Index n = model.state_dim();
  VectorXd mean = loop.initial_state();
  MatrixXd S = mean * mean.transpose();
  std::vector<MomentState> out;
  out.reserve(static_cast<std::size_t>(steps + 1));
  for (int k = 0; k <= steps; ++k) {
    out.push_back({mean.head(n), S.topLeftCorner(n, n)});
    const MatrixXd Phi = loop.drift(gains.at(k));
    mean = Phi * mean;
    S = loop.propagate(S, Phi);
  }
  return out;
}

}  // namespace delay_lqr
