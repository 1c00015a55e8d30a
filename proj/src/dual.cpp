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

#include "delay_lqr/dual.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "delay_lqr/errors.hpp"

namespace delay_lqr {

const char* to_string(DualStatus status) {
  switch (status) {
    case DualStatus::Optimal:
      return "Optimal";
    case DualStatus::Infeasible:
      return "Infeasible";
    case DualStatus::NotStabilizable:
      return "NotStabilizable";
    case DualStatus::IterationLimit:
      return "IterationLimit";
  }
  return "Unknown";
}

namespace {

// Σ_{k<d} tr(Q S_k) + tr(X_d S_d) − Σ_{j<d} tr((Aᵀ)ʲ L_{d+j} Aʲ Ŝ_j). The dual
// value and each gradient entry share this shape, with (Q, X, L) replaced by
// (Q_i, ∂X, ∂L) for the gradient.
template <typename LAt>
double moment_form(const SystemModel& model, const InitialMoments& moments, const MatrixXd& Q,
                   const MatrixXd& X_d, LAt&& L_at) {
  const int d = model.delay;
  double value = 0.0;
  for (int k = 0; k < d; ++k) {
    value += (Q.cwiseProduct(moments.open_loop[static_cast<std::size_t>(k)].second)).sum();
  }
  value += (X_d.cwiseProduct(moments.open_loop[static_cast<std::size_t>(d)].second)).sum();
  MatrixXd Aj = MatrixXd::Identity(model.state_dim(), model.state_dim());
  for (int j = 0; j < d; ++j) {
    const MatrixXd weight = Aj.transpose() * L_at(d + j) * Aj;
    value -= (weight.cwiseProduct(moments.predictor_second[static_cast<std::size_t>(j)])).sum();
    Aj = model.A * Aj;
  }
  return value;
}

// x_0ᵀZx_0 + Σ_{k<d}[u_{k-d}ᵀ(Υ − R)u_{k-d} + 2u_{k-d}ᵀM x̂ + x̂ᵀLx̂] with the
// deterministic predictors x̂_{k|k-d}.
double steady_form(const SystemModel& model, const MatrixXd& Z, const MatrixXd& R,
                   const MatrixXd& Upsilon, const MatrixXd& M, const MatrixXd& L) {
  double value = model.x0.dot(Z * model.x0);
  VectorXd x_hat = model.x0;
  for (int k = 0; k < model.delay; ++k) {
    const VectorXd& u = model.u_init[static_cast<std::size_t>(k)];
    value += u.dot((Upsilon - R) * u) + 2.0 * u.dot(M * x_hat) + x_hat.dot(L * x_hat);
    x_hat = model.A * x_hat + model.B * u;
  }
  return value;
}

// Runs body(i) for i in [0, count), in parallel when threads > 1. The first
// exception thrown by any iteration is rethrown on the calling thread.
template <typename Body>
void fan_out(Index count, int threads, Body&& body) {
  std::exception_ptr failure;
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1 && count > 1)
  for (Index i = 0; i < count; ++i) {
    try {
      body(i);
    } catch (...) {
#pragma omp critical(delay_lqr_fan_out)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

InfiniteOptions riccati_options(const InnerSolveOptions& o) {
  InfiniteOptions r;
  r.tol = o.tol;
  r.max_iter = o.max_iter;
  r.divergence_cap = o.divergence_cap;
  return r;
}

GradientOptions gradient_options(const InnerSolveOptions& o) {
  GradientOptions g;
  g.tol = o.tol;
  g.max_iter = o.max_iter;
  return g;
}

}  // namespace

DualFunction::DualFunction(const ConstrainedProblem& problem, InnerSolveOptions options)
    : problem_(problem),
      options_(options),
      moments_(initial_moments(problem.model)),
      bounds_(problem.bounds()),
      last_gradients_(static_cast<std::size_t>(problem.num_constraints())) {
  require_valid(problem);
}

DualFunction::Point DualFunction::evaluate(const MultiplierVector& lambda) {
  return problem_.is_finite() ? evaluate_finite(lambda, true) : evaluate_infinite(lambda, true);
}

double DualFunction::value(const MultiplierVector& lambda) {
  return problem_.is_finite() ? evaluate_finite(lambda, false).value
                              : evaluate_infinite(lambda, false).value;
}

DualFunction::Point DualFunction::evaluate_finite(const MultiplierVector& lambda, bool with_gradient) {
  const SystemModel& model = problem_.model;
  const WeightedCosts w = weighted_costs(problem_, lambda);
  const RiccatiTrajectory traj = solve_finite(model, w, problem_.horizon_length());

  Point p;
  p.value = moment_form(model, moments_, w.Q, traj.X(model.delay),
                        [&](int k) -> const MatrixXd& { return traj.L(k); }) -
            lambda.values().dot(bounds_);
  if (!with_gradient) return p;

  const Index m = problem_.num_constraints();
  p.gradient.resize(m);
  fan_out(m, options_.threads, [&](Index i) {
    const CostTerm& term = problem_.constraints[static_cast<std::size_t>(i)];
    const GradientTrajectory grad = gradient_finite(traj, model, term);
    p.gradient[i] = moment_form(model, moments_, term.Q, grad.dX(model.delay),
                                [&](int k) -> const MatrixXd& { return grad.dL(k); }) -
                    bounds_[i];
  });
  return p;
}

DualFunction::Point DualFunction::evaluate_infinite(const MultiplierVector& lambda,
                                                    bool with_gradient) {
  const SystemModel& model = problem_.model;
  const WeightedCosts w = weighted_costs(problem_, lambda);
  InfiniteOptions ro = riccati_options(options_);
  if (options_.warm_start && last_solution_) {
    ro.warm_start = last_solution_;
    // First-order prediction from the stored sensitivities, when all exist.
    const bool have_slopes = std::all_of(last_gradients_.begin(), last_gradients_.end(),
                                         [](const auto& g) { return g.has_value(); });
    if (have_slopes && last_lambda_.size() == lambda.size()) {
      SteadySolution& start = *ro.warm_start;
      for (std::size_t i = 0; i < last_gradients_.size(); ++i) {
        const double step = lambda[static_cast<Index>(i)] - last_lambda_[static_cast<Index>(i)];
        if (step == 0.0) continue;
        start.Z += step * last_gradients_[i]->dZ;
        start.X += step * last_gradients_[i]->dX;
        start.L += step * last_gradients_[i]->dL;
      }
    }
  }
  SteadySolution sol = solve_infinite(model, w, ro);

  Point p;
  p.value = steady_form(model, sol.Z, w.R, sol.Upsilon, sol.M, sol.L) - lambda.values().dot(bounds_);
  if (with_gradient) {
    const Index m = problem_.num_constraints();
    p.gradient.resize(m);
    fan_out(m, options_.threads, [&](Index i) {
      const auto slot = static_cast<std::size_t>(i);
      const CostTerm& term = problem_.constraints[slot];
      GradientOptions go = gradient_options(options_);
      if (options_.warm_start && last_gradients_[slot]) go.warm_start = last_gradients_[slot];
      SteadyGradient g = gradient_infinite(sol, model, term, go);
      p.gradient[i] = steady_form(model, g.dZ, term.R, g.dUpsilon, g.dM, g.dL) - bounds_[i];
      if (options_.warm_start) last_gradients_[slot] = std::move(g);
    });
  }
  if (options_.warm_start) {
    last_solution_ = std::move(sol);
    last_lambda_ = lambda.values();
  }
  return p;
}

VectorXd dual_gradient_finite(const ConstrainedProblem& problem, const MultiplierVector& lambda,
                              const InnerSolveOptions& options) {
  if (!problem.is_finite()) throw InvalidInput("dual_gradient_finite needs a finite horizon");
  return DualFunction(problem, options).evaluate(lambda).gradient;
}

VectorXd dual_gradient_infinite(const ConstrainedProblem& problem, const MultiplierVector& lambda,
                                const InnerSolveOptions& options) {
  if (problem.is_finite()) throw InvalidInput("dual_gradient_infinite needs an infinite horizon");
  InnerSolveOptions cold = options;
  cold.warm_start = false;
  try {
    return DualFunction(problem, cold).evaluate(lambda).gradient;
  } catch (const NoConvergence& e) {
    throw NotStabilizable(e.what());
  }
}

double dual_value(const ConstrainedProblem& problem, const MultiplierVector& lambda,
                  const InnerSolveOptions& options) {
  return DualFunction(problem, options).value(lambda);
}

namespace {

// min_u Σ_j weights_j J_j(u) over an arbitrary set of terms, minus weightsᵀc.
double weighted_minimum(const ConstrainedProblem& problem, std::span<const CostTerm> terms,
                        const VectorXd& weights, const VectorXd& c, const InnerSolveOptions& options) {
  const SystemModel& model = problem.model;
  const WeightedCosts w = combine_terms(terms, weights);
  if (problem.is_finite()) {
    const RiccatiTrajectory traj = solve_finite(model, w, problem.horizon_length());
    const InitialMoments moments = initial_moments(model);
    return moment_form(model, moments, w.Q, traj.X(model.delay),
                       [&](int k) -> const MatrixXd& { return traj.L(k); }) -
           weights.dot(c);
  }
  const SteadySolution sol = solve_infinite(model, w, riccati_options(options));
  return steady_form(model, sol.Z, w.R, sol.Upsilon, sol.M, sol.L) - weights.dot(c);
}

}  // namespace

double slater_certificate(const ConstrainedProblem& problem, const VectorXd& direction,
                          const InnerSolveOptions& options) {
  if (direction.size() != problem.num_constraints()) {
    throw InvalidInput("certificate direction length does not match the number of constraints");
  }
  if ((direction.array() < 0.0).any() || !(direction.array() > 0.0).any()) {
    throw InvalidInput("certificate direction must be nonnegative and nonzero");
  }
  try {
    return weighted_minimum(problem, problem.constraints, direction, problem.bounds(), options);
  } catch (const SolverError&) {
    return -std::numeric_limits<double>::infinity();
  }
}

double term_minimum(const ConstrainedProblem& problem, Index i, const InnerSolveOptions& options) {
  const CostTerm& term = problem.term(i);
  const VectorXd one = VectorXd::Ones(1);
  return weighted_minimum(problem, std::span<const CostTerm>(&term, 1), one, VectorXd::Zero(1),
                          options);
}

FixedMultiplierSolution solve_at(const ConstrainedProblem& problem, const MultiplierVector& lambda,
                                 const InnerSolveOptions& options) {
  const SystemModel& model = problem.model;
  const WeightedCosts w = weighted_costs(problem, lambda);
  const VectorXd c = problem.bounds();
  std::vector<CostTerm> terms;
  terms.push_back(problem.objective);
  terms.insert(terms.end(), problem.constraints.begin(), problem.constraints.end());

  if (problem.is_finite()) {
    const RiccatiTrajectory traj = solve_finite(model, w, problem.horizon_length());
    FixedMultiplierSolution out{gains(traj), traj.Z(model.delay), traj.X(model.delay),
                                dual_value_finite(traj, model, w, lambda, c), {}};
    out.costs = closed_loop_costs(model, out.gains, terms, problem.horizon);
    return out;
  }
  const SteadySolution sol = solve_infinite(model, w, riccati_options(options));
  FixedMultiplierSolution out{gains(sol), sol.Z, sol.X, dual_value_infinite(sol, model, w, lambda, c),
                              {}};
  out.costs = closed_loop_costs(model, out.gains, terms, problem.horizon);
  return out;
}

KktReport kkt_check(const ConstrainedProblem& problem, const MultiplierVector& lambda_star,
                    const GainSchedule& gains) {
  const Index m = problem.num_constraints();
  if (lambda_star.size() != m) throw InvalidInput("multiplier length does not match the constraints");
  const VectorXd c = problem.bounds();
  const VectorXd J = closed_loop_costs(problem.model, gains, problem.constraints, problem.horizon);
  KktReport r;
  r.residuals = lambda_star.values().cwiseProduct(J - c);
  for (Index i = 0; i < m; ++i) {
    r.max_scaled = std::max(r.max_scaled, std::abs(r.residuals[i]) / std::max(1.0, std::abs(c[i])));
  }
  return r;
}

namespace {

// Keeps at most `cap` entries by dropping every other one and doubling the
// recording stride whenever the cap is hit.
class TraceRecorder {
 public:
  explicit TraceRecorder(std::size_t cap) : cap_(std::max<std::size_t>(cap, 2)) {}

  void record(int iteration, const VectorXd& lambda, const DualFunction::Point& p) {
    if (iteration % stride_ != 0) return;
    if (entries_.size() >= cap_) {
      std::size_t kept = 0;
      for (std::size_t j = 0; j < entries_.size(); j += 2) entries_[kept++] = std::move(entries_[j]);
      entries_.resize(kept);
      stride_ *= 2;
      if (iteration % stride_ != 0) return;
    }
    entries_.push_back({iteration, lambda, p.gradient, p.value});
  }

  // The final iterate is always kept.
  void finish(int iteration, const VectorXd& lambda, const DualFunction::Point& p) {
    if (!entries_.empty() && entries_.back().iteration == iteration) return;
    entries_.push_back({iteration, lambda, p.gradient, p.value});
  }

  std::vector<TraceEntry> take() { return std::move(entries_); }

 private:
  std::size_t cap_;
  int stride_ = 1;
  std::vector<TraceEntry> entries_;
};

}  // namespace

DualResult ascend(const ConstrainedProblem& problem, const AscentConfig& config) {
  if (!(config.alpha > 0.0) || !(config.tol > 0.0) || config.max_iter < 1) {
    throw InvalidInput("ascent needs alpha > 0, tol > 0 and max_iter >= 1");
  }
  const Index m = problem.num_constraints();
  DualFunction phi(problem, config.inner);
  VectorXd lambda = config.lambda0 ? config.lambda0->values() : VectorXd::Zero(m);
  if (lambda.size() != m) throw InvalidInput("lambda0 length does not match the number of constraints");

  DualResult result;
  TraceRecorder trace(config.trace_cap);
  double alpha = config.alpha;
  double next_probe = config.infeasibility_probe;
  VectorXd previous_lambda;
  VectorXd previous_gradient;
  double previous_value = -std::numeric_limits<double>::infinity();
  DualFunction::Point point;
  bool done = false;
  int n = 0;

  for (; n < config.max_iter && !done; ++n) {
    try {
      point = phi.evaluate(MultiplierVector(lambda));
    } catch (const SolverError& e) {
      result.status = DualStatus::NotStabilizable;
      result.message = e.what();
      result.lambda_star = MultiplierVector(lambda);
      result.iterations = n;
      result.trace = trace.take();
      return result;
    }
    if (config.backtrack && point.value < previous_value && previous_lambda.size() == m) {
      // Retake the previous step with half the step size.
      alpha *= 0.5;
      lambda = (previous_lambda + alpha * previous_gradient).cwiseMax(0.0);
      continue;
    }
    trace.record(n, lambda, point);

    const VectorXd next = (lambda + alpha * point.gradient).cwiseMax(0.0);
    const double step = m > 0 ? (next - lambda).cwiseAbs().maxCoeff() : 0.0;
    if (step <= config.tol) {
      lambda = next;
      result.status = DualStatus::Optimal;
      done = true;
      break;
    }
    for (Index i = 0; i < m; ++i) {
      if (next[i] > config.divergence_cap && point.gradient[i] > 0.0) {
        result.status = DualStatus::Infeasible;
        result.message = "multiplier " + std::to_string(i + 1) + " exceeded the divergence cap";
        result.infeasibility_direction = next / next.cwiseAbs().maxCoeff();
        result.certificate_value = slater_certificate(problem, *result.infeasibility_direction, config.inner);
        done = true;
        break;
      }
    }
    if (done) {
      lambda = next;
      break;
    }
    const double scale = next.cwiseAbs().maxCoeff();
    if (scale >= next_probe) {
      const VectorXd direction = next / scale;
      const double cert = slater_certificate(problem, direction, config.inner);
      const double margin = 1e-9 * std::max(1.0, direction.dot(problem.bounds().cwiseAbs()));
      if (cert > margin) {
        result.status = DualStatus::Infeasible;
        result.message = "constraints admit no common solution (weighted constraint minimum exceeds "
                         "the weighted bounds)";
        result.infeasibility_direction = direction;
        result.certificate_value = cert;
        lambda = next;
        done = true;
        break;
      }
      while (next_probe <= scale) next_probe *= 10.0;
    }
    previous_lambda = lambda;
    previous_gradient = point.gradient;
    previous_value = point.value;
    lambda = next;
  }

  if (!done) {
    result.status = DualStatus::IterationLimit;
    result.message = "iteration limit reached before the multiplier step fell below tol";
  }
  result.iterations = done ? n + 1 : n;
  trace.finish(n, lambda, point);
  result.trace = trace.take();
  result.lambda_star = MultiplierVector(lambda);
  if (result.status == DualStatus::Infeasible) return result;

  try {
    FixedMultiplierSolution fixed = solve_at(problem, result.lambda_star, config.inner);
    result.kkt = kkt_check(problem, result.lambda_star, fixed.gains);
    result.gains = std::move(fixed.gains);
    result.Z = std::move(fixed.Z);
    result.X = std::move(fixed.X);
    result.dual_value = fixed.dual_value;
    result.costs = std::move(fixed.costs);
  } catch (const SolverError& e) {
    result.status = DualStatus::NotStabilizable;
    result.message = e.what();
  }
  return result;
}

}  // namespace delay_lqr
