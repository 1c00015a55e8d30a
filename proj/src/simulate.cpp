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

#include "delay_lqr/simulate.hpp"

#include <omp.h>

#include <cmath>
#include <random>

#include "delay_lqr/errors.hpp"

namespace delay_lqr {

namespace {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

TrialRng::TrialRng(std::uint64_t seed, std::uint64_t trial)
    : key_(mix64(mix64(seed + kGamma) ^ (trial * 0xd1b54a32d192ed03ULL + kGamma))) {}

TrialRng::result_type TrialRng::operator()() { return mix64(key_ + (++counter_) * kGamma); }

namespace {

// Allocation-free sample path of the closed loop. Buffers are owned by the
// instance, so use one per thread.
class PathKernel {
 public:
  PathKernel(const ConstrainedProblem& problem, const GainSchedule& gains, int stages)
      : problem_(problem), model_(problem.model), gains_(gains), stages_(stages) {
    const Index n = model_.state_dim();
    const Index m = model_.input_dim();
    const int d = model_.delay;
    terms_.push_back(&problem.objective);
    for (const auto& c : problem.constraints) terms_.push_back(&c);
    x_.resize(n);
    x_next_.resize(n);
    x_hat_.resize(n);
    tmp_n_.resize(n);
    tmp_m_.resize(m);
    history_.assign(static_cast<std::size_t>(d), VectorXd(m));
    u_.resize(m);
    stage_.resize(static_cast<Index>(terms_.size()));
    sigma_ = std::sqrt(model_.sigma2);
  }

  Index num_terms() const { return static_cast<Index>(terms_.size()); }
  int stages() const { return stages_; }

  // on_stage(k, x_k, ω_k, stage costs) for k < T; on_control(k, u_k) for each
  // applied control; returns the terminal cost vector (zero for infinite
  // horizons) with x_T left in state().
  template <typename OnStage, typename OnControl>
  const VectorXd& run(TrialRng& rng, NoiseKind noise, OnStage&& on_stage, OnControl&& on_control) {
    const int d = model_.delay;
    const int T = stages_;
    x_ = model_.x0;
    // history_[j] = u_{k-1-j}
    for (int j = 1; j <= d; ++j) history_[static_cast<std::size_t>(j - 1)] = model_.past_control(j);
    std::normal_distribution<double> gauss(0.0, sigma_);
    std::bernoulli_distribution coin(0.5);

    for (int k = 0; k < T; ++k) {
      const VectorXd& u_delayed = history_[static_cast<std::size_t>(d - 1)];  // u_{k-d}
      for (Index j = 0; j < num_terms(); ++j) {
        const CostTerm& t = *terms_[static_cast<std::size_t>(j)];
        tmp_n_.noalias() = t.Q * x_;
        double c = x_.dot(tmp_n_);
        if (k >= d) {
          tmp_m_.noalias() = t.R * u_delayed;
          c += u_delayed.dot(tmp_m_);
        }
        stage_[j] = c;
      }
      const double omega =
          sigma_ == 0.0 ? 0.0 : (noise == NoiseKind::Gaussian ? gauss(rng) : (coin(rng) ? sigma_ : -sigma_));
      on_stage(k, x_, omega, stage_);

      // u_k = −K_k x̂_{k+d|k}, only needed if it reaches the plant before T.
      const MatrixXd* K = k + d < T ? gains_.at(k) : nullptr;
      if (K != nullptr) {
        x_hat_ = x_;
        for (int i = d; i >= 1; --i) {
          tmp_n_.noalias() = model_.A * x_hat_;
          tmp_n_.noalias() += model_.B * history_[static_cast<std::size_t>(i - 1)];
          x_hat_.swap(tmp_n_);
        }
        u_.noalias() = -(*K) * x_hat_;
      } else {
        u_.setZero();
      }
      if (k + d < T) on_control(k, u_);

      x_next_.noalias() = model_.A * x_;
      x_next_.noalias() += model_.B * u_delayed;
      if (omega != 0.0) {
        x_next_.noalias() += omega * (model_.A_bar * x_);
        x_next_.noalias() += omega * (model_.B_bar * u_delayed);
      }
      x_.swap(x_next_);
      // Shift: the oldest slot becomes u_k.
      for (int j = d - 1; j > 0; --j) {
        history_[static_cast<std::size_t>(j)].swap(history_[static_cast<std::size_t>(j - 1)]);
      }
      history_[0] = u_;
    }

    stage_.setZero();
    if (problem_.is_finite()) {
      for (Index j = 0; j < num_terms(); ++j) {
        const CostTerm& t = *terms_[static_cast<std::size_t>(j)];
        if (!t.F) throw InvalidInput("finite-horizon simulation needs terminal weights");
        tmp_n_.noalias() = (*t.F) * x_;
        stage_[j] = x_.dot(tmp_n_);
      }
    }
    return stage_;
  }

  const VectorXd& state() const { return x_; }

 private:
  const ConstrainedProblem& problem_;
  const SystemModel& model_;
  const GainSchedule& gains_;
  int stages_;
  std::vector<const CostTerm*> terms_;
  VectorXd x_, x_next_, x_hat_, tmp_n_, tmp_m_, u_, stage_;
  std::vector<VectorXd> history_;
  double sigma_ = 0.0;
};

int stage_count(const ConstrainedProblem& problem, int steps) {
  if (problem.is_finite()) return problem.horizon_length() + 1;
  if (steps < problem.model.delay) throw InvalidInput("simulation needs steps >= d");
  return steps;
}

// Running statistics of one block of trials, summed in trial order.
struct BlockStats {
  int count = 0;
  VectorXd mean;              // per term
  VectorXd m2;                // per term, Σ (J − mean)²
  std::vector<double> state_sq;  // Σ x_kᵀx_k per step
  MatrixXd stage_sum;         // steps × terms, Σ stage cost

  void init(Index terms, int stages) {
    mean = VectorXd::Zero(terms);
    m2 = VectorXd::Zero(terms);
    state_sq.assign(static_cast<std::size_t>(stages + 1), 0.0);
    stage_sum = MatrixXd::Zero(stages, terms);
  }

  void add(const VectorXd& J) {
    ++count;
    const VectorXd delta = J - mean;
    mean += delta / count;
    m2 += delta.cwiseProduct(J - mean);
  }

  // Chan et al. pairwise merge.
  void merge(const BlockStats& other) {
    if (other.count == 0) return;
    if (count == 0) {
      *this = other;
      return;
    }
    const double na = count;
    const double nb = other.count;
    const VectorXd delta = other.mean - mean;
    mean += delta * (nb / (na + nb));
    m2 += other.m2 + delta.cwiseProduct(delta) * (na * nb / (na + nb));
    for (std::size_t k = 0; k < state_sq.size(); ++k) state_sq[k] += other.state_sq[k];
    stage_sum += other.stage_sum;
    count += other.count;
  }
};

constexpr int kBlockTrials = 512;

BlockStats run_block(const ConstrainedProblem& problem, const GainSchedule& gains,
                     const SimulationConfig& config, int stages, int first, int last) {
  PathKernel kernel(problem, gains, stages);
  BlockStats stats;
  stats.init(kernel.num_terms(), stages);
  VectorXd total(kernel.num_terms());
  for (int trial = first; trial < last; ++trial) {
    TrialRng rng(config.seed, static_cast<std::uint64_t>(trial));
    total.setZero();
    const VectorXd& terminal = kernel.run(
        rng, config.noise,
        [&](int k, const VectorXd& x, double, const VectorXd& stage) {
          total += stage;
          stats.state_sq[static_cast<std::size_t>(k)] += x.squaredNorm();
          stats.stage_sum.row(k) += stage.transpose();
        },
        [](int, const VectorXd&) {});
    total += terminal;
    stats.state_sq[static_cast<std::size_t>(stages)] += kernel.state().squaredNorm();
    stats.add(total);
  }
  return stats;
}

// c_{T-1} r / (1 − r) with r the per-step geometric ratio over the last decile.
VectorXd tail_bound(const MatrixXd& mean_stage) {
  const Index T = mean_stage.rows();
  const Index w = std::max<Index>(1, T / 10);
  VectorXd out(mean_stage.cols());
  for (Index j = 0; j < mean_stage.cols(); ++j) {
    const double last = mean_stage(T - 1, j);
    const double earlier = mean_stage(T - 1 - w, j);
    if (last == 0.0) {
      out[j] = 0.0;
      continue;
    }
    const double r = earlier > 0.0 ? std::pow(last / earlier, 1.0 / static_cast<double>(w)) : 1.0;
    out[j] = r < 1.0 ? last * r / (1.0 - r) : std::numeric_limits<double>::infinity();
  }
  return out;
}

CostEstimate finish(const ConstrainedProblem& problem, const std::vector<BlockStats>& blocks,
                    int trials, int stages) {
  BlockStats all;
  for (const auto& b : blocks) all.merge(b);
  CostEstimate est;
  est.trials = trials;
  est.mean = all.mean;
  est.std_error = (all.m2 / static_cast<double>(trials - 1)).cwiseSqrt() / std::sqrt(static_cast<double>(trials));
  est.mean_square_state.resize(all.state_sq.size());
  for (std::size_t k = 0; k < all.state_sq.size(); ++k) est.mean_square_state[k] = all.state_sq[k] / trials;
  if (!problem.is_finite() && stages >= 2) est.tail_bound = tail_bound(all.stage_sum / trials);
  return est;
}

void check_config(const ConstrainedProblem& problem, const SimulationConfig& config) {
  require_valid(problem);
  if (config.trials < 2) throw InvalidInput("estimate_costs needs at least 2 trials");
}

}  // namespace

RolloutRecord rollout(const ConstrainedProblem& problem, const GainSchedule& gains, int steps,
                      std::uint64_t seed, std::uint64_t trial, NoiseKind noise) {
  require_valid(problem);
  const int T = stage_count(problem, steps);
  PathKernel kernel(problem, gains, T);
  RolloutRecord rec;
  rec.costs = VectorXd::Zero(kernel.num_terms());
  TrialRng rng(seed, trial);
  const VectorXd& terminal = kernel.run(
      rng, noise,
      [&](int, const VectorXd& x, double omega, const VectorXd& stage) {
        rec.states.push_back(x);
        rec.noises.push_back(omega);
        rec.stage_costs.push_back(stage);
        rec.costs += stage;
      },
      [&](int, const VectorXd& u) { rec.controls.push_back(u); });
  rec.costs += terminal;
  rec.states.push_back(kernel.state());
  return rec;
}

CostEstimate estimate_costs(const ConstrainedProblem& problem, const GainSchedule& gains,
                            const SimulationConfig& config) {
  check_config(problem, config);
  const int T = stage_count(problem, config.steps);
  const int nblocks = (config.trials + kBlockTrials - 1) / kBlockTrials;
  std::vector<BlockStats> blocks(static_cast<std::size_t>(nblocks));
  const int threads = config.threads > 0 ? config.threads : omp_get_max_threads();
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (int b = 0; b < nblocks; ++b) {
    try {
      const int first = b * kBlockTrials;
      blocks[static_cast<std::size_t>(b)] =
          run_block(problem, gains, config, T, first, std::min(config.trials, first + kBlockTrials));
    } catch (...) {
#pragma omp critical(delay_lqr_simulate)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return finish(problem, blocks, config.trials, T);
}

CostEstimate estimate_costs_serial(const ConstrainedProblem& problem, const GainSchedule& gains,
                                   const SimulationConfig& config) {
  check_config(problem, config);
  const int T = stage_count(problem, config.steps);
  std::vector<BlockStats> blocks;
  for (int first = 0; first < config.trials; first += kBlockTrials) {
    blocks.push_back(run_block(problem, gains, config, T, first, std::min(config.trials, first + kBlockTrials)));
  }
  return finish(problem, blocks, config.trials, T);
}

StabilityCertificate stability_certificate(const SystemModel& model, const MatrixXd& gain, double tol,
                                           int max_iter) {
  if (gain.rows() != model.input_dim() || gain.cols() != model.state_dim()) {
    throw InvalidInput("stability_certificate: gain must be m x n");
  }
  const AugmentedLoop loop(model);
  const MatrixXd Phi = loop.drift(&gain);

  // The map preserves the PSD cone, so its spectral radius is an eigenvalue
  // with a PSD eigenvector; iterate from the identity and normalize by trace.
  MatrixXd S = MatrixXd::Identity(loop.dim(), loop.dim()) / static_cast<double>(loop.dim());
  StabilityCertificate cert;
  double rho = 0.0;
  bool converged = false;
  for (int it = 1; it <= max_iter; ++it) {
    MatrixXd next = loop.propagate(S, Phi);
    const double tr = next.trace();
    cert.iterations = it;
    if (!(tr > 0.0)) {
      rho = 0.0;
      converged = true;
      break;
    }
    const double change = std::abs(tr - rho);
    rho = tr;
    S = next / tr;
    if (it > 1 && change <= tol * std::max(1.0, rho)) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    // Several eigenvalues share the peripheral modulus; fall back to the
    // dense matrix of the map on vec(S).
    const MatrixXd& Pb = loop.noise();
    const Index q = loop.dim();
    MatrixXd T(q * q, q * q);
    for (Index a = 0; a < q; ++a)
      for (Index b = 0; b < q; ++b) T.block(a * q, b * q, q, q) = Phi(a, b) * Phi + model.sigma2 * Pb(a, b) * Pb;
    rho = T.eigenvalues().cwiseAbs().maxCoeff();
  }
  cert.spectral_radius = rho;
  cert.stable = rho < 1.0;
  return cert;
}

}  // namespace delay_lqr
