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

// Sampled rollouts of the delayed closed loop and Monte Carlo cost estimates.
//
// Each trial draws its noise from its own generator seeded by (seed, trial),
// and trials are reduced in fixed blocks in trial order. The parallel and
// serial estimators therefore return bit-identical results for any thread
// count.

#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "delay_lqr/evaluate.hpp"
#include "delay_lqr/model.hpp"

namespace delay_lqr {

enum class NoiseKind {
  Gaussian,    // ω ~ N(0, σ²)
  Rademacher,  // ω = ±σ with equal probability
};

/// Counter-based generator: draw n of stream (seed, trial) is a SplitMix64
/// hash of n under a key derived from both, so any trial can be replayed
/// without generating the ones before it. Meets UniformRandomBitGenerator.
class TrialRng {
 public:
  using result_type = std::uint64_t;

  TrialRng(std::uint64_t seed, std::uint64_t trial);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

struct RolloutRecord {
  /// x_0, ..., x_T.
  std::vector<VectorXd> states;
  /// u_0, ..., u_{T-1-d}: the controls that reach the plant within the run.
  std::vector<VectorXd> controls;
  /// ω_0, ..., ω_{T-1}.
  std::vector<double> noises;
  /// Realized cost of each term, objective first.
  VectorXd costs;
  /// Realized stage cost of each term at k = 0..T-1 (terminal weight excluded).
  std::vector<VectorXd> stage_costs;
};

/// One sample path over T stages. Finite horizons use T = N + 1 and add the
/// terminal weight; infinite horizons use T = `steps`.
RolloutRecord rollout(const ConstrainedProblem& problem, const GainSchedule& gains, int steps,
                      std::uint64_t seed, std::uint64_t trial = 0,
                      NoiseKind noise = NoiseKind::Gaussian);

struct SimulationConfig {
  int trials = 10000;
  /// Stages simulated for an infinite horizon (finite horizons use N + 1).
  int steps = 400;
  std::uint64_t seed = 0;
  NoiseKind noise = NoiseKind::Gaussian;
  /// 0 uses the OpenMP default.
  int threads = 0;
};

struct CostEstimate {
  /// Sample means of J_0, ..., J_m.
  VectorXd mean;
  VectorXd std_error;
  int trials = 0;
  /// Infinite horizon only: geometric estimate of the cost beyond the
  /// truncation, per term; +inf when the per-step cost is not shrinking.
  std::optional<VectorXd> tail_bound;
  /// Ensemble average of x_kᵀx_k for k = 0..T.
  std::vector<double> mean_square_state;
};

/// OpenMP estimator.
CostEstimate estimate_costs(const ConstrainedProblem& problem, const GainSchedule& gains,
                            const SimulationConfig& config);
/// Single-threaded reference with the same reduction order.
CostEstimate estimate_costs_serial(const ConstrainedProblem& problem, const GainSchedule& gains,
                                   const SimulationConfig& config);

struct StabilityCertificate {
  /// Spectral radius of S ↦ ΦSΦᵀ + σ²Φ̄SΦ̄ᵀ on the augmented state.
  double spectral_radius = 0.0;
  bool stable = false;
  int iterations = 0;
};

/// Power iteration on the second-moment map of the loop closed by the
/// constant gain K (u_k = −K x̂_{k+d|k}). If the iteration has not settled
/// after max_iter steps the radius is taken from the dense (dim²)² matrix.
StabilityCertificate stability_certificate(const SystemModel& model, const MatrixXd& gain,
                                           double tol = 1e-10, int max_iter = 100000);

}  // namespace delay_lqr
