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


// Serial reference against the OpenMP kernels. Run with
//   delay_lqr_bench --benchmark_counters_tabular=true
// The thread argument is the OpenMP team size (0 = runtime default).

#include <benchmark/benchmark.h>

#include <string>

#include "delay_lqr/cli/config.hpp"
#include "delay_lqr/dual.hpp"
#include "delay_lqr/simulate.hpp"

namespace {

using namespace delay_lqr;

const cli::RunConfig& fixture(const std::string& name) {
  static const cli::RunConfig a = cli::load_config(std::string(DELAY_LQR_FIXTURE_DIR) + "/ex_b.json");
  static const cli::RunConfig b = cli::load_config(std::string(DELAY_LQR_FIXTURE_DIR) + "/ex_b_two.json");
  return name == "ex_b" ? a : b;
}

const GainSchedule& ex_b_gains() {
  static const GainSchedule K =
      solve_at(fixture("ex_b").problem, MultiplierVector(VectorXd::Constant(1, 0.6058))).gains;
  return K;
}

SimulationConfig sim_config(int threads) {
  SimulationConfig c;
  c.trials = 20000;
  c.steps = 400;
  c.seed = 7;
  c.threads = threads;
  return c;
}

void BM_EstimateSerial(benchmark::State& state) {
  const SimulationConfig c = sim_config(1);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_costs_serial(fixture("ex_b").problem, ex_b_gains(), c));
  state.counters["trials/s"] = benchmark::Counter(c.trials, benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_EstimateSerial)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_EstimateParallel(benchmark::State& state) {
  const SimulationConfig c = sim_config(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(estimate_costs(fixture("ex_b").problem, ex_b_gains(), c));
  state.counters["trials/s"] = benchmark::Counter(c.trials, benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_EstimateParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(0)->Unit(benchmark::kMillisecond)->UseRealTime();

// Per-constraint gradient fan-out on the two-constraint infinite problem.
void BM_DualGradient(benchmark::State& state) {
  InnerSolveOptions o;
  o.threads = static_cast<int>(state.range(0));
  const MultiplierVector lam(VectorXd::Constant(2, 0.3));
  for (auto _ : state) benchmark::DoNotOptimize(dual_gradient_infinite(fixture("ex_b_two").problem, lam, o));
}
BENCHMARK(BM_DualGradient)->Arg(1)->Arg(2)->Unit(benchmark::kMicrosecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
