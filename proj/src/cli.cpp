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

#include "delay_lqr/cli/cli.hpp"

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <ostream>

#include "CLI11.hpp"
#include "delay_lqr/cli/config.hpp"
#include "delay_lqr/cli/report.hpp"
#include "delay_lqr/errors.hpp"

namespace delay_lqr::cli {

using nlohmann::json;

namespace {

struct Options {
  std::string mode;
  std::string config;
  std::optional<double> alpha;
  std::optional<double> tol;
  std::optional<int> max_iter;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<int> steps;
  int threads = 1;
  std::string csv_trace;
  std::string plot_data;
  bool no_timestamp = false;
};

spdlog::level::level_enum log_level() {
  const char* env = std::getenv("DELAY_LQR_LOG");
  if (env == nullptr) return spdlog::level::warn;
  const std::string v(env);
  if (v == "error") return spdlog::level::err;
  if (v == "warn") return spdlog::level::warn;
  if (v == "info") return spdlog::level::info;
  if (v == "debug") return spdlog::level::debug;
  return spdlog::level::warn;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void apply_overrides(const Options& o, RunConfig& cfg) {
  if (o.alpha) cfg.ascent.alpha = *o.alpha;
  if (o.tol) cfg.ascent.tol = *o.tol;
  if (o.max_iter) cfg.ascent.max_iter = *o.max_iter;
  if (o.seed) cfg.simulation.seed = *o.seed;
  if (o.trials) cfg.simulation.trials = *o.trials;
  if (o.steps) cfg.simulation.steps = *o.steps;
  cfg.simulation.threads = o.threads;
  cfg.ascent.inner.threads = o.threads;
  if (!(cfg.ascent.alpha > 0.0) || !(cfg.ascent.tol > 0.0) || cfg.ascent.max_iter < 1) {
    throw InvalidInput("--alpha and --tol must be > 0 and --max-iter >= 1");
  }
  if (cfg.simulation.trials < 2) throw InvalidInput("--trials must be >= 2");
  if (o.threads < 1) throw InvalidInput("--threads must be >= 1");
}

int exit_code(DualStatus s) {
  switch (s) {
    case DualStatus::Optimal:
      return kExitOptimal;
    case DualStatus::Infeasible:
      return kExitInfeasible;
    case DualStatus::NotStabilizable:
      return kExitNotStabilizable;
    case DualStatus::IterationLimit:
      return kExitIterationLimit;
  }
  return kExitConfigError;
}

MultiplierVector fixed_lambda(const RunConfig& cfg) {
  if (cfg.lambda) return *cfg.lambda;
  if (cfg.ascent.lambda0) return *cfg.ascent.lambda0;
  return MultiplierVector::zeros(cfg.problem.num_constraints());
}

int simulated_stages(const RunConfig& cfg) {
  return cfg.problem.is_finite() ? cfg.problem.horizon_length() + 1 : cfg.simulation.steps;
}

std::vector<double> exact_mean_square(const RunConfig& cfg, const GainSchedule& gains) {
  std::vector<double> out;
  for (const auto& m : closed_loop_moments(cfg.problem.model, gains, simulated_stages(cfg))) {
    out.push_back(m.second.trace());
  }
  return out;
}

json costs_json(const RunConfig& cfg, const VectorXd& costs) {
  return {{"objective", costs[0]},
          {"constraints", to_json(VectorXd(costs.tail(costs.size() - 1)))},
          {"bounds", to_json(cfg.problem.bounds())}};
}

json fixed_solution_json(const RunConfig& cfg, const FixedMultiplierSolution& s) {
  return {{"gains", gains_json(s.gains)},
          {"riccati",
           {{"at", cfg.problem.is_finite() ? "k=d" : "steady"}, {"Z", to_json(s.Z)}, {"X", to_json(s.X)}}},
          {"dual_value", s.dual_value},
          {"costs", costs_json(cfg, s.costs)}};
}

json dual_result_json(const RunConfig& cfg, const DualResult& r) {
  json j = {{"status", to_string(r.status)},
            {"message", r.message},
            {"lambda_star", to_json(r.lambda_star.values())},
            {"iterations", r.iterations},
            {"trace_summary", trace_summary_json(r.trace)}};
  if (r.gains) {
    j["gains"] = gains_json(*r.gains);
    j["riccati"] = {{"at", cfg.problem.is_finite() ? "k=d" : "steady"}, {"Z", to_json(r.Z)}, {"X", to_json(r.X)}};
    j["dual_value"] = r.dual_value;
    j["costs"] = costs_json(cfg, r.costs);
    j["kkt"] = {{"residuals", to_json(r.kkt.residuals)}, {"max_scaled", r.kkt.max_scaled}};
  }
  if (r.infeasibility_direction) {
    j["infeasibility"] = {{"direction", to_json(*r.infeasibility_direction)},
                          {"certificate_value", r.certificate_value}};
  }
  return j;
}

// Monte Carlo section; `analytic` holds the exact J_0..J_m under the same gains.
json monte_carlo_json(const CostEstimate& est, const VectorXd& analytic, const SimulationConfig& sim) {
  json j = estimate_json(est);
  j["seed"] = sim.seed;
  j["noise"] = sim.noise == NoiseKind::Gaussian ? "gaussian" : "rademacher";
  j["analytic"] = to_json(analytic);
  json covered = json::array();
  for (Index i = 0; i < analytic.size(); ++i) {
    const double tail = est.tail_bound ? (*est.tail_bound)[i] : 0.0;
    covered.push_back(std::abs(est.mean[i] - analytic[i]) <= 3.0 * est.std_error[i] + tail);
  }
  j["covered_3se"] = std::move(covered);
  return j;
}

void write_file(const std::string& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream f(path);
  if (!f) throw InvalidInput("cannot write " + path);
  body(f);
}

struct ModeOutput {
  json body;
  int code = kExitOptimal;
};

ModeOutput run_solve(const Options& o, const RunConfig& cfg, spdlog::logger& log, bool verify) {
  log.info("ascent: alpha={} tol={} max_iter={}", cfg.ascent.alpha, cfg.ascent.tol, cfg.ascent.max_iter);
  const DualResult r = ascend(cfg.problem, cfg.ascent);
  log.info("ascent finished: {} after {} iterations", to_string(r.status), r.iterations);
  ModeOutput out{dual_result_json(cfg, r), exit_code(r.status)};
  if (!o.csv_trace.empty()) write_file(o.csv_trace, [&](std::ostream& f) { write_trace_csv(f, r.trace); });
  if (!r.gains) return out;

  const std::vector<double> exact = exact_mean_square(cfg, *r.gains);
  std::optional<CostEstimate> est;
  if (verify) {
    log.info("monte carlo: {} trials, seed {}", cfg.simulation.trials, cfg.simulation.seed);
    est = estimate_costs(cfg.problem, *r.gains, cfg.simulation);
    out.body["monte_carlo"] = monte_carlo_json(*est, r.costs, cfg.simulation);
    for (const auto& ok : out.body["monte_carlo"]["covered_3se"]) {
      if (!ok.get<bool>()) log.warn("monte carlo estimate misses the analytic cost by more than 3 standard errors");
    }
  }
  if (!o.plot_data.empty()) {
    write_file(o.plot_data, [&](std::ostream& f) {
      write_plot_data(f, exact, est ? &est->mean_square_state : nullptr);
    });
  }
  return out;
}

ModeOutput run_evaluate(const Options& o, const RunConfig& cfg, bool simulate) {
  const MultiplierVector lambda = fixed_lambda(cfg);
  const FixedMultiplierSolution s = solve_at(cfg.problem, lambda, cfg.ascent.inner);
  ModeOutput out;
  out.body = fixed_solution_json(cfg, s);
  out.body["status"] = "Evaluated";
  out.body["lambda"] = to_json(lambda.values());
  const KktReport kkt = kkt_check(cfg.problem, lambda, s.gains);
  out.body["kkt"] = {{"residuals", to_json(kkt.residuals)}, {"max_scaled", kkt.max_scaled}};

  std::optional<CostEstimate> est;
  if (simulate) {
    est = estimate_costs(cfg.problem, s.gains, cfg.simulation);
    out.body["monte_carlo"] = monte_carlo_json(*est, s.costs, cfg.simulation);
  }
  if (!o.plot_data.empty()) {
    const std::vector<double> exact = exact_mean_square(cfg, s.gains);
    write_file(o.plot_data, [&](std::ostream& f) {
      write_plot_data(f, exact, est ? &est->mean_square_state : nullptr);
    });
  }
  return out;
}

ModeOutput run_certify(const RunConfig& cfg) {
  MatrixXd K;
  if (cfg.gain) {
    K = *cfg.gain;
  } else if (!cfg.problem.is_finite()) {
    K = solve_at(cfg.problem, fixed_lambda(cfg), cfg.ascent.inner).gains.gains().front();
  } else {
    throw InvalidInput("certify needs a constant gain: give \"gain\" or use an infinite horizon");
  }
  const StabilityCertificate c = stability_certificate(cfg.problem.model, K);
  ModeOutput out;
  out.body = {{"status", c.stable ? "Stable" : "NotStable"},
              {"gain", to_json(K)},
              {"spectral_radius", c.spectral_radius},
              {"stable", c.stable},
              {"iterations", c.iterations}};
  out.code = c.stable ? kExitOptimal : kExitNotStabilizable;
  return out;
}

void add_common_options(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "JSON problem file")->required();
  sub->add_option("--alpha", o.alpha, "ascent step size");
  sub->add_option("--tol", o.tol, "stop when the multiplier step is at most this");
  sub->add_option("--max-iter", o.max_iter, "ascent iteration limit");
  sub->add_option("--seed", o.seed, "Monte Carlo seed");
  sub->add_option("--trials", o.trials, "Monte Carlo trials");
  sub->add_option("--steps", o.steps, "stages simulated for an infinite horizon");
  sub->add_option("--threads", o.threads, "OpenMP threads")->capture_default_str();
  sub->add_option("--csv-trace", o.csv_trace, "write the ascent trace as CSV");
  sub->add_option("--plot-data", o.plot_data, "write (k, E[x_k'x_k]) as CSV");
  sub->add_flag("--no-timestamp", o.no_timestamp, "omit wall-clock fields from the report");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  spdlog::logger log("delay_lqr", sink);
  log.set_level(log_level());
  log.set_pattern("[%l] %v");

  Options o;
  CLI::App app{"Constrained stochastic LQR with input delay and multiplicative noise", "delay_lqr"};
  app.require_subcommand(1, 1);
  const std::pair<const char*, const char*> modes[] = {
      {"solve", "projected dual ascent to the optimal multipliers and controller"},
      {"evaluate", "Riccati solution, gains and dual value at a fixed multiplier"},
      {"verify", "solve, then cross-check the costs by Monte Carlo"},
      {"simulate", "Monte Carlo rollouts under the controller at a fixed multiplier"},
      {"certify", "mean-square stability certificate for a constant gain"},
  };
  for (const auto& [name, help] : modes) add_common_options(app.add_subcommand(name, help), o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : kExitConfigError;
  }
  for (const auto* sub : app.get_subcommands()) o.mode = sub->get_name();

  const auto start = std::chrono::steady_clock::now();
  try {
    RunConfig cfg = load_config(o.config);
    apply_overrides(o, cfg);
    log.debug("loaded {} ({} constraints)", o.config, cfg.problem.num_constraints());

    ModeOutput result;
    if (o.mode == "solve" || o.mode == "verify") {
      result = run_solve(o, cfg, log, o.mode == "verify");
    } else if (o.mode == "evaluate" || o.mode == "simulate") {
      result = run_evaluate(o, cfg, o.mode == "simulate");
    } else {
      result = run_certify(cfg);
    }

    json report = std::move(result.body);
    report["mode"] = o.mode;
    report["problem"] = problem_to_json(cfg.problem);
    if (o.mode == "verify" || o.mode == "simulate") {
      report["simulation"] = {{"trials", cfg.simulation.trials},
                              {"steps", simulated_stages(cfg)},
                              {"threads", cfg.simulation.threads}};
    }
    if (!o.no_timestamp) {
      report["generated_at"] = utc_timestamp();
      report["timing"] = {
          {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}};
    }
    out << dump_report(report);
    return result.code;
  } catch (const InvalidInput& e) {
    err << "delay_lqr: error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const SolverError& e) {
    err << "delay_lqr: error: " << e.what() << '\n';
    return kExitNotStabilizable;
  } catch (const std::exception& e) {
    err << "delay_lqr: error: " << e.what() << '\n';
    return kExitConfigError;
  }
}

}  // namespace delay_lqr::cli
