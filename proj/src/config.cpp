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

#include "delay_lqr/cli/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>

#include "delay_lqr/errors.hpp"

namespace delay_lqr::cli {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw InvalidInput("config " + where + ": " + what);
}

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& item : obj.items()) {
    if (!keys.count(item.key())) fail(where, "unknown key \"" + item.key() + "\"");
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) fail(where, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) fail(where, std::string("missing key \"") + key + "\"");
  return *it;
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where, "expected a number");
  return v.get<double>();
}

int integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) fail(where, "expected an integer");
  return v.get<int>();
}

// Near-symmetric weights are symmetrized here; anything further off is left
// for validation to report.
MatrixXd weight(const json& v, const std::string& where) {
  MatrixXd M = parse_matrix(v, where);
  if (auto sym = symmetrized(M)) return *sym;
  return M;
}

CostTerm parse_term(const json& obj, const std::string& where, bool with_bound) {
  if (!obj.is_object()) fail(where, "expected an object");
  if (with_bound) {
    reject_unknown(obj, where, {"Q", "R", "F", "c"});
  } else {
    reject_unknown(obj, where, {"Q", "R", "F"});
  }
  CostTerm t;
  t.Q = weight(require(obj, "Q", where), where + ".Q");
  t.R = weight(require(obj, "R", where), where + ".R");
  if (obj.contains("F")) t.F = weight(obj["F"], where + ".F");
  if (with_bound) t.bound = number(require(obj, "c", where), where + ".c");
  return t;
}

void parse_ascent(const json& obj, AscentConfig& a) {
  const std::string where = "ascent";
  if (!obj.is_object()) fail(where, "expected an object");
  reject_unknown(obj, where,
                 {"alpha", "tol", "max_iter", "lambda0", "divergence_cap", "infeasibility_probe",
                  "backtrack", "trace_cap", "riccati_tol", "riccati_max_iter",
                  "riccati_divergence_cap", "warm_start"});
  if (obj.contains("alpha")) a.alpha = number(obj["alpha"], where + ".alpha");
  if (obj.contains("tol")) a.tol = number(obj["tol"], where + ".tol");
  if (obj.contains("max_iter")) a.max_iter = integer(obj["max_iter"], where + ".max_iter");
  if (obj.contains("lambda0")) {
    try {
      a.lambda0 = MultiplierVector(parse_vector(obj["lambda0"], where + ".lambda0"));
    } catch (const InvalidInput& e) {
      fail(where + ".lambda0", e.what());
    }
  }
  if (obj.contains("divergence_cap")) a.divergence_cap = number(obj["divergence_cap"], where + ".divergence_cap");
  if (obj.contains("infeasibility_probe")) {
    a.infeasibility_probe = number(obj["infeasibility_probe"], where + ".infeasibility_probe");
  }
  if (obj.contains("backtrack")) {
    if (!obj["backtrack"].is_boolean()) fail(where + ".backtrack", "expected true or false");
    a.backtrack = obj["backtrack"].get<bool>();
  }
  if (obj.contains("trace_cap")) a.trace_cap = static_cast<std::size_t>(integer(obj["trace_cap"], where + ".trace_cap"));
  if (obj.contains("riccati_tol")) a.inner.tol = number(obj["riccati_tol"], where + ".riccati_tol");
  if (obj.contains("riccati_max_iter")) a.inner.max_iter = integer(obj["riccati_max_iter"], where + ".riccati_max_iter");
  if (obj.contains("riccati_divergence_cap")) {
    a.inner.divergence_cap = number(obj["riccati_divergence_cap"], where + ".riccati_divergence_cap");
  }
  if (obj.contains("warm_start")) {
    if (!obj["warm_start"].is_boolean()) fail(where + ".warm_start", "expected true or false");
    a.inner.warm_start = obj["warm_start"].get<bool>();
  }
  if (!(a.alpha > 0.0)) fail(where + ".alpha", "must be > 0");
  if (!(a.tol > 0.0)) fail(where + ".tol", "must be > 0");
  if (a.max_iter < 1) fail(where + ".max_iter", "must be >= 1");
}

void parse_simulation(const json& obj, SimulationConfig& s) {
  const std::string where = "simulation";
  if (!obj.is_object()) fail(where, "expected an object");
  reject_unknown(obj, where, {"trials", "steps", "seed", "noise"});
  if (obj.contains("trials")) s.trials = integer(obj["trials"], where + ".trials");
  if (obj.contains("steps")) s.steps = integer(obj["steps"], where + ".steps");
  if (obj.contains("seed")) {
    if (!obj["seed"].is_number_unsigned()) fail(where + ".seed", "expected a nonnegative integer");
    s.seed = obj["seed"].get<std::uint64_t>();
  }
  if (obj.contains("noise")) {
    const json& n = obj["noise"];
    if (n == "gaussian") {
      s.noise = NoiseKind::Gaussian;
    } else if (n == "rademacher") {
      s.noise = NoiseKind::Rademacher;
    } else {
      fail(where + ".noise", "expected \"gaussian\" or \"rademacher\"");
    }
  }
}

}  // namespace

MatrixXd parse_matrix(const json& value, const std::string& where) {
  if (value.is_number()) return MatrixXd::Constant(1, 1, value.get<double>());
  if (!value.is_array() || value.empty()) fail(where, "expected a non-empty array of rows");
  const auto rows = static_cast<Index>(value.size());
  if (!value[0].is_array() || value[0].empty()) fail(where, "expected a non-empty array of rows");
  const auto cols = static_cast<Index>(value[0].size());
  MatrixXd M(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const json& row = value[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      fail(where, "row " + std::to_string(r) + " does not have " + std::to_string(cols) + " entries");
    }
    for (Index c = 0; c < cols; ++c) {
      M(r, c) = number(row[static_cast<std::size_t>(c)], where + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
    }
  }
  if (!M.allFinite()) fail(where, "entries must be finite");
  return M;
}

VectorXd parse_vector(const json& value, const std::string& where) {
  if (value.is_number()) return VectorXd::Constant(1, value.get<double>());
  if (!value.is_array()) fail(where, "expected an array of numbers");
  VectorXd v(static_cast<Index>(value.size()));
  for (std::size_t i = 0; i < value.size(); ++i) {
    v[static_cast<Index>(i)] = number(value[i], where + "[" + std::to_string(i) + "]");
  }
  if (!v.allFinite()) fail(where, "entries must be finite");
  return v;
}

RunConfig parse_config(const json& doc) {
  if (!doc.is_object()) fail("root", "expected an object");
  reject_unknown(doc, "root",
                 {"system", "objective", "constraints", "horizon", "ascent", "lambda", "gain", "simulation"});
  RunConfig cfg;
  ConstrainedProblem& p = cfg.problem;

  const json& sys = require(doc, "system", "root");
  reject_unknown(sys, "system", {"A", "A_bar", "B", "B_bar", "sigma2", "d", "x0", "u_init"});
  p.model.A = parse_matrix(require(sys, "A", "system"), "system.A");
  p.model.A_bar = parse_matrix(require(sys, "A_bar", "system"), "system.A_bar");
  p.model.B = parse_matrix(require(sys, "B", "system"), "system.B");
  p.model.B_bar = parse_matrix(require(sys, "B_bar", "system"), "system.B_bar");
  p.model.sigma2 = number(require(sys, "sigma2", "system"), "system.sigma2");
  p.model.delay = integer(require(sys, "d", "system"), "system.d");
  p.model.x0 = parse_vector(require(sys, "x0", "system"), "system.x0");
  const json& u = require(sys, "u_init", "system");
  if (!u.is_array()) fail("system.u_init", "expected an array of d control vectors");
  for (std::size_t j = 0; j < u.size(); ++j) {
    p.model.u_init.push_back(parse_vector(u[j], "system.u_init[" + std::to_string(j) + "]"));
  }

  p.objective = parse_term(require(doc, "objective", "root"), "objective", false);
  if (doc.contains("constraints")) {
    const json& cs = doc["constraints"];
    if (!cs.is_array()) fail("constraints", "expected an array");
    for (std::size_t i = 0; i < cs.size(); ++i) {
      p.constraints.push_back(parse_term(cs[i], "constraints[" + std::to_string(i) + "]", true));
    }
  }

  const json& h = require(doc, "horizon", "root");
  if (h == "infinite") {
    p.horizon = InfiniteHorizon{};
  } else if (h.is_object() && h.size() == 1 && h.contains("finite")) {
    p.horizon = FiniteHorizon{integer(h["finite"], "horizon.finite")};
  } else {
    fail("horizon", "expected {\"finite\": N} or \"infinite\"");
  }

  if (doc.contains("ascent")) parse_ascent(doc["ascent"], cfg.ascent);
  if (doc.contains("lambda")) {
    try {
      cfg.lambda = MultiplierVector(parse_vector(doc["lambda"], "lambda"));
    } catch (const InvalidInput& e) {
      fail("lambda", e.what());
    }
  }
  if (doc.contains("gain")) cfg.gain = parse_matrix(doc["gain"], "gain");
  if (doc.contains("simulation")) parse_simulation(doc["simulation"], cfg.simulation);

  const ValidationReport report = validate(p);
  if (!report.ok()) throw InvalidInput("config invalid: " + report.summary());
  const Index m = p.num_constraints();
  if (cfg.ascent.lambda0 && cfg.ascent.lambda0->size() != m) fail("ascent.lambda0", "needs one entry per constraint");
  if (cfg.lambda && cfg.lambda->size() != m) fail("lambda", "needs one entry per constraint");
  if (cfg.gain && (cfg.gain->rows() != p.model.input_dim() || cfg.gain->cols() != p.model.state_dim())) {
    fail("gain", "must be m x n");
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidInput("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

json to_json(const MatrixXd& M) {
  json rows = json::array();
  for (Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const VectorXd& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

namespace {

json term_to_json(const CostTerm& t) {
  json j = {{"Q", to_json(t.Q)}, {"R", to_json(t.R)}};
  if (t.F) j["F"] = to_json(*t.F);
  if (t.bound) j["c"] = *t.bound;
  return j;
}

}  // namespace

json problem_to_json(const ConstrainedProblem& p) {
  json u = json::array();
  for (const auto& v : p.model.u_init) u.push_back(to_json(v));
  json sys = {{"A", to_json(p.model.A)},         {"A_bar", to_json(p.model.A_bar)},
              {"B", to_json(p.model.B)},         {"B_bar", to_json(p.model.B_bar)},
              {"sigma2", p.model.sigma2},        {"d", p.model.delay},
              {"x0", to_json(p.model.x0)},       {"u_init", std::move(u)}};
  json cs = json::array();
  for (const auto& c : p.constraints) cs.push_back(term_to_json(c));
  json horizon = p.is_finite() ? json{{"finite", p.horizon_length()}} : json("infinite");
  return {{"system", std::move(sys)},
          {"objective", term_to_json(p.objective)},
          {"constraints", std::move(cs)},
          {"horizon", std::move(horizon)}};
}

}  // namespace delay_lqr::cli
