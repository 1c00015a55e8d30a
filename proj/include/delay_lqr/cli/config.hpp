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

// JSON run configuration. Matrices are arrays of row arrays; a bare number
// is accepted for a 1x1 matrix and vectors are flat arrays.
//
//   {
//     "system":      {"A", "A_bar", "B", "B_bar", "sigma2", "d", "x0", "u_init"},
//     "objective":   {"Q", "R", "F"?},
//     "constraints": [{"Q", "R", "F"?, "c"}],
//     "horizon":     {"finite": N} | "infinite",
//     "ascent":      {"alpha", "tol", "max_iter", "lambda0"?, "divergence_cap"?, ...},
//     "lambda":      [...]?,   fixed multiplier for evaluate / simulate / certify
//     "gain":        [[...]]?, gain for certify
//     "simulation":  {"trials", "steps", "seed", "noise": "gaussian" | "rademacher"}?
//   }
//
// u_init lists the controls before time zero oldest first, u_{-d} .. u_{-1}.

#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "delay_lqr/dual.hpp"
#include "delay_lqr/model.hpp"
#include "delay_lqr/simulate.hpp"
#include "json.hpp"

namespace delay_lqr::cli {

struct RunConfig {
  ConstrainedProblem problem;
  AscentConfig ascent;
  std::optional<MultiplierVector> lambda;
  std::optional<MatrixXd> gain;
  SimulationConfig simulation;
};

/// Throws InvalidInput naming the offending key. The problem is validated.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

MatrixXd parse_matrix(const nlohmann::json& value, const std::string& where);
VectorXd parse_vector(const nlohmann::json& value, const std::string& where);

nlohmann::json to_json(const MatrixXd& M);
nlohmann::json to_json(const VectorXd& v);
/// Inverse of parse_config for the problem part.
nlohmann::json problem_to_json(const ConstrainedProblem& problem);

}  // namespace delay_lqr::cli
