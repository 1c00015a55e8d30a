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


#pragma once

#include <string>

#include "delay_lqr/cli/config.hpp"
#include "test_support.hpp"

namespace delay_lqr::testing {

inline cli::RunConfig load_fixture(const std::string& name) { return cli::load_config(fixture_path(name)); }

inline ConstrainedProblem fixture_problem(const std::string& name) { return load_fixture(name).problem; }

inline MultiplierVector lambda_of(std::initializer_list<double> values) {
  VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return MultiplierVector(v);
}

inline MatrixXd scalar(double v) { return MatrixXd::Constant(1, 1, v); }

}  // namespace delay_lqr::testing
