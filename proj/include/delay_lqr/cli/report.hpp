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

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "delay_lqr/dual.hpp"
#include "delay_lqr/simulate.hpp"
#include "json.hpp"

namespace delay_lqr::cli {

/// JSON text with every floating-point number printed with 17 significant
/// digits, so parsing the text recovers each double exactly. Non-finite
/// numbers become null.
std::string dump_report(const nlohmann::json& report, int indent = 2);

nlohmann::json gains_json(const GainSchedule& gains);
nlohmann::json trace_summary_json(const std::vector<TraceEntry>& trace);
nlohmann::json estimate_json(const CostEstimate& estimate);

/// n, lambda_1..lambda_m, gradient_1..gradient_m, dual_value
void write_trace_csv(std::ostream& out, const std::vector<TraceEntry>& trace);

/// k, exact E[x_kᵀx_k] and, when given, the ensemble average.
void write_plot_data(std::ostream& out, const std::vector<double>& exact,
                     const std::vector<double>* empirical);

}  // namespace delay_lqr::cli
