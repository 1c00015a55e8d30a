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

#include "delay_lqr/cli/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "delay_lqr/cli/config.hpp"

namespace delay_lqr::cli {

using nlohmann::json;

namespace {

std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_value(std::string& out, const json& v, int indent, int depth) {
  const auto newline = [&](int level) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * level), ' ');
  };
  switch (v.type()) {
    case json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (const auto& item : v.items()) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        out += json(item.key()).dump();
        out += indent < 0 ? ":" : ": ";
        write_value(out, item.value(), indent, depth + 1);
      }
      newline(depth);
      out += '}';
      return;
    }
    case json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      // Numeric rows stay on one line.
      const bool flat = std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_primitive(); });
      out += '[';
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) out += flat && indent >= 0 ? ", " : ",";
        if (!flat) newline(depth + 1);
        write_value(out, v[i], indent, depth + 1);
      }
      if (!flat) newline(depth);
      out += ']';
      return;
    }
    case json::value_t::number_float:
      out += format_double(v.get<double>());
      return;
    default:
      out += v.dump();
      return;
  }
}

}  // namespace

std::string dump_report(const json& report, int indent) {
  std::string out;
  write_value(out, report, indent, 0);
  out += '\n';
  return out;
}

json gains_json(const GainSchedule& gains) {
  json list = json::array();
  for (const auto& K : gains.gains()) list.push_back(to_json(K));
  return {{"constant", gains.is_constant()}, {"K", std::move(list)}};
}

json trace_summary_json(const std::vector<TraceEntry>& trace) {
  json s = {{"entries", trace.size()}};
  const auto entry = [](const TraceEntry& e) {
    return json{{"n", e.iteration},
                {"lambda", to_json(e.lambda)},
                {"gradient", to_json(e.gradient)},
                {"dual_value", e.dual_value}};
  };
  if (!trace.empty()) {
    s["first"] = entry(trace.front());
    s["last"] = entry(trace.back());
  }
  return s;
}

json estimate_json(const CostEstimate& e) {
  json j = {{"trials", e.trials}, {"mean", to_json(e.mean)}, {"std_error", to_json(e.std_error)}};
  if (e.tail_bound) j["tail_bound"] = to_json(*e.tail_bound);
  return j;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceEntry>& trace) {
  const Index m = trace.empty() ? 0 : trace.front().lambda.size();
  out << "n";
  for (Index i = 1; i <= m; ++i) out << ",lambda_" << i;
  for (Index i = 1; i <= m; ++i) out << ",gradient_" << i;
  out << ",dual_value\n";
  for (const auto& e : trace) {
    out << e.iteration;
    for (Index i = 0; i < m; ++i) out << ',' << format_double(e.lambda[i]);
    for (Index i = 0; i < m; ++i) out << ',' << format_double(e.gradient[i]);
    out << ',' << format_double(e.dual_value) << '\n';
  }
}

void write_plot_data(std::ostream& out, const std::vector<double>& exact,
                     const std::vector<double>* empirical) {
  out << "k,exact_mean_square" << (empirical ? ",empirical_mean_square" : "") << '\n';
  for (std::size_t k = 0; k < exact.size(); ++k) {
    out << k << ',' << format_double(exact[k]);
    if (empirical) out << ',' << (k < empirical->size() ? format_double((*empirical)[k]) : "");
    out << '\n';
  }
}

}  // namespace delay_lqr::cli
