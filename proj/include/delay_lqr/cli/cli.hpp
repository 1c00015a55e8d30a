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

namespace delay_lqr::cli {

enum ExitCode : int {
  kExitOptimal = 0,
  kExitInfeasible = 2,
  kExitNotStabilizable = 3,
  kExitConfigError = 4,
  kExitIterationLimit = 5,
};

/// Parses `argv` (subcommand solve | evaluate | verify | simulate | certify),
/// writes the JSON report to `out` and diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace delay_lqr::cli
