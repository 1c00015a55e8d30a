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

#include "delay_lqr/model.hpp"

#include <cmath>
#include <sstream>

#include "delay_lqr/errors.hpp"

namespace delay_lqr {

int ConstrainedProblem::horizon_length() const {
  if (const auto* finite = std::get_if<FiniteHorizon>(&horizon)) {
    return finite->N;
  }
  throw InvalidInput("horizon_length() called on an infinite-horizon problem");
}

VectorXd ConstrainedProblem::bounds() const {
  VectorXd c(num_constraints());
  for (Index i = 0; i < c.size(); ++i) {
    c[i] = constraints[static_cast<std::size_t>(i)].bound.value_or(0.0);
  }
  return c;
}

const CostTerm& ConstrainedProblem::term(Index i) const {
  if (i == 0) return objective;
  if (i < 0 || i > num_constraints()) {
    throw InvalidInput("cost term index out of range");
  }
  return constraints[static_cast<std::size_t>(i - 1)];
}

MultiplierVector::MultiplierVector(VectorXd values) : values_(std::move(values)) {
  for (Index i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i]) || values_[i] < 0.0) {
      throw InvalidInput("multiplier entries must be finite and nonnegative");
    }
  }
}

bool ValidationReport::has(ViolationKind kind) const {
  for (const auto& v : violations) {
    if (v.kind == kind) return true;
  }
  return false;
}

std::string ValidationReport::summary() const {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "; ";
    out += v.message;
  }
  return out;
}

bool is_positive_definite(const MatrixXd& M) {
  if (M.rows() != M.cols() || M.size() == 0 || !M.allFinite()) return false;
  Eigen::LLT<MatrixXd> llt(M);
  return llt.info() == Eigen::Success;
}

std::optional<MatrixXd> symmetrized(const MatrixXd& M, double rel_tol) {
  if (M.rows() != M.cols()) return std::nullopt;
  if (M.size() == 0) return M;
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  const double asym = (M - M.transpose()).cwiseAbs().maxCoeff();
  if (!(asym <= rel_tol * scale)) return std::nullopt;
  return symmetric_part(M);
}

namespace {

class Checker {
 public:
  explicit Checker(ValidationReport& report) : report_(report) {}

  void add(ViolationKind kind, std::string message) {
    report_.violations.push_back({kind, std::move(message)});
  }

  bool shape(const MatrixXd& M, Index rows, Index cols, const std::string& name) {
    if (M.rows() == rows && M.cols() == cols) return true;
    std::ostringstream os;
    os << "dimension mismatch: " << name << " is " << M.rows() << "x" << M.cols()
       << ", expected " << rows << "x" << cols;
    add(ViolationKind::DimensionMismatch, os.str());
    return false;
  }

  void weight(const MatrixXd& M, Index dim, const std::string& name) {
    if (!shape(M, dim, dim, name)) return;
    const auto sym = symmetrized(M);
    if (!sym) {
      add(ViolationKind::NotSymmetric, "weight not symmetric: " + name);
      return;
    }
    if (!is_positive_definite(*sym)) {
      add(ViolationKind::NotPositiveDefinite, "weight not positive definite: " + name);
    }
  }

 private:
  ValidationReport& report_;
};

}  // namespace

ValidationReport validate(const ConstrainedProblem& problem) {
  ValidationReport report;
  Checker check(report);
  const SystemModel& sys = problem.model;
  const Index n = sys.A.rows();
  const Index m = sys.B.cols();

  if (n == 0 || m == 0) {
    check.add(ViolationKind::DimensionMismatch, "dimension mismatch: empty A or B");
    return report;
  }
  check.shape(sys.A, n, n, "A");
  check.shape(sys.A_bar, n, n, "A_bar");
  check.shape(sys.B, n, m, "B");
  check.shape(sys.B_bar, n, m, "B_bar");
  if (sys.x0.size() != n) {
    check.add(ViolationKind::DimensionMismatch, "dimension mismatch: x0 length");
  }
  if (!(sys.sigma2 >= 0.0) || !std::isfinite(sys.sigma2)) {
    check.add(ViolationKind::InvalidParameter, "sigma2 must be finite and >= 0");
  }
  if (sys.delay < 1) {
    check.add(ViolationKind::InvalidParameter, "delay d must be >= 1");
  } else if (static_cast<int>(sys.u_init.size()) != sys.delay) {
    check.add(ViolationKind::DimensionMismatch, "dimension mismatch: u_init must hold exactly d controls");
  }
  for (const auto& u : sys.u_init) {
    if (u.size() != m) {
      check.add(ViolationKind::DimensionMismatch, "dimension mismatch: u_init entry length");
      break;
    }
  }

  const bool finite = problem.is_finite();
  auto check_term = [&](const CostTerm& term, const std::string& name, bool is_constraint) {
    check.weight(term.Q, n, name + ".Q");
    check.weight(term.R, m, name + ".R");
    if (finite && !term.F) {
      check.add(ViolationKind::TerminalWeightMismatch, "finite horizon requires F on " + name);
    } else if (!finite && term.F) {
      check.add(ViolationKind::TerminalWeightMismatch, "infinite horizon forbids F on " + name);
    } else if (term.F) {
      check.weight(*term.F, n, name + ".F");
    }
    if (is_constraint && (!term.bound || !std::isfinite(*term.bound))) {
      check.add(ViolationKind::InvalidParameter, "constraint bound missing on " + name);
    }
  };
  check_term(problem.objective, "objective", false);
  for (std::size_t i = 0; i < problem.constraints.size(); ++i) {
    check_term(problem.constraints[i], "constraints[" + std::to_string(i) + "]", true);
  }

  if (finite) {
    const int N = std::get<FiniteHorizon>(problem.horizon).N;
    if (N < sys.delay) check.add(ViolationKind::HorizonTooShort, "N < d");
  }
  return report;
}

void require_valid(const ConstrainedProblem& problem) {
  const auto report = validate(problem);
  if (!report.ok()) throw InvalidInput(report.summary());
}

}  // namespace delay_lqr
