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


#include "delay_lqr/errors.hpp"
#include "delay_lqr/riccati.hpp"
#include "delay_lqr/sensitivity.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace delay_lqr;
using namespace delay_lqr::testing;

namespace {

MultiplierVector shifted(const VectorXd& lam, Index i, double h) {
  VectorXd v = lam;
  v[i] += h;
  return MultiplierVector(v);
}

CostTerm zero_term(Index n, Index m, bool finite) {
  CostTerm t;
  t.Q = MatrixXd::Zero(n, n);
  t.R = MatrixXd::Zero(m, m);
  if (finite) t.F = MatrixXd::Zero(n, n);
  return t;
}

CostTerm sum_terms(const CostTerm& a, const CostTerm& b) {
  CostTerm t;
  t.Q = a.Q + b.Q;
  t.R = a.R + b.R;
  if (a.F && b.F) t.F = *a.F + *b.F;
  return t;
}

}  // namespace

TEST_SUITE("sensitivity") {
  TEST_CASE("zero perturbation gives zero derivatives") {
    const ConstrainedProblem fin = fixture_problem("ex_a.json");
    const RiccatiTrajectory t = solve_finite(fin.model, weighted_costs(fin, lambda_of({1.0})), 2);
    const GradientTrajectory g = gradient_finite(t, fin.model, zero_term(1, 1, true));
    for (int k = 1; k <= 3; ++k) {
      CHECK(g.dZ(k).isZero());
      CHECK(g.dX(k).isZero());
    }

    const ConstrainedProblem inf = fixture_problem("ex_b.json");
    const SteadySolution s = solve_infinite(inf.model, weighted_costs(inf, lambda_of({0.5})), 1e-12, 100000);
    const SteadyGradient sg = gradient_infinite(s, inf.model, zero_term(1, 1, false), 1e-12, 100000);
    CHECK(sg.dZ.isZero());
    CHECK(sg.dX.isZero());
  }

  TEST_CASE("finite derivatives on the scalar example match central differences") {
    const ConstrainedProblem p = fixture_problem("ex_a.json");
    const VectorXd lam = VectorXd::Constant(1, 2.2313);
    const double h = 1e-5;
    const RiccatiTrajectory t = solve_finite(p.model, weighted_costs(p, MultiplierVector(lam)), 2);
    const GradientTrajectory g = gradient_finite(t, p.model, p.constraints[0]);
    const RiccatiTrajectory up = solve_finite(p.model, weighted_costs(p, shifted(lam, 0, h)), 2);
    const RiccatiTrajectory dn = solve_finite(p.model, weighted_costs(p, shifted(lam, 0, -h)), 2);
    CHECK(rel_diff(g.dZ(1), (up.Z(1) - dn.Z(1)) / (2 * h)) < 1e-5);
    CHECK(rel_diff(g.dX(1), (up.X(1) - dn.X(1)) / (2 * h)) < 1e-5);
    CHECK(g.dZ(3) == *p.constraints[0].F);
    CHECK(g.dX(3) == *p.constraints[0].F);
  }

  TEST_CASE("finite derivatives on random problems match central differences") {
    std::mt19937_64 rng(17);
    const double h = 1e-5;
    for (int trial = 0; trial < 20; ++trial) {
      const ConstrainedProblem p = random_problem(rng);
      std::uniform_real_distribution<double> u(0.0, 2.0);
      VectorXd lam(p.num_constraints());
      for (Index i = 0; i < lam.size(); ++i) lam[i] = u(rng) + h;
      const int N = p.horizon_length();
      const int d = p.model.delay;
      const RiccatiTrajectory t = solve_finite(p.model, weighted_costs(p, MultiplierVector(lam)), N);
      for (Index i = 0; i < lam.size(); ++i) {
        const GradientTrajectory g = gradient_finite(t, p.model, p.constraints[static_cast<std::size_t>(i)]);
        const RiccatiTrajectory up = solve_finite(p.model, weighted_costs(p, shifted(lam, i, h)), N);
        const RiccatiTrajectory dn = solve_finite(p.model, weighted_costs(p, shifted(lam, i, -h)), N);
        for (int k = d; k <= N + 1; ++k) {
          CHECK(rel_diff(g.dZ(k), (up.Z(k) - dn.Z(k)) / (2 * h)) < 1e-4);
          CHECK(rel_diff(g.dX(k), (up.X(k) - dn.X(k)) / (2 * h)) < 1e-4);
          CHECK((g.dZ(k) - g.dZ(k).transpose()).cwiseAbs().maxCoeff() == 0.0);
          CHECK((g.dX(k) - g.dX(k).transpose()).cwiseAbs().maxCoeff() == 0.0);
        }
      }
    }
  }

  TEST_CASE("recursion is linear in the perturbation") {
    std::mt19937_64 rng(19);
    RandomSpec spec;
    spec.min_constraints = 2;
    for (int trial = 0; trial < 10; ++trial) {
      const ConstrainedProblem p = random_problem(rng, spec);
      const RiccatiTrajectory t =
          solve_finite(p.model, weighted_costs(p, MultiplierVector(VectorXd::Constant(2, 0.7))),
                       p.horizon_length());
      const CostTerm& a = p.constraints[0];
      const CostTerm& b = p.constraints[1];
      const GradientTrajectory ga = gradient_finite(t, p.model, a);
      const GradientTrajectory gb = gradient_finite(t, p.model, b);
      const GradientTrajectory gs = gradient_finite(t, p.model, sum_terms(a, b));
      for (int k = p.model.delay; k <= p.horizon_length(); ++k) {
        CHECK(rel_diff(gs.dZ(k), ga.dZ(k) + gb.dZ(k)) < 1e-12);
        CHECK(rel_diff(gs.dX(k), ga.dX(k) + gb.dX(k)) < 1e-12);
      }
    }
  }

  TEST_CASE("steady derivatives on the scalar example match central differences") {
    const ConstrainedProblem p = fixture_problem("ex_b.json");
    const double h = 1e-5;
    const double lam = 0.6058;
    const SteadySolution s = solve_infinite(p.model, weighted_costs(p, lambda_of({lam})), 1e-14, 100000);
    const SteadyGradient g = gradient_infinite(s, p.model, p.constraints[0], 1e-14, 100000);
    const SteadySolution up = solve_infinite(p.model, weighted_costs(p, lambda_of({lam + h})), 1e-14, 100000);
    const SteadySolution dn = solve_infinite(p.model, weighted_costs(p, lambda_of({lam - h})), 1e-14, 100000);
    CHECK(rel_diff(g.dZ, (up.Z - dn.Z) / (2 * h)) < 1e-4);
    CHECK(rel_diff(g.dX, (up.X - dn.X) / (2 * h)) < 1e-4);
    CHECK(g.residual < 1e-8);
  }

  TEST_CASE("steady derivatives on random problems match central differences") {
    std::mt19937_64 rng(23);
    RandomSpec spec;
    spec.finite = false;
    const double h = 1e-5;
    for (int trial = 0; trial < 10; ++trial) {
      const ConstrainedProblem p = random_problem(rng, spec);
      VectorXd lam = VectorXd::Constant(p.num_constraints(), 0.5);
      const SteadySolution s = solve_infinite(p.model, weighted_costs(p, MultiplierVector(lam)), 1e-14, 200000);
      for (Index i = 0; i < lam.size(); ++i) {
        const SteadyGradient g =
            gradient_infinite(s, p.model, p.constraints[static_cast<std::size_t>(i)], 1e-14, 200000);
        const SteadySolution up = solve_infinite(p.model, weighted_costs(p, shifted(lam, i, h)), 1e-14, 200000);
        const SteadySolution dn = solve_infinite(p.model, weighted_costs(p, shifted(lam, i, -h)), 1e-14, 200000);
        CHECK(rel_diff(g.dZ, (up.Z - dn.Z) / (2 * h)) < 1e-4);
        CHECK(rel_diff(g.dX, (up.X - dn.X) / (2 * h)) < 1e-4);
      }
    }
  }

  TEST_CASE("no control authority: derivative is a geometric series") {
    ConstrainedProblem p = fixture_problem("ex_b.json");
    p.model.A = scalar(0.5);
    p.model.A_bar = scalar(0.0);
    p.model.B = scalar(0.0);
    p.model.B_bar = scalar(0.0);
    p.constraints[0].Q = scalar(1.0);
    const SteadySolution s = solve_infinite(p.model, weighted_costs(p, lambda_of({0.3})), 1e-14, 100000);
    const SteadyGradient g = gradient_infinite(s, p.model, p.constraints[0], 1e-14, 100000);
    CHECK(g.dZ(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
    CHECK(g.dX(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  }

  TEST_CASE("finite derivative requires a terminal weight") {
    const ConstrainedProblem p = fixture_problem("ex_a.json");
    const RiccatiTrajectory t = solve_finite(p.model, weighted_costs(p, lambda_of({1.0})), 2);
    CHECK_THROWS_AS(gradient_finite(t, p.model, zero_term(1, 1, false)), InvalidInput);
  }
}
