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


#include <Eigen/Eigenvalues>

#include "delay_lqr/dual.hpp"
#include "delay_lqr/errors.hpp"
#include "delay_lqr/evaluate.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace delay_lqr;
using namespace delay_lqr::testing;

namespace {

std::vector<CostTerm> all_terms(const ConstrainedProblem& p) {
  std::vector<CostTerm> terms{p.objective};
  terms.insert(terms.end(), p.constraints.begin(), p.constraints.end());
  return terms;
}

ConstrainedProblem zero_data(ConstrainedProblem p) {
  p.model.x0.setZero();
  for (auto& u : p.model.u_init) u.setZero();
  return p;
}

VectorXd random_lambda(std::mt19937_64& rng, Index m) {
  std::uniform_real_distribution<double> u(0.0, 2.0);
  VectorXd lam(m);
  for (Index i = 0; i < m; ++i) lam[i] = u(rng);
  return lam;
}

}  // namespace

TEST_SUITE("evaluate") {
  TEST_CASE("predictor") {
    const ConstrainedProblem p = fixture_problem("ex_a.json");
    const std::vector<VectorXd> recent{VectorXd::Constant(1, -1.0)};
    CHECK(predictor(p.model, p.model.x0, recent)[0] == doctest::Approx(-1.0));

    SystemModel m;
    m.A = MatrixXd::Identity(2, 2);
    m.B = MatrixXd::Identity(2, 2);
    m.delay = 2;
    const std::vector<VectorXd> e{VectorXd::Unit(2, 0), VectorXd::Unit(2, 1)};
    CHECK(predictor(m, VectorXd::Zero(2), e) == VectorXd::Ones(2));

    m.A << 0.9, 0.1, 0.0, 1.1;
    const VectorXd x = VectorXd::Constant(2, 2.0);
    const std::vector<VectorXd> zeros(2, VectorXd::Zero(2));
    CHECK(rel_diff(predictor(m, x, zeros), m.A * m.A * x) < 1e-15);
  }

  TEST_CASE("predictor agrees with the augmented-state map") {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 10; ++trial) {
      const ConstrainedProblem p = random_problem(rng);
      const AugmentedSystem s = augment(p.model);
      std::vector<VectorXd> recent;
      for (int j = 1; j <= p.model.delay; ++j) recent.push_back(p.model.past_control(j));
      CHECK(rel_diff(predictor(p.model, p.model.x0, recent), s.predictor * s.xi0) < 1e-13);
      CHECK(rel_diff(AugmentedLoop(p.model).predictor_map(), s.predictor) < 1e-15);
    }
  }

  TEST_CASE("gains on the scalar examples") {
    const ConstrainedProblem a = fixture_problem("ex_a.json");
    const GainSchedule Ka = solve_at(a, lambda_of({2.2313})).gains;
    REQUIRE(Ka.gains().size() == 2);
    CHECK(std::abs((*Ka.at(0))(0, 0) - 0.4554) < 1e-3);
    CHECK(std::abs((*Ka.at(1))(0, 0) - 0.4159) < 1e-3);
    CHECK(Ka.at(2) == nullptr);
    CHECK_FALSE(Ka.is_constant());

    const ConstrainedProblem b = fixture_problem("ex_b.json");
    const GainSchedule Kb = solve_at(b, lambda_of({0.6058})).gains;
    CHECK(Kb.is_constant());
    CHECK(std::abs((*Kb.at(1000))(0, 0) - 2.650791705) < 1e-5);

    // Recomputed from the inactive-constraint fixed point.
    const SteadySolution s = solve_infinite(b.model, weighted_costs(b, lambda_of({0.0})), 1e-13, 100000);
    const double expected = s.M(0, 0) / s.Upsilon(0, 0);
    CHECK((*gains(s).at(0))(0, 0) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(std::abs(expected - 2.7110) < 1e-4);
  }

  TEST_CASE("open-loop moments") {
    const ConstrainedProblem p = fixture_problem("ex_a.json");
    const auto mom = open_loop_moments(p.model, 1);
    REQUIRE(mom.size() == 2);
    CHECK(mom[1].mean[0] == doctest::Approx(-1.0));
    CHECK(mom[1].second(0, 0) == doctest::Approx(2.0));

    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 5; ++trial) {
      ConstrainedProblem q = random_problem(rng);
      q.model.sigma2 = 0.0;
      for (const auto& m : open_loop_moments(q.model, q.model.delay)) {
        CHECK(rel_diff(m.second, m.mean * m.mean.transpose()) < 1e-13);
      }
      for (const auto& m : open_loop_moments(zero_data(q).model, q.model.delay)) {
        CHECK(m.mean.isZero());
        CHECK(m.second.isZero());
      }
    }
  }

  TEST_CASE("dual value on the finite example") {
    const ConstrainedProblem p = fixture_problem("ex_a.json");
    CHECK(std::abs(dual_value(p, lambda_of({2.2313})) - 22.30) < 0.01);
    CHECK(std::abs(dual_value(p, lambda_of({0.0})) - 22.26) < 0.01);
    CHECK(dual_value(zero_data(p), lambda_of({0.0})) == 0.0);
  }

  TEST_CASE("dual value on the infinite example") {
    const ConstrainedProblem p = fixture_problem("ex_b.json");
    CHECK(std::abs(dual_value(p, lambda_of({0.6058})) - 28.010) < 0.01);
    CHECK(std::abs(dual_value(p, lambda_of({0.0})) - 27.98) < 0.01);
    CHECK(dual_value(zero_data(p), lambda_of({0.0})) == 0.0);
  }

  TEST_CASE("closed-loop costs on the examples") {
    const ConstrainedProblem a = fixture_problem("ex_a.json");
    const GainSchedule Ka = solve_at(a, lambda_of({2.2313})).gains;
    CHECK(std::abs(closed_loop_cost(a.model, Ka, a.constraints[0], a.horizon) - 13.25) < 0.01);
    CHECK(closed_loop_cost(zero_data(a).model, Ka, a.constraints[0], a.horizon) == 0.0);

    const ConstrainedProblem b = fixture_problem("ex_b.json");
    const GainSchedule Kb = solve_at(b, lambda_of({0.6058})).gains;
    CHECK(std::abs(closed_loop_cost(b.model, Kb, b.constraints[0], b.horizon) - 49.35) < 0.01);
    CHECK(closed_loop_cost(zero_data(b).model, Kb, b.constraints[0], b.horizon) == 0.0);
  }

  TEST_CASE("closed-loop costs match an independent moment propagation") {
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 20; ++trial) {
      const ConstrainedProblem p = random_problem(rng);
      const MultiplierVector lam(random_lambda(rng, p.num_constraints()));
      const GainSchedule K = solve_at(p, lam).gains;
      const MatrixXd pred = augment(p.model).predictor;
      std::vector<MatrixXd> G;
      for (const auto& k : K.gains()) G.push_back(k * pred);
      const auto terms = all_terms(p);
      const VectorXd J = closed_loop_costs(p.model, K, terms, p.horizon);
      for (std::size_t i = 0; i < terms.size(); ++i) {
        CHECK(rel_diff(J[static_cast<Index>(i)], policy_cost(p.model, G, terms[i], p.horizon_length())) < 1e-11);
      }
    }
  }

  TEST_CASE("dual value is the Lagrangian at its own minimizer") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 20; ++trial) {
      RandomSpec spec;
      spec.finite = trial % 2 == 0;
      ConstrainedProblem p = random_problem(rng, spec);
      make_feasible(p, 1.05);
      const VectorXd lam = random_lambda(rng, p.num_constraints());
      const FixedMultiplierSolution s = solve_at(p, MultiplierVector(lam));
      const VectorXd c = p.bounds();
      const double lagrangian = s.costs[0] + lam.dot(s.costs.tail(lam.size()) - c);
      CHECK(rel_diff(s.dual_value, lagrangian) < 1e-6);
    }
  }

  TEST_CASE("dual gradient equals constraint slack under the minimizing law") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 20; ++trial) {
      RandomSpec spec;
      spec.finite = trial % 2 == 0;
      ConstrainedProblem p = random_problem(rng, spec);
      make_feasible(p, 1.05);
      const MultiplierVector lam(random_lambda(rng, p.num_constraints()));
      const VectorXd g = p.is_finite() ? dual_gradient_finite(p, lam) : dual_gradient_infinite(p, lam);
      const FixedMultiplierSolution s = solve_at(p, lam);
      const VectorXd slack = s.costs.tail(p.num_constraints()) - p.bounds();
      for (Index i = 0; i < g.size(); ++i) {
        CHECK(std::abs(g[i] - slack[i]) <= 1e-6 * std::max(1.0, std::abs(s.costs[i + 1])));
      }
    }
  }

  TEST_CASE("closed-loop moments") {
    std::mt19937_64 rng(47);
    for (int trial = 0; trial < 10; ++trial) {
      const ConstrainedProblem p = random_problem(rng);
      const GainSchedule K = solve_at(p, MultiplierVector::zeros(p.num_constraints())).gains;
      const auto mom = closed_loop_moments(p.model, K, p.horizon_length() + 1);
      REQUIRE(static_cast<int>(mom.size()) == p.horizon_length() + 2);
      CHECK(rel_diff(mom[0].mean, p.model.x0) == 0.0);
      for (const auto& m : mom) {
        const MatrixXd cov = m.second - m.mean * m.mean.transpose();
        const double lo = Eigen::SelfAdjointEigenSolver<MatrixXd>(cov).eigenvalues().minCoeff();
        CHECK(lo >= -1e-10 * std::max(1.0, m.second.norm()));
      }
    }
  }

  TEST_CASE("unstable constant law is reported as diverging") {
    const ConstrainedProblem p = fixture_problem("ex_b.json");
    const GainSchedule zero = GainSchedule::constant(scalar(0.0));
    CHECK_THROWS_AS(closed_loop_cost(p.model, zero, p.objective, p.horizon), Diverging);
  }

  TEST_CASE("augmented loop building blocks") {
    const ConstrainedProblem p = fixture_problem("ex_a.json");
    const AugmentedLoop loop(p.model);
    const AugmentedSystem s = augment(p.model);
    CHECK(loop.dim() == 2);
    CHECK(rel_diff(loop.initial_state(), s.xi0) == 0.0);
    CHECK(rel_diff(loop.noise(), s.PhiBar) == 0.0);
    CHECK(rel_diff(loop.drift(nullptr), s.Phi) == 0.0);
    const MatrixXd K = scalar(0.5);
    CHECK(rel_diff(loop.drift(&K), s.Phi - s.Gamma * K * s.predictor) < 1e-15);
  }
}
