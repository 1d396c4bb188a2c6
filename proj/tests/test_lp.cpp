#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "offrev/assignment.hpp"
#include "offrev/lp.hpp"

using namespace offrev;
using offrev::testing::brute_force_best;
using offrev::testing::make_venue;
using offrev::testing::uniform01;

TEST_CASE("single bounded variable") {
  LinearProgram lp;
  lp.add_variable(-kInf, 3.0, 1.0, "x");
  lp.maximize = true;
  const auto sol = solve_lp(lp);
  CHECK(sol.objective == doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("infeasible and unbounded are distinct errors") {
  {
    // one reviewer with cap 1 cannot give a paper two reviews
    LinearProgram lp;
    const int x = lp.add_variable(0.0, 1.0, 1.0, "z");
    lp.add_constraint(ConstraintSense::equal, 2.0, {{x, 1.0}}, "load");
    CHECK_THROWS_AS(solve_lp(lp), InfeasibleError);
  }
  {
    LinearProgram lp;
    lp.add_variable(0.0, kInf, 1.0, "x");
    lp.maximize = true;
    CHECK_THROWS_AS(solve_lp(lp), UnboundedError);
  }
}

TEST_CASE("equality, inequality and free variables") {
  // min x + 2y  s.t.  x + y = 4,  x - y >= 1,  x free, y in [0, 10]
  LinearProgram lp;
  const int x = lp.add_variable(-kInf, kInf, 1.0, "x");
  const int y = lp.add_variable(0.0, 10.0, 2.0, "y");
  lp.maximize = false;
  lp.add_constraint(ConstraintSense::equal, 4.0, {{x, 1.0}, {y, 1.0}});
  lp.add_constraint(ConstraintSense::greater_equal, 1.0, {{x, 1.0}, {y, -1.0}});
  const auto sol = solve_lp(lp);
  // y = 0, x = 4 is optimal (reducing y by 1 saves 2 but costs 1 on x)
  CHECK(sol.x(x) == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(sol.x(y) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(max_constraint_violation(lp, sol.x) <= 1e-9);
}

TEST_CASE("assignment polytope 2x2 identity") {
  const Venue venue = make_venue(2, 2, 1, 1);
  Eigen::MatrixXd s(2, 2);
  s << 1, 0, 0, 1;
  const auto z = deterministic_assignment(s, venue);
  CHECK(z(0, 0) == 1.0);
  CHECK(z(1, 1) == 1.0);
  CHECK((z.array() * s.array()).sum() == doctest::Approx(2.0));
}

TEST_CASE("3x3 deterministic assignment matches permutation search") {
  std::mt19937_64 rng(11);
  const Venue venue = make_venue(3, 3, 1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd s(3, 3);
    for (int r = 0; r < 3; ++r)
      for (int p = 0; p < 3; ++p) s(r, p) = uniform01(rng);
    const auto z = deterministic_assignment(s, venue);
    const double got = (z.array() * s.array()).sum();
    CHECK(got == doctest::Approx(brute_force_best(s, venue)).epsilon(1e-9));
  }
}

TEST_CASE("conflict on the argmax pair forces the next-best matching") {
  Eigen::MatrixXd s(2, 2);
  s << 10, 1, 1, 2;
  const Venue venue = make_venue(2, 2, 1, 1, {{0, 0}});
  const auto z = deterministic_assignment(s, venue);
  CHECK(z(0, 0) == 0.0);
  CHECK((z.array() * s.array()).sum() == doctest::Approx(brute_force_best(s, venue)));
}

TEST_CASE("probability-capped LP hits the uniform point at q = 0.5") {
  const Venue venue = make_venue(2, 2, 1, 1);
  Eigen::MatrixXd s(2, 2);
  s << 2, 1, 1, 2;
  const auto m = randomized_assignment(s, venue, 0.5);
  for (int r = 0; r < 2; ++r)
    for (int p = 0; p < 2; ++p) CHECK(m.prob(r, p) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(m.objective == doctest::Approx(3.0).epsilon(1e-12));

  const auto full = randomized_assignment(s, venue, 1.0);
  CHECK(full.prob(0, 0) == doctest::Approx(1.0));
  CHECK(full.prob(1, 1) == doctest::Approx(1.0));
  CHECK(full.objective == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("q = 1 randomized objective equals the deterministic optimum") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const Venue venue = make_venue(4, 3, 1, 2);
    Eigen::MatrixXd s(4, 3);
    for (int r = 0; r < 4; ++r)
      for (int p = 0; p < 3; ++p) s(r, p) = uniform01(rng);
    const auto det = deterministic_assignment(s, venue);
    const auto rand1 = randomized_assignment(s, venue, 1.0);
    CHECK(rand1.objective == doctest::Approx((det.array() * s.array()).sum()).epsilon(1e-8));
  }
}

TEST_CASE("objective is nondecreasing in q") {
  std::mt19937_64 rng(31);
  const Venue venue = make_venue(5, 4, 2, 3);
  Eigen::MatrixXd s(5, 4);
  for (int r = 0; r < 5; ++r)
    for (int p = 0; p < 4; ++p) s(r, p) = uniform01(rng);
  double previous = -1.0;
  for (const double q : {0.4, 0.5, 0.6, 0.75, 0.9, 1.0}) {
    const auto m = randomized_assignment(s, venue, q);
    CHECK(m.objective >= previous - 1e-9);
    previous = m.objective;
    check_marginal_feasibility(m.prob, venue, q);  // independent re-check
  }
}

TEST_CASE("infeasible cap: q too small for the paper load") {
  const Venue venue = make_venue(2, 1, 1, 1);
  Eigen::MatrixXd s(2, 1);
  s << 1, 1;
  // two reviewers at probability <= 0.3 cannot sum to load 1
  CHECK_THROWS_AS(randomized_assignment(s, venue, 0.3), InfeasibleError);
}

TEST_CASE("tpdp perturbation") {
  const Venue venue = make_venue(2, 2, 1, 1);
  Eigen::MatrixXd s(2, 2);
  s << 1, 1, 1, 1;  // fully tied

  SUBCASE("lambda = 0 leaves scores unchanged") {
    const auto e = tpdp_noise_matrix(venue, 5);
    CHECK(perturb_tpdp(s, e, 0.0) == s);
  }
  SUBCASE("distinct noise makes the tied optimum unique") {
    Eigen::MatrixXd e(2, 2);
    e << 0.9, 0.1, 0.2, 0.8;
    const auto z = perturb_tpdp(s, e, 1e-8);
    const auto sol = deterministic_assignment(z, venue);
    CHECK(sol(0, 0) == 1.0);  // noise prefers the diagonal
    CHECK(sol(1, 1) == 1.0);
  }
  SUBCASE("same seed reproduces the noise matrix") {
    CHECK(tpdp_noise_matrix(venue, 7) == tpdp_noise_matrix(venue, 7));
    CHECK(tpdp_noise_matrix(venue, 7) != tpdp_noise_matrix(venue, 8));
  }
}

TEST_CASE("aaai perturbation selects the largest harmless epsilon") {
  const Venue venue = make_venue(2, 2, 1, 1);

  SUBCASE("fully supported mask never perturbs the solution") {
    Eigen::MatrixXd s(2, 2);
    s << 2, 1, 1, 2;
    const auto r = perturb_aaai(s, venue, bool_grid(2, 2, true), 1.0);
    CHECK(r.epsilon == doctest::Approx(1e-3));
    CHECK(r.within_tolerance);
    CHECK(r.similarity_gap <= 1e-12);
  }
  SUBCASE("epsilon = 1e-3 moves a near-tie, 1e-6 is chosen") {
    // Unsupported diagonal is better by 5e-4 per pair; a 1e-3 penalty flips
    // the optimum and loses 1e-3 > 1e-5 of similarity. 1e-6 does not.
    Eigen::MatrixXd s(2, 2);
    s << 1.0005, 1.0, 1.0, 1.0005;
    BoolGrid support = bool_grid(2, 2, true);
    support(0, 0) = false;
    support(1, 1) = false;
    const auto r = perturb_aaai(s, venue, support, 1.0);
    CHECK(r.epsilon == doctest::Approx(1e-6));
    CHECK(r.within_tolerance);
  }
  SUBCASE("re-solving with the chosen epsilon reproduces the on-policy") {
    Eigen::MatrixXd s(2, 2);
    s << 2, 1, 1, 2;
    const auto on = randomized_assignment(s, venue, 0.8);
    const BoolGrid support = on.prob.array() > 0.0;
    const auto r = perturb_aaai(s, venue, support, 0.8);
    const auto re = randomized_assignment(r.similarity, venue, 0.8);
    CHECK((re.prob - on.prob).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("degenerate ties do not stall the solver") {
  // All-equal similarities with many alternative optima.
  const Venue venue = make_venue(6, 6, 1, 2);
  const Eigen::MatrixXd s = Eigen::MatrixXd::Ones(6, 6);
  const auto z = deterministic_assignment(s, venue);
  CHECK((z.array() * s.array()).sum() == doctest::Approx(6.0));
}
