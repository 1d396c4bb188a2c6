#include <doctest.h>

#include <map>
#include <random>

#include <Eigen/Eigenvalues>

#include "fixtures.hpp"
#include "offrev/assignment.hpp"
#include "offrev/sampler.hpp"

using namespace offrev;
using offrev::testing::make_venue;

namespace {

Eigen::MatrixXd uniform_2x2() {
  Eigen::MatrixXd m(2, 2);
  m << 0.5, 0.5, 0.5, 0.5;
  return m;
}

}  // namespace

TEST_CASE("integral marginals are returned verbatim") {
  const Venue venue = make_venue(2, 2, 1, 1);
  Eigen::MatrixXd m(2, 2);
  m << 1, 0, 0, 1;
  CHECK(sample_assignment(m, venue, 3) == m);
}

TEST_CASE("2x2 uniform marginals: both matchings near 50% over 100k draws") {
  const Venue venue = make_venue(2, 2, 1, 1);
  const Eigen::MatrixXd m = uniform_2x2();
  std::mt19937_64 seeds(2024);
  Eigen::MatrixXd freq = Eigen::MatrixXd::Zero(2, 2);
  const int n = 100000;
  int diag = 0;
  for (int i = 0; i < n; ++i) {
    const auto z = sample_assignment(m, venue, seeds());
    freq += z;
    if (z(0, 0) == 1.0) ++diag;
  }
  freq /= n;
  const double band = 3.0 * std::sqrt(0.25 / n);  // ~0.0047
  for (int r = 0; r < 2; ++r)
    for (int p = 0; p < 2; ++p) CHECK(std::abs(freq(r, p) - 0.5) <= band);
  CHECK(std::abs(static_cast<double>(diag) / n - 0.5) <= band);
}

TEST_CASE("marginal fidelity for LP output at q = 0.4") {
  const Venue venue = make_venue(3, 3, 1, 2);
  std::mt19937_64 rng(5);
  Eigen::MatrixXd s(3, 3);
  for (int r = 0; r < 3; ++r)
    for (int p = 0; p < 3; ++p) s(r, p) = offrev::testing::uniform01(rng);
  const auto marginals = randomized_assignment(s, venue, 0.4);

  const int n = 100000;
  Eigen::MatrixXd freq = Eigen::MatrixXd::Zero(3, 3);
  std::mt19937_64 seeds(99);
  for (int i = 0; i < n; ++i) freq += sample_assignment(marginals.prob, venue, seeds());
  freq /= n;
  for (int r = 0; r < 3; ++r)
    for (int p = 0; p < 3; ++p) {
      const double pr = marginals.prob(r, p);
      const double band = 3.0 * std::sqrt(std::max(pr * (1.0 - pr), 1e-12) / n) + 1e-9;
      CHECK(std::abs(freq(r, p) - pr) <= band);
    }
}

TEST_CASE("exact branching-tree enumeration") {
  const Venue venue = make_venue(2, 2, 1, 1);

  SUBCASE("uniform 2x2 yields the two matchings at exactly 1/2") {
    const auto dist = enumerate_assignment_distribution(uniform_2x2(), venue);
    REQUIRE(dist.size() == 2);
    for (const auto& wa : dist) CHECK(wa.probability == doctest::Approx(0.5).epsilon(1e-12));
  }

  SUBCASE("enumeration marginals reproduce the inputs exactly") {
    std::mt19937_64 rng(17);
    const Venue v = make_venue(3, 3, 1, 2);
    Eigen::MatrixXd s(3, 3);
    for (int r = 0; r < 3; ++r)
      for (int p = 0; p < 3; ++p) s(r, p) = offrev::testing::uniform01(rng);
    const auto marginals = randomized_assignment(s, v, 0.5);
    const auto dist = enumerate_assignment_distribution(marginals.prob, v);
    double total = 0.0;
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(3, 3);
    for (const auto& wa : dist) {
      total += wa.probability;
      mean += wa.probability * wa.assignment;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((mean - marginals.prob).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("per-step marginal preservation on supports with few fractional entries") {
  // Exhaustive check of the sampler's distribution for every support with
  // <= 6 fractional entries drawn from capped LPs on tiny venues.
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 8; ++trial) {
    const Venue venue = make_venue(3, 2, 1, 1);
    Eigen::MatrixXd s(3, 2);
    for (int r = 0; r < 3; ++r)
      for (int p = 0; p < 2; ++p) s(r, p) = offrev::testing::uniform01(rng);
    const auto marginals = randomized_assignment(s, venue, 0.6);
    const auto dist = enumerate_assignment_distribution(marginals.prob, venue);
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(3, 2);
    for (const auto& wa : dist) mean += wa.probability * wa.assignment;
    CHECK((mean - marginals.prob).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("sampled assignments respect caps with inequality slack") {
  const Venue venue = make_venue(4, 3, 2, 2);  // sum of loads 6 < total cap 8
  Eigen::MatrixXd s(4, 3);
  s << 5, 1, 1, 1, 5, 1, 1, 1, 5, 2, 2, 2;
  const auto marginals = randomized_assignment(s, venue, 0.7);
  std::mt19937_64 seeds(1234);
  for (int i = 0; i < 500; ++i) {
    const auto z = sample_assignment(marginals.prob, venue, seeds());
    for (int p = 0; p < 3; ++p) CHECK(z.col(p).sum() == doctest::Approx(2.0));
    for (int r = 0; r < 4; ++r) CHECK(z.row(r).sum() <= 2.0 + 1e-12);
  }
}

TEST_CASE("same seed gives the same assignment") {
  const Venue venue = make_venue(2, 2, 1, 1);
  CHECK(sample_assignment(uniform_2x2(), venue, 42) ==
        sample_assignment(uniform_2x2(), venue, 42));
}

TEST_CASE("covariance accumulator") {
  const Venue venue = make_venue(2, 2, 1, 1);

  SUBCASE("integral marginals give zero covariances") {
    Eigen::MatrixXd m(2, 2);
    m << 1, 0, 0, 1;
    const auto cov = estimate_covariance(m, venue, 1000, 7);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) CHECK(cov.covariance(a, b) == doctest::Approx(0.0));
  }

  SUBCASE("2x2 uniform: exact covariances within 0.005 at 100k samples") {
    const auto cov = estimate_covariance(uniform_2x2(), venue, 100000, 13);
    const int i11 = venue.pair_index(0, 0);
    const int i12 = venue.pair_index(0, 1);
    const int i22 = venue.pair_index(1, 1);
    CHECK(std::abs(cov.covariance(i11, i22) - 0.25) <= 0.005);
    CHECK(std::abs(cov.covariance(i11, i12) + 0.25) <= 0.005);
    CHECK(cov.covariance(i11, i11) == doctest::Approx(0.25).epsilon(0.05));
  }

  SUBCASE("empirical covariance matrix is positive semidefinite") {
    const Venue v = make_venue(3, 3, 1, 2);
    std::mt19937_64 rng(3);
    Eigen::MatrixXd s(3, 3);
    for (int r = 0; r < 3; ++r)
      for (int p = 0; p < 3; ++p) s(r, p) = offrev::testing::uniform01(rng);
    const auto marginals = randomized_assignment(s, v, 0.5);
    const auto cov = estimate_covariance(marginals.prob, v, 20000, 19);
    Eigen::MatrixXd dense(v.num_pairs(), v.num_pairs());
    for (int a = 0; a < v.num_pairs(); ++a)
      for (int b = 0; b < v.num_pairs(); ++b) dense(a, b) = cov.covariance(a, b);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-9);
  }

  SUBCASE("merge order is deterministic: 2 threads twice") {
    const auto a = estimate_covariance(uniform_2x2(), venue, 4000, 21, 2);
    const auto b = estimate_covariance(uniform_2x2(), venue, 4000, 21, 2);
    CHECK(a.first_moment_sums() == b.first_moment_sums());
    CHECK(a.co_occurrence().size() == b.co_occurrence().size());
    for (const auto& [k, v2] : a.co_occurrence()) CHECK(b.co_occurrence().at(k) == v2);
  }
}

TEST_CASE("greedy rounding preserves the LP objective at an optimum") {
  const Venue venue = make_venue(2, 2, 1, 1);
  Eigen::MatrixXd s = Eigen::MatrixXd::Ones(2, 2);  // everything optimal
  const auto z = round_greedy(uniform_2x2(), venue, s);
  CHECK((z.array() * s.array()).sum() == doctest::Approx(2.0));
  check_marginal_feasibility(z, venue, 1.0);
}

TEST_CASE("each step rounds at least one entry and terminates in #fractional steps") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const Venue venue = make_venue(4, 4, 1, 2);
    Eigen::MatrixXd s(4, 4);
    for (int r = 0; r < 4; ++r)
      for (int p = 0; p < 4; ++p) s(r, p) = offrev::testing::uniform01(rng);
    const auto marginals = randomized_assignment(s, venue, 0.45);
    FractionalState state = FractionalState::from_marginals(marginals.prob, venue);

    const auto fractional_count = [&] {
      int count = 0;
      for (int r = 0; r < 4; ++r) {
        if (std::abs(state.slack(r) - std::round(state.slack(r))) > 1e-9) ++count;
        for (int p = 0; p < 4; ++p)
          if (std::abs(state.prob(r, p) - std::round(state.prob(r, p))) > 1e-9) ++count;
      }
      return count;
    };

    int remaining = fractional_count();
    const int budget = remaining;
    int steps = 0;
    while (auto step = next_rounding_step(state)) {
      apply_rounding_step(state, *step, (rng() & 1) == 0);
      const int now = fractional_count();
      CHECK(now < remaining);  // strictly more integral entries each step
      remaining = now;
      ++steps;
      REQUIRE(steps <= budget);
    }
    CHECK(state.integral());
  }
}

TEST_CASE("corrupt marginals are rejected") {
  const Venue venue = make_venue(2, 2, 1, 1);
  Eigen::MatrixXd over(2, 2);
  over << 0.9, 0.9, 0.9, 0.9;  // rows exceed cap 1
  CHECK_THROWS_AS(sample_assignment(over, venue, 1), DataError);
}
