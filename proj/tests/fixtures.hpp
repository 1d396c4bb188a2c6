#pragma once

// Shared test fixtures: tiny venues and brute-force oracles that stay
// independent of the solver and sampler implementations.

#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "offrev/domain.hpp"

namespace offrev::testing {

inline Venue make_venue(int reviewers, int papers, int load, int cap,
                        std::vector<std::pair<int, int>> conflicts = {},
                        std::string bid_scheme = {}) {
  Venue venue;
  for (int r = 0; r < reviewers; ++r) venue.reviewer_ids.push_back("r" + std::to_string(r));
  for (int p = 0; p < papers; ++p) venue.paper_ids.push_back("p" + std::to_string(p));
  venue.paper_load = load;
  venue.reviewer_cap = Eigen::VectorXi::Constant(reviewers, cap);
  venue.profile_provided.assign(static_cast<size_t>(reviewers), true);
  venue.conflict = bool_grid(reviewers, papers);
  venue.bid_scheme = std::move(bid_scheme);
  for (const auto& [r, p] : conflicts) venue.conflict(r, p) = true;
  venue.validate();
  return venue;
}

// All feasible binary assignments of a small venue, by exhaustive recursion
// over per-paper reviewer subsets.
inline std::vector<Eigen::MatrixXd> enumerate_assignments(const Venue& venue) {
  const int nr = venue.num_reviewers();
  const int np = venue.num_papers();
  std::vector<Eigen::MatrixXd> out;
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(nr, np);
  Eigen::VectorXi used = Eigen::VectorXi::Zero(nr);

  const std::function<void(int)> per_paper = [&](int p) {
    if (p == np) {
      out.push_back(z);
      return;
    }
    // choose venue.paper_load reviewers for paper p
    std::vector<int> chosen;
    const std::function<void(int)> choose = [&](int from) {
      if (static_cast<int>(chosen.size()) == venue.paper_load) {
        per_paper(p + 1);
        return;
      }
      for (int r = from; r < nr; ++r) {
        if (venue.conflict(r, p) || used(r) >= venue.reviewer_cap(r)) continue;
        chosen.push_back(r);
        z(r, p) = 1.0;
        ++used(r);
        choose(r + 1);
        --used(r);
        z(r, p) = 0.0;
        chosen.pop_back();
      }
    };
    choose(0);
  };
  per_paper(0);
  return out;
}

inline double brute_force_best(const Eigen::MatrixXd& similarity, const Venue& venue) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& z : enumerate_assignments(venue))
    best = std::max(best, (z.array() * similarity.array()).sum());
  return best;
}

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Exhaustive lexicographic optimum over surrogate vectors drawn from a
// finite candidate set; the independent oracle for the two-level LPs.
struct GridOracle {
  double primary = std::numeric_limits<double>::infinity();
  double secondary_min = 0.0;
  double secondary_max = 0.0;
};

inline GridOracle grid_search(const std::vector<double>& candidates, int n,
                              const std::vector<std::pair<int, double>>& observed_slots,
                              const Eigen::VectorXd& coef,
                              const std::vector<std::tuple<int, int, double>>& le_constraints) {
  GridOracle oracle;
  std::vector<double> t(static_cast<size_t>(n));
  const std::function<void(int)> walk = [&](int slot) {
    if (slot == n) {
      for (const auto& [i, j, rhs] : le_constraints)
        if (t[static_cast<size_t>(i)] - t[static_cast<size_t>(j)] > rhs + 1e-12) return;
      double primary = 0.0;
      for (const auto& [s, y] : observed_slots) primary += std::abs(t[static_cast<size_t>(s)] - y);
      double secondary = 0.0;
      for (int s = 0; s < n; ++s) secondary += coef(s) * t[static_cast<size_t>(s)];
      if (primary < oracle.primary - 1e-12) {
        oracle.primary = primary;
        oracle.secondary_min = oracle.secondary_max = secondary;
      } else if (primary <= oracle.primary + 1e-12) {
        oracle.secondary_min = std::min(oracle.secondary_min, secondary);
        oracle.secondary_max = std::max(oracle.secondary_max, secondary);
      }
      return;
    }
    for (const double v : candidates) {
      t[static_cast<size_t>(slot)] = v;
      walk(slot + 1);
    }
  };
  walk(0);
  return oracle;
}

}  // namespace offrev::testing
