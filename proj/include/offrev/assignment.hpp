#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "offrev/domain.hpp"
#include "offrev/lp.hpp"
#include "offrev/similarity.hpp"

namespace offrev {

/// Randomized-assignment LP output: per-pair probabilities with paper loads
/// met exactly, reviewer caps respected, every entry in [0, q], conflicts 0.
struct MarginalMatrix {
  Eigen::MatrixXd prob;
  PolicyParams params;
  double objective = 0.0;
};

/// Sum-of-similarities optimal binary assignment. Integrality comes from a
/// vertex of the assignment polytope; a fractional solution (which a vertex
/// solver should not produce) is repaired by objective-neutral cycle rounding.
Eigen::MatrixXd deterministic_assignment(const Eigen::MatrixXd& similarity, const Venue& venue);

/// Probability-capped expected-similarity LP. The returned marginals are
/// re-checked for feasibility independently of the solver's report.
MarginalMatrix randomized_assignment(const Eigen::MatrixXd& similarity, const Venue& venue,
                                     double q);

/// Objective value of the assignment/marginal LP without extracting a point.
double assignment_objective(const Eigen::MatrixXd& similarity, const Venue& venue, double q);

/// TPDP tie-breaking: blend similarities with a fixed noise matrix,
/// S' = (1 - lambda) S + lambda E.
Eigen::MatrixXd perturb_tpdp(const Eigen::MatrixXd& similarity, const Eigen::MatrixXd& noise,
                             double lambda = 1e-8);

/// Seeded uniform [0,1) noise matrix, persisted with results so every policy
/// of a study shares it.
Eigen::MatrixXd tpdp_noise_matrix(const Venue& venue, std::uint64_t seed);

struct AaaiPerturbResult {
  Eigen::MatrixXd similarity;   // penalized scores to re-solve with
  double epsilon = 0.0;
  double similarity_gap = 0.0;  // total-similarity loss of the perturbed solution
  bool within_tolerance = true;
};

/// AAAI tie-breaking: penalize pairs unsupported on-policy by the largest
/// epsilon in {1e-9, 1e-6, 1e-3} whose solution loses at most `tolerance`
/// total similarity. epsilon = 1e-9 is the fallback; if even that breaches
/// the tolerance the result is flagged rather than rejected.
AaaiPerturbResult perturb_aaai(const Eigen::MatrixXd& similarity, const Venue& venue,
                               const BoolGrid& on_policy_support, double q,
                               double tolerance = 1e-5);

/// Independent feasibility pass over a marginal matrix (loads, caps, cap q,
/// conflicts) at 1e-9; throws SolverError on violation.
void check_marginal_feasibility(const Eigen::MatrixXd& prob, const Venue& venue, double q,
                                double tol = 1e-9);

}  // namespace offrev
