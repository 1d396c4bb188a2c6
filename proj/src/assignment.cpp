#include "offrev/assignment.hpp"

#include <cmath>
#include <random>
#include <vector>

#include "offrev/sampler.hpp"

namespace offrev {

namespace {

// Build the assignment LP shared by the deterministic (q = 1) and
// probability-capped variants. Variables exist only for non-conflict pairs.
struct AssignmentLp {
  LinearProgram lp;
  std::vector<int> var_of_pair;  // -1 for conflicts
};

AssignmentLp build_assignment_lp(const Eigen::MatrixXd& similarity, const Venue& venue,
                                 double q) {
  const int nr = venue.num_reviewers();
  const int np = venue.num_papers();
  if (similarity.rows() != nr || similarity.cols() != np)
    throw ValidationError("similarity matrix does not match venue shape");

  AssignmentLp built;
  built.lp.maximize = true;
  built.var_of_pair.assign(static_cast<size_t>(nr) * np, -1);
  for (int r = 0; r < nr; ++r) {
    for (int p = 0; p < np; ++p) {
      if (venue.conflict(r, p)) continue;
      built.var_of_pair[static_cast<size_t>(venue.pair_index(r, p))] =
          built.lp.add_variable(0.0, q, similarity(r, p), venue.pair_name(r, p));
    }
  }
  for (int p = 0; p < np; ++p) {
    std::vector<LinearProgram::Term> terms;
    for (int r = 0; r < nr; ++r) {
      const int v = built.var_of_pair[static_cast<size_t>(venue.pair_index(r, p))];
      if (v >= 0) terms.push_back({v, 1.0});
    }
    built.lp.add_constraint(ConstraintSense::equal, static_cast<double>(venue.paper_load),
                            std::move(terms), "load[" + venue.paper_ids[p] + "]");
  }
  for (int r = 0; r < nr; ++r) {
    std::vector<LinearProgram::Term> terms;
    for (int p = 0; p < np; ++p) {
      const int v = built.var_of_pair[static_cast<size_t>(venue.pair_index(r, p))];
      if (v >= 0) terms.push_back({v, 1.0});
    }
    built.lp.add_constraint(ConstraintSense::less_equal,
                            static_cast<double>(venue.reviewer_cap(r)), std::move(terms),
                            "cap[" + venue.reviewer_ids[r] + "]");
  }
  return built;
}

Eigen::MatrixXd unpack(const AssignmentLp& built, const Eigen::VectorXd& x, const Venue& venue) {
  Eigen::MatrixXd prob = Eigen::MatrixXd::Zero(venue.num_reviewers(), venue.num_papers());
  for (int r = 0; r < venue.num_reviewers(); ++r)
    for (int p = 0; p < venue.num_papers(); ++p) {
      const int v = built.var_of_pair[static_cast<size_t>(venue.pair_index(r, p))];
      if (v >= 0) prob(r, p) = x(v);
    }
  return prob;
}

}  // namespace

void check_marginal_feasibility(const Eigen::MatrixXd& prob, const Venue& venue, double q,
                                double tol) {
  const int nr = venue.num_reviewers();
  const int np = venue.num_papers();
  if (prob.rows() != nr || prob.cols() != np)
    throw SolverError("marginal matrix shape mismatch");
  for (int r = 0; r < nr; ++r)
    for (int p = 0; p < np; ++p) {
      const double v = prob(r, p);
      if (venue.conflict(r, p) && std::abs(v) > tol)
        throw SolverError("conflict pair " + venue.pair_name(r, p) + " has probability");
      if (v < -tol || v > q + tol)
        throw SolverError("pair " + venue.pair_name(r, p) + " probability outside [0, q]");
    }
  for (int p = 0; p < np; ++p) {
    if (std::abs(prob.col(p).sum() - venue.paper_load) > tol)
      throw SolverError("paper '" + venue.paper_ids[p] + "' load not met");
  }
  for (int r = 0; r < nr; ++r) {
    if (prob.row(r).sum() > venue.reviewer_cap(r) + tol)
      throw SolverError("reviewer '" + venue.reviewer_ids[r] + "' over cap");
  }
}

Eigen::MatrixXd deterministic_assignment(const Eigen::MatrixXd& similarity, const Venue& venue) {
  const AssignmentLp built = build_assignment_lp(similarity, venue, 1.0);
  const LpSolution sol = solve_lp(built.lp);
  Eigen::MatrixXd z = unpack(built, sol.x, venue);
  // A vertex of this polytope is integral; if the solver ever hands back a
  // fractional optimum, cancel cycles in the objective-neutral direction.
  bool fractional = false;
  for (int r = 0; r < venue.num_reviewers() && !fractional; ++r)
    for (int p = 0; p < venue.num_papers(); ++p)
      if (std::abs(z(r, p) - std::round(z(r, p))) > 1e-7) {
        fractional = true;
        break;
      }
  if (fractional) z = round_greedy(z, venue, similarity);
  for (int r = 0; r < venue.num_reviewers(); ++r)
    for (int p = 0; p < venue.num_papers(); ++p) z(r, p) = std::round(z(r, p));
  check_marginal_feasibility(z, venue, 1.0);
  return z;
}

MarginalMatrix randomized_assignment(const Eigen::MatrixXd& similarity, const Venue& venue,
                                     double q) {
  if (!(q > 0.0 && q <= 1.0)) throw ValidationError("q must lie in (0, 1]");
  const AssignmentLp built = build_assignment_lp(similarity, venue, q);
  const LpSolution sol = solve_lp(built.lp);
  MarginalMatrix out;
  out.prob = unpack(built, sol.x, venue);
  out.objective = sol.objective;
  out.params.q = q;
  check_marginal_feasibility(out.prob, venue, q);
  return out;
}

double assignment_objective(const Eigen::MatrixXd& similarity, const Venue& venue, double q) {
  const AssignmentLp built = build_assignment_lp(similarity, venue, q);
  return solve_lp(built.lp).objective;
}

Eigen::MatrixXd perturb_tpdp(const Eigen::MatrixXd& similarity, const Eigen::MatrixXd& noise,
                             double lambda) {
  if (noise.rows() != similarity.rows() || noise.cols() != similarity.cols())
    throw ValidationError("noise matrix shape mismatch");
  return (1.0 - lambda) * similarity + lambda * noise;
}

Eigen::MatrixXd tpdp_noise_matrix(const Venue& venue, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd noise(venue.num_reviewers(), venue.num_papers());
  for (int r = 0; r < venue.num_reviewers(); ++r)
    for (int p = 0; p < venue.num_papers(); ++p)
      noise(r, p) = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return noise;
}

AaaiPerturbResult perturb_aaai(const Eigen::MatrixXd& similarity, const Venue& venue,
                               const BoolGrid& on_policy_support, double q, double tolerance) {
  const double base_objective = assignment_objective(similarity, venue, q);

  AaaiPerturbResult result;
  for (const double epsilon : {1e-3, 1e-6, 1e-9}) {
    Eigen::MatrixXd penalized = similarity;
    for (int r = 0; r < venue.num_reviewers(); ++r)
      for (int p = 0; p < venue.num_papers(); ++p)
        if (!on_policy_support(r, p)) penalized(r, p) -= epsilon;
    const AssignmentLp built = build_assignment_lp(penalized, venue, q);
    const LpSolution sol = solve_lp(built.lp);
    // Gap is measured in the unpenalized similarities.
    const Eigen::MatrixXd prob = unpack(built, sol.x, venue);
    const double achieved = (prob.array() * similarity.array()).sum();
    const double gap = base_objective - achieved;
    result.similarity = penalized;
    result.epsilon = epsilon;
    result.similarity_gap = gap;
    result.within_tolerance = gap <= tolerance;
    if (result.within_tolerance) return result;
  }
  return result;  // 1e-9 fallback, flagged as out of tolerance
}

}  // namespace offrev
