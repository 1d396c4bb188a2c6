#include "offrev/bounds.hpp"

#include <algorithm>
#include <cmath>

#include "offrev/lp.hpp"

namespace offrev {

CovariateTable build_covariates(const Venue& venue, const PairTable& pairs,
                                const BidScheme& scheme, double lambda_ref) {
  const int nr = venue.num_reviewers();
  const int np = venue.num_papers();
  const bool any_subject = pairs.has_subject.any();

  CovariateTable table;
  table.dim_names = {"text"};
  if (any_subject) table.dim_names.push_back("subject");
  table.dim_names.push_back("bid");
  const int dims = static_cast<int>(table.dim_names.size());
  table.values = Eigen::MatrixXd::Zero(venue.num_pairs(), dims);
  table.present = bool_grid(venue.num_pairs(), dims);

  for (int r = 0; r < nr; ++r) {
    for (int p = 0; p < np; ++p) {
      const int i = venue.pair_index(r, p);
      int d = 0;
      if (pairs.has_text(r, p)) {
        table.values(i, d) = pairs.text_sim(r, p);
        table.present(i, d) = true;
      }
      ++d;
      if (any_subject) {
        if (pairs.has_subject(r, p)) {
          table.values(i, d) = pairs.subject(r, p);
          table.present(i, d) = true;
        }
        ++d;
      }
      // Bids always carry a value: a missing label means the scheme default.
      table.values(i, d) = bid_value(pairs.bid_label(r, p), scheme, lambda_ref);
      table.present(i, d) = true;
    }
  }
  return table;
}

DistanceSpec DistanceSpec::over_pairs(const CovariateTable& covariates,
                                      const std::vector<int>& pair_indices) {
  const int dims = covariates.dims();
  DistanceSpec spec;
  spec.range_lo = Eigen::VectorXd::Constant(dims, std::numeric_limits<double>::infinity());
  spec.range_hi = Eigen::VectorXd::Constant(dims, -std::numeric_limits<double>::infinity());
  for (const int i : pair_indices) {
    for (int d = 0; d < dims; ++d) {
      if (!covariates.present(i, d)) continue;
      spec.range_lo(d) = std::min(spec.range_lo(d), covariates.values(i, d));
      spec.range_hi(d) = std::max(spec.range_hi(d), covariates.values(i, d));
    }
  }
  for (int d = 0; d < dims; ++d) {
    if (!std::isfinite(spec.range_lo(d))) {  // dimension entirely missing on U
      spec.range_lo(d) = 0.0;
      spec.range_hi(d) = 0.0;
    }
  }
  return spec;
}

double covariate_distance(const CovariateTable& covariates, int pair_i, int pair_j,
                          const DistanceSpec& spec) {
  const int dims = covariates.dims();
  double sum = 0.0;
  for (int d = 0; d < dims; ++d) {
    if (!covariates.present(pair_i, d) || !covariates.present(pair_j, d)) {
      sum += 1.0;
      continue;
    }
    const double range = spec.range_hi(d) - spec.range_lo(d);
    if (range <= 0.0) continue;  // constant dimension: equal after normalization
    sum += std::abs(covariates.values(pair_i, d) - covariates.values(pair_j, d)) / range;
  }
  return sum / dims;
}

std::vector<int> surrogate_universe(const PairPartition& partition) {
  std::vector<int> universe;
  const int np = static_cast<int>(partition.assigned.cols());
  for (int r = 0; r < partition.assigned.rows(); ++r)
    for (int p = 0; p < partition.assigned.cols(); ++p) {
      const bool in_u = partition.observed(r, p) || partition.attrition(r, p) ||
                        partition.absent(r, p) || partition.violations(r, p);
      if (in_u) universe.push_back(r * np + p);
    }
  return universe;
}

DominanceGraph dominance_graph(const CovariateTable& covariates,
                               const std::vector<int>& pair_indices) {
  const int n = static_cast<int>(pair_indices.size());
  const int dims = covariates.dims();
  DominanceGraph graph;
  graph.num_nodes = n;

  auto dominates = [&](int a, int b) {
    bool strict = false;
    for (int d = 0; d < dims; ++d) {
      if (!covariates.present(pair_indices[static_cast<size_t>(a)], d) ||
          !covariates.present(pair_indices[static_cast<size_t>(b)], d))
        return false;
      const double va = covariates.values(pair_indices[static_cast<size_t>(a)], d);
      const double vb = covariates.values(pair_indices[static_cast<size_t>(b)], d);
      if (va < vb) return false;
      if (va > vb) strict = true;
    }
    return strict;
  };

  std::vector<std::vector<int>> succ(static_cast<size_t>(n));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (a != b && dominates(a, b)) succ[static_cast<size_t>(a)].push_back(b);
  for (const auto& s : succ) graph.edges_before_reduction += static_cast<int>(s.size());

  // Transitive reduction: drop a -> b when some other direct successor w of a
  // reaches b. Dominance is transitive, so w reaches b iff w dominates b.
  for (int a = 0; a < n; ++a) {
    for (const int b : succ[static_cast<size_t>(a)]) {
      bool redundant = false;
      for (const int w : succ[static_cast<size_t>(a)]) {
        if (w != b && dominates(w, b)) {
          redundant = true;
          break;
        }
      }
      if (!redundant) graph.edges.push_back({a, b});
    }
  }
  return graph;
}

namespace {

struct UniverseView {
  std::vector<int> pairs;          // venue pair indices
  std::vector<int> observed_slot;  // slots within `pairs` that are observed
  Eigen::VectorXd observed_value;  // Y for those slots
  Eigen::VectorXd objective_coef;  // secondary-objective weight per slot
};

UniverseView build_universe(const EstimationContext& ctx, const BoundsConfig& config) {
  const PairPartition& part = *ctx.partition;
  const Venue& venue = *ctx.venue;
  UniverseView view;
  view.pairs = surrogate_universe(part);
  const int n = static_cast<int>(view.pairs.size());
  view.objective_coef = Eigen::VectorXd::Zero(n);
  std::vector<double> observed_values;
  for (int s = 0; s < n; ++s) {
    const auto [r, p] = venue.pair_from_index(view.pairs[static_cast<size_t>(s)]);
    if (part.observed(r, p)) {
      view.observed_slot.push_back(s);
      observed_values.push_back(ctx.outcomes->value(r, p));
    } else if (part.violations(r, p)) {
      view.objective_coef(s) = (*ctx.p_off)(r, p);
    } else if (part.attrition(r, p) ||
               (part.absent(r, p) && config.include_absent_in_objective)) {
      // Only assigned pairs feed the estimate; unassigned ones carry weight 0.
      view.objective_coef(s) = ctx.weights->w(r, p) * part.assigned(r, p);
    }
  }
  view.observed_value.resize(static_cast<Eigen::Index>(observed_values.size()));
  for (size_t o = 0; o < observed_values.size(); ++o)
    view.observed_value(static_cast<Eigen::Index>(o)) = observed_values[o];
  return view;
}

struct SurrogateProgram {
  LinearProgram lp;
  std::vector<int> t_var;             // per universe slot
  std::vector<int> abs_vars;          // slack pair (pos, neg) interleaved
  int num_side_constraints = 0;       // dominance / Lipschitz rows
};

SurrogateProgram build_surrogate_lp(const UniverseView& view, const OutcomeScale& scale,
                                    const std::vector<std::pair<int, int>>& le_edges,
                                    const std::vector<double>& le_rhs) {
  SurrogateProgram prog;
  const int n = static_cast<int>(view.pairs.size());
  prog.t_var.resize(static_cast<size_t>(n));
  for (int s = 0; s < n; ++s)
    prog.t_var[static_cast<size_t>(s)] =
        prog.lp.add_variable(scale.y_min, scale.y_max, 0.0, "t" + std::to_string(s));
  for (size_t o = 0; o < view.observed_slot.size(); ++o) {
    const int s = view.observed_slot[o];
    const int pos = prog.lp.add_variable(0.0, kInf, 0.0, "pos" + std::to_string(s));
    const int neg = prog.lp.add_variable(0.0, kInf, 0.0, "neg" + std::to_string(s));
    prog.abs_vars.push_back(pos);
    prog.abs_vars.push_back(neg);
    // t - pos + neg = y
    prog.lp.add_constraint(ConstraintSense::equal, view.observed_value(static_cast<Eigen::Index>(o)),
                           {{prog.t_var[static_cast<size_t>(s)], 1.0}, {pos, -1.0}, {neg, 1.0}},
                           "fit" + std::to_string(s));
  }
  for (size_t e = 0; e < le_edges.size(); ++e) {
    const auto [i, j] = le_edges[e];
    prog.lp.add_constraint(ConstraintSense::less_equal, le_rhs[e],
                           {{prog.t_var[static_cast<size_t>(i)], 1.0},
                            {prog.t_var[static_cast<size_t>(j)], -1.0}},
                           "side" + std::to_string(e));
    ++prog.num_side_constraints;
  }
  return prog;
}

SurrogateSolution solve_two_level(SurrogateProgram& prog, const UniverseView& view,
                                  const BoundsConfig& config, bool upper) {
  const double sign = upper ? 1.0 : -1.0;  // maximize for upper, minimize for lower

  Eigen::VectorXd t_values;
  if (config.lexicographic) {
    // Primary: minimize total deviation from the observed outcomes.
    prog.lp.maximize = false;
    for (size_t j = 0; j < prog.lp.objective.size(); ++j) prog.lp.objective[j] = 0.0;
    for (const int v : prog.abs_vars) prog.lp.set_objective(v, 1.0);
    const LpSolution primary = solve_lp(prog.lp);

    // Secondary: pin the primary optimum as an equality and optimize the
    // weighted surrogate sum.
    std::vector<LinearProgram::Term> pin;
    pin.reserve(prog.abs_vars.size());
    for (const int v : prog.abs_vars) pin.push_back({v, 1.0});
    LinearProgram second = prog.lp;
    second.add_constraint(ConstraintSense::equal, primary.objective, std::move(pin), "pin");
    for (size_t j = 0; j < second.objective.size(); ++j) second.objective[j] = 0.0;
    for (size_t s = 0; s < prog.t_var.size(); ++s)
      second.set_objective(prog.t_var[s], view.objective_coef(static_cast<Eigen::Index>(s)));
    second.maximize = upper;
    const LpSolution secondary = solve_lp(second);
    t_values = secondary.x;
  } else {
    // Single weighted program: Psi * primary -/+ secondary.
    prog.lp.maximize = false;
    for (size_t j = 0; j < prog.lp.objective.size(); ++j) prog.lp.objective[j] = 0.0;
    for (const int v : prog.abs_vars) prog.lp.set_objective(v, config.psi);
    for (size_t s = 0; s < prog.t_var.size(); ++s)
      prog.lp.set_objective(prog.t_var[s],
                            -sign * view.objective_coef(static_cast<Eigen::Index>(s)));
    const LpSolution sol = solve_lp(prog.lp);
    t_values = sol.x;
  }

  SurrogateSolution out;
  out.pair_indices = view.pairs;
  out.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(view.pairs.size()));
  for (size_t s = 0; s < prog.t_var.size(); ++s)
    out.values(static_cast<Eigen::Index>(s)) = t_values(prog.t_var[s]);
  for (size_t o = 0; o < view.observed_slot.size(); ++o)
    out.primary_objective += std::abs(out.values(view.observed_slot[o]) -
                                      view.observed_value(static_cast<Eigen::Index>(o)));
  out.secondary_objective = out.values.dot(view.objective_coef);
  return out;
}

// Re-verify the returned surrogates against every constraint, independently
// of the solver's own report.
void verify_surrogates(const SurrogateSolution& sol, const OutcomeScale& scale,
                       const std::vector<std::pair<int, int>>& le_edges,
                       const std::vector<double>& le_rhs, double tol = 1e-8) {
  for (Eigen::Index s = 0; s < sol.values.size(); ++s) {
    if (sol.values(s) < scale.y_min - tol || sol.values(s) > scale.y_max + tol)
      throw SolverError("surrogate value escapes the outcome scale");
  }
  for (size_t e = 0; e < le_edges.size(); ++e) {
    const auto [i, j] = le_edges[e];
    if (sol.values(i) - sol.values(j) > le_rhs[e] + tol)
      throw SolverError("surrogate solution violates a side constraint");
  }
}

ImputationPlan plan_from_surrogates(const EstimationContext& ctx, const SurrogateSolution& sol,
                                    std::string provenance) {
  const Venue& venue = *ctx.venue;
  const PairPartition& part = *ctx.partition;
  ImputationPlan plan;
  plan.value = Eigen::MatrixXd::Zero(venue.num_reviewers(), venue.num_papers());
  plan.covered = part.attrition || part.violations;
  for (size_t s = 0; s < sol.pair_indices.size(); ++s) {
    const auto [r, p] = venue.pair_from_index(sol.pair_indices[s]);
    if (plan.covered(r, p)) plan.value(r, p) = sol.values(static_cast<Eigen::Index>(s));
  }
  plan.provenance = std::move(provenance);
  return plan;
}

// The mean outcome is only required when an absent pair actually contributes.
std::optional<double> mean_outcome_if_needed(const EstimationContext& ctx) {
  const PairPartition& part = *ctx.partition;
  bool needed = false;
  for (int r = 0; r < part.absent.rows() && !needed; ++r)
    for (int p = 0; p < part.absent.cols(); ++p)
      if (part.absent(r, p) && part.assigned(r, p) == 1.0 && ctx.weights->w(r, p) != 0.0) {
        needed = true;
        break;
      }
  if (!needed) return std::nullopt;
  return mean_observed(*ctx.outcomes, *ctx.weights, part);
}

BoundsResult assemble(const EstimationContext& ctx, const ImputationPlan& lo_plan,
                      const ImputationPlan& up_plan, std::string method) {
  BoundsResult result;
  result.method = std::move(method);
  const int n = ctx.venue->total_reviews();
  result.lower = ht_estimate(*ctx.partition, *ctx.outcomes, *ctx.weights, lo_plan, *ctx.p_off, n);
  result.upper = ht_estimate(*ctx.partition, *ctx.outcomes, *ctx.weights, up_plan, *ctx.p_off, n);
  if (ctx.covariance != nullptr) {
    result.lower.variance = variance_estimate(*ctx.covariance, *ctx.venue, *ctx.partition,
                                              *ctx.outcomes, *ctx.weights, lo_plan, n);
    result.upper.variance = variance_estimate(*ctx.covariance, *ctx.venue, *ctx.partition,
                                              *ctx.outcomes, *ctx.weights, up_plan, n);
  }
  result.interval = imbens_manski_interval(result.lower.point, result.upper.point,
                                           result.lower.variance, result.upper.variance, n,
                                           ctx.alpha);
  return result;
}

}  // namespace

BoundsResult manski_bounds(const EstimationContext& ctx) {
  ctx.scale.validate();
  const auto ybar = mean_outcome_if_needed(ctx);
  const auto lo_plan =
      ImputationPlan::constant(*ctx.partition, ctx.scale.y_min, ybar, "manski:y_min");
  const auto up_plan =
      ImputationPlan::constant(*ctx.partition, ctx.scale.y_max, ybar, "manski:y_max");
  return assemble(ctx, lo_plan, up_plan, "manski");
}

BoundsResult monotonicity_bounds(const EstimationContext& ctx, const CovariateTable& covariates,
                                 const BoundsConfig& config) {
  ctx.scale.validate();
  const UniverseView view = build_universe(ctx, config);
  const DominanceGraph graph = dominance_graph(covariates, view.pairs);

  std::vector<std::pair<int, int>> le_edges;  // t_j - t_i <= 0  (i dominates j)
  std::vector<double> le_rhs;
  for (const auto& [i, j] : graph.edges) {
    le_edges.push_back({j, i});
    le_rhs.push_back(0.0);
  }

  BoundsResult result;
  {
    SurrogateProgram prog = build_surrogate_lp(view, ctx.scale, le_edges, le_rhs);
    SurrogateSolution lo = solve_two_level(prog, view, config, /*upper=*/false);
    verify_surrogates(lo, ctx.scale, le_edges, le_rhs);
    SurrogateProgram prog_up = build_surrogate_lp(view, ctx.scale, le_edges, le_rhs);
    SurrogateSolution up = solve_two_level(prog_up, view, config, /*upper=*/true);
    verify_surrogates(up, ctx.scale, le_edges, le_rhs);

    const auto ybar = mean_outcome_if_needed(ctx);
    auto lo_plan = plan_from_surrogates(ctx, lo, "mono:lower");
    auto up_plan = plan_from_surrogates(ctx, up, "mono:upper");
    lo_plan.mean_outcome = ybar;
    up_plan.mean_outcome = ybar;
    result = assemble(ctx, lo_plan, up_plan, "mono");
    result.lower_surrogates = std::move(lo);
    result.upper_surrogates = std::move(up);
  }
  result.constraints_before = graph.edges_before_reduction;
  result.constraints_after = static_cast<int>(graph.edges.size());
  return result;
}

BoundsResult lipschitz_bounds(const EstimationContext& ctx, const CovariateTable& covariates,
                              double lipschitz_constant, const BoundsConfig& config) {
  ctx.scale.validate();
  if (!(lipschitz_constant > 0.0))
    throw ValidationError("Lipschitz constant must be positive");
  const UniverseView view = build_universe(ctx, config);
  const DistanceSpec spec = DistanceSpec::over_pairs(covariates, view.pairs);

  const int n = static_cast<int>(view.pairs.size());
  std::vector<std::pair<int, int>> le_edges;
  std::vector<double> le_rhs;
  int before = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double bound =
          lipschitz_constant * covariate_distance(covariates, view.pairs[static_cast<size_t>(i)],
                                                  view.pairs[static_cast<size_t>(j)], spec);
      before += 2;
      if (bound >= ctx.scale.width()) continue;  // implied by the box
      le_edges.push_back({i, j});
      le_rhs.push_back(bound);
      le_edges.push_back({j, i});
      le_rhs.push_back(bound);
    }
  }

  SurrogateProgram prog = build_surrogate_lp(view, ctx.scale, le_edges, le_rhs);
  SurrogateSolution lo = solve_two_level(prog, view, config, /*upper=*/false);
  verify_surrogates(lo, ctx.scale, le_edges, le_rhs);
  SurrogateProgram prog_up = build_surrogate_lp(view, ctx.scale, le_edges, le_rhs);
  SurrogateSolution up = solve_two_level(prog_up, view, config, /*upper=*/true);
  verify_surrogates(up, ctx.scale, le_edges, le_rhs);

  const auto ybar = mean_outcome_if_needed(ctx);
  auto lo_plan = plan_from_surrogates(ctx, lo, "lip:lower");
  auto up_plan = plan_from_surrogates(ctx, up, "lip:upper");
  lo_plan.mean_outcome = ybar;
  up_plan.mean_outcome = ybar;
  BoundsResult result = assemble(ctx, lo_plan, up_plan, "lip");
  result.lipschitz_constant = lipschitz_constant;
  result.constraints_before = before;
  result.constraints_after = static_cast<int>(le_edges.size());
  result.lower_surrogates = std::move(lo);
  result.upper_surrogates = std::move(up);
  return result;
}

LipschitzCalibration calibrate_lipschitz(const EstimationContext& ctx,
                                         const CovariateTable& covariates,
                                         const DistanceSpec& spec,
                                         const std::vector<double>& targets) {
  const PairPartition& part = *ctx.partition;
  const Venue& venue = *ctx.venue;
  std::vector<int> observed;
  std::vector<double> y;
  for (int r = 0; r < part.observed.rows(); ++r)
    for (int p = 0; p < part.observed.cols(); ++p)
      if (part.observed(r, p)) {
        observed.push_back(venue.pair_index(r, p));
        y.push_back(ctx.outcomes->value(r, p));
      }
  if (observed.size() < 2)
    throw ValidationError("Lipschitz calibration needs at least two observed pairs");

  LipschitzCalibration cal;
  std::vector<double> ratios;
  for (size_t a = 0; a < observed.size(); ++a) {
    for (size_t b = a + 1; b < observed.size(); ++b) {
      const double d = covariate_distance(covariates, observed[a], observed[b], spec);
      const double dy = std::abs(y[a] - y[b]);
      if (d <= 0.0) {
        if (dy > 0.0) ++cal.hard_violations;
        continue;
      }
      ratios.push_back(dy / d);
    }
  }
  if (ratios.empty()) throw ValidationError("all observed covariate distances are zero");

  std::sort(ratios.begin(), ratios.end());
  cal.grid = ratios;
  cal.grid.erase(std::unique(cal.grid.begin(), cal.grid.end()), cal.grid.end());

  const double total = static_cast<double>(ratios.size());
  for (const double target : targets) {
    double chosen = cal.grid.back();
    for (const double candidate : cal.grid) {
      const auto above = ratios.end() - std::upper_bound(ratios.begin(), ratios.end(), candidate);
      const double fraction = static_cast<double>(above) / total;
      const bool admissible = target > 0.0 ? fraction < target : fraction == 0.0;
      if (admissible) {
        chosen = candidate;
        break;
      }
    }
    cal.entries.push_back({target, chosen});
  }
  return cal;
}

}  // namespace offrev
