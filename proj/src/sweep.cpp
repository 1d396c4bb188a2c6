#include "offrev/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "offrev/estimator.hpp"
#include "offrev/io.hpp"
#include "offrev/sampler.hpp"
#include "offrev/similarity.hpp"

namespace offrev {

namespace {

constexpr const char* kVersion = "offrev 0.1.0";

PolicyParams with_value(PolicyParams base, const std::string& parameter, double value) {
  if (parameter == "w_text")
    base.w_text = value;
  else if (parameter == "lambda_bid")
    base.lambda_bid = value;
  else if (parameter == "q")
    base.q = value;
  else
    throw ValidationError("unknown sweep parameter '" + parameter + "'");
  base.validate();
  return base;
}

struct CellOutput {
  std::vector<SweepRow> rows;
  std::optional<std::string> error;
};

EstimationContext make_context(const StudyInputs& study, const PairPartition& partition,
                               const OutcomeTable& table, const WeightTable& weights,
                               const Eigen::MatrixXd& p_off) {
  EstimationContext ctx;
  ctx.venue = study.venue;
  ctx.partition = &partition;
  ctx.outcomes = &table;
  ctx.weights = &weights;
  ctx.p_off = &p_off;
  ctx.scale = study.scale;
  ctx.covariance = study.covariance;
  ctx.alpha = study.alpha;
  return ctx;
}

SweepRow bounds_row(double value, const BoundsResult& bounds) {
  SweepRow row;
  row.value = value;
  row.method = bounds.method;
  row.lo = bounds.lower.point;
  row.hi = bounds.upper.point;
  row.ci_lo = bounds.interval.lower;
  row.ci_hi = bounds.interval.upper;
  row.counts = bounds.lower.counts;
  return row;
}

SweepRow point_row(double value, const std::string& method, const EstimateReport& report,
                   double alpha) {
  SweepRow row;
  row.value = value;
  row.method = method;
  row.point = report.point;
  row.lo = report.point;
  row.hi = report.point;
  const auto interval = imbens_manski_interval(report.point, report.point, report.variance,
                                               report.variance, report.total_reviews, alpha);
  row.ci_lo = interval.lower;
  row.ci_hi = interval.upper;
  row.counts = report.counts;
  return row;
}

// Point estimate with the mean-imputation plan.
EstimateReport mean_imputation_estimate(const StudyInputs& study,
                                        const PairPartition& partition,
                                        const OutcomeTable& table, const WeightTable& weights,
                                        const Eigen::MatrixXd& p_off) {
  const double ybar = mean_observed(table, weights, partition);
  const auto plan = ImputationPlan::constant(partition, ybar, ybar, "mean");
  auto report = ht_estimate(partition, table, weights, plan, p_off,
                            study.venue->total_reviews());
  if (study.covariance != nullptr)
    report.variance = variance_estimate(*study.covariance, *study.venue, partition, table,
                                        weights, plan, study.venue->total_reviews());
  return report;
}

EstimateReport model_imputation_estimate(const StudyInputs& study, ImputerKind kind,
                                         const PairPartition& partition,
                                         const OutcomeTable& table, const WeightTable& weights,
                                         const Eigen::MatrixXd& p_off, std::uint64_t seed) {
  const auto points = observed_points(*study.venue, partition, table);
  const int folds = std::min<int>(10, std::max<int>(2, static_cast<int>(points.size())));
  const TrainedImputer model =
      fit_imputer(kind, *study.venue, *study.pairs, points, study.scale, {}, folds, seed);

  std::vector<std::pair<int, int>> targets;
  for (int r = 0; r < study.venue->num_reviewers(); ++r)
    for (int p = 0; p < study.venue->num_papers(); ++p)
      if (partition.attrition(r, p) || partition.violations(r, p)) targets.push_back({r, p});
  const ImputedValues imputed = impute_with_model(model, *study.venue, *study.pairs, targets);

  ImputationPlan plan;
  plan.value = Eigen::MatrixXd::Zero(study.venue->num_reviewers(), study.venue->num_papers());
  plan.covered = partition.attrition || partition.violations;
  for (size_t i = 0; i < targets.size(); ++i)
    plan.value(targets[i].first, targets[i].second) = imputed.values(static_cast<Eigen::Index>(i));
  plan.provenance = "model:" + to_string(kind);
  bool need_ybar = false;
  for (int r = 0; r < study.venue->num_reviewers(); ++r)
    for (int p = 0; p < study.venue->num_papers(); ++p)
      if (partition.absent(r, p)) need_ybar = true;
  if (need_ybar) plan.mean_outcome = mean_observed(table, weights, partition);

  auto report =
      ht_estimate(partition, table, weights, plan, p_off, study.venue->total_reviews());
  if (study.covariance != nullptr)
    report.variance = variance_estimate(*study.covariance, *study.venue, partition, table,
                                        weights, plan, study.venue->total_reviews());
  return report;
}

CellOutput run_cell(const SweepSpec& spec, const StudyInputs& study, double value,
                    const Eigen::MatrixXd& off_similarity) {
  CellOutput cell;
  try {
    const PolicyParams params = with_value(spec.base, spec.parameter, value);
    MarginalMatrix off = randomized_assignment(off_similarity, *study.venue, params.q);
    off.params = params;

    const PairPartition partition =
        classify_pairs(*study.venue, *study.p_on, off.prob, *study.outcomes);
    const OutcomeTable table = outcome_table(*study.venue, *study.outcomes);
    const WeightTable weights = importance_weights(*study.p_on, off.prob, partition);
    const EstimationContext ctx = make_context(study, partition, table, weights, off.prob);

    for (const std::string& method : spec.methods) {
      if (method == "mean") {
        cell.rows.push_back(point_row(
            value, method, mean_imputation_estimate(study, partition, table, weights, off.prob),
            study.alpha));
      } else if (method == "model:clf-logistic" || method == "model:cf-knn") {
        const ImputerKind kind = imputer_kind_from_string(method.substr(6));
        cell.rows.push_back(point_row(value, method,
                                      model_imputation_estimate(study, kind, partition, table,
                                                                weights, off.prob, spec.seed),
                                      study.alpha));
      } else if (method == "manski") {
        cell.rows.push_back(bounds_row(value, manski_bounds(ctx)));
      } else if (method == "mono") {
        const auto covariates =
            build_covariates(*study.venue, *study.pairs,
                             scheme_for_family(spec.base.family), spec.base.lambda_bid);
        cell.rows.push_back(
            bounds_row(value, monotonicity_bounds(ctx, covariates, study.bounds_config)));
      } else if (method == "lip") {
        const auto covariates =
            build_covariates(*study.venue, *study.pairs,
                             scheme_for_family(spec.base.family), spec.base.lambda_bid);
        cell.rows.push_back(bounds_row(
            value,
            lipschitz_bounds(ctx, covariates, spec.lipschitz_constant, study.bounds_config)));
      } else {
        throw ValidationError("unknown sweep method '" + method + "'");
      }
    }
  } catch (const std::exception& e) {
    cell.error = "value " + format_double(value) + ": " + e.what();
  }
  return cell;
}

}  // namespace

void SweepSpec::validate() const {
  base.validate();
  if (grid.empty()) throw ValidationError("sweep grid is empty");
  for (const double v : grid) with_value(base, parameter, v);  // domain check
  if (methods.empty()) throw ValidationError("sweep has no methods");
}

SweepResult run_sweep(const SweepSpec& spec, const StudyInputs& study, TieBreakKind tie_break) {
  spec.validate();
  SweepResult result;
  result.parameter = spec.parameter;
  result.seed = spec.seed;
  result.tie_break = tie_break;

  // The study-wide tie-breaking noise is fixed once, before any cell; the
  // aaai variant picks its epsilon per policy.
  Eigen::MatrixXd noise;
  const BoolGrid support = study.p_on->array() > 0.0;
  if (tie_break == TieBreakKind::tpdp)
    noise = tpdp_noise_matrix(*study.venue, spec.seed);
  result.tie_break_epsilons.assign(spec.grid.size(), 0.0);

  std::vector<CellOutput> cells(spec.grid.size());
  const auto run_one = [&](size_t i) {
    try {
      const PolicyParams params = with_value(spec.base, spec.parameter, spec.grid[i]);
      Eigen::MatrixXd similarity = similarity_matrix(*study.venue, *study.pairs, params);
      if (tie_break == TieBreakKind::tpdp) {
        similarity = perturb_tpdp(similarity, noise);
      } else if (tie_break == TieBreakKind::aaai) {
        const AaaiPerturbResult perturbed =
            perturb_aaai(similarity, *study.venue, support, params.q);
        similarity = perturbed.similarity;
        result.tie_break_epsilons[i] = perturbed.epsilon;
      }
      cells[i] = run_cell(spec, study, spec.grid[i], similarity);
    } catch (const std::exception& e) {
      cells[i].error = "value " + format_double(spec.grid[i]) + ": " + e.what();
    }
  };
  const int workers = std::max(1, std::min<int>(spec.threads, static_cast<int>(spec.grid.size())));
  if (workers == 1) {
    for (size_t i = 0; i < spec.grid.size(); ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (size_t i = static_cast<size_t>(w); i < spec.grid.size(); i += workers) run_one(i);
      });
    for (auto& t : pool) t.join();
  }

  for (auto& cell : cells) {
    if (cell.error)
      result.cell_errors.push_back(*cell.error);
    else
      result.rows.insert(result.rows.end(), cell.rows.begin(), cell.rows.end());
  }
  return result;
}

std::vector<CostRow> cost_of_randomization(const Eigen::MatrixXd& similarity, const Venue& venue,
                                           const std::vector<double>& q_grid) {
  for (const double q : q_grid)
    if (!(q > 0.0 && q <= 1.0)) throw ValidationError("q grid values must lie in (0, 1]");
  const double base = assignment_objective(similarity, venue, 1.0);
  std::vector<CostRow> rows;
  for (const double q : q_grid) {
    CostRow row;
    row.q = q;
    try {
      row.objective = assignment_objective(similarity, venue, q);
      row.ratio = base != 0.0 ? row.objective / base : 1.0;
    } catch (const InfeasibleError&) {
      row.feasible = false;
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<PowerRow> bad_policy_analysis(const StudyInputs& study,
                                          const Eigen::MatrixXd& similarity,
                                          double lipschitz_constant) {
  const Venue& venue = *study.venue;
  // Pairs unsupported on-policy become conflicts; both candidate policies
  // then live inside the observed support.
  Venue masked = venue;
  for (int r = 0; r < venue.num_reviewers(); ++r)
    for (int p = 0; p < venue.num_papers(); ++p)
      if ((*study.p_on)(r, p) <= 0.0) masked.conflict(r, p) = true;
  masked.validate();

  const OutcomeTable table = outcome_table(venue, *study.outcomes);
  const auto covariates = build_covariates(
      venue, *study.pairs,
      venue.bid_scheme.empty() ? BidScheme::aaai() : BidScheme::from_name(venue.bid_scheme),
      1.0);

  std::vector<PowerRow> rows;
  for (const bool minimize : {false, true}) {
    Eigen::MatrixXd objective = minimize ? (-similarity).eval() : similarity;
    const Eigen::MatrixXd z = deterministic_assignment(objective, masked);

    PowerRow row;
    row.policy = minimize ? "min-similarity" : "max-similarity";
    const PairPartition partition = classify_pairs(venue, *study.p_on, z, *study.outcomes);
    const WeightTable weights = importance_weights(*study.p_on, z, partition);
    const EstimationContext ctx = make_context(study, partition, table, weights, z);
    try {
      row.point_mean = mean_imputation_estimate(study, partition, table, weights, z).point;
    } catch (const DataError&) {
      // no observed pair carries off-policy weight; the bound methods below
      // still apply
    }
    row.manski = manski_bounds(ctx);
    row.mono = monotonicity_bounds(ctx, covariates, study.bounds_config);
    row.lip = lipschitz_bounds(ctx, covariates, lipschitz_constant, study.bounds_config);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_report_csv(const SweepResult& result, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "param,value,method,point,lo,hi,ci_lo,ci_hi\n";
  for (const auto& row : result.rows) {
    out << result.parameter << ',' << format_double(row.value) << ',' << row.method << ',';
    if (row.point) out << format_double(*row.point);
    out << ',' << format_double(row.lo) << ',' << format_double(row.hi) << ','
        << format_double(row.ci_lo) << ',' << format_double(row.ci_hi) << '\n';
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw ValidationError("cannot write '" + path.string() + "'");
  file << out.str();
}

void write_manifest(const SweepResult& result, const StudyInputs& study,
                    const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["version"] = kVersion;
  doc["parameter"] = result.parameter;
  doc["seed"] = result.seed;
  doc["tie_break"] = result.tie_break == TieBreakKind::none
                         ? "none"
                         : (result.tie_break == TieBreakKind::tpdp ? "tpdp" : "aaai");
  if (result.tie_break == TieBreakKind::aaai)
    doc["tie_break_epsilons"] = result.tie_break_epsilons;
  doc["cell_errors"] = result.cell_errors;
  doc["alpha"] = study.alpha;
  doc["scale"] = {{"y_min", study.scale.y_min}, {"y_max", study.scale.y_max}};
  if (study.covariance != nullptr) {
    doc["covariance"] = {{"n_samples", study.covariance->count()},
                         {"seed", study.covariance->seed()}};
  } else {
    doc["covariance"] = nullptr;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw ValidationError("cannot write '" + path.string() + "'");
  file << doc.dump(2) << "\n";
}

}  // namespace offrev
