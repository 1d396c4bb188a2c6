// Command-line front end: validate inputs, solve assignment policies, sample
// covariances, and produce estimates, bounds, sweeps and reports.
//
// Exit codes: 0 success, 2 validation failure, 3 solver failure,
// 4 inconsistent-data failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "offrev/assignment.hpp"
#include "offrev/bounds.hpp"
#include "offrev/domain.hpp"
#include "offrev/estimator.hpp"
#include "offrev/io.hpp"
#include "offrev/models.hpp"
#include "offrev/sampler.hpp"
#include "offrev/similarity.hpp"
#include "offrev/sweep.hpp"
#include "offrev/synth.hpp"

namespace fs = std::filesystem;
using namespace offrev;
using nlohmann::json;

namespace {

struct CommonOptions {
  std::string venue_path, scores_path, outcomes_path;
  std::string on_policy_path, off_policy_path, cov_path;
  std::string config_path;
  double y_min = 0.0, y_max = 0.0;
  std::vector<double> levels;
  bool scale_set = false;
  double alpha = 0.95;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out_dir = ".";
  bool big_psi = false;
  bool exclude_absent = false;
};

void apply_config(CommonOptions& opt) {
  if (opt.config_path.empty()) return;
  std::ifstream in(opt.config_path);
  if (!in) throw ValidationError("cannot open config '" + opt.config_path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ValidationError("config: " + std::string(e.what()));
  }
  if (doc.contains("y_min") && doc.contains("y_max")) {
    opt.y_min = doc["y_min"].get<double>();
    opt.y_max = doc["y_max"].get<double>();
    opt.scale_set = true;
  }
  if (doc.contains("levels")) opt.levels = doc["levels"].get<std::vector<double>>();
  opt.alpha = doc.value("alpha", opt.alpha);
  opt.seed = doc.value("seed", opt.seed);
  opt.threads = doc.value("threads", opt.threads);
  opt.big_psi = doc.value("big_psi", opt.big_psi);
  opt.exclude_absent = doc.value("exclude_absent_from_objective", opt.exclude_absent);
}

OutcomeScale scale_of(const CommonOptions& opt) {
  if (!opt.scale_set) throw ValidationError("an outcome scale is required (--y-min/--y-max)");
  OutcomeScale scale{opt.y_min, opt.y_max, opt.levels};
  scale.validate();
  return scale;
}

BoundsConfig bounds_config_of(const CommonOptions& opt) {
  BoundsConfig config;
  config.lexicographic = !opt.big_psi;
  config.include_absent_in_objective = !opt.exclude_absent;
  return config;
}

void add_scale_flags(CLI::App* cmd, CommonOptions& opt) {
  const auto mark = [&opt](const std::string&) { opt.scale_set = true; };
  cmd->add_option("--y-min", opt.y_min, "Outcome scale lower end")->each(mark);
  cmd->add_option("--y-max", opt.y_max, "Outcome scale upper end")->each(mark);
  cmd->add_option("--levels", opt.levels, "Admissible outcome levels")->delimiter(',');
}

json report_to_json(const EstimateReport& report) {
  return json{{"point", report.point},
              {"variance", report.variance},
              {"n", report.total_reviews},
              {"plan", report.plan_provenance},
              {"counts",
               {{"supported", report.counts.supported},
                {"violations", report.counts.violations},
                {"attrition", report.counts.attrition},
                {"absent", report.counts.absent},
                {"observed", report.counts.observed},
                {"ignored", report.counts.ignored}}}};
}

json bounds_to_json(const BoundsResult& bounds) {
  json doc{{"method", bounds.method},
           {"lower", report_to_json(bounds.lower)},
           {"upper", report_to_json(bounds.upper)},
           {"interval",
            {{"lower", bounds.interval.lower},
             {"upper", bounds.interval.upper},
             {"z", bounds.interval.z}}},
           {"constraints_before_reduction", bounds.constraints_before},
           {"constraints_after_reduction", bounds.constraints_after}};
  if (bounds.method == "lip") doc["L"] = bounds.lipschitz_constant;
  return doc;
}

void write_json(const json& doc, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << doc.dump(2) << "\n";
}

struct EstimationBundle {
  LoadedData data;
  Eigen::MatrixXd p_on, p_off;
  PairPartition partition;
  OutcomeTable table;
  WeightTable weights;
  std::optional<CovarianceAccumulator> covariance;
  OutcomeScale scale;
};

EstimationBundle load_bundle(const CommonOptions& opt, bool need_off, bool need_cov) {
  EstimationBundle bundle;
  bundle.scale = scale_of(opt);
  bundle.data = load_venue(opt.venue_path, opt.scores_path, opt.outcomes_path, &bundle.scale);
  bundle.p_on = read_marginals_csv(opt.on_policy_path, bundle.data.venue);
  if (need_off) {
    bundle.p_off = read_marginals_csv(opt.off_policy_path, bundle.data.venue);
  } else {
    bundle.p_off = bundle.p_on;
  }
  bundle.partition =
      classify_pairs(bundle.data.venue, bundle.p_on, bundle.p_off, bundle.data.outcomes);
  bundle.table = outcome_table(bundle.data.venue, bundle.data.outcomes);
  bundle.weights = importance_weights(bundle.p_on, bundle.p_off, bundle.partition);
  if (need_cov && !opt.cov_path.empty())
    bundle.covariance = read_covariance(opt.cov_path, bundle.data.venue);
  return bundle;
}

EstimationContext context_of(const EstimationBundle& bundle, const CommonOptions& opt) {
  EstimationContext ctx;
  ctx.venue = &bundle.data.venue;
  ctx.partition = &bundle.partition;
  ctx.outcomes = &bundle.table;
  ctx.weights = &bundle.weights;
  ctx.p_off = &bundle.p_off;
  ctx.scale = bundle.scale;
  ctx.covariance = bundle.covariance ? &*bundle.covariance : nullptr;
  ctx.alpha = opt.alpha;
  return ctx;
}

const BidScheme venue_scheme(const Venue& venue) {
  return venue.bid_scheme.empty() ? BidScheme::aaai() : BidScheme::from_name(venue.bid_scheme);
}

// Policies arrive either as a JSON file or as direct flags; flags override
// the file's fields.
struct PolicyFlags {
  std::string path;
  std::string family;
  double w_text = 0.5;
  double lambda_bid = 1.0;
  double q = 1.0;
  bool has_family = false, has_w = false, has_lambda = false, has_q = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--policy", path, "Policy JSON file");
    cmd->add_option("--family", family, "tpdp-linear|aaai22|neurips16|aaai21")
        ->each([this](const std::string&) { has_family = true; });
    cmd->add_option("--w-text", w_text)->each([this](const std::string&) { has_w = true; });
    cmd->add_option("--lambda-bid", lambda_bid)->each([this](const std::string&) {
      has_lambda = true;
    });
    cmd->add_option("--q", q)->each([this](const std::string&) { has_q = true; });
  }

  PolicyParams resolve() const {
    PolicyParams params;
    if (!path.empty()) {
      params = read_policy_json(path);
    } else if (!has_family) {
      throw ValidationError("a policy needs --policy <file> or at least --family");
    }
    if (has_family) params.family = policy_family_from_string(family);
    if (has_w) params.w_text = w_text;
    if (has_lambda) params.lambda_bid = lambda_bid;
    if (has_q) params.q = q;
    params.validate();
    return params;
  }
};

int run(int argc, char** argv) {
  CLI::App app{"Counterfactual evaluation of reviewer-paper assignment policies"};
  app.require_subcommand(1);
  CommonOptions opt;
  app.add_option("--config", opt.config_path, "JSON config with default options")
      ->each([&](const std::string& path) {
        opt.config_path = path;
        apply_config(opt);
      });

  // ---- validate ----
  auto* validate = app.add_subcommand("validate", "Check venue/scores/outcomes documents");
  validate->add_option("--venue", opt.venue_path)->required();
  validate->add_option("--scores", opt.scores_path)->required();
  validate->add_option("--outcomes", opt.outcomes_path)->required();
  add_scale_flags(validate, opt);
  validate->callback([&] {
    OutcomeScale scale;
    const OutcomeScale* scale_ptr = nullptr;
    if (opt.scale_set) {
      scale = scale_of(opt);
      scale_ptr = &scale;
    }
    const LoadedData data =
        load_venue(opt.venue_path, opt.scores_path, opt.outcomes_path, scale_ptr);
    std::cout << "ok: " << data.venue.num_reviewers() << " reviewers, "
              << data.venue.num_papers() << " papers, " << data.outcomes.size()
              << " outcome rows\n";
  });

  // ---- assign ----
  auto* assign = app.add_subcommand("assign", "Solve a policy's marginal assignment LP");
  std::string policy_path, out_path, perturb = "none";
  PolicyFlags assign_policy;
  assign->add_option("--venue", opt.venue_path)->required();
  assign->add_option("--scores", opt.scores_path)->required();
  assign_policy.add_to(assign);
  assign->add_option("--out", out_path)->required();
  assign->add_option("--perturb", perturb, "Tie-breaking: none|tpdp|aaai");
  assign->add_option("--on-policy", opt.on_policy_path, "On-policy marginals (aaai perturb)");
  assign->add_option("--seed", opt.seed, "Noise seed (tpdp perturb)");
  assign->callback([&] {
    const Venue venue = read_venue_json(opt.venue_path);
    const PairTable pairs = read_scores_csv(opt.scores_path, venue);
    const PolicyParams params = assign_policy.resolve();
    Eigen::MatrixXd similarity = similarity_matrix(venue, pairs, params);
    if (perturb == "tpdp") {
      similarity = perturb_tpdp(similarity, tpdp_noise_matrix(venue, opt.seed));
    } else if (perturb == "aaai") {
      if (opt.on_policy_path.empty())
        throw ValidationError("--perturb aaai requires --on-policy marginals");
      const Eigen::MatrixXd p_on = read_marginals_csv(opt.on_policy_path, venue);
      const BoolGrid support = p_on.array() > 0.0;
      const auto result = perturb_aaai(similarity, venue, support, params.q);
      similarity = result.similarity;
      std::cout << "aaai perturbation epsilon " << format_double(result.epsilon)
                << " (similarity gap " << format_double(result.similarity_gap) << ")\n";
    } else if (perturb != "none") {
      throw ValidationError("unknown perturbation '" + perturb + "'");
    }
    const MarginalMatrix marginals = randomized_assignment(similarity, venue, params.q);
    write_marginals_csv(venue, marginals.prob, out_path);
    std::cout << "objective " << format_double(marginals.objective) << "\n";
  });

  // ---- sample ----
  auto* sample = app.add_subcommand("sample", "Monte Carlo covariance of an assignment law");
  std::int64_t n_samples = 100000;
  std::string assignment_out;
  sample->add_option("--venue", opt.venue_path)->required();
  sample->add_option("--marginals", opt.on_policy_path)->required();
  sample->add_option("--n", n_samples, "Number of sampled assignments");
  sample->add_option("--seed", opt.seed);
  sample->add_option("--threads", opt.threads);
  sample->add_option("--out", out_path, "Covariance output (binary + .json sidecar)")
      ->required();
  sample->add_option("--assignment-out", assignment_out, "Also write one sampled assignment");
  sample->callback([&] {
    const Venue venue = read_venue_json(opt.venue_path);
    const Eigen::MatrixXd marginals = read_marginals_csv(opt.on_policy_path, venue);
    const auto cov = estimate_covariance(marginals, venue, n_samples, opt.seed, opt.threads);
    write_covariance(cov, venue, out_path);
    if (!assignment_out.empty()) {
      const auto z = sample_assignment(marginals, venue, cov.seed() + 1);
      write_marginals_csv(venue, z, assignment_out);
    }
    std::cout << "sampled " << cov.count() << " assignments, "
              << cov.co_occurrence().size() << " co-occurring pair pairs\n";
  });

  // ---- estimate ----
  auto* estimate = app.add_subcommand("estimate", "Off-policy estimate with imputation");
  std::string impute = "mean", model_path;
  double lipschitz = 0.0;
  estimate->add_option("--venue", opt.venue_path)->required();
  estimate->add_option("--scores", opt.scores_path)->required();
  estimate->add_option("--outcomes", opt.outcomes_path)->required();
  estimate->add_option("--on-policy", opt.on_policy_path)->required();
  estimate->add_option("--off-policy", opt.off_policy_path)->required();
  estimate->add_option("--cov", opt.cov_path, "Covariance file for variances/intervals");
  estimate->add_option("--impute", impute, "mean|model|manski|mono|lip")->required();
  estimate->add_option("--model", model_path, "Trained model JSON (impute=model)");
  estimate->add_option("--L", lipschitz, "Lipschitz constant (impute=lip)");
  estimate->add_option("--alpha", opt.alpha);
  estimate->add_flag("--big-psi", opt.big_psi, "Single big-Psi surrogate LP");
  estimate->add_flag("--exclude-absent", opt.exclude_absent,
                     "Exclude absent pairs from the surrogate objective");
  estimate->add_option("--out", out_path)->required();
  add_scale_flags(estimate, opt);
  estimate->callback([&] {
    const EstimationBundle bundle = load_bundle(opt, true, true);
    const EstimationContext ctx = context_of(bundle, opt);
    const Venue& venue = bundle.data.venue;
    json doc;
    doc["impute"] = impute;
    if (impute == "mean" || impute == "model") {
      ImputationPlan plan;
      if (impute == "mean") {
        const double ybar = mean_observed(bundle.table, bundle.weights, bundle.partition);
        plan = ImputationPlan::constant(bundle.partition, ybar, ybar, "mean");
      } else {
        if (model_path.empty()) throw ValidationError("--impute model requires --model");
        const TrainedImputer model = read_model_json(model_path, venue);
        std::vector<std::pair<int, int>> targets;
        for (int r = 0; r < venue.num_reviewers(); ++r)
          for (int p = 0; p < venue.num_papers(); ++p)
            if (bundle.partition.attrition(r, p) || bundle.partition.violations(r, p))
              targets.push_back({r, p});
        const ImputedValues imputed = impute_with_model(model, venue, bundle.data.pairs, targets);
        plan.value = Eigen::MatrixXd::Zero(venue.num_reviewers(), venue.num_papers());
        plan.covered = bundle.partition.attrition || bundle.partition.violations;
        int cold = 0;
        for (size_t i = 0; i < targets.size(); ++i) {
          plan.value(targets[i].first, targets[i].second) =
              imputed.values(static_cast<Eigen::Index>(i));
          cold += imputed.cold_start[i] ? 1 : 0;
        }
        plan.provenance = "model:" + to_string(model.kind);
        if (bundle.partition.absent.any())
          plan.mean_outcome = mean_observed(bundle.table, bundle.weights, bundle.partition);
        doc["cold_start_targets"] = cold;
      }
      auto report = ht_estimate(bundle.partition, bundle.table, bundle.weights, plan,
                                bundle.p_off, venue.total_reviews());
      if (bundle.covariance)
        report.variance =
            variance_estimate(*bundle.covariance, venue, bundle.partition, bundle.table,
                              bundle.weights, plan, venue.total_reviews());
      const auto interval = imbens_manski_interval(report.point, report.point, report.variance,
                                                   report.variance, report.total_reviews,
                                                   opt.alpha);
      doc["estimate"] = report_to_json(report);
      doc["interval"] = {{"lower", interval.lower}, {"upper", interval.upper},
                         {"z", interval.z}};
    } else if (impute == "manski" || impute == "mono" || impute == "lip") {
      BoundsResult bounds;
      const BoundsConfig config = bounds_config_of(opt);
      if (impute == "manski") {
        bounds = manski_bounds(ctx);
      } else {
        const auto covariates = build_covariates(venue, bundle.data.pairs, venue_scheme(venue));
        bounds = impute == "mono" ? monotonicity_bounds(ctx, covariates, config)
                                  : lipschitz_bounds(ctx, covariates, lipschitz, config);
      }
      doc["bounds"] = bounds_to_json(bounds);
    } else {
      throw ValidationError("unknown imputation '" + impute + "'");
    }
    write_json(doc, out_path);
  });

  // ---- bounds ----
  auto* bounds_cmd = app.add_subcommand("bounds", "Partial-identification bounds");
  std::string method = "manski";
  std::string calibrate_spec;
  bounds_cmd->add_option("--venue", opt.venue_path)->required();
  bounds_cmd->add_option("--scores", opt.scores_path)->required();
  bounds_cmd->add_option("--outcomes", opt.outcomes_path)->required();
  bounds_cmd->add_option("--on-policy", opt.on_policy_path)->required();
  bounds_cmd->add_option("--off-policy", opt.off_policy_path)->required();
  bounds_cmd->add_option("--cov", opt.cov_path);
  bounds_cmd->add_option("--method", method, "manski|mono|lip")->required();
  bounds_cmd->add_option("--L", lipschitz, "Lipschitz constant");
  bounds_cmd->add_option("--calibrate", calibrate_spec, "e.g. f=0.05: calibrate L from data");
  bounds_cmd->add_option("--alpha", opt.alpha);
  bounds_cmd->add_flag("--big-psi", opt.big_psi);
  bounds_cmd->add_flag("--exclude-absent", opt.exclude_absent);
  bounds_cmd->add_option("--out", out_path)->required();
  add_scale_flags(bounds_cmd, opt);
  bounds_cmd->callback([&] {
    const EstimationBundle bundle = load_bundle(opt, true, true);
    const EstimationContext ctx = context_of(bundle, opt);
    const Venue& venue = bundle.data.venue;
    const BoundsConfig config = bounds_config_of(opt);
    const auto covariates = build_covariates(venue, bundle.data.pairs, venue_scheme(venue));
    json doc;
    if (method == "lip" && !calibrate_spec.empty()) {
      if (calibrate_spec.rfind("f=", 0) != 0)
        throw ValidationError("--calibrate expects f=<fraction>");
      const double target = std::stod(calibrate_spec.substr(2));
      const auto spec = DistanceSpec::over_pairs(covariates, surrogate_universe(bundle.partition));
      const auto cal = calibrate_lipschitz(ctx, covariates, spec, {target});
      lipschitz = cal.entries.front().constant;
      doc["calibration"] = {{"target", target},
                            {"L", lipschitz},
                            {"hard_violations", cal.hard_violations}};
    }
    BoundsResult bounds;
    if (method == "manski")
      bounds = manski_bounds(ctx);
    else if (method == "mono")
      bounds = monotonicity_bounds(ctx, covariates, config);
    else if (method == "lip")
      bounds = lipschitz_bounds(ctx, covariates, lipschitz, config);
    else
      throw ValidationError("unknown method '" + method + "'");
    doc.update(bounds_to_json(bounds));
    write_json(doc, out_path);
  });

  // ---- models ----
  auto* models_cmd = app.add_subcommand("models", "Fit or evaluate imputation models");
  std::string fit_kind;
  bool evaluate = false;
  models_cmd->add_option("--venue", opt.venue_path)->required();
  models_cmd->add_option("--scores", opt.scores_path)->required();
  models_cmd->add_option("--outcomes", opt.outcomes_path)->required();
  models_cmd->add_option("--fit", fit_kind, "clf-logistic|cf-knn");
  models_cmd->add_flag("--evaluate", evaluate, "Write a train/test MAE report");
  models_cmd->add_option("--seed", opt.seed);
  models_cmd->add_option("--out", out_path)->required();
  add_scale_flags(models_cmd, opt);
  models_cmd->callback([&] {
    const OutcomeScale scale = scale_of(opt);
    const LoadedData data =
        load_venue(opt.venue_path, opt.scores_path, opt.outcomes_path, &scale);
    std::vector<ObservedPoint> points;
    for (const auto& rec : data.outcomes)
      if (rec.status == OutcomeStatus::observed)
        points.push_back({rec.reviewer, rec.paper, *rec.value});
    if (evaluate) {
      const auto report = evaluate_imputers({ImputerKind::clf_logistic, ImputerKind::cf_knn},
                                            data.venue, data.pairs, points, scale, 0.75, 10,
                                            opt.seed);
      json doc;
      doc["repeats"] = report.repeats;
      doc["rows"] = json::array();
      for (const auto& row : report.rows)
        doc["rows"].push_back({{"model", row.model},
                               {"mae", row.mean_mae},
                               {"ci_lo", row.ci_lo},
                               {"ci_hi", row.ci_hi}});
      write_json(doc, out_path);
      return;
    }
    if (fit_kind.empty()) throw ValidationError("models needs --fit <kind> or --evaluate");
    const auto kind = imputer_kind_from_string(fit_kind);
    const int folds = std::min<int>(10, static_cast<int>(points.size()));
    const TrainedImputer model =
        fit_imputer(kind, data.venue, data.pairs, points, scale, {}, folds, opt.seed);
    write_model_json(model, data.venue, out_path);
    std::cout << "cv mae " << format_double(model.cv_mae) << ", hyperparameter "
              << format_double(model.chosen_hyperparameter) << "\n";
  });

  // ---- sweep ----
  auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate a policy family over a grid");
  std::string parameter, methods_csv = "mean,manski,mono,lip", tie_break = "tpdp";
  std::vector<double> grid;
  sweep_cmd->add_option("--venue", opt.venue_path)->required();
  sweep_cmd->add_option("--scores", opt.scores_path)->required();
  sweep_cmd->add_option("--outcomes", opt.outcomes_path)->required();
  sweep_cmd->add_option("--on-policy", opt.on_policy_path)->required();
  sweep_cmd->add_option("--cov", opt.cov_path);
  PolicyFlags sweep_policy;
  sweep_policy.add_to(sweep_cmd);
  sweep_cmd->add_option("--param", parameter, "w_text|lambda_bid|q")->required();
  sweep_cmd->add_option("--grid", grid, "Grid values")->required()->delimiter(',');
  sweep_cmd->add_option("--methods", methods_csv, "Comma list of methods");
  sweep_cmd->add_option("--L", lipschitz, "Lipschitz constant for lip cells");
  sweep_cmd->add_option("--tie-break", tie_break, "none|tpdp|aaai");
  sweep_cmd->add_option("--seed", opt.seed);
  sweep_cmd->add_option("--threads", opt.threads);
  sweep_cmd->add_option("--out-dir", opt.out_dir);
  sweep_cmd->add_option("--alpha", opt.alpha);
  sweep_cmd->add_flag("--big-psi", opt.big_psi);
  sweep_cmd->add_flag("--exclude-absent", opt.exclude_absent);
  add_scale_flags(sweep_cmd, opt);
  sweep_cmd->callback([&] {
    const OutcomeScale scale = scale_of(opt);
    const LoadedData data =
        load_venue(opt.venue_path, opt.scores_path, opt.outcomes_path, &scale);
    const Eigen::MatrixXd p_on = read_marginals_csv(opt.on_policy_path, data.venue);
    std::optional<CovarianceAccumulator> cov;
    if (!opt.cov_path.empty()) cov = read_covariance(opt.cov_path, data.venue);

    SweepSpec spec;
    spec.base = sweep_policy.resolve();
    spec.parameter = parameter;
    spec.grid = grid;
    spec.methods.clear();
    for (size_t start = 0; start < methods_csv.size();) {
      const size_t comma = methods_csv.find(',', start);
      spec.methods.push_back(methods_csv.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    spec.lipschitz_constant = lipschitz;
    spec.seed = opt.seed;
    spec.threads = opt.threads;

    StudyInputs study;
    study.venue = &data.venue;
    study.pairs = &data.pairs;
    study.outcomes = &data.outcomes;
    study.p_on = &p_on;
    study.covariance = cov ? &*cov : nullptr;
    study.scale = scale;
    study.bounds_config = bounds_config_of(opt);
    study.alpha = opt.alpha;

    const TieBreakKind tb = tie_break == "none"   ? TieBreakKind::none
                            : tie_break == "aaai" ? TieBreakKind::aaai
                                                  : TieBreakKind::tpdp;
    const SweepResult result = run_sweep(spec, study, tb);
    fs::create_directories(opt.out_dir);
    write_report_csv(result, fs::path(opt.out_dir) / "results.csv");
    write_manifest(result, study, fs::path(opt.out_dir) / "manifest.json");
    std::cout << result.rows.size() << " rows, " << result.cell_errors.size()
              << " failed cells\n";
  });

  // ---- cost ----
  auto* cost_cmd = app.add_subcommand("cost", "Cost-of-randomization curve over q");
  std::vector<double> q_grid;
  PolicyFlags cost_policy;
  cost_cmd->add_option("--venue", opt.venue_path)->required();
  cost_cmd->add_option("--scores", opt.scores_path)->required();
  cost_policy.add_to(cost_cmd);
  cost_cmd->add_option("--q-grid", q_grid, "q values")->required()->delimiter(',');
  cost_cmd->add_option("--out", out_path)->required();
  cost_cmd->callback([&] {
    const Venue venue = read_venue_json(opt.venue_path);
    const PairTable pairs = read_scores_csv(opt.scores_path, venue);
    const PolicyParams params = cost_policy.resolve();
    const Eigen::MatrixXd similarity = similarity_matrix(venue, pairs, params);
    const auto rows = cost_of_randomization(similarity, venue, q_grid);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + out_path + "'");
    out << "q,objective,ratio,feasible\n";
    for (const auto& row : rows)
      out << format_double(row.q) << ',' << format_double(row.objective) << ','
          << format_double(row.ratio) << ',' << (row.feasible ? "1" : "0") << '\n';
  });

  // ---- power ----
  auto* power_cmd = app.add_subcommand("power", "Compare max- vs min-similarity policies");
  power_cmd->add_option("--venue", opt.venue_path)->required();
  power_cmd->add_option("--scores", opt.scores_path)->required();
  power_cmd->add_option("--outcomes", opt.outcomes_path)->required();
  power_cmd->add_option("--on-policy", opt.on_policy_path)->required();
  power_cmd->add_option("--cov", opt.cov_path);
  PolicyFlags power_policy;
  power_policy.add_to(power_cmd);
  power_cmd->add_option("--L", lipschitz, "Lipschitz constant")->required();
  power_cmd->add_option("--out", out_path)->required();
  power_cmd->add_option("--alpha", opt.alpha);
  add_scale_flags(power_cmd, opt);
  power_cmd->callback([&] {
    const OutcomeScale scale = scale_of(opt);
    const LoadedData data =
        load_venue(opt.venue_path, opt.scores_path, opt.outcomes_path, &scale);
    const Eigen::MatrixXd p_on = read_marginals_csv(opt.on_policy_path, data.venue);
    std::optional<CovarianceAccumulator> cov;
    if (!opt.cov_path.empty()) cov = read_covariance(opt.cov_path, data.venue);
    const PolicyParams params = power_policy.resolve();
    const Eigen::MatrixXd similarity = similarity_matrix(data.venue, data.pairs, params);

    StudyInputs study;
    study.venue = &data.venue;
    study.pairs = &data.pairs;
    study.outcomes = &data.outcomes;
    study.p_on = &p_on;
    study.covariance = cov ? &*cov : nullptr;
    study.scale = scale;
    study.bounds_config = bounds_config_of(opt);
    study.alpha = opt.alpha;

    const auto rows = bad_policy_analysis(study, similarity, lipschitz);
    json doc = json::array();
    for (const auto& row : rows) {
      json item{{"policy", row.policy},
                {"manski", bounds_to_json(row.manski)},
                {"mono", bounds_to_json(row.mono)},
                {"lip", bounds_to_json(row.lip)}};
      item["mean"] = row.point_mean ? json(*row.point_mean) : json(nullptr);
      doc.push_back(item);
    }
    write_json(doc, out_path);
  });

  // ---- synth ----
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic venue with ground truth");
  std::string spec_path;
  synth_cmd->add_option("--spec", spec_path, "SyntheticSpec JSON")->required();
  synth_cmd->add_option("--out-dir", opt.out_dir)->required();
  synth_cmd->add_option("--seed", opt.seed, "Overrides the spec's seed");
  synth_cmd->callback([&] {
    std::ifstream in(spec_path);
    if (!in) throw ValidationError("cannot open '" + spec_path + "'");
    json doc;
    try {
      in >> doc;
    } catch (const json::parse_error& e) {
      throw ValidationError("synth spec: " + std::string(e.what()));
    }
    SyntheticSpec spec;
    spec.num_reviewers = doc.value("num_reviewers", spec.num_reviewers);
    spec.num_papers = doc.value("num_papers", spec.num_papers);
    spec.paper_load = doc.value("paper_load", spec.paper_load);
    spec.reviewer_cap = doc.value("reviewer_cap", spec.reviewer_cap);
    if (doc.contains("on_policy")) {
      const auto& pol = doc["on_policy"];
      spec.on_policy.family = policy_family_from_string(pol.value("family", "tpdp-linear"));
      spec.on_policy.w_text = pol.value("w_text", spec.on_policy.w_text);
      spec.on_policy.lambda_bid = pol.value("lambda_bid", spec.on_policy.lambda_bid);
      spec.on_policy.q = pol.value("q", spec.on_policy.q);
    }
    spec.with_subject = doc.value("with_subject", spec.with_subject);
    spec.missing_text_rate = doc.value("missing_text_rate", spec.missing_text_rate);
    spec.missing_subject_rate = doc.value("missing_subject_rate", spec.missing_subject_rate);
    spec.conflict_rate = doc.value("conflict_rate", spec.conflict_rate);
    spec.attrition_rate = doc.value("attrition_rate", spec.attrition_rate);
    spec.absence_rate = doc.value("absence_rate", spec.absence_rate);
    spec.outcome_kind = doc.value("outcome_kind", spec.outcome_kind);
    spec.outcome_low = doc.value("outcome_low", spec.outcome_low);
    spec.outcome_high = doc.value("outcome_high", spec.outcome_high);
    spec.snap_to_levels = doc.value("snap_to_levels", spec.snap_to_levels);
    if (doc.contains("scale")) {
      spec.scale.y_min = doc["scale"].value("y_min", spec.scale.y_min);
      spec.scale.y_max = doc["scale"].value("y_max", spec.scale.y_max);
      if (doc["scale"].contains("levels"))
        spec.scale.levels = doc["scale"]["levels"].get<std::vector<double>>();
    }
    spec.seed = doc.value("seed", spec.seed);
    if (app.get_subcommand("synth")->count("--seed")) spec.seed = opt.seed;
    const SyntheticVenue synthetic = generate_synthetic_venue(spec);
    write_synthetic_venue(synthetic, opt.out_dir);
    std::cout << "lipschitz constant " << format_double(synthetic.lipschitz_constant) << "\n";
  });

  // ---- report ----
  auto* report_cmd = app.add_subcommand("report", "Convert a sweep table to plot-ready files");
  std::string table_path;
  report_cmd->add_option("--table", table_path, "results.csv from sweep")->required();
  report_cmd->add_option("--out-dir", opt.out_dir)->required();
  report_cmd->callback([&] {
    // results.csv is already the plot-ready format; re-emit it verbatim with
    // a fresh manifest recording the copy.
    std::ifstream in(table_path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + table_path + "'");
    std::string header;
    std::getline(in, header);
    if (header != "param,value,method,point,lo,hi,ci_lo,ci_hi")
      throw ValidationError("'" + table_path + "' is not a sweep results table");
    fs::create_directories(opt.out_dir);
    std::ofstream out(fs::path(opt.out_dir) / "results.csv", std::ios::binary);
    out << header << '\n' << in.rdbuf();
    json manifest{{"version", "offrev 0.1.0"}, {"source", table_path}};
    write_json(manifest, fs::path(opt.out_dir) / "manifest.json");
  });

  CLI11_PARSE(app, argc, argv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
