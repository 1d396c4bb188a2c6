#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "offrev/assignment.hpp"
#include "offrev/bounds.hpp"
#include "offrev/domain.hpp"
#include "offrev/models.hpp"

namespace offrev {

/// Methods a sweep cell can run. "model" methods carry the imputer kind.
struct SweepSpec {
  PolicyParams base;
  std::string parameter;  // "w_text" | "lambda_bid" | "q"
  std::vector<double> grid;
  std::vector<std::string> methods = {"mean", "manski", "mono", "lip"};
  double lipschitz_constant = 1.0;  // for "lip"
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

enum class TieBreakKind { none, tpdp, aaai };

struct SweepRow {
  double value = 0.0;
  std::string method;
  std::optional<double> point;  // point-estimate methods only
  double lo = 0.0, hi = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;
  PartitionCounts counts;
};

struct SweepResult {
  std::string parameter;
  std::vector<SweepRow> rows;
  std::vector<std::string> cell_errors;  // failed cells, sweep continues
  std::uint64_t seed = 0;
  TieBreakKind tie_break = TieBreakKind::none;
  std::vector<double> tie_break_epsilons;  // aaai: chosen epsilon per grid value
};

/// Inputs shared by every cell of a study: the logged data, the on-policy
/// marginals and covariance, and the outcome scale.
struct StudyInputs {
  const Venue* venue = nullptr;
  const PairTable* pairs = nullptr;
  const std::vector<OutcomeRecord>* outcomes = nullptr;
  const Eigen::MatrixXd* p_on = nullptr;
  const CovarianceAccumulator* covariance = nullptr;  // optional
  OutcomeScale scale;
  BoundsConfig bounds_config;
  double alpha = 0.95;
};

SweepResult run_sweep(const SweepSpec& spec, const StudyInputs& study,
                      TieBreakKind tie_break = TieBreakKind::tpdp);

struct CostRow {
  double q = 0.0;
  double objective = 0.0;
  double ratio = 0.0;  // objective / objective(q = 1)
  bool feasible = true;
};

/// Expected-similarity loss of capping q, as a ratio to the q = 1 optimum;
/// nondecreasing in q.
std::vector<CostRow> cost_of_randomization(const Eigen::MatrixXd& similarity, const Venue& venue,
                                           const std::vector<double>& q_grid);

struct PowerRow {
  std::string policy;  // "max-similarity" | "min-similarity"
  std::optional<double> point_mean;  // absent when no observed pair carries weight
  BoundsResult manski;
  BoundsResult mono;
  BoundsResult lip;
};

/// Power check: restrict to the on-policy support, then compare
/// the deterministic similarity-maximizing and -minimizing policies.
std::vector<PowerRow> bad_policy_analysis(const StudyInputs& study,
                                          const Eigen::MatrixXd& similarity,
                                          double lipschitz_constant);

/// Plot-ready CSV: param,value,method,point,lo,hi,ci_lo,ci_hi.
void write_report_csv(const SweepResult& result, const std::filesystem::path& path);

/// Run manifest: seeds, perturbation records, covariance provenance and the
/// software version, for byte-identical re-runs.
void write_manifest(const SweepResult& result, const StudyInputs& study,
                    const std::filesystem::path& path);

}  // namespace offrev
