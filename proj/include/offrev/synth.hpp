#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "offrev/assignment.hpp"
#include "offrev/domain.hpp"
#include "offrev/similarity.hpp"

namespace offrev {

/// Recipe for a synthetic venue whose ground truth is known exactly. The
/// outcome function is deterministic in the true covariates, monotone in
/// every component, and its realized Lipschitz constant is reported.
struct SyntheticSpec {
  int num_reviewers = 6;
  int num_papers = 6;
  int paper_load = 1;
  int reviewer_cap = 2;
  PolicyParams on_policy;
  bool with_subject = false;           // venue carries a K column
  double missing_text_rate = 0.0;      // aaai22 family only
  double missing_subject_rate = 0.0;
  double conflict_rate = 0.0;
  double attrition_rate = 0.0;
  double absence_rate = 0.0;
  std::string outcome_kind = "similarity";  // "similarity" | "monotone-mean"
  double outcome_low = 1.0;   // range the truth actually spans, within the scale
  double outcome_high = 5.0;
  bool snap_to_levels = true;
  OutcomeScale scale{1.0, 5.0, {1, 2, 3, 4, 5}};
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticVenue {
  SyntheticSpec spec;
  Venue venue;
  PairTable pairs;
  std::vector<OutcomeRecord> outcomes;   // one realized on-policy draw
  Eigen::MatrixXd assignment;            // the Z^A behind `outcomes`
  Eigen::MatrixXd truth_y;               // every pair's latent outcome
  double lipschitz_constant = 0.0;       // realized L* over all pairs
  MarginalMatrix on_policy;
};

SyntheticVenue generate_synthetic_venue(const SyntheticSpec& spec);

/// Redraw the outcome records for a given assignment (fresh attrition and
/// absence); used by repeated-draw studies over one synthetic venue.
std::vector<OutcomeRecord> synthesize_outcomes(const SyntheticVenue& synthetic,
                                               const Eigen::MatrixXd& assignment,
                                               std::uint64_t seed);

/// True mean quality of a policy from the full outcome matrix.
double true_mean(const Eigen::MatrixXd& truth_y, const Eigen::MatrixXd& marginals,
                 int total_reviews);

/// Write venue.json, scores.csv, outcomes.csv and truth.json. The truth file
/// is consumed only by verification tooling, never by estimation paths.
void write_synthetic_venue(const SyntheticVenue& synthetic,
                           const std::filesystem::path& out_dir);

}  // namespace offrev
