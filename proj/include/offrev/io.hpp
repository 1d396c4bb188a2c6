#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "offrev/domain.hpp"
#include "offrev/models.hpp"
#include "offrev/sampler.hpp"
#include "offrev/similarity.hpp"

namespace offrev {

struct LoadedData {
  Venue venue;
  PairTable pairs;
  std::vector<OutcomeRecord> outcomes;
};

/// Load and cross-validate the three input documents. Errors name the
/// offending row. Scale (when given) gates outcome range checks.
LoadedData load_venue(const std::filesystem::path& venue_json,
                      const std::filesystem::path& scores_csv,
                      const std::filesystem::path& outcomes_csv,
                      const OutcomeScale* scale = nullptr);

Venue read_venue_json(const std::filesystem::path& path);
void write_venue_json(const Venue& venue, const std::filesystem::path& path);

PairTable read_scores_csv(const std::filesystem::path& path, const Venue& venue);
void write_scores_csv(const Venue& venue, const PairTable& pairs,
                      const std::filesystem::path& path);

std::vector<OutcomeRecord> read_outcomes_csv(const std::filesystem::path& path,
                                             const Venue& venue);
void write_outcomes_csv(const Venue& venue, const std::vector<OutcomeRecord>& records,
                        const std::filesystem::path& path);

/// marginals.csv covers every non-conflict pair exactly once.
Eigen::MatrixXd read_marginals_csv(const std::filesystem::path& path, const Venue& venue);
void write_marginals_csv(const Venue& venue, const Eigen::MatrixXd& prob,
                         const std::filesystem::path& path);

/// Sparse covariance container: triplets (a, b, covariance) over co-occurring
/// pairs plus per-pair marginal estimates; a JSON sidecar at <path>.json maps
/// indices to (reviewer, paper).
void write_covariance(const CovarianceAccumulator& cov, const Venue& venue,
                      const std::filesystem::path& path);
CovarianceAccumulator read_covariance(const std::filesystem::path& path, const Venue& venue);

PolicyParams read_policy_json(const std::filesystem::path& path);
void write_policy_json(const PolicyParams& params, const std::filesystem::path& path);

void write_model_json(const TrainedImputer& model, const Venue& venue,
                      const std::filesystem::path& path);
TrainedImputer read_model_json(const std::filesystem::path& path, const Venue& venue);

/// All floats in text formats carry 9 significant digits.
std::string format_double(double value);

}  // namespace offrev
