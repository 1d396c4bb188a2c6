#pragma once

#include <optional>
#include <string>

#include <Eigen/Core>

#include "offrev/domain.hpp"
#include "offrev/sampler.hpp"

namespace offrev {

/// Importance weights W = P_B / P_A where P_A > 0; undefined on positivity
/// violations (which the estimator weights by P_B directly).
struct WeightTable {
  Eigen::MatrixXd w;
  BoolGrid defined;
};

WeightTable importance_weights(const Eigen::MatrixXd& p_on, const Eigen::MatrixXd& p_off,
                               const PairPartition& partition);

/// Weighted mean outcome over the observed supported pairs,
/// sum(Y Z W) / sum(Z W) on I+. Throws if the weighted mass is zero.
double mean_observed(const OutcomeTable& outcomes, const WeightTable& weights,
                     const PairPartition& partition);

/// Imputed values for attrition and positivity-violation pairs, plus the
/// mean outcome used for absent reviewers.
struct ImputationPlan {
  Eigen::MatrixXd value;
  BoolGrid covered;  // exactly I^Att union I-
  std::optional<double> mean_outcome;  // Ybar, required when I^Abs contributes
  std::string provenance;

  static ImputationPlan constant(const PairPartition& partition, double value,
                                 std::optional<double> mean_outcome, std::string provenance);
};

struct PartitionCounts {
  int supported = 0;
  int violations = 0;
  int attrition = 0;
  int absent = 0;
  int observed = 0;
  int ignored = 0;
};

PartitionCounts partition_counts(const PairPartition& partition);

struct EstimateReport {
  double point = 0.0;
  double variance = 0.0;
  int total_reviews = 0;  // N, fixed by the venue
  PartitionCounts counts;
  std::string plan_provenance;
};

/// Horvitz-Thompson off-policy estimate with imputation:
///  (1/N) [ sum_{I+} Y Z W + sum_{Att} Yimp Z W + sum_{Abs} Ybar Z W
///          + sum_{I-} Yimp P_B ].
EstimateReport ht_estimate(const PairPartition& partition, const OutcomeTable& outcomes,
                           const WeightTable& weights, const ImputationPlan& plan,
                           const Eigen::MatrixXd& p_off, int total_reviews);

/// Plug-in variance of the estimate from Monte Carlo assignment covariances:
/// (1/N^2) sum Cov[Z_i,Z_j] Z_i Z_j W_i W_j Y'_i Y'_j.
double variance_estimate(const CovarianceAccumulator& cov, const Venue& venue,
                         const PairPartition& partition, const OutcomeTable& outcomes,
                         const WeightTable& weights, const ImputationPlan& plan,
                         int total_reviews);

/// Standard normal CDF / quantile, accurate to well below 1e-10.
double normal_cdf(double x);
double normal_quantile(double p);

struct ImbensManskiInterval {
  double lower = 0.0;
  double upper = 0.0;
  double z = 0.0;  // the z' multiplier actually used
};

/// Imbens-Manski interval for a partially identified mean: z' solves
/// Phi(z' + sqrt(N) (upper-lower) / max sigma) - Phi(-z') = alpha and lies
/// between the one- and two-sided normal quantiles. Bisection residual
/// below 1e-6. With both variances zero the interval is [lower, upper].
ImbensManskiInterval imbens_manski_interval(double lower_estimate, double upper_estimate,
                                            double var_lower, double var_upper,
                                            int total_reviews, double alpha = 0.95);

}  // namespace offrev
