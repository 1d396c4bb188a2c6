#include "offrev/estimator.hpp"

#include <cmath>
#include <vector>

namespace offrev {

WeightTable importance_weights(const Eigen::MatrixXd& p_on, const Eigen::MatrixXd& p_off,
                               const PairPartition& partition) {
  WeightTable table;
  table.w = Eigen::MatrixXd::Zero(p_on.rows(), p_on.cols());
  table.defined = bool_grid(p_on.rows(), p_on.cols());
  for (int r = 0; r < p_on.rows(); ++r) {
    for (int p = 0; p < p_on.cols(); ++p) {
      if (p_on(r, p) > 0.0) {
        table.w(r, p) = p_off(r, p) / p_on(r, p);
        table.defined(r, p) = true;
      } else if (partition.violations(r, p)) {
        table.defined(r, p) = false;  // I-: never divided
      }
    }
  }
  return table;
}

double mean_observed(const OutcomeTable& outcomes, const WeightTable& weights,
                     const PairPartition& partition) {
  double num = 0.0, den = 0.0;
  for (int r = 0; r < outcomes.value.rows(); ++r) {
    for (int p = 0; p < outcomes.value.cols(); ++p) {
      if (!partition.supported(r, p) || partition.assigned(r, p) == 0.0) continue;
      if (!outcomes.present(r, p)) continue;
      num += outcomes.value(r, p) * weights.w(r, p);
      den += weights.w(r, p);
    }
  }
  if (den <= 0.0)
    throw DataError("mean outcome undefined: observed set is empty or carries zero weight");
  return num / den;
}

ImputationPlan ImputationPlan::constant(const PairPartition& partition, double value,
                                        std::optional<double> mean_outcome,
                                        std::string provenance) {
  ImputationPlan plan;
  plan.covered = partition.attrition || partition.violations;
  plan.value = Eigen::MatrixXd::Constant(partition.assigned.rows(), partition.assigned.cols(),
                                         value);
  plan.mean_outcome = mean_outcome;
  plan.provenance = std::move(provenance);
  return plan;
}

PartitionCounts partition_counts(const PairPartition& partition) {
  PartitionCounts counts;
  counts.supported = partition.count(partition.supported);
  counts.violations = partition.count(partition.violations);
  counts.attrition = partition.count(partition.attrition);
  counts.absent = partition.count(partition.absent);
  counts.observed = partition.count(partition.observed);
  counts.ignored = partition.count(partition.ignored);
  return counts;
}

namespace {

void require_plan_coverage(const PairPartition& partition, const ImputationPlan& plan) {
  for (int r = 0; r < plan.covered.rows(); ++r)
    for (int p = 0; p < plan.covered.cols(); ++p) {
      const bool needed = partition.attrition(r, p) || partition.violations(r, p);
      if (needed && !plan.covered(r, p))
        throw ValidationError("imputation plan misses a required pair");
    }
}

// Y' as in the variance display: outcome on I+, plan on I^Att and I-,
// mean outcome on I^Abs.
double y_prime(int r, int p, const PairPartition& partition, const OutcomeTable& outcomes,
               const ImputationPlan& plan) {
  if (partition.attrition(r, p) || partition.violations(r, p)) return plan.value(r, p);
  if (partition.absent(r, p)) {
    if (!plan.mean_outcome)
      throw DataError("mean outcome required for absent reviewers but unavailable");
    return *plan.mean_outcome;
  }
  return outcomes.value(r, p);
}

}  // namespace

EstimateReport ht_estimate(const PairPartition& partition, const OutcomeTable& outcomes,
                           const WeightTable& weights, const ImputationPlan& plan,
                           const Eigen::MatrixXd& p_off, int total_reviews) {
  require_plan_coverage(partition, plan);
  double sum = 0.0;
  for (int r = 0; r < p_off.rows(); ++r) {
    for (int p = 0; p < p_off.cols(); ++p) {
      if (partition.violations(r, p)) {
        sum += plan.value(r, p) * p_off(r, p);  // W undefined on I-
        continue;
      }
      if (partition.assigned(r, p) == 0.0) continue;
      const double w = weights.w(r, p);
      if (w == 0.0) continue;
      if (partition.supported(r, p)) {
        if (outcomes.present(r, p)) sum += outcomes.value(r, p) * w;
      } else if (partition.attrition(r, p)) {
        sum += plan.value(r, p) * w;
      } else if (partition.absent(r, p)) {
        if (!plan.mean_outcome)
          throw DataError("mean outcome required for absent reviewers but unavailable");
        sum += *plan.mean_outcome * w;
      }
    }
  }
  EstimateReport report;
  report.point = sum / total_reviews;
  report.total_reviews = total_reviews;
  report.counts = partition_counts(partition);
  report.plan_provenance = plan.provenance;
  return report;
}

double variance_estimate(const CovarianceAccumulator& cov, const Venue& venue,
                         const PairPartition& partition, const OutcomeTable& outcomes,
                         const WeightTable& weights, const ImputationPlan& plan,
                         int total_reviews) {
  require_plan_coverage(partition, plan);
  // Only pairs assigned under the on-policy enter (Z_i Z_j factors); the I-
  // term of the estimate is deterministic and contributes no variance.
  std::vector<int> idx;
  std::vector<double> coef;
  for (int r = 0; r < partition.assigned.rows(); ++r) {
    for (int p = 0; p < partition.assigned.cols(); ++p) {
      if (partition.assigned(r, p) == 0.0 || weights.w(r, p) == 0.0) continue;
      const double c = weights.w(r, p) * y_prime(r, p, partition, outcomes, plan);
      if (c == 0.0) continue;
      idx.push_back(venue.pair_index(r, p));
      coef.push_back(c);
    }
  }
  double quad = 0.0;
  for (size_t a = 0; a < idx.size(); ++a) {
    quad += cov.covariance(idx[a], idx[a]) * coef[a] * coef[a];
    for (size_t b = a + 1; b < idx.size(); ++b)
      quad += 2.0 * cov.covariance(idx[a], idx[b]) * coef[a] * coef[b];
  }
  const double n2 = static_cast<double>(total_reviews) * total_reviews;
  double variance = quad / n2;
  if (variance < 0.0) {
    if (variance < -1e-9) throw DataError("variance quadratic form is negative beyond tolerance");
    variance = 0.0;  // PSD up to accumulation round-off
  }
  return variance;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("normal quantile requires p in (0, 1)");
  // Acklam's rational approximation, then Newton steps against erfc-based
  // normal_cdf to push the absolute error well below 1e-10.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p > 1.0 - plow) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  for (int i = 0; i < 3; ++i) {
    const double err = normal_cdf(x) - p;
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    if (pdf <= 0.0) break;
    x -= err / pdf;
  }
  return x;
}

ImbensManskiInterval imbens_manski_interval(double lower_estimate, double upper_estimate,
                                            double var_lower, double var_upper,
                                            int total_reviews, double alpha) {
  if (lower_estimate > upper_estimate + 1e-12)
    throw ValidationError("interval endpoints out of order");
  if (var_lower < 0.0 || var_upper < 0.0) throw ValidationError("negative variance");

  ImbensManskiInterval interval;
  const double sigma_max = std::sqrt(std::max(var_lower, var_upper));
  if (sigma_max == 0.0) {
    interval.lower = lower_estimate;
    interval.upper = upper_estimate;
    interval.z = 0.0;
    return interval;
  }

  const double spread = std::sqrt(static_cast<double>(total_reviews)) *
                        std::max(0.0, upper_estimate - lower_estimate) / sigma_max;
  // Phi(z + spread) - Phi(-z) = alpha is increasing in z; the root lies
  // between the one- and two-sided quantiles.
  double lo = normal_quantile(alpha) - 1e-3;
  double hi = normal_quantile(0.5 * (1.0 + alpha)) + 1e-3;
  for (int i = 0; i < 200 && hi - lo > 1e-9; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (normal_cdf(mid + spread) - normal_cdf(-mid) < alpha)
      lo = mid;
    else
      hi = mid;
  }
  interval.z = 0.5 * (lo + hi);
  interval.lower = lower_estimate - interval.z * std::sqrt(var_lower / total_reviews);
  interval.upper = upper_estimate + interval.z * std::sqrt(var_upper / total_reviews);
  return interval;
}

}  // namespace offrev
