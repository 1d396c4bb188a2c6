#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "offrev/domain.hpp"
#include "offrev/estimator.hpp"
#include "offrev/similarity.hpp"

namespace offrev {

/// Per-pair covariate vectors (text, subject when the venue has it, bid
/// value) with explicit missingness. Rows are venue pair indices.
struct CovariateTable {
  Eigen::MatrixXd values;   // num_pairs x dims
  BoolGrid present;         // num_pairs x dims
  std::vector<std::string> dim_names;

  int dims() const { return static_cast<int>(values.cols()); }
};

/// Covariates as the paper analyzes them: the similarity component scores,
/// with bids mapped through the venue's scheme at a fixed reference lambda.
CovariateTable build_covariates(const Venue& venue, const PairTable& pairs,
                                const BidScheme& scheme, double lambda_ref = 1.0);

/// Normalization ranges for the covariate distance; missing components
/// contribute the maximal distance 1, and the sum is divided by the
/// dimension count.
struct DistanceSpec {
  Eigen::VectorXd range_lo;
  Eigen::VectorXd range_hi;

  static DistanceSpec over_pairs(const CovariateTable& covariates,
                                 const std::vector<int>& pair_indices);
};

double covariate_distance(const CovariateTable& covariates, int pair_i, int pair_j,
                          const DistanceSpec& spec);

/// Componentwise dominance DAG over the given pairs, transitively reduced.
/// Any missing component makes a pair of pairs incomparable.
struct DominanceGraph {
  int num_nodes = 0;
  std::vector<std::pair<int, int>> edges;  // node i dominates node j
  int edges_before_reduction = 0;
};

DominanceGraph dominance_graph(const CovariateTable& covariates,
                               const std::vector<int>& pair_indices);

/// Everything the bound estimators consume; covariance is optional and only
/// gates whether variances and confidence intervals are filled in.
struct EstimationContext {
  const Venue* venue = nullptr;
  const PairPartition* partition = nullptr;
  const OutcomeTable* outcomes = nullptr;
  const WeightTable* weights = nullptr;
  const Eigen::MatrixXd* p_off = nullptr;
  OutcomeScale scale;
  const CovarianceAccumulator* covariance = nullptr;
  double alpha = 0.95;
};

struct BoundsConfig {
  bool lexicographic = true;  // two sequential LPs; false = single big-Psi LP
  double psi = 1e9;
  bool include_absent_in_objective = true;
};

struct SurrogateSolution {
  std::vector<int> pair_indices;  // the universe U as venue pair indices
  Eigen::VectorXd values;
  double primary_objective = 0.0;    // sum over O of |T - Y|
  double secondary_objective = 0.0;  // weighted sum over the unobserved part
};

struct BoundsResult {
  std::string method;
  double lipschitz_constant = 0.0;  // lip only
  EstimateReport lower;
  EstimateReport upper;
  ImbensManskiInterval interval;
  int constraints_before = 0;
  int constraints_after = 0;
  std::optional<SurrogateSolution> lower_surrogates;
  std::optional<SurrogateSolution> upper_surrogates;
};

/// Worst-case bounds from the outcome scale alone: impute y_min / y_max for
/// every attrition and positivity-violation pair.
BoundsResult manski_bounds(const EstimationContext& ctx);

/// Monotonicity-constrained surrogate bounds (two-level program).
BoundsResult monotonicity_bounds(const EstimationContext& ctx, const CovariateTable& covariates,
                                 const BoundsConfig& config = {});

/// Lipschitz-constrained surrogate bounds. Constraints implied by the box
/// (L d >= y_max - y_min) are pruned; nothing else is.
BoundsResult lipschitz_bounds(const EstimationContext& ctx, const CovariateTable& covariates,
                              double lipschitz_constant, const BoundsConfig& config = {});

struct LipschitzCalibration {
  struct Entry {
    double target_fraction;
    double constant;
  };
  std::vector<Entry> entries;
  std::vector<double> grid;  // observed |dY| / d ratios, sorted unique
  int hard_violations = 0;   // pairs at distance 0 with unequal outcomes
};

/// Smallest grid constant keeping the observed violation fraction below each
/// target (exactly zero for a target of 0).
LipschitzCalibration calibrate_lipschitz(const EstimationContext& ctx,
                                         const CovariateTable& covariates,
                                         const DistanceSpec& spec,
                                         const std::vector<double>& targets = {0.10, 0.05,
                                                                               0.01});

/// The universe U = O + I^Att + I^Abs + I- as venue pair indices, in a fixed
/// deterministic order.
std::vector<int> surrogate_universe(const PairPartition& partition);

}  // namespace offrev
