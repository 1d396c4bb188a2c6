#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "offrev/domain.hpp"
#include "offrev/similarity.hpp"

namespace offrev {

enum class ImputerKind { clf_logistic, cf_knn };

std::string to_string(ImputerKind kind);
ImputerKind imputer_kind_from_string(const std::string& text);

/// One observed training point: a pair and its review outcome.
struct ObservedPoint {
  int reviewer = 0;
  int paper = 0;
  double outcome = 0.0;
};

std::vector<ObservedPoint> observed_points(const Venue& venue, const PairPartition& partition,
                                           const OutcomeTable& outcomes);

/// Feature preprocessing choices recorded with every trained model.
struct FeatureOptions {
  bool one_hot_bid = true;
  bool standardize = true;
};

/// A fitted imputation model. Logistic models carry explicit weight arrays;
/// the k-NN model carries its training ratings. Deterministic for fixed
/// (data, seed, grid).
struct TrainedImputer {
  ImputerKind kind = ImputerKind::clf_logistic;
  double y_min = 0.0;
  double y_max = 1.0;

  // clf-logistic
  FeatureOptions features;
  std::vector<std::string> feature_names;
  Eigen::VectorXd feature_fill;   // train means used for missing covariates
  Eigen::VectorXd feature_mean;   // standardization record
  Eigen::VectorXd feature_scale;
  std::vector<double> classes;    // outcome levels seen in training
  Eigen::MatrixXd weights;        // classes x (features + 1), last col = intercept
  bool constant_predictor = false;
  double constant_value = 0.0;

  // cf-knn
  int k_neighbors = 1;
  std::vector<ObservedPoint> train_ratings;
  double train_mean = 0.0;

  double chosen_hyperparameter = 0.0;
  double cv_mae = 0.0;
  std::uint64_t seed = 0;
};

std::vector<double> default_hyper_grid(ImputerKind kind);

/// Fit with 10-fold cross-validation minimizing MAE over the grid; ties are
/// broken toward the most regularized point (largest penalty / largest k),
/// then the model is refit on all observed data.
TrainedImputer fit_imputer(ImputerKind kind, const Venue& venue, const PairTable& pairs,
                           const std::vector<ObservedPoint>& observed, const OutcomeScale& scale,
                           std::vector<double> hyper_grid = {}, int folds = 10,
                           std::uint64_t seed = 0);

struct ImputedValues {
  Eigen::VectorXd values;           // one per target, clamped to the scale
  std::vector<bool> cold_start;     // cf-knn targets that fell back to the train mean
};

ImputedValues impute_with_model(const TrainedImputer& model, const Venue& venue,
                                const PairTable& pairs,
                                const std::vector<std::pair<int, int>>& targets);

struct MaeReport {
  struct Row {
    std::string model;
    double mean_mae = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
  };
  std::vector<Row> rows;  // one per model plus the predict-the-mean baseline
  int repeats = 0;
};

/// Repeated 75/25 split evaluation with a mean-predictor baseline row;
/// bands are 95% normal approximations across repeats.
MaeReport evaluate_imputers(const std::vector<ImputerKind>& kinds, const Venue& venue,
                            const PairTable& pairs, const std::vector<ObservedPoint>& observed,
                            const OutcomeScale& scale, double split_fraction = 0.75,
                            int repeats = 10, std::uint64_t seed = 0);

/// MAE of always predicting the train mean, exposed for the baseline row.
double mean_baseline_mae(const std::vector<double>& train_y, const std::vector<double>& test_y);

}  // namespace offrev
