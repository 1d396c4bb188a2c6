#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "offrev/models.hpp"

using namespace offrev;
using offrev::testing::make_venue;

namespace {

// Venue with text covariates laid out by the caller; bids default.
struct ModelFixture {
  Venue venue;
  PairTable pairs;
  OutcomeScale scale{1.0, 5.0, {1, 2, 3, 4, 5}};

  ModelFixture(int reviewers, int papers) {
    venue = make_venue(reviewers, papers, 1, papers, {}, "aaai");
    pairs.text_sim = Eigen::MatrixXd::Zero(reviewers, papers);
    pairs.has_text = bool_grid(reviewers, papers, true);
    pairs.subject = Eigen::MatrixXd::Zero(reviewers, papers);
    pairs.has_subject = bool_grid(reviewers, papers);
    pairs.bid = Eigen::MatrixXi::Constant(reviewers, papers, -1);
    pairs.bid_labels = BidScheme::aaai().labels;
  }
};

}  // namespace

TEST_CASE("separable two-level data trains to zero error") {
  ModelFixture f(1, 12);
  std::vector<ObservedPoint> observed;
  for (int p = 0; p < 12; ++p) {
    f.pairs.text_sim(0, p) = p < 6 ? 0.1 + 0.01 * p : 0.8 + 0.01 * p;
    observed.push_back({0, p, p < 6 ? 1.0 : 5.0});
  }
  const auto model = fit_imputer(ImputerKind::clf_logistic, f.venue, f.pairs, observed, f.scale,
                                 {}, 4, 3);
  std::vector<std::pair<int, int>> targets;
  for (int p = 0; p < 12; ++p) targets.push_back({0, p});
  const auto imputed = impute_with_model(model, f.venue, f.pairs, targets);
  double mae = 0.0;
  for (int p = 0; p < 12; ++p)
    mae += std::abs(imputed.values(p) - observed[static_cast<size_t>(p)].outcome);
  CHECK(mae / 12.0 == doctest::Approx(0.0));
}

TEST_CASE("constant outcomes produce a constant predictor") {
  ModelFixture f(1, 10);
  std::vector<ObservedPoint> observed;
  for (int p = 0; p < 10; ++p) {
    f.pairs.text_sim(0, p) = 0.1 * p;
    observed.push_back({0, p, 3.0});
  }
  const auto model = fit_imputer(ImputerKind::clf_logistic, f.venue, f.pairs, observed, f.scale,
                                 {}, 5, 1);
  CHECK(model.constant_predictor);
  CHECK(model.cv_mae == doctest::Approx(0.0));
  const auto imputed = impute_with_model(model, f.venue, f.pairs, {{0, 3}});
  CHECK(imputed.values(0) == doctest::Approx(3.0));
}

TEST_CASE("monotone synthetic grid beats the mean baseline in CV") {
  ModelFixture f(2, 10);
  std::vector<ObservedPoint> observed;
  for (int r = 0; r < 2; ++r)
    for (int p = 0; p < 10; ++p) {
      const double t = (p + 10.0 * r) / 20.0;
      f.pairs.text_sim(r, p) = t;
      observed.push_back({r, p, 1.0 + std::floor(4.0 * t)});
    }
  const auto model = fit_imputer(ImputerKind::clf_logistic, f.venue, f.pairs, observed, f.scale,
                                 {}, 10, 7);
  std::vector<double> y;
  for (const auto& pt : observed) y.push_back(pt.outcome);
  const double baseline = mean_baseline_mae(y, y);
  CHECK(model.cv_mae < baseline);
}

TEST_CASE("cf-knn single neighbor returns that rating") {
  ModelFixture f(2, 3);
  // reviewer 0 rated paper 0 only; target (0, 1) has one candidate
  const std::vector<ObservedPoint> train{{0, 0, 4.0}, {1, 1, 2.0}, {1, 2, 3.0}};
  TrainedImputer model;
  model.kind = ImputerKind::cf_knn;
  model.y_min = 1.0;
  model.y_max = 5.0;
  model.k_neighbors = 1;
  model.train_ratings = train;
  model.train_mean = 3.0;
  const auto imputed = impute_with_model(model, f.venue, f.pairs, {{0, 1}});
  CHECK(imputed.values(0) == doctest::Approx(4.0));
  CHECK(!imputed.cold_start[0]);
}

TEST_CASE("cf-knn cold start falls back to the train mean with a flag") {
  ModelFixture f(2, 2);
  TrainedImputer model;
  model.kind = ImputerKind::cf_knn;
  model.y_min = 1.0;
  model.y_max = 5.0;
  model.k_neighbors = 2;
  model.train_ratings = {{1, 0, 2.0}};
  model.train_mean = 2.0;
  // reviewer 0 rated nothing
  const auto imputed = impute_with_model(model, f.venue, f.pairs, {{0, 0}, {0, 1}});
  CHECK(imputed.values(0) == doctest::Approx(2.0));
  CHECK(imputed.cold_start[0]);
  CHECK(imputed.cold_start[1]);
}

TEST_CASE("predictions are clamped to the outcome scale") {
  ModelFixture f(1, 2);
  TrainedImputer model;
  model.kind = ImputerKind::cf_knn;
  model.y_min = 2.0;
  model.y_max = 4.0;
  model.k_neighbors = 1;
  model.train_ratings = {};
  model.train_mean = 9.0;  // outside the scale, must be clamped
  const auto imputed = impute_with_model(model, f.venue, f.pairs, {{0, 0}});
  CHECK(imputed.values(0) == doctest::Approx(4.0));
}

TEST_CASE("fitting is deterministic in (data, seed, grid)") {
  ModelFixture f(2, 10);
  std::vector<ObservedPoint> observed;
  std::mt19937_64 rng(15);
  for (int r = 0; r < 2; ++r)
    for (int p = 0; p < 10; ++p) {
      f.pairs.text_sim(r, p) = offrev::testing::uniform01(rng);
      observed.push_back({r, p, 1.0 + static_cast<double>(rng() % 5)});
    }
  const auto a = fit_imputer(ImputerKind::clf_logistic, f.venue, f.pairs, observed, f.scale, {},
                             5, 11);
  const auto b = fit_imputer(ImputerKind::clf_logistic, f.venue, f.pairs, observed, f.scale, {},
                             5, 11);
  CHECK(a.chosen_hyperparameter == b.chosen_hyperparameter);
  CHECK(a.cv_mae == b.cv_mae);
  CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mean baseline MAE on balanced 1/5 outcomes is exactly 2") {
  const std::vector<double> train{1.0, 5.0, 1.0, 5.0};
  const std::vector<double> test{1.0, 5.0};
  CHECK(mean_baseline_mae(train, test) == doctest::Approx(2.0));
}

TEST_CASE("evaluation report has one row per model plus the baseline") {
  ModelFixture f(2, 12);
  std::vector<ObservedPoint> observed;
  std::mt19937_64 rng(9);
  for (int r = 0; r < 2; ++r)
    for (int p = 0; p < 12; ++p) {
      const double t = offrev::testing::uniform01(rng);
      f.pairs.text_sim(r, p) = t;
      observed.push_back({r, p, 1.0 + std::floor(4.0 * t)});
    }
  const auto report =
      evaluate_imputers({ImputerKind::clf_logistic, ImputerKind::cf_knn}, f.venue, f.pairs,
                        observed, f.scale, 0.75, 4, 21);
  REQUIRE(report.rows.size() == 3);
  CHECK(report.rows[0].model == "clf-logistic");
  CHECK(report.rows[1].model == "cf-knn");
  CHECK(report.rows[2].model == "mean-baseline");
  for (const auto& row : report.rows) {
    CHECK(row.ci_lo <= row.mean_mae);
    CHECK(row.mean_mae <= row.ci_hi);
  }
}

TEST_CASE("grid ties break toward the most regularized hyperparameter") {
  // Constant outcomes: every penalty gives CV MAE 0, so the largest wins.
  ModelFixture f(1, 10);
  std::vector<ObservedPoint> observed;
  for (int p = 0; p < 10; ++p) {
    f.pairs.text_sim(0, p) = 0.1 * p;
    observed.push_back({0, p, 2.0});
  }
  const auto model = fit_imputer(ImputerKind::clf_logistic, f.venue, f.pairs, observed, f.scale,
                                 {0.01, 0.1, 1.0, 10.0}, 5, 2);
  CHECK(model.chosen_hyperparameter == doctest::Approx(10.0));
}
