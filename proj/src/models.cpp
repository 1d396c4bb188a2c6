#include "offrev/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace offrev {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Portable Fisher-Yates; std::shuffle is implementation-defined.
void shuffle_indices(std::vector<int>& idx, std::mt19937_64& rng) {
  for (size_t i = idx.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

double clamp_to(double v, const OutcomeScale& scale) {
  return std::min(std::max(v, scale.y_min), scale.y_max);
}

// ---- feature construction for the classification model ----

struct FeatureBuilder {
  bool has_subject = false;
  bool one_hot = true;
  BidScheme scheme;
  std::vector<std::string> names;

  int raw_dims() const {
    return 1 + (has_subject ? 1 : 0) + (one_hot ? static_cast<int>(scheme.labels.size()) : 1);
  }

  // Raw features with NaN marking a missing covariate (bids never miss:
  // absent labels read as the scheme default).
  Eigen::VectorXd raw(const PairTable& pairs, int r, int p) const {
    Eigen::VectorXd x(raw_dims());
    int d = 0;
    x(d++) = pairs.has_text(r, p) ? pairs.text_sim(r, p) : std::nan("");
    if (has_subject) x(d++) = pairs.has_subject(r, p) ? pairs.subject(r, p) : std::nan("");
    const auto label = pairs.bid_label(r, p);
    if (one_hot) {
      const std::string& effective = label ? *label : scheme.default_label;
      for (const auto& l : scheme.labels) x(d++) = l == effective ? 1.0 : 0.0;
    } else {
      x(d++) = bid_value(label, scheme, 1.0);
    }
    return x;
  }
};

FeatureBuilder make_builder(const Venue& venue, const PairTable& pairs,
                            const FeatureOptions& options) {
  FeatureBuilder fb;
  fb.has_subject = pairs.has_subject.any();
  fb.one_hot = options.one_hot_bid;
  fb.scheme = venue.bid_scheme.empty() ? BidScheme::aaai() : BidScheme::from_name(venue.bid_scheme);
  fb.names.push_back("text");
  if (fb.has_subject) fb.names.push_back("subject");
  if (fb.one_hot)
    for (const auto& l : fb.scheme.labels) fb.names.push_back("bid:" + l);
  else
    fb.names.push_back("bid");
  return fb;
}

Eigen::VectorXd finalize_features(const Eigen::VectorXd& raw, const TrainedImputer& m) {
  Eigen::VectorXd x = raw;
  for (Eigen::Index d = 0; d < x.size(); ++d) {
    if (std::isnan(x(d))) x(d) = m.feature_fill(d);
    if (m.features.standardize && m.feature_scale(d) > 0.0)
      x(d) = (x(d) - m.feature_mean(d)) / m.feature_scale(d);
  }
  return x;
}

// ---- multinomial logistic regression, batch gradient descent ----

struct LogisticFit {
  Eigen::MatrixXd weights;  // classes x (features + 1)
};

LogisticFit train_logistic(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                           int num_classes, double l2_penalty) {
  const int n = static_cast<int>(x.rows());
  const int f = static_cast<int>(x.cols());
  Eigen::MatrixXd xb(n, f + 1);
  xb.leftCols(f) = x;
  xb.col(f).setOnes();

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(num_classes, f + 1);
  double step = 1.0;
  const auto loss_of = [&](const Eigen::MatrixXd& wt) {
    const Eigen::MatrixXd scores = xb * wt.transpose();  // n x C
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const double mx = scores.row(i).maxCoeff();
      const double lse = mx + std::log((scores.row(i).array() - mx).exp().sum());
      total += lse - scores(i, labels[static_cast<size_t>(i)]);
    }
    double reg = 0.0;
    for (int c = 0; c < num_classes; ++c) reg += wt.row(c).head(f).squaredNorm();
    return total / n + 0.5 * l2_penalty * reg;
  };

  double current_loss = loss_of(w);
  for (int iter = 0; iter < 10000; ++iter) {
    const Eigen::MatrixXd scores = xb * w.transpose();
    Eigen::MatrixXd prob(n, num_classes);
    for (int i = 0; i < n; ++i) {
      const double mx = scores.row(i).maxCoeff();
      const Eigen::ArrayXd e = (scores.row(i).transpose().array() - mx).exp();
      prob.row(i) = (e / e.sum()).matrix().transpose();
    }
    for (int i = 0; i < n; ++i) prob(i, labels[static_cast<size_t>(i)]) -= 1.0;
    Eigen::MatrixXd grad = prob.transpose() * xb / n;  // C x (f+1)
    grad.leftCols(f) += l2_penalty * w.leftCols(f);

    const double gnorm = grad.norm();
    if (gnorm < 1e-6) break;

    // Backtracking line search keeps plain gradient descent stable.
    bool moved = false;
    for (int tries = 0; tries < 40; ++tries) {
      const Eigen::MatrixXd cand = w - step * grad;
      const double cand_loss = loss_of(cand);
      if (cand_loss <= current_loss - 1e-4 * step * gnorm * gnorm) {
        w = cand;
        current_loss = cand_loss;
        step *= 1.3;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return {w};
}

int predict_class(const Eigen::MatrixXd& weights, const Eigen::VectorXd& x) {
  Eigen::VectorXd xb(x.size() + 1);
  xb.head(x.size()) = x;
  xb(x.size()) = 1.0;
  Eigen::Index best = 0;
  (weights * xb).maxCoeff(&best);
  return static_cast<int>(best);
}

// ---- cf-knn: item-based collaborative filtering over the rating matrix ----

struct KnnModel {
  // ratings indexed by paper -> (reviewer, y), and by reviewer -> papers
  std::vector<std::vector<std::pair<int, double>>> by_paper;
  std::vector<std::vector<std::pair<int, double>>> by_reviewer;
  std::vector<double> reviewer_mean;
  double global_mean = 0.0;

  static KnnModel build(const Venue& venue, const std::vector<ObservedPoint>& train) {
    KnnModel m;
    m.by_paper.resize(static_cast<size_t>(venue.num_papers()));
    m.by_reviewer.resize(static_cast<size_t>(venue.num_reviewers()));
    std::vector<double> sums(static_cast<size_t>(venue.num_reviewers()), 0.0);
    std::vector<int> counts(static_cast<size_t>(venue.num_reviewers()), 0);
    double total = 0.0;
    for (const auto& pt : train) {
      m.by_paper[static_cast<size_t>(pt.paper)].push_back({pt.reviewer, pt.outcome});
      m.by_reviewer[static_cast<size_t>(pt.reviewer)].push_back({pt.paper, pt.outcome});
      sums[static_cast<size_t>(pt.reviewer)] += pt.outcome;
      ++counts[static_cast<size_t>(pt.reviewer)];
      total += pt.outcome;
    }
    m.global_mean = train.empty() ? 0.0 : total / static_cast<double>(train.size());
    m.reviewer_mean.resize(sums.size(), m.global_mean);
    for (size_t r = 0; r < sums.size(); ++r)
      if (counts[r] > 0) m.reviewer_mean[r] = sums[r] / counts[r];
    return m;
  }

  // Adjusted cosine over co-raters; 0 when the papers share none.
  double paper_similarity(int pa, int pb) const {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [ra, ya] : by_paper[static_cast<size_t>(pa)]) {
      for (const auto& [rb, yb] : by_paper[static_cast<size_t>(pb)]) {
        if (ra != rb) continue;
        const double ca = ya - reviewer_mean[static_cast<size_t>(ra)];
        const double cb = yb - reviewer_mean[static_cast<size_t>(rb)];
        dot += ca * cb;
        na += ca * ca;
        nb += cb * cb;
      }
    }
    if (na <= 0.0 || nb <= 0.0) return 0.0;
    return dot / std::sqrt(na * nb);
  }

  // Prediction from the k most similar papers the reviewer has rated;
  // nullopt = cold start.
  std::optional<double> predict(int reviewer, int paper, int k) const {
    const auto& rated = by_reviewer[static_cast<size_t>(reviewer)];
    if (rated.empty()) return std::nullopt;
    std::vector<std::pair<double, std::pair<int, double>>> scored;
    for (const auto& [p2, y2] : rated) {
      if (p2 == paper) continue;
      scored.push_back({paper_similarity(paper, p2), {p2, y2}});
    }
    if (scored.empty()) return std::nullopt;
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second.first < b.second.first;  // deterministic tie-break by paper
    });
    const size_t take = std::min<size_t>(static_cast<size_t>(k), scored.size());
    double wsum = 0.0, wy = 0.0, plain = 0.0;
    for (size_t i = 0; i < take; ++i) {
      const double s = std::max(scored[i].first, 0.0);
      wsum += s;
      wy += s * scored[i].second.second;
      plain += scored[i].second.second;
    }
    if (wsum > 0.0) return wy / wsum;
    return plain / static_cast<double>(take);
  }
};

// ---- shared CV machinery ----

double evaluate_point(const TrainedImputer& model, const Venue& venue, const PairTable& pairs,
                      const KnnModel* knn, const ObservedPoint& pt) {
  if (model.kind == ImputerKind::cf_knn) {
    const auto pred = knn->predict(pt.reviewer, pt.paper, model.k_neighbors);
    return pred ? *pred : knn->global_mean;
  }
  if (model.constant_predictor) return model.constant_value;
  const FeatureBuilder fb = make_builder(venue, pairs, model.features);
  const Eigen::VectorXd x = finalize_features(fb.raw(pairs, pt.reviewer, pt.paper), model);
  return model.classes[static_cast<size_t>(predict_class(model.weights, x))];
}

TrainedImputer fit_on(ImputerKind kind, const Venue& venue, const PairTable& pairs,
                      const std::vector<ObservedPoint>& train, const OutcomeScale& scale,
                      double hyper, const FeatureOptions& options) {
  TrainedImputer model;
  model.kind = kind;
  model.y_min = scale.y_min;
  model.y_max = scale.y_max;
  model.features = options;
  model.chosen_hyperparameter = hyper;

  if (kind == ImputerKind::cf_knn) {
    model.k_neighbors = std::max(1, static_cast<int>(std::lround(hyper)));
    model.train_ratings = train;
    double total = 0.0;
    for (const auto& pt : train) total += pt.outcome;
    model.train_mean = train.empty() ? 0.5 * (scale.y_min + scale.y_max)
                                     : total / static_cast<double>(train.size());
    return model;
  }

  // clf-logistic
  const FeatureBuilder fb = make_builder(venue, pairs, options);
  model.feature_names = fb.names;
  const int dims = fb.raw_dims();
  const int n = static_cast<int>(train.size());

  Eigen::MatrixXd raw(n, dims);
  for (int i = 0; i < n; ++i)
    raw.row(i) = fb.raw(pairs, train[static_cast<size_t>(i)].reviewer,
                        train[static_cast<size_t>(i)].paper);

  model.feature_fill = Eigen::VectorXd::Zero(dims);
  for (int d = 0; d < dims; ++d) {
    double sum = 0.0;
    int cnt = 0;
    for (int i = 0; i < n; ++i)
      if (!std::isnan(raw(i, d))) {
        sum += raw(i, d);
        ++cnt;
      }
    model.feature_fill(d) = cnt > 0 ? sum / cnt : 0.0;
  }
  Eigen::MatrixXd filled = raw;
  for (int i = 0; i < n; ++i)
    for (int d = 0; d < dims; ++d)
      if (std::isnan(filled(i, d))) filled(i, d) = model.feature_fill(d);

  model.feature_mean = filled.colwise().mean();
  model.feature_scale = Eigen::VectorXd::Ones(dims);
  if (options.standardize) {
    for (int d = 0; d < dims; ++d) {
      const double var = (filled.col(d).array() - model.feature_mean(d)).square().mean();
      model.feature_scale(d) = var > 0.0 ? std::sqrt(var) : 0.0;
    }
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < dims; ++d)
        if (model.feature_scale(d) > 0.0)
          filled(i, d) = (filled(i, d) - model.feature_mean(d)) / model.feature_scale(d);
  }

  for (const auto& pt : train) {
    if (std::find(model.classes.begin(), model.classes.end(), pt.outcome) ==
        model.classes.end())
      model.classes.push_back(pt.outcome);
  }
  std::sort(model.classes.begin(), model.classes.end());
  if (model.classes.size() <= 1) {
    model.constant_predictor = true;  // degenerate single-class data
    model.constant_value = model.classes.empty() ? 0.5 * (scale.y_min + scale.y_max)
                                                 : model.classes.front();
    return model;
  }

  std::vector<int> labels(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto it = std::lower_bound(model.classes.begin(), model.classes.end(),
                                     train[static_cast<size_t>(i)].outcome);
    labels[static_cast<size_t>(i)] = static_cast<int>(it - model.classes.begin());
  }
  model.weights =
      train_logistic(filled, labels, static_cast<int>(model.classes.size()), hyper).weights;
  return model;
}

}  // namespace

std::string to_string(ImputerKind kind) {
  return kind == ImputerKind::clf_logistic ? "clf-logistic" : "cf-knn";
}

ImputerKind imputer_kind_from_string(const std::string& text) {
  if (text == "clf-logistic") return ImputerKind::clf_logistic;
  if (text == "cf-knn") return ImputerKind::cf_knn;
  throw ValidationError("unknown imputer kind '" + text + "'");
}

std::vector<ObservedPoint> observed_points(const Venue& venue, const PairPartition& partition,
                                           const OutcomeTable& outcomes) {
  std::vector<ObservedPoint> points;
  for (int r = 0; r < venue.num_reviewers(); ++r)
    for (int p = 0; p < venue.num_papers(); ++p)
      if (partition.observed(r, p)) points.push_back({r, p, outcomes.value(r, p)});
  return points;
}

std::vector<double> default_hyper_grid(ImputerKind kind) {
  if (kind == ImputerKind::clf_logistic) return {0.01, 0.1, 1.0, 10.0};
  return {1.0, 2.0, 3.0, 5.0};
}

TrainedImputer fit_imputer(ImputerKind kind, const Venue& venue, const PairTable& pairs,
                           const std::vector<ObservedPoint>& observed, const OutcomeScale& scale,
                           std::vector<double> hyper_grid, int folds, std::uint64_t seed) {
  scale.validate();
  if (hyper_grid.empty()) hyper_grid = default_hyper_grid(kind);
  if (static_cast<int>(observed.size()) < folds)
    throw ValidationError("need at least as many observed pairs as folds");

  const FeatureOptions options;  // defaults; recorded in the model
  std::vector<int> order(observed.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(splitmix64(seed));
  shuffle_indices(order, rng);

  double best_mae = std::numeric_limits<double>::infinity();
  double best_hyper = hyper_grid.front();
  for (const double hyper : hyper_grid) {
    double total_mae = 0.0;
    for (int fold = 0; fold < folds; ++fold) {
      std::vector<ObservedPoint> train, test;
      for (size_t i = 0; i < order.size(); ++i) {
        const auto& pt = observed[static_cast<size_t>(order[i])];
        if (static_cast<int>(i % static_cast<size_t>(folds)) == fold)
          test.push_back(pt);
        else
          train.push_back(pt);
      }
      const TrainedImputer m = fit_on(kind, venue, pairs, train, scale, hyper, options);
      KnnModel knn;
      if (kind == ImputerKind::cf_knn) knn = KnnModel::build(venue, train);
      double mae = 0.0;
      for (const auto& pt : test)
        mae += std::abs(evaluate_point(m, venue, pairs, &knn, pt) - pt.outcome);
      total_mae += mae / static_cast<double>(test.size());
    }
    const double mean_mae = total_mae / folds;
    // Ties break toward the most regularized grid point (largest value).
    if (mean_mae < best_mae - 1e-12 ||
        (std::abs(mean_mae - best_mae) <= 1e-12 && hyper > best_hyper)) {
      best_mae = mean_mae;
      best_hyper = hyper;
    }
  }

  TrainedImputer model = fit_on(kind, venue, pairs, observed, scale, best_hyper, options);
  model.cv_mae = best_mae;
  model.seed = seed;
  return model;
}

ImputedValues impute_with_model(const TrainedImputer& model, const Venue& venue,
                                const PairTable& pairs,
                                const std::vector<std::pair<int, int>>& targets) {
  ImputedValues out;
  out.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(targets.size()));
  out.cold_start.assign(targets.size(), false);
  const OutcomeScale scale{model.y_min, model.y_max, {}};

  KnnModel knn;
  if (model.kind == ImputerKind::cf_knn) knn = KnnModel::build(venue, model.train_ratings);

  for (size_t i = 0; i < targets.size(); ++i) {
    const auto [r, p] = targets[i];
    double value;
    if (model.kind == ImputerKind::cf_knn) {
      const auto pred = knn.predict(r, p, model.k_neighbors);
      if (pred) {
        value = *pred;
      } else {
        value = model.train_mean;
        out.cold_start[i] = true;
      }
    } else {
      value = evaluate_point(model, venue, pairs, nullptr, {r, p, 0.0});
    }
    out.values(static_cast<Eigen::Index>(i)) = clamp_to(value, scale);
  }
  return out;
}

double mean_baseline_mae(const std::vector<double>& train_y, const std::vector<double>& test_y) {
  if (train_y.empty() || test_y.empty())
    throw ValidationError("baseline MAE needs non-empty train and test sets");
  const double mean =
      std::accumulate(train_y.begin(), train_y.end(), 0.0) / static_cast<double>(train_y.size());
  double mae = 0.0;
  for (const double y : test_y) mae += std::abs(y - mean);
  return mae / static_cast<double>(test_y.size());
}

MaeReport evaluate_imputers(const std::vector<ImputerKind>& kinds, const Venue& venue,
                            const PairTable& pairs, const std::vector<ObservedPoint>& observed,
                            const OutcomeScale& scale, double split_fraction, int repeats,
                            std::uint64_t seed) {
  if (observed.size() < 4) throw ValidationError("not enough observed pairs to split");
  MaeReport report;
  report.repeats = repeats;

  std::vector<std::vector<double>> maes(kinds.size() + 1);  // + baseline
  for (int rep = 0; rep < repeats; ++rep) {
    std::vector<int> order(observed.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(splitmix64(seed + static_cast<std::uint64_t>(rep) * 0x9e37ull));
    shuffle_indices(order, rng);
    const size_t n_train =
        std::max<size_t>(1, static_cast<size_t>(split_fraction * observed.size()));
    std::vector<ObservedPoint> train, test;
    for (size_t i = 0; i < order.size(); ++i)
      (i < n_train ? train : test).push_back(observed[static_cast<size_t>(order[i])]);
    if (test.empty()) throw ValidationError("split produced an empty test set");

    for (size_t m = 0; m < kinds.size(); ++m) {
      const int folds = std::min<int>(10, static_cast<int>(train.size()));
      const TrainedImputer model =
          fit_imputer(kinds[m], venue, pairs, train, scale, {}, folds,
                      seed + static_cast<std::uint64_t>(rep));
      KnnModel knn;
      if (kinds[m] == ImputerKind::cf_knn) knn = KnnModel::build(venue, train);
      double mae = 0.0;
      for (const auto& pt : test)
        mae += std::abs(evaluate_point(model, venue, pairs, &knn, pt) - pt.outcome);
      maes[m].push_back(mae / static_cast<double>(test.size()));
    }
    std::vector<double> train_y, test_y;
    for (const auto& pt : train) train_y.push_back(pt.outcome);
    for (const auto& pt : test) test_y.push_back(pt.outcome);
    maes.back().push_back(mean_baseline_mae(train_y, test_y));
  }

  const auto summarize = [&](const std::string& name, const std::vector<double>& xs) {
    MaeReport::Row row;
    row.model = name;
    const double n = static_cast<double>(xs.size());
    row.mean_mae = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double var = 0.0;
    for (const double v : xs) var += (v - row.mean_mae) * (v - row.mean_mae);
    var = xs.size() > 1 ? var / (n - 1.0) : 0.0;
    const double half = 1.959964 * std::sqrt(var / n);
    row.ci_lo = row.mean_mae - half;
    row.ci_hi = row.mean_mae + half;
    return row;
  };
  for (size_t m = 0; m < kinds.size(); ++m)
    report.rows.push_back(summarize(to_string(kinds[m]), maes[m]));
  report.rows.push_back(summarize("mean-baseline", maes.back()));
  return report;
}

}  // namespace offrev
