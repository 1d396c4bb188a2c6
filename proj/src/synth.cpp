#include "offrev/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "offrev/bounds.hpp"
#include "offrev/io.hpp"
#include "offrev/sampler.hpp"

namespace offrev {

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double snap_to_levels(double value, const OutcomeScale& scale) {
  if (scale.levels.empty()) return value;
  double best = scale.levels.front();
  for (const double level : scale.levels)
    if (std::abs(level - value) < std::abs(best - value)) best = level;
  return best;
}

}  // namespace

void SyntheticSpec::validate() const {
  on_policy.validate();
  scale.validate();
  if (num_reviewers < 1 || num_papers < 1) throw ValidationError("empty synthetic venue");
  if (paper_load < 1 || reviewer_cap < 1) throw ValidationError("non-positive load or cap");
  for (const double rate : {missing_text_rate, missing_subject_rate, conflict_rate,
                            attrition_rate, absence_rate})
    if (rate < 0.0 || rate > 1.0) throw ValidationError("synthetic rate outside [0, 1]");
  if (outcome_kind != "similarity" && outcome_kind != "monotone-mean")
    throw ValidationError("unknown outcome kind '" + outcome_kind + "'");
  if (!(outcome_low >= scale.y_min && outcome_low <= outcome_high &&
        outcome_high <= scale.y_max))
    throw ValidationError("outcome range must lie within the scale");
  const bool needs_text = on_policy.family != PolicyFamily::aaai22;
  if (needs_text && missing_text_rate > 0.0)
    throw ValidationError("family " + to_string(on_policy.family) +
                          " cannot generate missing text scores");
}

SyntheticVenue generate_synthetic_venue(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticVenue out;
  out.spec = spec;

  std::mt19937_64 rng(splitmix64(spec.seed));
  Venue& venue = out.venue;
  for (int r = 0; r < spec.num_reviewers; ++r) venue.reviewer_ids.push_back("r" + std::to_string(r));
  for (int p = 0; p < spec.num_papers; ++p) venue.paper_ids.push_back("p" + std::to_string(p));
  venue.paper_load = spec.paper_load;
  venue.reviewer_cap = Eigen::VectorXi::Constant(spec.num_reviewers, spec.reviewer_cap);
  venue.profile_provided.assign(static_cast<size_t>(spec.num_reviewers), true);
  const BidScheme scheme = scheme_for_family(spec.on_policy.family);
  venue.bid_scheme = scheme.name;
  venue.conflict = bool_grid(spec.num_reviewers, spec.num_papers);
  for (int r = 0; r < spec.num_reviewers; ++r)
    for (int p = 0; p < spec.num_papers; ++p)
      if (uniform01(rng) < spec.conflict_rate) venue.conflict(r, p) = true;
  // Keep every paper assignable despite conflicts.
  for (int p = 0; p < spec.num_papers; ++p) {
    int open = 0;
    for (int r = 0; r < spec.num_reviewers; ++r)
      if (!venue.conflict(r, p)) ++open;
    for (int r = 0; open < spec.paper_load && r < spec.num_reviewers; ++r)
      if (venue.conflict(r, p)) {
        venue.conflict(r, p) = false;
        ++open;
      }
  }
  venue.validate();

  // True covariates first; missingness only masks the observation.
  PairTable& pairs = out.pairs;
  pairs.text_sim = Eigen::MatrixXd::Zero(spec.num_reviewers, spec.num_papers);
  pairs.has_text = bool_grid(spec.num_reviewers, spec.num_papers);
  pairs.subject = Eigen::MatrixXd::Zero(spec.num_reviewers, spec.num_papers);
  pairs.has_subject = bool_grid(spec.num_reviewers, spec.num_papers);
  pairs.bid = Eigen::MatrixXi::Constant(spec.num_reviewers, spec.num_papers, -1);
  pairs.bid_labels = scheme.labels;

  Eigen::MatrixXd true_text(spec.num_reviewers, spec.num_papers);
  Eigen::MatrixXd true_subject(spec.num_reviewers, spec.num_papers);
  Eigen::MatrixXi true_bid(spec.num_reviewers, spec.num_papers);
  for (int r = 0; r < spec.num_reviewers; ++r) {
    for (int p = 0; p < spec.num_papers; ++p) {
      true_text(r, p) = uniform01(rng);
      true_subject(r, p) = uniform01(rng);
      true_bid(r, p) = static_cast<int>(rng() % scheme.labels.size());
      if (venue.conflict(r, p)) continue;
      pairs.bid(r, p) = true_bid(r, p);
      if (uniform01(rng) >= spec.missing_text_rate) {
        pairs.text_sim(r, p) = true_text(r, p);
        pairs.has_text(r, p) = true;
      }
      if (spec.with_subject && uniform01(rng) >= spec.missing_subject_rate) {
        pairs.subject(r, p) = true_subject(r, p);
        pairs.has_subject(r, p) = true;
      }
    }
  }

  // Outcome function: monotone in every covariate component and increasing
  // in similarity for the kinds generated here.
  double bid_lo = std::numeric_limits<double>::infinity();
  double bid_hi = -std::numeric_limits<double>::infinity();
  for (const auto& label : scheme.labels) {
    const double v = bid_value(label, scheme, 1.0);
    bid_lo = std::min(bid_lo, v);
    bid_hi = std::max(bid_hi, v);
  }
  const Eigen::MatrixXd on_similarity = similarity_matrix(venue, pairs, spec.on_policy);
  double s_lo = std::numeric_limits<double>::infinity();
  double s_hi = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < spec.num_reviewers; ++r)
    for (int p = 0; p < spec.num_papers; ++p) {
      if (venue.conflict(r, p)) continue;
      s_lo = std::min(s_lo, on_similarity(r, p));
      s_hi = std::max(s_hi, on_similarity(r, p));
    }

  out.truth_y = Eigen::MatrixXd::Zero(spec.num_reviewers, spec.num_papers);
  for (int r = 0; r < spec.num_reviewers; ++r) {
    for (int p = 0; p < spec.num_papers; ++p) {
      double level01;
      if (spec.outcome_kind == "similarity") {
        const double s = on_similarity(r, p);
        level01 = s_hi > s_lo ? (s - s_lo) / (s_hi - s_lo) : 0.5;
      } else {
        const double bid01 = bid_hi > bid_lo
                                 ? (bid_value(scheme.labels[static_cast<size_t>(true_bid(r, p))],
                                              scheme, 1.0) -
                                    bid_lo) /
                                       (bid_hi - bid_lo)
                                 : 0.5;
        double sum = true_text(r, p) + bid01;
        double dims = 2.0;
        if (spec.with_subject) {
          sum += true_subject(r, p);
          dims = 3.0;
        }
        level01 = sum / dims;
      }
      const double y = spec.outcome_low + (spec.outcome_high - spec.outcome_low) * level01;
      out.truth_y(r, p) = spec.snap_to_levels ? snap_to_levels(y, spec.scale) : y;
    }
  }

  // Realized Lipschitz constant over all non-conflict pairs, measured in the
  // same observed-covariate distance the calibration sees (full ranges, so
  // any calibration over a subset can only report a smaller constant).
  const CovariateTable covariates = build_covariates(venue, pairs, scheme, 1.0);
  std::vector<int> all_pairs;
  for (int r = 0; r < spec.num_reviewers; ++r)
    for (int p = 0; p < spec.num_papers; ++p)
      if (!venue.conflict(r, p)) all_pairs.push_back(venue.pair_index(r, p));
  const DistanceSpec dspec = DistanceSpec::over_pairs(covariates, all_pairs);
  out.lipschitz_constant = 0.0;
  for (size_t a = 0; a < all_pairs.size(); ++a) {
    for (size_t b = a + 1; b < all_pairs.size(); ++b) {
      const double d = covariate_distance(covariates, all_pairs[a], all_pairs[b], dspec);
      const auto [ra, pa] = venue.pair_from_index(all_pairs[a]);
      const auto [rb, pb] = venue.pair_from_index(all_pairs[b]);
      const double dy = std::abs(out.truth_y(ra, pa) - out.truth_y(rb, pb));
      if (d > 0.0)
        out.lipschitz_constant = std::max(out.lipschitz_constant, dy / d);
      else if (dy > 0.0)
        throw ValidationError("synthetic truth violates d = 0 consistency");
    }
  }

  out.on_policy = randomized_assignment(on_similarity, venue, spec.on_policy.q);
  out.on_policy.params = spec.on_policy;
  out.assignment = sample_assignment(out.on_policy.prob, venue, splitmix64(spec.seed + 1));
  out.outcomes = synthesize_outcomes(out, out.assignment, splitmix64(spec.seed + 2));
  return out;
}

std::vector<OutcomeRecord> synthesize_outcomes(const SyntheticVenue& synthetic,
                                               const Eigen::MatrixXd& assignment,
                                               std::uint64_t seed) {
  const SyntheticSpec& spec = synthetic.spec;
  const Venue& venue = synthetic.venue;
  std::mt19937_64 rng(seed);

  std::vector<bool> reviewer_absent(static_cast<size_t>(venue.num_reviewers()), false);
  for (int r = 0; r < venue.num_reviewers(); ++r)
    reviewer_absent[static_cast<size_t>(r)] = uniform01(rng) < spec.absence_rate;

  std::vector<OutcomeRecord> records;
  int row = 0;
  for (int r = 0; r < venue.num_reviewers(); ++r) {
    for (int p = 0; p < venue.num_papers(); ++p) {
      if (assignment(r, p) != 1.0) continue;
      OutcomeRecord rec;
      rec.reviewer = r;
      rec.paper = p;
      rec.source_row = ++row;
      if (reviewer_absent[static_cast<size_t>(r)]) {
        rec.status = OutcomeStatus::absent_reviewer;
      } else if (uniform01(rng) < spec.attrition_rate) {
        rec.status = OutcomeStatus::attrition;
      } else {
        rec.status = OutcomeStatus::observed;
        rec.value = synthetic.truth_y(r, p);
      }
      records.push_back(rec);
    }
  }
  return records;
}

double true_mean(const Eigen::MatrixXd& truth_y, const Eigen::MatrixXd& marginals,
                 int total_reviews) {
  return (truth_y.array() * marginals.array()).sum() / total_reviews;
}

void write_synthetic_venue(const SyntheticVenue& synthetic,
                           const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_venue_json(synthetic.venue, out_dir / "venue.json");
  write_scores_csv(synthetic.venue, synthetic.pairs, out_dir / "scores.csv");
  write_outcomes_csv(synthetic.venue, synthetic.outcomes, out_dir / "outcomes.csv");

  nlohmann::json truth;
  truth["seed"] = synthetic.spec.seed;
  truth["outcome_kind"] = synthetic.spec.outcome_kind;
  truth["lipschitz_constant"] = synthetic.lipschitz_constant;
  truth["scale"] = {{"y_min", synthetic.spec.scale.y_min},
                    {"y_max", synthetic.spec.scale.y_max},
                    {"levels", synthetic.spec.scale.levels}};
  truth["on_policy"] = {{"family", to_string(synthetic.spec.on_policy.family)},
                        {"w_text", synthetic.spec.on_policy.w_text},
                        {"lambda_bid", synthetic.spec.on_policy.lambda_bid},
                        {"q", synthetic.spec.on_policy.q}};
  truth["y"] = nlohmann::json::array();
  for (int r = 0; r < synthetic.venue.num_reviewers(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int p = 0; p < synthetic.venue.num_papers(); ++p) row.push_back(synthetic.truth_y(r, p));
    truth["y"].push_back(row);
  }
  truth["on_policy_marginals"] = nlohmann::json::array();
  for (int r = 0; r < synthetic.venue.num_reviewers(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int p = 0; p < synthetic.venue.num_papers(); ++p)
      row.push_back(synthetic.on_policy.prob(r, p));
    truth["on_policy_marginals"].push_back(row);
  }
  std::ofstream out(out_dir / "truth.json", std::ios::binary);
  if (!out) throw ValidationError("cannot write truth.json");
  out << truth.dump(2) << "\n";
}

}  // namespace offrev
