#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "offrev/bounds.hpp"
#include "offrev/estimator.hpp"
#include "offrev/io.hpp"
#include "offrev/synth.hpp"

using namespace offrev;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

SyntheticSpec base_spec() {
  SyntheticSpec spec;
  spec.num_reviewers = 5;
  spec.num_papers = 5;
  spec.paper_load = 1;
  spec.reviewer_cap = 2;
  spec.on_policy = {PolicyFamily::tpdp_linear, 0.5, 1.0, 0.5};
  spec.seed = 11;
  return spec;
}

}  // namespace

TEST_CASE("zero attrition and absence produce all-observed outcomes") {
  SyntheticSpec spec = base_spec();
  spec.attrition_rate = 0.0;
  spec.absence_rate = 0.0;
  const auto synthetic = generate_synthetic_venue(spec);
  CHECK(!synthetic.outcomes.empty());
  for (const auto& rec : synthetic.outcomes) {
    CHECK(rec.status == OutcomeStatus::observed);
    CHECK(rec.value.has_value());
  }
  CHECK(static_cast<int>(synthetic.outcomes.size()) == synthetic.venue.total_reviews());
}

TEST_CASE("same seed is byte-identical, different seeds differ") {
  const fs::path tmp = fs::temp_directory_path() / "offrev_synth_det";
  fs::remove_all(tmp);
  const SyntheticSpec spec = base_spec();
  write_synthetic_venue(generate_synthetic_venue(spec), tmp / "a");
  write_synthetic_venue(generate_synthetic_venue(spec), tmp / "b");
  SyntheticSpec other = spec;
  other.seed = 12;
  write_synthetic_venue(generate_synthetic_venue(other), tmp / "c");
  for (const char* name : {"venue.json", "scores.csv", "outcomes.csv", "truth.json"})
    CHECK(slurp(tmp / "a" / name) == slurp(tmp / "b" / name));
  bool any_differ = false;
  for (const char* name : {"scores.csv", "outcomes.csv", "truth.json"})
    any_differ |= slurp(tmp / "a" / name) != slurp(tmp / "c" / name);
  CHECK(any_differ);
  fs::remove_all(tmp);
}

TEST_CASE("calibration at f = 0 never exceeds the generator's constant") {
  SyntheticSpec spec = base_spec();
  spec.attrition_rate = 0.1;
  spec.outcome_kind = "monotone-mean";
  for (const std::uint64_t seed : {3ull, 17ull, 99ull}) {
    spec.seed = seed;
    const auto synthetic = generate_synthetic_venue(spec);
    REQUIRE(synthetic.lipschitz_constant > 0.0);

    const auto part = classify_pairs(synthetic.venue, synthetic.on_policy.prob,
                                     synthetic.on_policy.prob, synthetic.outcomes);
    if (part.count(part.observed) < 2) continue;
    const auto table = outcome_table(synthetic.venue, synthetic.outcomes);
    const auto weights =
        importance_weights(synthetic.on_policy.prob, synthetic.on_policy.prob, part);
    EstimationContext ctx;
    ctx.venue = &synthetic.venue;
    ctx.partition = &part;
    ctx.outcomes = &table;
    ctx.weights = &weights;
    ctx.p_off = &synthetic.on_policy.prob;
    ctx.scale = spec.scale;
    const auto covariates = build_covariates(synthetic.venue, synthetic.pairs,
                                             scheme_for_family(spec.on_policy.family), 1.0);
    const auto dspec = DistanceSpec::over_pairs(covariates, surrogate_universe(part));
    const auto cal = calibrate_lipschitz(ctx, covariates, dspec, {0.0});
    CHECK(cal.hard_violations == 0);
    CHECK(cal.entries.front().constant <= synthetic.lipschitz_constant + 1e-9);
  }
}

TEST_CASE("truth mean matches a direct weighted sum") {
  const auto synthetic = generate_synthetic_venue(base_spec());
  const double mu = true_mean(synthetic.truth_y, synthetic.on_policy.prob,
                              synthetic.venue.total_reviews());
  double direct = 0.0;
  for (int r = 0; r < synthetic.venue.num_reviewers(); ++r)
    for (int p = 0; p < synthetic.venue.num_papers(); ++p)
      direct += synthetic.truth_y(r, p) * synthetic.on_policy.prob(r, p);
  CHECK(mu == doctest::Approx(direct / synthetic.venue.total_reviews()));
}

TEST_CASE("outcomes stay on the level grid and within scale") {
  SyntheticSpec spec = base_spec();
  spec.outcome_kind = "similarity";
  const auto synthetic = generate_synthetic_venue(spec);
  for (int r = 0; r < spec.num_reviewers; ++r)
    for (int p = 0; p < spec.num_papers; ++p) {
      const double y = synthetic.truth_y(r, p);
      CHECK(y >= spec.scale.y_min);
      CHECK(y <= spec.scale.y_max);
      bool on_grid = false;
      for (const double level : spec.scale.levels) on_grid |= level == y;
      CHECK(on_grid);
    }
}

TEST_CASE("absent reviewers lose every assigned review") {
  SyntheticSpec spec = base_spec();
  spec.absence_rate = 0.7;
  spec.seed = 4;
  const auto synthetic = generate_synthetic_venue(spec);
  for (int r = 0; r < synthetic.venue.num_reviewers(); ++r) {
    bool any_absent = false, any_other = false;
    for (const auto& rec : synthetic.outcomes) {
      if (rec.reviewer != r) continue;
      (rec.status == OutcomeStatus::absent_reviewer ? any_absent : any_other) = true;
    }
    CHECK(!(any_absent && any_other));
  }
}
