#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "offrev/io.hpp"
#include "offrev/sampler.hpp"
#include "offrev/synth.hpp"

using namespace offrev;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("offrev_io_" + std::to_string(std::rand()) + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

}  // namespace

TEST_CASE("synthetic venue round-trips through the three documents") {
  TempDir tmp;
  SyntheticSpec spec;
  spec.num_reviewers = 4;
  spec.num_papers = 4;
  spec.reviewer_cap = 2;
  spec.on_policy = {PolicyFamily::tpdp_linear, 0.5, 1.0, 0.5};
  spec.attrition_rate = 0.2;
  spec.seed = 5;
  const auto synthetic = generate_synthetic_venue(spec);
  write_synthetic_venue(synthetic, tmp.path);

  const OutcomeScale scale = spec.scale;
  const LoadedData loaded = load_venue(tmp.path / "venue.json", tmp.path / "scores.csv",
                                       tmp.path / "outcomes.csv", &scale);
  CHECK(loaded.venue.reviewer_ids == synthetic.venue.reviewer_ids);
  CHECK(loaded.venue.paper_ids == synthetic.venue.paper_ids);
  CHECK(loaded.venue.paper_load == synthetic.venue.paper_load);
  CHECK((loaded.venue.conflict == synthetic.venue.conflict).all());
  CHECK(loaded.venue.bid_scheme == synthetic.venue.bid_scheme);
  CHECK((loaded.pairs.has_text == synthetic.pairs.has_text).all());
  // 9 significant digits survive the round trip at double precision checks
  CHECK((loaded.pairs.text_sim - synthetic.pairs.text_sim).cwiseAbs().maxCoeff() <= 1e-8);
  REQUIRE(loaded.outcomes.size() == synthetic.outcomes.size());
  for (size_t i = 0; i < loaded.outcomes.size(); ++i) {
    CHECK(loaded.outcomes[i].reviewer == synthetic.outcomes[i].reviewer);
    CHECK(loaded.outcomes[i].paper == synthetic.outcomes[i].paper);
    CHECK(loaded.outcomes[i].status == synthetic.outcomes[i].status);
  }

  SUBCASE("reloading a rewritten model is structurally equal") {
    write_venue_json(loaded.venue, tmp.path / "venue2.json");
    const Venue again = read_venue_json(tmp.path / "venue2.json");
    CHECK(again.reviewer_ids == loaded.venue.reviewer_ids);
    CHECK(again.reviewer_cap == loaded.venue.reviewer_cap);
  }
}

TEST_CASE("scores rows with missing covariates parse as missing, not zero") {
  TempDir tmp;
  write(tmp.path / "venue.json",
        R"({"papers": ["p0"], "reviewers": [{"id": "r0", "cap": 1}],
            "paper_load": 1, "conflicts": [], "bid_scheme": "aaai"})");
  const Venue venue = read_venue_json(tmp.path / "venue.json");
  write(tmp.path / "scores.csv", "reviewer,paper,T,K,bid\nr0,p0,,0.3,eager\n");
  const PairTable pairs = read_scores_csv(tmp.path / "scores.csv", venue);
  CHECK(!pairs.has_text(0, 0));
  CHECK(pairs.has_subject(0, 0));
  CHECK(pairs.subject(0, 0) == doctest::Approx(0.3));
  REQUIRE(pairs.bid_label(0, 0).has_value());
  CHECK(*pairs.bid_label(0, 0) == "eager");
}

TEST_CASE("loader errors name the offending row") {
  TempDir tmp;
  write(tmp.path / "venue.json",
        R"({"papers": ["p0", "p1"], "reviewers": [{"id": "r0", "cap": 1}, {"id": "r1", "cap": 1}],
            "paper_load": 1, "conflicts": []})");
  const Venue venue = read_venue_json(tmp.path / "venue.json");

  SUBCASE("unknown reviewer id") {
    write(tmp.path / "scores.csv", "reviewer,paper,T,K,bid\nrX,p0,0.5,,\n");
    CHECK_THROWS_WITH_AS(read_scores_csv(tmp.path / "scores.csv", venue),
                         doctest::Contains("row 1"), ValidationError);
  }
  SUBCASE("duplicate pair") {
    write(tmp.path / "scores.csv",
          "reviewer,paper,T,K,bid\nr0,p0,0.5,,\nr0,p0,0.6,,\nr0,p1,0.5,,\nr1,p0,0.5,,\nr1,p1,0.5,,\n");
    CHECK_THROWS_WITH_AS(read_scores_csv(tmp.path / "scores.csv", venue),
                         doctest::Contains("duplicate"), ValidationError);
  }
  SUBCASE("missing pair coverage") {
    write(tmp.path / "scores.csv", "reviewer,paper,T,K,bid\nr0,p0,0.5,,\n");
    CHECK_THROWS_WITH_AS(read_scores_csv(tmp.path / "scores.csv", venue),
                         doctest::Contains("missing score row"), ValidationError);
  }
  SUBCASE("out-of-range covariate") {
    write(tmp.path / "scores.csv", "reviewer,paper,T,K,bid\nr0,p0,1.5,,\n");
    CHECK_THROWS_WITH_AS(read_scores_csv(tmp.path / "scores.csv", venue),
                         doctest::Contains("row 1"), ValidationError);
  }
  SUBCASE("observed outcome with an empty value") {
    write(tmp.path / "outcomes.csv", "reviewer,paper,value,status\nr0,p0,,observed\n");
    const auto records = read_outcomes_csv(tmp.path / "outcomes.csv", venue);
    CHECK_THROWS_WITH_AS(validate_outcomes(venue, records, nullptr),
                         doctest::Contains("row 1"), ValidationError);
  }
  SUBCASE("malformed header") {
    write(tmp.path / "scores.csv", "reviewer,paper,T,bid\n");
    CHECK_THROWS_WITH_AS(read_scores_csv(tmp.path / "scores.csv", venue),
                         doctest::Contains("header"), ValidationError);
  }
}

TEST_CASE("marginals csv round trip covers all non-conflict pairs") {
  TempDir tmp;
  const Venue venue = offrev::testing::make_venue(3, 2, 1, 1, {{2, 1}});
  Eigen::MatrixXd prob(3, 2);
  prob << 0.25, 0.5, 0.5, 0.5, 0.25, 0.0;
  write_marginals_csv(venue, prob, tmp.path / "m.csv");
  const Eigen::MatrixXd again = read_marginals_csv(tmp.path / "m.csv", venue);
  CHECK((again - prob).cwiseAbs().maxCoeff() <= 1e-9);

  SUBCASE("a row for a conflicted pair is rejected") {
    std::ofstream out(tmp.path / "m.csv", std::ios::app);
    out << "r2,p1,0.5\n";
    out.close();
    CHECK_THROWS_AS(read_marginals_csv(tmp.path / "m.csv", venue), ValidationError);
  }
}

TEST_CASE("covariance file round trip preserves every query") {
  TempDir tmp;
  const Venue venue = offrev::testing::make_venue(2, 2, 1, 1);
  Eigen::MatrixXd uniform(2, 2);
  uniform << 0.5, 0.5, 0.5, 0.5;
  const auto cov = estimate_covariance(uniform, venue, 5000, 31);
  write_covariance(cov, venue, tmp.path / "cov.bin");
  CHECK(fs::exists(tmp.path / "cov.bin.json"));
  const auto again = read_covariance(tmp.path / "cov.bin", venue);
  CHECK(again.count() == cov.count());
  for (int a = 0; a < venue.num_pairs(); ++a) {
    CHECK(again.marginal(a) == doctest::Approx(cov.marginal(a)).epsilon(1e-14));
    for (int b = 0; b < venue.num_pairs(); ++b)
      CHECK(again.covariance(a, b) == doctest::Approx(cov.covariance(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("policy json uses the documented field names") {
  TempDir tmp;
  write(tmp.path / "p.json",
        R"({"family": "aaai22", "w_text": 0.75, "lambda_bid": 1.0, "q": 0.52})");
  const PolicyParams params = read_policy_json(tmp.path / "p.json");
  CHECK(params.family == PolicyFamily::aaai22);
  CHECK(params.w_text == doctest::Approx(0.75));
  CHECK(params.q == doctest::Approx(0.52));
  write_policy_json(params, tmp.path / "p2.json");
  const PolicyParams again = read_policy_json(tmp.path / "p2.json");
  CHECK(again.w_text == params.w_text);
  CHECK(again.lambda_bid == params.lambda_bid);
}

TEST_CASE("model json round trip") {
  TempDir tmp;
  const Venue venue = offrev::testing::make_venue(2, 2, 1, 2, {}, "aaai");
  TrainedImputer model;
  model.kind = ImputerKind::cf_knn;
  model.y_min = 1.0;
  model.y_max = 5.0;
  model.k_neighbors = 3;
  model.train_ratings = {{0, 1, 4.0}, {1, 0, 2.0}};
  model.train_mean = 3.0;
  model.chosen_hyperparameter = 3.0;
  write_model_json(model, venue, tmp.path / "m.json");
  const auto again = read_model_json(tmp.path / "m.json", venue);
  CHECK(again.kind == ImputerKind::cf_knn);
  CHECK(again.k_neighbors == 3);
  REQUIRE(again.train_ratings.size() == 2);
  CHECK(again.train_ratings[0].paper == 1);
  CHECK(again.train_mean == doctest::Approx(3.0));
}

TEST_CASE("floats are written with 9 significant digits") {
  CHECK(format_double(0.123456789123) == "0.123456789");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(1e-40) == "1e-40");
}
