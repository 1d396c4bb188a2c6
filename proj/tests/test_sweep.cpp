#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "offrev/io.hpp"
#include "offrev/sampler.hpp"
#include "offrev/sweep.hpp"
#include "offrev/synth.hpp"

using namespace offrev;
namespace fs = std::filesystem;

namespace {

struct Study {
  SyntheticVenue synthetic;
  CovarianceAccumulator covariance;
  StudyInputs inputs;

  explicit Study(double attrition = 0.15, std::uint64_t seed = 9) {
    SyntheticSpec spec;
    spec.num_reviewers = 5;
    spec.num_papers = 5;
    spec.reviewer_cap = 2;
    spec.on_policy = {PolicyFamily::tpdp_linear, 0.5, 1.0, 0.5};
    spec.attrition_rate = attrition;
    spec.seed = seed;
    synthetic = generate_synthetic_venue(spec);
    covariance = estimate_covariance(synthetic.on_policy.prob, synthetic.venue, 20000, 77);
    inputs.venue = &synthetic.venue;
    inputs.pairs = &synthetic.pairs;
    inputs.outcomes = &synthetic.outcomes;
    inputs.p_on = &synthetic.on_policy.prob;
    inputs.covariance = &covariance;
    inputs.scale = spec.scale;
  }
};

}  // namespace

TEST_CASE("cost of randomization") {
  const Venue venue = offrev::testing::make_venue(2, 2, 1, 1);
  Eigen::MatrixXd s(2, 2);
  s << 2, 1, 1, 2;

  SUBCASE("q = 1 has ratio exactly 1") {
    const auto rows = cost_of_randomization(s, venue, {1.0});
    CHECK(rows[0].ratio == doctest::Approx(1.0));
  }
  SUBCASE("2x2 fixture: ratio 0.75 at q = 0.5") {
    const auto rows = cost_of_randomization(s, venue, {0.5});
    CHECK(rows[0].ratio == doctest::Approx(0.75).epsilon(1e-12));
  }
  SUBCASE("ratios are nondecreasing in q and infeasible cells are flagged") {
    const auto rows = cost_of_randomization(s, venue, {0.4, 0.5, 0.6, 0.8, 1.0});
    double prev = 0.0;
    for (const auto& row : rows) {
      if (row.q < 0.5) {
        CHECK(!row.feasible);
        continue;
      }
      CHECK(row.feasible);
      CHECK(row.ratio >= prev - 1e-9);
      prev = row.ratio;
    }
  }
}

TEST_CASE("sweep over q includes the on-policy cell with unit weights") {
  const Study study;
  SweepSpec spec;
  spec.base = study.synthetic.spec.on_policy;
  spec.parameter = "q";
  spec.grid = {0.5, 1.0};  // 0.5 is the on-policy value
  spec.methods = {"mean", "model:cf-knn", "manski", "mono", "lip"};
  spec.lipschitz_constant = 20.0;
  spec.seed = 5;

  const SweepResult result = run_sweep(spec, study.inputs, TieBreakKind::none);
  CHECK(result.cell_errors.empty());
  REQUIRE(result.rows.size() == 10);

  // cells are independent: two workers produce the single-worker rows
  SweepSpec threaded = spec;
  threaded.threads = 2;
  const SweepResult parallel = run_sweep(threaded, study.inputs, TieBreakKind::none);
  REQUIRE(parallel.rows.size() == result.rows.size());
  for (size_t i = 0; i < result.rows.size(); ++i) {
    CHECK(parallel.rows[i].method == result.rows[i].method);
    CHECK(parallel.rows[i].lo == result.rows[i].lo);
    CHECK(parallel.rows[i].hi == result.rows[i].hi);
  }

  for (const auto& row : result.rows) {
    // every interval is ordered and the CI contains the identified set
    CHECK(row.lo <= row.hi + 1e-9);
    CHECK(row.ci_lo <= row.lo + 1e-9);
    CHECK(row.hi <= row.ci_hi + 1e-9);
    if (row.point) {
      CHECK(row.lo <= *row.point + 1e-9);
      CHECK(*row.point <= row.hi + 1e-9);
    }
  }

  // manski brackets mono and lip cell-wise
  for (const double value : spec.grid) {
    double manski_lo = 0, manski_hi = 0;
    for (const auto& row : result.rows)
      if (row.value == value && row.method == "manski") {
        manski_lo = row.lo;
        manski_hi = row.hi;
      }
    for (const auto& row : result.rows) {
      if (row.value != value) continue;
      if (row.method == "mono" || row.method == "lip") {
        CHECK(row.lo >= manski_lo - 1e-8);
        CHECK(row.hi <= manski_hi + 1e-8);
      }
      // a model plan is admissible, so its point estimate sits inside Manski
      if (row.method == "model:cf-knn" && row.point) {
        CHECK(*row.point >= manski_lo - 1e-8);
        CHECK(*row.point <= manski_hi + 1e-8);
      }
    }
  }
}

TEST_CASE("per-cell failures are recorded and the sweep continues") {
  const Study study;
  SweepSpec spec;
  spec.base = study.synthetic.spec.on_policy;
  spec.parameter = "q";
  // 0.05 is infeasible for load 1 with 5 reviewers (5 * 0.05 < 1)
  spec.grid = {0.05, 1.0};
  spec.methods = {"manski"};
  const SweepResult result = run_sweep(spec, study.inputs, TieBreakKind::none);
  CHECK(result.cell_errors.size() == 1);
  CHECK(result.rows.size() == 1);
}

TEST_CASE("report csv layout and manifest reproducibility") {
  const Study study;
  SweepSpec spec;
  spec.base = study.synthetic.spec.on_policy;
  spec.parameter = "w_text";
  spec.grid = {0.25, 0.5, 0.75};
  spec.methods = {"mean", "manski", "mono"};
  spec.seed = 31;

  const fs::path tmp = fs::temp_directory_path() / "offrev_sweep_report";
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  const SweepResult result = run_sweep(spec, study.inputs, TieBreakKind::tpdp);
  write_report_csv(result, tmp / "results.csv");
  write_manifest(result, study.inputs, tmp / "manifest.json");

  std::ifstream in(tmp / "results.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "param,value,method,point,lo,hi,ci_lo,ci_hi");
  int data_rows = 0;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) ++data_rows;
  CHECK(data_rows == 9);  // 3 grid points x 3 methods

  // same seed, same inputs: byte-identical results
  const SweepResult again = run_sweep(spec, study.inputs, TieBreakKind::tpdp);
  write_report_csv(again, tmp / "results2.csv");
  std::ifstream a(tmp / "results.csv", std::ios::binary), b(tmp / "results2.csv", std::ios::binary);
  std::ostringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  CHECK(sa.str() == sb.str());
  fs::remove_all(tmp);
}

TEST_CASE("empty sweep table yields a header-only csv") {
  SweepResult empty;
  empty.parameter = "q";
  const fs::path tmp = fs::temp_directory_path() / "offrev_empty_report";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  write_report_csv(empty, tmp / "results.csv");
  std::ifstream in(tmp / "results.csv");
  std::string header, extra;
  std::getline(in, header);
  CHECK(header == "param,value,method,point,lo,hi,ci_lo,ci_hi");
  CHECK(!std::getline(in, extra));
  fs::remove_all(tmp);
}

TEST_CASE("bad-policy analysis separates good from bad on a signal venue") {
  // Outcomes increase with similarity; the min-similarity policy must look
  // clearly worse under the monotonicity bounds. The venue is sized so the
  // single logged draw overlaps both candidate policies.
  SyntheticSpec spec;
  spec.num_reviewers = 40;
  spec.num_papers = 40;
  spec.reviewer_cap = 2;
  spec.on_policy = {PolicyFamily::tpdp_linear, 0.5, 1.0, 0.4};
  spec.outcome_kind = "similarity";
  spec.attrition_rate = 0.05;
  spec.seed = 4;
  const auto synthetic = generate_synthetic_venue(spec);

  StudyInputs inputs;
  inputs.venue = &synthetic.venue;
  inputs.pairs = &synthetic.pairs;
  inputs.outcomes = &synthetic.outcomes;
  inputs.p_on = &synthetic.on_policy.prob;
  inputs.scale = spec.scale;

  const Eigen::MatrixXd similarity =
      similarity_matrix(synthetic.venue, synthetic.pairs, spec.on_policy);
  const auto rows = bad_policy_analysis(inputs, similarity, 2.0 * synthetic.lipschitz_constant);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].policy == "max-similarity");
  CHECK(rows[1].policy == "min-similarity");
  // Table-1 shape: a point column plus three interval methods per policy.
  for (const auto& row : rows) {
    CHECK(row.manski.lower.point <= row.manski.upper.point);
    CHECK(row.mono.lower.point >= row.manski.lower.point - 1e-8);
    CHECK(row.lip.upper.point <= row.manski.upper.point + 1e-8);
  }
  CHECK(rows[1].mono.upper.point < rows[0].mono.lower.point);
}
