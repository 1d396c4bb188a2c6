#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "offrev/domain.hpp"

namespace offrev {

/// One dependent-rounding move: a cycle (or slack-terminated path) in the
/// fractional support, with the two opposing shift magnitudes. Applying
/// +delta_plus with probability prob_plus keeps every touched marginal at
/// its pre-step value.
struct RoundingStep {
  struct Edge {
    int reviewer;
    int paper;  // -1 = the reviewer's personal slack (unused capacity)
    int sign;   // +1 / -1, alternating along the walk
  };
  std::vector<Edge> edges;
  double delta_plus = 0.0;
  double delta_minus = 0.0;
  double prob_plus = 0.0;  // delta_minus / (delta_plus + delta_minus)
};

/// Fractional assignment state: pair probabilities plus per-reviewer slack
/// keeping every row mass integral (slack = cap - row sum). The sorted
/// adjacency of the fractional support is kept alongside so cycle walks
/// never rescan the full matrix; apply_rounding_step maintains it.
struct FractionalState {
  Eigen::MatrixXd prob;
  Eigen::VectorXd slack;
  std::vector<std::vector<int>> row_frac;  // reviewer -> fractional papers, ascending
  std::vector<std::vector<int>> col_frac;  // paper -> fractional reviewers, ascending
  std::vector<char> slack_frac;

  static FractionalState from_marginals(const Eigen::MatrixXd& marginals, const Venue& venue);
  bool integral() const;
};

/// Deterministic cycle/path locator; std::nullopt when already integral.
/// Throws DataError when the fractional support is corrupt (no closing
/// cycle or slack endpoint can be found).
std::optional<RoundingStep> next_rounding_step(const FractionalState& state);

void apply_rounding_step(FractionalState& state, const RoundingStep& step, bool plus);

/// Sample one binary assignment matching the marginals. Feasibility of the
/// result (loads, caps, conflicts) is re-checked before returning.
Eigen::MatrixXd sample_assignment(const Eigen::MatrixXd& marginals, const Venue& venue,
                                  std::uint64_t seed);

/// Round to an integral assignment choosing directions greedily by the
/// objective; at an LP optimum either direction preserves it.
Eigen::MatrixXd round_greedy(const Eigen::MatrixXd& marginals, const Venue& venue,
                             const Eigen::MatrixXd& objective_weights);

struct WeightedAssignment {
  Eigen::MatrixXd assignment;
  double probability = 0.0;
};

/// Exhaustive walk of the sampler's branching tree, merging duplicate
/// leaves. Exact distribution of sample_assignment for the given marginals.
std::vector<WeightedAssignment> enumerate_assignment_distribution(
    const Eigen::MatrixXd& marginals, const Venue& venue, std::size_t max_nodes = 1u << 22);

/// Streamed empirical moments of sampled assignments. Second moments are
/// kept sparsely over co-occurring pairs; covariance queries reconstruct the
/// absent entries from the first moments.
class CovarianceAccumulator {
 public:
  CovarianceAccumulator() = default;
  CovarianceAccumulator(int num_pairs, std::uint64_t seed);

  /// Reassemble from persisted raw sums (deserialization path).
  static CovarianceAccumulator from_raw(int num_pairs, std::int64_t count, std::uint64_t seed,
                                        Eigen::VectorXd first_moment_sums,
                                        std::unordered_map<std::uint64_t, double> co_occurrence);

  void add(const Eigen::MatrixXd& assignment);
  void merge(const CovarianceAccumulator& other);

  std::int64_t count() const { return count_; }
  int num_pairs() const { return num_pairs_; }
  std::uint64_t seed() const { return seed_; }

  double marginal(int pair) const;
  double covariance(int pair_a, int pair_b) const;

  const std::unordered_map<std::uint64_t, double>& co_occurrence() const { return second_; }
  const Eigen::VectorXd& first_moment_sums() const { return first_; }

  static std::uint64_t key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
  }

 private:
  int num_pairs_ = 0;
  std::int64_t count_ = 0;
  std::uint64_t seed_ = 0;
  Eigen::VectorXd first_;
  std::unordered_map<std::uint64_t, double> second_;
};

/// Monte Carlo covariance of the assignment law. Deterministic for a fixed
/// (seed, threads) pair; worker accumulators merge in worker order.
CovarianceAccumulator estimate_covariance(const Eigen::MatrixXd& marginals, const Venue& venue,
                                          std::int64_t n_samples, std::uint64_t seed,
                                          int threads = 1);

}  // namespace offrev
