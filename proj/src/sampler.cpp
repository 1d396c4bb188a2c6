#include "offrev/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <thread>

namespace offrev {

namespace {

constexpr double kSnapTol = 1e-9;

double fractional_part_distance(double v) { return std::abs(v - std::round(v)); }

bool near_integer(double v, double tol = kSnapTol) { return fractional_part_distance(v) <= tol; }

void snap(double& v, double tol = kSnapTol) {
  if (near_integer(v, tol)) v = std::round(v);
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Vertex ids on the bipartite fractional graph: reviewers, then papers,
// then one personal slack node per reviewer.
struct Graph {
  int nr, np;
  int reviewer(int r) const { return r; }
  int paper(int p) const { return nr + p; }
  int slack(int r) const { return nr + np + r; }
  bool is_reviewer(int v) const { return v < nr; }
  bool is_paper(int v) const { return v >= nr && v < nr + np; }
  bool is_slack(int v) const { return v >= nr + np; }
};

}  // namespace

FractionalState FractionalState::from_marginals(const Eigen::MatrixXd& marginals,
                                                const Venue& venue) {
  FractionalState state;
  state.prob = marginals;
  for (int r = 0; r < venue.num_reviewers(); ++r)
    for (int p = 0; p < venue.num_papers(); ++p) snap(state.prob(r, p));
  state.slack = Eigen::VectorXd::Zero(venue.num_reviewers());
  for (int r = 0; r < venue.num_reviewers(); ++r) {
    state.slack(r) = static_cast<double>(venue.reviewer_cap(r)) - state.prob.row(r).sum();
    if (state.slack(r) < -kSnapTol)
      throw DataError("reviewer '" + venue.reviewer_ids[r] + "' marginals exceed cap");
    if (state.slack(r) < 0.0) state.slack(r) = 0.0;
    snap(state.slack(r));
  }
  state.row_frac.assign(static_cast<size_t>(venue.num_reviewers()), {});
  state.col_frac.assign(static_cast<size_t>(venue.num_papers()), {});
  state.slack_frac.assign(static_cast<size_t>(venue.num_reviewers()), 0);
  for (int r = 0; r < venue.num_reviewers(); ++r) {
    for (int p = 0; p < venue.num_papers(); ++p) {
      if (near_integer(state.prob(r, p))) continue;
      state.row_frac[static_cast<size_t>(r)].push_back(p);
      state.col_frac[static_cast<size_t>(p)].push_back(r);
    }
    state.slack_frac[static_cast<size_t>(r)] = near_integer(state.slack(r)) ? 0 : 1;
  }
  return state;
}

bool FractionalState::integral() const {
  for (const auto& row : row_frac)
    if (!row.empty()) return false;
  for (const char f : slack_frac)
    if (f) return false;
  return true;
}

std::optional<RoundingStep> next_rounding_step(const FractionalState& state) {
  const int nr = static_cast<int>(state.prob.rows());
  const int np = static_cast<int>(state.prob.cols());
  const Graph g{nr, np};

  // Lowest-ordered entry point: a slack leaf when one exists, otherwise the
  // first reviewer touching a fractional pair.
  int start = -1;
  for (int r = 0; r < nr && start < 0; ++r)
    if (state.slack_frac[static_cast<size_t>(r)]) start = g.slack(r);
  if (start < 0) {
    for (int r = 0; r < nr && start < 0; ++r)
      if (!state.row_frac[static_cast<size_t>(r)].empty()) start = g.reviewer(r);
  }
  if (start < 0) return std::nullopt;  // integral

  // Walk lowest-ordered fractional edges until a vertex repeats (cycle) or
  // another slack leaf is reached (path).
  struct Hop {
    int vertex;
    int via_r, via_p;  // edge taken to arrive here; paper = -1 means slack
  };
  std::vector<Hop> walk{{start, -1, -2}};
  std::vector<int> position(static_cast<size_t>(nr + np + nr), -1);
  position[static_cast<size_t>(start)] = 0;

  const auto lowest_not_via = [](const std::vector<int>& sorted, int via) {
    for (const int v : sorted)
      if (v != via) return v;
    return -1;
  };

  int cycle_from = -1;
  while (cycle_from < 0) {
    const Hop& here = walk.back();
    const int v = here.vertex;
    int to = -1, er = -1, ep = -2;
    if (g.is_slack(v)) {
      const int r = v - nr - np;
      if (!(here.via_p == -1 && here.via_r == r)) {
        to = g.reviewer(r);
        er = r;
        ep = -1;
      }
    } else if (g.is_reviewer(v)) {
      const int r = v;
      const int via = here.via_r == r ? here.via_p : -2;
      const int p = lowest_not_via(state.row_frac[static_cast<size_t>(r)], via);
      if (p >= 0) {
        to = g.paper(p);
        er = r;
        ep = p;
      } else if (state.slack_frac[static_cast<size_t>(r)] &&
                 !(here.via_r == r && here.via_p == -1)) {
        to = g.slack(r);
        er = r;
        ep = -1;
      }
    } else {
      const int p = v - nr;
      const int via = here.via_p == p ? here.via_r : -2;
      const int r = lowest_not_via(state.col_frac[static_cast<size_t>(p)], via);
      if (r >= 0) {
        to = g.reviewer(r);
        er = r;
        ep = p;
      }
    }
    if (to < 0) {
      if (g.is_slack(v) && walk.size() > 1) break;  // path between slack leaves
      throw DataError(
          "dependent rounding: fractional support has a dead end; input marginals are corrupt");
    }
    walk.push_back({to, er, ep});
    if (position[static_cast<size_t>(to)] >= 0) {
      cycle_from = position[static_cast<size_t>(to)];
      break;
    }
    position[static_cast<size_t>(to)] = static_cast<int>(walk.size()) - 1;
  }

  const size_t first = cycle_from >= 0 ? static_cast<size_t>(cycle_from) + 1 : 1;
  RoundingStep step;
  for (size_t i = first; i < walk.size(); ++i) {
    const int sign = (i - first) % 2 == 0 ? +1 : -1;
    step.edges.push_back({walk[i].via_r, walk[i].via_p, sign});
  }

  auto up_room = [&](const RoundingStep::Edge& e) {
    const double v = e.paper >= 0 ? state.prob(e.reviewer, e.paper) : state.slack(e.reviewer);
    return std::ceil(v - kSnapTol) - v;
  };
  auto down_room = [&](const RoundingStep::Edge& e) {
    const double v = e.paper >= 0 ? state.prob(e.reviewer, e.paper) : state.slack(e.reviewer);
    return v - std::floor(v + kSnapTol);
  };
  step.delta_plus = std::numeric_limits<double>::infinity();
  step.delta_minus = std::numeric_limits<double>::infinity();
  for (const auto& e : step.edges) {
    step.delta_plus = std::min(step.delta_plus, e.sign > 0 ? up_room(e) : down_room(e));
    step.delta_minus = std::min(step.delta_minus, e.sign > 0 ? down_room(e) : up_room(e));
  }
  if (!(step.delta_plus > 0.0) || !(step.delta_minus > 0.0))
    throw DataError("dependent rounding: degenerate shift; input marginals are corrupt");
  step.prob_plus = step.delta_minus / (step.delta_plus + step.delta_minus);
  return step;
}

namespace {

void erase_sorted(std::vector<int>& sorted, int value) {
  const auto it = std::lower_bound(sorted.begin(), sorted.end(), value);
  if (it != sorted.end() && *it == value) sorted.erase(it);
}

}  // namespace

void apply_rounding_step(FractionalState& state, const RoundingStep& step, bool plus) {
  const double delta = plus ? step.delta_plus : -step.delta_minus;
  for (const auto& e : step.edges) {
    double& v = e.paper >= 0 ? state.prob(e.reviewer, e.paper) : state.slack(e.reviewer);
    v += e.sign * delta;
    snap(v);
    if (v != std::round(v)) continue;  // still fractional
    if (e.paper >= 0) {
      erase_sorted(state.row_frac[static_cast<size_t>(e.reviewer)], e.paper);
      erase_sorted(state.col_frac[static_cast<size_t>(e.paper)], e.reviewer);
    } else {
      state.slack_frac[static_cast<size_t>(e.reviewer)] = 0;
    }
  }
}

namespace {

void check_assignment(const Eigen::MatrixXd& z, const Eigen::MatrixXd& marginals,
                      const Venue& venue) {
  for (int p = 0; p < venue.num_papers(); ++p)
    if (std::llround(z.col(p).sum()) != venue.paper_load)
      throw DataError("sampled assignment misses the load of paper '" + venue.paper_ids[p] + "'");
  for (int r = 0; r < venue.num_reviewers(); ++r) {
    if (std::llround(z.row(r).sum()) > venue.reviewer_cap(r))
      throw DataError("sampled assignment exceeds cap of reviewer '" + venue.reviewer_ids[r] + "'");
    for (int p = 0; p < venue.num_papers(); ++p) {
      if (z(r, p) != 0.0 && z(r, p) != 1.0)
        throw DataError("sampled assignment is not binary");
      if (z(r, p) == 1.0 && marginals(r, p) <= 0.0)
        throw DataError("sampled assignment uses a zero-probability pair");
    }
  }
}

Eigen::MatrixXd finish(FractionalState& state) {
  Eigen::MatrixXd z = state.prob;
  for (int r = 0; r < z.rows(); ++r)
    for (int p = 0; p < z.cols(); ++p) z(r, p) = std::round(z(r, p));
  return z;
}

}  // namespace

Eigen::MatrixXd sample_assignment(const Eigen::MatrixXd& marginals, const Venue& venue,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FractionalState state = FractionalState::from_marginals(marginals, venue);
  const int max_steps = static_cast<int>(marginals.size()) + venue.num_reviewers() + 1;
  for (int i = 0; i <= max_steps; ++i) {
    auto step = next_rounding_step(state);
    if (!step) break;
    apply_rounding_step(state, *step, uniform01(rng) < step->prob_plus);
  }
  Eigen::MatrixXd z = finish(state);
  check_assignment(z, marginals, venue);
  return z;
}

Eigen::MatrixXd round_greedy(const Eigen::MatrixXd& marginals, const Venue& venue,
                             const Eigen::MatrixXd& objective_weights) {
  FractionalState state = FractionalState::from_marginals(marginals, venue);
  const int max_steps = static_cast<int>(marginals.size()) + venue.num_reviewers() + 1;
  for (int i = 0; i <= max_steps; ++i) {
    auto step = next_rounding_step(state);
    if (!step) break;
    double slope = 0.0;  // objective change per unit of +direction shift
    for (const auto& e : step->edges)
      if (e.paper >= 0) slope += e.sign * objective_weights(e.reviewer, e.paper);
    apply_rounding_step(state, *step, slope >= 0.0);
  }
  return finish(state);
}

std::vector<WeightedAssignment> enumerate_assignment_distribution(
    const Eigen::MatrixXd& marginals, const Venue& venue, std::size_t max_nodes) {
  std::map<std::string, WeightedAssignment> leaves;
  std::size_t nodes = 0;

  const std::function<void(FractionalState, double)> recurse = [&](FractionalState state,
                                                                   double probability) {
    if (++nodes > max_nodes)
      throw ValidationError("assignment enumeration exceeds the node budget");
    auto step = next_rounding_step(state);
    if (!step) {
      Eigen::MatrixXd z = finish(state);
      std::string key(static_cast<size_t>(z.size()), '0');
      for (int r = 0; r < z.rows(); ++r)
        for (int p = 0; p < z.cols(); ++p)
          if (z(r, p) == 1.0) key[static_cast<size_t>(r * z.cols() + p)] = '1';
      auto [it, inserted] = leaves.try_emplace(key, WeightedAssignment{z, 0.0});
      it->second.probability += probability;
      return;
    }
    FractionalState minus = state;
    apply_rounding_step(state, *step, true);
    recurse(std::move(state), probability * step->prob_plus);
    apply_rounding_step(minus, *step, false);
    recurse(std::move(minus), probability * (1.0 - step->prob_plus));
  };
  recurse(FractionalState::from_marginals(marginals, venue), 1.0);

  std::vector<WeightedAssignment> out;
  out.reserve(leaves.size());
  for (auto& [key, wa] : leaves) out.push_back(std::move(wa));
  return out;
}

CovarianceAccumulator::CovarianceAccumulator(int num_pairs, std::uint64_t seed)
    : num_pairs_(num_pairs), seed_(seed), first_(Eigen::VectorXd::Zero(num_pairs)) {}

CovarianceAccumulator CovarianceAccumulator::from_raw(
    int num_pairs, std::int64_t count, std::uint64_t seed, Eigen::VectorXd first_moment_sums,
    std::unordered_map<std::uint64_t, double> co_occurrence) {
  CovarianceAccumulator acc(num_pairs, seed);
  if (first_moment_sums.size() != num_pairs)
    throw ValidationError("first-moment vector size mismatch");
  acc.count_ = count;
  acc.first_ = std::move(first_moment_sums);
  acc.second_ = std::move(co_occurrence);
  return acc;
}

void CovarianceAccumulator::add(const Eigen::MatrixXd& assignment) {
  std::vector<int> on;
  const int cols = static_cast<int>(assignment.cols());
  for (int r = 0; r < assignment.rows(); ++r)
    for (int p = 0; p < assignment.cols(); ++p)
      if (assignment(r, p) == 1.0) on.push_back(r * cols + p);
  for (const int i : on) first_(i) += 1.0;
  for (size_t a = 0; a < on.size(); ++a)
    for (size_t b = a + 1; b < on.size(); ++b) second_[key(on[a], on[b])] += 1.0;
  ++count_;
}

void CovarianceAccumulator::merge(const CovarianceAccumulator& other) {
  if (num_pairs_ != other.num_pairs_) throw ValidationError("accumulator shape mismatch");
  first_ += other.first_;
  count_ += other.count_;
  for (const auto& [k, v] : other.second_) second_[k] += v;
}

double CovarianceAccumulator::marginal(int pair) const {
  if (count_ == 0) throw ValidationError("covariance accumulator is empty");
  return first_(pair) / static_cast<double>(count_);
}

double CovarianceAccumulator::covariance(int pair_a, int pair_b) const {
  if (count_ == 0) throw ValidationError("covariance accumulator is empty");
  const double n = static_cast<double>(count_);
  const double pa = first_(pair_a) / n;
  const double pb = first_(pair_b) / n;
  if (pair_a == pair_b) return pa * (1.0 - pa);  // Z^2 = Z
  const auto it = second_.find(key(pair_a, pair_b));
  const double joint = it == second_.end() ? 0.0 : it->second / n;
  return joint - pa * pb;
}

CovarianceAccumulator estimate_covariance(const Eigen::MatrixXd& marginals, const Venue& venue,
                                          std::int64_t n_samples, std::uint64_t seed,
                                          int threads) {
  if (n_samples < 2) throw ValidationError("covariance estimation needs at least 2 samples");
  threads = std::max(1, threads);
  const int num_pairs = venue.num_pairs();

  // Pairs outside the support are never assigned; co-occurrence counts live
  // in a dense upper triangle over support slots and are sparsified once.
  std::vector<int> slot_of(static_cast<size_t>(num_pairs), -1);
  std::vector<int> pair_of;
  for (int r = 0; r < venue.num_reviewers(); ++r)
    for (int p = 0; p < venue.num_papers(); ++p)
      if (marginals(r, p) > 0.0) {
        slot_of[static_cast<size_t>(venue.pair_index(r, p))] = static_cast<int>(pair_of.size());
        pair_of.push_back(venue.pair_index(r, p));
      }
  const std::size_t support = pair_of.size();
  const std::size_t tri = support * (support - 1) / 2;
  if (tri > 80u * 1000u * 1000u)
    throw ValidationError("covariance support too large for dense accumulation");
  const auto tri_index = [support](int a, int b) {  // a < b, slot indices
    return static_cast<std::size_t>(a) * (2 * support - static_cast<std::size_t>(a) - 1) / 2 +
           static_cast<std::size_t>(b - a - 1);
  };

  struct Part {
    std::vector<double> first;
    std::vector<double> co;
    std::int64_t count = 0;
    std::uint64_t stream_seed = 0;
  };
  std::vector<Part> parts(static_cast<size_t>(threads));
  for (int w = 0; w < threads; ++w) {
    parts[static_cast<size_t>(w)].first.assign(support, 0.0);
    parts[static_cast<size_t>(w)].co.assign(tri, 0.0);
    parts[static_cast<size_t>(w)].stream_seed =
        splitmix64(seed + 0x1000ull * static_cast<std::uint64_t>(w));
  }

  const int cols = venue.num_papers();
  auto work = [&](int w) {
    Part& part = parts[static_cast<size_t>(w)];
    const std::int64_t share = n_samples / threads + (w < n_samples % threads ? 1 : 0);
    std::mt19937_64 rng(part.stream_seed);
    std::vector<int> on;
    for (std::int64_t i = 0; i < share; ++i) {
      const Eigen::MatrixXd z = sample_assignment(marginals, venue, rng());
      on.clear();
      for (int r = 0; r < z.rows(); ++r)
        for (int p = 0; p < z.cols(); ++p)
          if (z(r, p) == 1.0) on.push_back(slot_of[static_cast<size_t>(r * cols + p)]);
      for (const int a : on) part.first[static_cast<size_t>(a)] += 1.0;
      for (size_t a = 0; a < on.size(); ++a)
        for (size_t b = a + 1; b < on.size(); ++b) {
          const int lo = std::min(on[a], on[b]);
          const int hi = std::max(on[a], on[b]);
          part.co[tri_index(lo, hi)] += 1.0;
        }
      ++part.count;
    }
  };

  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }

  std::int64_t count = 0;
  Eigen::VectorXd first = Eigen::VectorXd::Zero(num_pairs);
  std::unordered_map<std::uint64_t, double> second;
  for (const auto& part : parts) {
    count += part.count;
    for (std::size_t a = 0; a < support; ++a)
      first(pair_of[a]) += part.first[a];
  }
  for (std::size_t a = 0; a < support; ++a)
    for (std::size_t b = a + 1; b < support; ++b) {
      double total = 0.0;
      for (const auto& part : parts) total += part.co[tri_index(static_cast<int>(a), static_cast<int>(b))];
      if (total > 0.0)
        second[CovarianceAccumulator::key(pair_of[a], pair_of[b])] = total;
    }
  return CovarianceAccumulator::from_raw(num_pairs, count, seed, std::move(first),
                                         std::move(second));
}

}  // namespace offrev
