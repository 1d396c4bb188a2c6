#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace offrev {

// Exit-code-bearing error categories. The CLI maps these to process exit
// codes: ValidationError -> 2, SolverError -> 3, DataError -> 4.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InfeasibleError : public SolverError {
 public:
  using SolverError::SolverError;
};

class UnboundedError : public SolverError {
 public:
  using SolverError::SolverError;
};

// Logged data contradicting the claimed on-policy (or itself).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using BoolGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline BoolGrid bool_grid(Eigen::Index rows, Eigen::Index cols, bool value = false) {
  return BoolGrid::Constant(rows, cols, value);
}

/// A peer-review venue: reviewer/paper ids, conflicts, paper load and
/// per-reviewer caps. Immutable after load; all matrices downstream are
/// indexed reviewers x papers in the order stored here.
struct Venue {
  std::vector<std::string> reviewer_ids;
  std::vector<std::string> paper_ids;
  BoolGrid conflict;              // reviewers x papers
  int paper_load = 1;             // reviews required per paper
  Eigen::VectorXi reviewer_cap;   // max papers per reviewer
  std::vector<bool> profile_provided;  // conflict-detection profile, per reviewer
  std::string bid_scheme;         // "tpdp", "aaai", or "" if undeclared

  int num_reviewers() const { return static_cast<int>(reviewer_ids.size()); }
  int num_papers() const { return static_cast<int>(paper_ids.size()); }
  int num_pairs() const { return num_reviewers() * num_papers(); }
  int total_reviews() const { return paper_load * num_papers(); }

  int pair_index(int reviewer, int paper) const { return reviewer * num_papers() + paper; }
  std::pair<int, int> pair_from_index(int index) const {
    return {index / num_papers(), index % num_papers()};
  }
  std::string pair_name(int reviewer, int paper) const {
    return "(" + reviewer_ids[reviewer] + ", " + paper_ids[paper] + ")";
  }

  std::optional<int> reviewer_index(const std::string& id) const;
  std::optional<int> paper_index(const std::string& id) const;

  // Structural invariants: unique ids, conflicts in range, positive load and
  // caps, and the necessary feasibility condition sum(cap) >= load * papers.
  void validate() const;
};

/// Per-pair covariates with explicit missingness. Bids are stored as indices
/// into `bid_labels` (-1 = missing / not entered by the reviewer).
struct PairTable {
  Eigen::MatrixXd text_sim;   // T
  BoolGrid has_text;
  Eigen::MatrixXd subject;    // K
  BoolGrid has_subject;
  Eigen::MatrixXi bid;        // index into bid_labels, -1 = missing
  std::vector<std::string> bid_labels;

  std::optional<std::string> bid_label(int reviewer, int paper) const {
    const int b = bid(reviewer, paper);
    if (b < 0) return std::nullopt;
    return bid_labels[static_cast<size_t>(b)];
  }
};

enum class OutcomeStatus {
  observed,
  attrition,
  absent_reviewer,
  manually_added,
  manually_removed,
};

std::string to_string(OutcomeStatus status);
OutcomeStatus outcome_status_from_string(const std::string& text);

struct OutcomeRecord {
  int reviewer = 0;
  int paper = 0;
  std::optional<double> value;
  OutcomeStatus status = OutcomeStatus::observed;
  int source_row = 0;  // 1-based data row in outcomes.csv, for error messages
};

/// Admissible outcome range, plus the optional finite level set reviewers
/// choose from (e.g. expertise 1..4).
struct OutcomeScale {
  double y_min = 0.0;
  double y_max = 1.0;
  std::vector<double> levels;  // empty = continuous

  double width() const { return y_max - y_min; }
  void validate() const;
};

/// The pair sets driving every estimator. Masks are reviewers x papers.
/// supported/violations/attrition/absent are mutually disjoint and cover
/// every pair with positive probability under either policy, minus `ignored`.
struct PairPartition {
  BoolGrid supported;   // I+ : no positivity violation, no missing review
  BoolGrid violations;  // I- : P_A = 0 and P_B > 0
  BoolGrid attrition;   // I^Att
  BoolGrid absent;      // I^Abs
  BoolGrid observed;    // O : subset of I+ that was assigned and reviewed
  BoolGrid ignored;     // manually-added reviews
  Eigen::MatrixXd assigned;  // Z^A, 0/1

  int count(const BoolGrid& mask) const { return static_cast<int>(mask.count()); }
};

/// Observed outcome values as a matrix; `present` marks pairs whose review
/// was actually submitted (status = observed).
struct OutcomeTable {
  Eigen::MatrixXd value;
  BoolGrid present;
};

OutcomeTable outcome_table(const Venue& venue, const std::vector<OutcomeRecord>& records);

// Checks per-record invariants (value present iff status requires it, value
// within scale, pair not conflicted, no duplicate pairs). Throws
// ValidationError naming the offending row.
void validate_outcomes(const Venue& venue, const std::vector<OutcomeRecord>& records,
                       const OutcomeScale* scale);

/// Partition all pairs with P_A > 0 or P_B > 0 into I+/I-/I^Att/I^Abs.
///
/// A reviewer is absent iff every one of their assigned reviews is missing
/// and none was manually removed; mixed cases go to attrition pair by pair.
/// Manually-added records land in `ignored`, manually-removed in attrition.
/// A record on a pair with P_A = 0 contradicts the logging policy -> DataError.
PairPartition classify_pairs(const Venue& venue, const Eigen::MatrixXd& p_on,
                             const Eigen::MatrixXd& p_off,
                             const std::vector<OutcomeRecord>& records);

}  // namespace offrev
