#include "offrev/domain.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace offrev {

namespace {

void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace

std::optional<int> Venue::reviewer_index(const std::string& id) const {
  const auto it = std::find(reviewer_ids.begin(), reviewer_ids.end(), id);
  if (it == reviewer_ids.end()) return std::nullopt;
  return static_cast<int>(it - reviewer_ids.begin());
}

std::optional<int> Venue::paper_index(const std::string& id) const {
  const auto it = std::find(paper_ids.begin(), paper_ids.end(), id);
  if (it == paper_ids.end()) return std::nullopt;
  return static_cast<int>(it - paper_ids.begin());
}

void Venue::validate() const {
  require(!reviewer_ids.empty(), "venue has no reviewers");
  require(!paper_ids.empty(), "venue has no papers");
  {
    std::unordered_set<std::string> seen;
    for (const auto& id : reviewer_ids)
      require(seen.insert(id).second, "duplicate reviewer id '" + id + "'");
    seen.clear();
    for (const auto& id : paper_ids)
      require(seen.insert(id).second, "duplicate paper id '" + id + "'");
  }
  require(paper_load >= 1, "paper_load must be a positive integer");
  require(reviewer_cap.size() == num_reviewers(), "reviewer cap count mismatch");
  for (int r = 0; r < num_reviewers(); ++r)
    require(reviewer_cap(r) >= 1,
            "reviewer '" + reviewer_ids[r] + "' has non-positive cap");
  require(conflict.rows() == num_reviewers() && conflict.cols() == num_papers(),
          "conflict grid shape mismatch");
  require(profile_provided.size() == reviewer_ids.size(), "profile flag count mismatch");
  require(bid_scheme.empty() || bid_scheme == "tpdp" || bid_scheme == "aaai",
          "unknown bid scheme '" + bid_scheme + "'");

  // Necessary feasibility condition: enough total capacity for all reviews.
  const long total_cap = reviewer_cap.cast<long>().sum();
  const long needed = static_cast<long>(paper_load) * num_papers();
  require(total_cap >= needed,
          "infeasible venue: total reviewer capacity " + std::to_string(total_cap) +
              " < required reviews " + std::to_string(needed));
}

std::string to_string(OutcomeStatus status) {
  switch (status) {
    case OutcomeStatus::observed: return "observed";
    case OutcomeStatus::attrition: return "attrition";
    case OutcomeStatus::absent_reviewer: return "absent-reviewer";
    case OutcomeStatus::manually_added: return "manually-added";
    case OutcomeStatus::manually_removed: return "manually-removed";
  }
  return "?";
}

OutcomeStatus outcome_status_from_string(const std::string& text) {
  if (text == "observed") return OutcomeStatus::observed;
  if (text == "attrition") return OutcomeStatus::attrition;
  if (text == "absent-reviewer") return OutcomeStatus::absent_reviewer;
  if (text == "manually-added") return OutcomeStatus::manually_added;
  if (text == "manually-removed") return OutcomeStatus::manually_removed;
  throw ValidationError("unknown outcome status '" + text + "'");
}

OutcomeTable outcome_table(const Venue& venue, const std::vector<OutcomeRecord>& records) {
  OutcomeTable table;
  table.value = Eigen::MatrixXd::Zero(venue.num_reviewers(), venue.num_papers());
  table.present = bool_grid(venue.num_reviewers(), venue.num_papers());
  for (const auto& rec : records) {
    if (rec.status == OutcomeStatus::observed) {
      table.value(rec.reviewer, rec.paper) = *rec.value;
      table.present(rec.reviewer, rec.paper) = true;
    }
  }
  return table;
}

void validate_outcomes(const Venue& venue, const std::vector<OutcomeRecord>& records,
                       const OutcomeScale* scale) {
  std::unordered_set<long> seen_pairs;
  for (const auto& rec : records) {
    const std::string where = "outcomes row " + std::to_string(rec.source_row) + " " +
                              venue.pair_name(rec.reviewer, rec.paper);
    const long key = static_cast<long>(venue.pair_index(rec.reviewer, rec.paper));
    require(seen_pairs.insert(key).second, where + ": duplicate pair");
    require(!venue.conflict(rec.reviewer, rec.paper), where + ": pair is conflicted");

    const bool needs_value = rec.status == OutcomeStatus::observed;
    const bool forbids_value = rec.status == OutcomeStatus::attrition ||
                               rec.status == OutcomeStatus::absent_reviewer ||
                               rec.status == OutcomeStatus::manually_removed;
    if (needs_value)
      require(rec.value.has_value(), where + ": observed outcome has no value");
    if (forbids_value)
      require(!rec.value.has_value(),
              where + ": status '" + to_string(rec.status) + "' must not carry a value");
    if (rec.value && scale)
      require(*rec.value >= scale->y_min && *rec.value <= scale->y_max,
              where + ": value " + std::to_string(*rec.value) + " outside [" +
                  std::to_string(scale->y_min) + ", " + std::to_string(scale->y_max) + "]");
  }

  // An absent-reviewer mark contradicts an observed review by that reviewer.
  std::vector<bool> has_observed(venue.reviewer_ids.size(), false);
  std::vector<int> absent_row(venue.reviewer_ids.size(), 0);
  for (const auto& rec : records) {
    if (rec.status == OutcomeStatus::observed) has_observed[rec.reviewer] = true;
    if (rec.status == OutcomeStatus::absent_reviewer) absent_row[rec.reviewer] = rec.source_row;
  }
  for (size_t r = 0; r < has_observed.size(); ++r) {
    if (has_observed[r] && absent_row[r] != 0)
      throw ValidationError("outcomes row " + std::to_string(absent_row[r]) + ": reviewer '" +
                            venue.reviewer_ids[r] +
                            "' marked absent but has an observed review");
  }
}

void OutcomeScale::validate() const {
  if (!(y_min < y_max)) throw ValidationError("outcome scale requires y_min < y_max");
  for (const double level : levels) {
    if (level < y_min || level > y_max)
      throw ValidationError("outcome level " + std::to_string(level) + " outside scale");
  }
}

PairPartition classify_pairs(const Venue& venue, const Eigen::MatrixXd& p_on,
                             const Eigen::MatrixXd& p_off,
                             const std::vector<OutcomeRecord>& records) {
  const int nr = venue.num_reviewers();
  const int np = venue.num_papers();
  if (p_on.rows() != nr || p_on.cols() != np || p_off.rows() != nr || p_off.cols() != np)
    throw ValidationError("marginal matrices do not match venue shape");

  PairPartition part;
  part.supported = bool_grid(nr, np);
  part.violations = bool_grid(nr, np);
  part.attrition = bool_grid(nr, np);
  part.absent = bool_grid(nr, np);
  part.observed = bool_grid(nr, np);
  part.ignored = bool_grid(nr, np);
  part.assigned = Eigen::MatrixXd::Zero(nr, np);

  // Index the records; Z^A covers every status except manually-added.
  std::vector<const OutcomeRecord*> record_at(static_cast<size_t>(nr) * np, nullptr);
  for (const auto& rec : records) {
    record_at[static_cast<size_t>(venue.pair_index(rec.reviewer, rec.paper))] = &rec;
    if (rec.status == OutcomeStatus::manually_added) {
      part.ignored(rec.reviewer, rec.paper) = true;
      continue;
    }
    part.assigned(rec.reviewer, rec.paper) = 1.0;
    if (p_on(rec.reviewer, rec.paper) <= 0.0)
      throw DataError("outcomes row " + std::to_string(rec.source_row) + " " +
                      venue.pair_name(rec.reviewer, rec.paper) +
                      ": record on a pair with zero on-policy probability");
  }

  // Absence is a per-reviewer pattern: every assigned review missing and
  // none manually removed.
  std::vector<bool> reviewer_absent(static_cast<size_t>(nr), false);
  for (int r = 0; r < nr; ++r) {
    int assigned_count = 0;
    int missing_count = 0;
    bool any_removed = false;
    for (int p = 0; p < np; ++p) {
      const OutcomeRecord* rec = record_at[static_cast<size_t>(venue.pair_index(r, p))];
      if (rec == nullptr || rec->status == OutcomeStatus::manually_added) continue;
      ++assigned_count;
      if (rec->status != OutcomeStatus::observed) ++missing_count;
      if (rec->status == OutcomeStatus::manually_removed) any_removed = true;
    }
    reviewer_absent[static_cast<size_t>(r)] =
        assigned_count > 0 && missing_count == assigned_count && !any_removed;
  }

  for (int r = 0; r < nr; ++r) {
    for (int p = 0; p < np; ++p) {
      if (venue.conflict(r, p)) continue;
      if (part.ignored(r, p)) continue;
      const bool on = p_on(r, p) > 0.0;
      const bool off = p_off(r, p) > 0.0;
      if (!on && !off) continue;  // never summed over; excluded from all sets
      if (!on) {
        part.violations(r, p) = true;
        continue;
      }
      const OutcomeRecord* rec = record_at[static_cast<size_t>(venue.pair_index(r, p))];
      if (rec == nullptr) {
        part.supported(r, p) = true;  // unassigned, nothing missing
        continue;
      }
      switch (rec->status) {
        case OutcomeStatus::observed:
          part.supported(r, p) = true;
          part.observed(r, p) = true;
          break;
        case OutcomeStatus::attrition:
        case OutcomeStatus::absent_reviewer:
          if (reviewer_absent[static_cast<size_t>(r)])
            part.absent(r, p) = true;
          else
            part.attrition(r, p) = true;
          break;
        case OutcomeStatus::manually_removed:
          part.attrition(r, p) = true;
          break;
        case OutcomeStatus::manually_added:
          break;  // handled above
      }
    }
  }
  return part;
}

}  // namespace offrev
