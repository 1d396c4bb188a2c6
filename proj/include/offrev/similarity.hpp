#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "offrev/domain.hpp"

namespace offrev {

enum class PolicyFamily { tpdp_linear, aaai22, neurips16, aaai21 };

std::string to_string(PolicyFamily family);
PolicyFamily policy_family_from_string(const std::string& text);

/// Parameters of an assignment policy: similarity family, text weight,
/// positive-bid scaling, and the randomization cap q.
struct PolicyParams {
  PolicyFamily family = PolicyFamily::tpdp_linear;
  double w_text = 0.5;
  double lambda_bid = 1.0;
  double q = 1.0;

  void validate() const;
};

/// Maps bid labels to numeric scores. AAAI positive bids scale with
/// lambda_bid; TPDP values are fixed.
struct BidScheme {
  std::string name;  // "tpdp" or "aaai"
  std::vector<std::string> labels;
  std::string default_label;

  static BidScheme tpdp();
  static BidScheme aaai();
  static BidScheme from_name(const std::string& name);

  bool has_label(const std::string& label) const;
};

/// Numeric value of a bid label (missing -> the scheme's default label).
double bid_value(const std::optional<std::string>& label, const BidScheme& scheme,
                 double lambda_bid);

/// TPDP linear score: w_text * T + (1 - w_text) * B. May be negative.
double similarity_tpdp(double text_sim, double bid_score, double w_text);

struct AaaiDiagnostics {
  int zero_subject_rescues = 0;    // bid willing/eager with K = 0
  int low_score_recomputes = 0;    // final score fell below 0.15
};

/// Full AAAI'22 cascade over possibly-missing covariates. Totalizes all
/// inputs; result is in [0, 1] whenever T and K are.
double similarity_aaai(const std::optional<double>& text_sim,
                       const std::optional<double>& subject_score,
                       const std::optional<std::string>& bid_label, double w_text,
                       double lambda_bid, bool profile_provided,
                       AaaiDiagnostics* diagnostics = nullptr);

/// NeurIPS'16 historical form: (0.5 T + 0.5 K) * 2^B with TPDP bid values.
double similarity_neurips16(double text_sim, double subject_score, double bid_score);

/// AAAI'21 historical form: (0.5 T + 0.5 K)^(1/B) with AAAI bid values.
double similarity_aaai21(double text_sim, double subject_score, double bid_score);

/// Composite similarity over all non-conflict pairs. Conflict entries are
/// left at zero; the assignment LPs pin them regardless.
Eigen::MatrixXd similarity_matrix(const Venue& venue, const PairTable& pairs,
                                  const PolicyParams& params,
                                  AaaiDiagnostics* diagnostics = nullptr);

/// The bid scheme a family computes with.
BidScheme scheme_for_family(PolicyFamily family);

}  // namespace offrev
