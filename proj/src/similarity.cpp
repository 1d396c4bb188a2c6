#include "offrev/similarity.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace offrev {

std::string to_string(PolicyFamily family) {
  switch (family) {
    case PolicyFamily::tpdp_linear: return "tpdp-linear";
    case PolicyFamily::aaai22: return "aaai22";
    case PolicyFamily::neurips16: return "neurips16";
    case PolicyFamily::aaai21: return "aaai21";
  }
  return "?";
}

PolicyFamily policy_family_from_string(const std::string& text) {
  if (text == "tpdp-linear") return PolicyFamily::tpdp_linear;
  if (text == "aaai22") return PolicyFamily::aaai22;
  if (text == "neurips16") return PolicyFamily::neurips16;
  if (text == "aaai21") return PolicyFamily::aaai21;
  throw ValidationError("unknown policy family '" + text + "'");
}

void PolicyParams::validate() const {
  if (!(q > 0.0 && q <= 1.0)) throw ValidationError("q must lie in (0, 1]");
  if (!(w_text >= 0.0 && w_text <= 1.0)) throw ValidationError("w_text must lie in [0, 1]");
  if (!(lambda_bid >= 0.0)) throw ValidationError("lambda_bid must be >= 0");
}

BidScheme BidScheme::tpdp() {
  return {"tpdp", {"very low", "low", "neutral", "high", "very high"}, "neutral"};
}

BidScheme BidScheme::aaai() {
  return {"aaai", {"not willing", "not entered", "in a pinch", "willing", "eager"},
          "not entered"};
}

BidScheme BidScheme::from_name(const std::string& name) {
  if (name == "tpdp") return tpdp();
  if (name == "aaai") return aaai();
  throw ValidationError("unknown bid scheme '" + name + "'");
}

bool BidScheme::has_label(const std::string& label) const {
  return std::find(labels.begin(), labels.end(), label) != labels.end();
}

double bid_value(const std::optional<std::string>& label, const BidScheme& scheme,
                 double lambda_bid) {
  const std::string& effective = label ? *label : scheme.default_label;
  if (scheme.name == "tpdp") {
    if (effective == "very low") return -1.0;
    if (effective == "low") return -0.5;
    if (effective == "neutral") return 0.0;
    if (effective == "high") return 0.5;
    if (effective == "very high") return 1.0;
  } else if (scheme.name == "aaai") {
    if (effective == "not willing") return 0.05;
    if (effective == "not entered") return 1.0;
    if (effective == "in a pinch") return 1.0 + 0.5 * lambda_bid;
    if (effective == "willing") return 1.0 + 1.5 * lambda_bid;
    if (effective == "eager") return 1.0 + 3.0 * lambda_bid;
  }
  throw ValidationError("unknown bid label '" + effective + "' for scheme '" + scheme.name +
                        "'");
}

double similarity_tpdp(double text_sim, double bid_score, double w_text) {
  return w_text * text_sim + (1.0 - w_text) * bid_score;
}

double similarity_aaai(const std::optional<double>& text_sim,
                       const std::optional<double>& subject_score,
                       const std::optional<std::string>& bid_label, double w_text,
                       double lambda_bid, bool profile_provided,
                       AaaiDiagnostics* diagnostics) {
  const BidScheme scheme = BidScheme::aaai();
  const std::string& label = bid_label ? *bid_label : scheme.default_label;
  const double bid = bid_value(label, scheme, lambda_bid);
  assert(bid > 0.0);  // minimum bid value is 0.05

  // (1) base score from whichever of T, K is present
  double base = 0.0;
  if (text_sim && subject_score)
    base = w_text * *text_sim + (1.0 - w_text) * *subject_score;
  else if (text_sim)
    base = *text_sim;
  else if (subject_score)
    base = *subject_score;

  // (2) positive bid with a zero subject score falls back to the text score
  if ((label == "willing" || label == "eager") && subject_score && *subject_score == 0.0 &&
      text_sim) {
    base = *text_sim;
    if (diagnostics) ++diagnostics->zero_subject_rescues;
  }

  // (3) bid enters through the exponent; 0^(1/B) defined as 0
  double score = base > 0.0 ? std::pow(base, 1.0 / bid) : 0.0;

  // (4) very low scores are recomputed from the subject score when available
  if (score < 0.15 && subject_score) {
    const double k_pow = *subject_score > 0.0 ? std::pow(*subject_score, 1.0 / bid) : 0.0;
    score = std::min(k_pow, 0.15);
    if (diagnostics) ++diagnostics->low_score_recomputes;
  }

  // (5) reviewers without a conflict-detection profile are discounted 10%
  if (!profile_provided) score *= 0.9;
  return score;
}

double similarity_neurips16(double text_sim, double subject_score, double bid_score) {
  return (0.5 * text_sim + 0.5 * subject_score) * std::pow(2.0, bid_score);
}

double similarity_aaai21(double text_sim, double subject_score, double bid_score) {
  assert(bid_score > 0.0);
  const double base = 0.5 * text_sim + 0.5 * subject_score;
  return base > 0.0 ? std::pow(base, 1.0 / bid_score) : 0.0;
}

BidScheme scheme_for_family(PolicyFamily family) {
  switch (family) {
    case PolicyFamily::tpdp_linear:
    case PolicyFamily::neurips16:
      return BidScheme::tpdp();
    case PolicyFamily::aaai22:
    case PolicyFamily::aaai21:
      return BidScheme::aaai();
  }
  throw ValidationError("unknown policy family");
}

Eigen::MatrixXd similarity_matrix(const Venue& venue, const PairTable& pairs,
                                  const PolicyParams& params,
                                  AaaiDiagnostics* diagnostics) {
  params.validate();
  const BidScheme scheme = scheme_for_family(params.family);
  if (!venue.bid_scheme.empty() && venue.bid_scheme != scheme.name)
    throw ValidationError("policy family " + to_string(params.family) +
                          " uses bid scheme '" + scheme.name + "' but the venue declares '" +
                          venue.bid_scheme + "'");

  const int nr = venue.num_reviewers();
  const int np = venue.num_papers();
  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(nr, np);
  for (int r = 0; r < nr; ++r) {
    for (int p = 0; p < np; ++p) {
      if (venue.conflict(r, p)) continue;
      const auto label = pairs.bid_label(r, p);
      if (label && !scheme.has_label(*label))
        throw ValidationError("pair " + venue.pair_name(r, p) + ": bid label '" + *label +
                              "' not in scheme '" + scheme.name + "'");
      const bool has_t = pairs.has_text(r, p);
      const bool has_k = pairs.has_subject(r, p);
      switch (params.family) {
        case PolicyFamily::tpdp_linear: {
          if (!has_t)
            throw ValidationError("pair " + venue.pair_name(r, p) +
                                  ": tpdp-linear requires a text-similarity score");
          const double bid = bid_value(label, scheme, params.lambda_bid);
          scores(r, p) = similarity_tpdp(pairs.text_sim(r, p), bid, params.w_text);
          break;
        }
        case PolicyFamily::aaai22: {
          std::optional<double> t, k;
          if (has_t) t = pairs.text_sim(r, p);
          if (has_k) k = pairs.subject(r, p);
          scores(r, p) =
              similarity_aaai(t, k, label, params.w_text, params.lambda_bid,
                              venue.profile_provided[static_cast<size_t>(r)], diagnostics);
          break;
        }
        case PolicyFamily::neurips16:
        case PolicyFamily::aaai21: {
          if (!has_t || !has_k)
            throw ValidationError("pair " + venue.pair_name(r, p) + ": " +
                                  to_string(params.family) +
                                  " requires both text and subject scores");
          const double bid = bid_value(label, scheme, params.lambda_bid);
          scores(r, p) = params.family == PolicyFamily::neurips16
                             ? similarity_neurips16(pairs.text_sim(r, p), pairs.subject(r, p), bid)
                             : similarity_aaai21(pairs.text_sim(r, p), pairs.subject(r, p), bid);
          break;
        }
      }
    }
  }
  return scores;
}

}  // namespace offrev
