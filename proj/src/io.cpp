#include "offrev/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace offrev {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << content;
}

json parse_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError("'" + path.string() + "': " + e.what());
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (const char c : line) {
    if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(cell);
  return cells;
}

struct CsvReader {
  std::vector<std::vector<std::string>> rows;
  std::filesystem::path path;

  CsvReader(const std::filesystem::path& p, const std::vector<std::string>& header) : path(p) {
    std::istringstream in(read_file(p));
    std::string line;
    if (!std::getline(in, line))
      throw ValidationError("'" + p.string() + "': missing header row");
    const auto head = split_csv_line(line);
    if (head != header) {
      std::string expected;
      for (const auto& h : header) expected += (expected.empty() ? "" : ",") + h;
      throw ValidationError("'" + p.string() + "': header must be '" + expected + "'");
    }
    while (std::getline(in, line)) {
      if (line.empty() || line == "\r") continue;
      auto cells = split_csv_line(line);
      if (cells.size() != header.size())
        throw ValidationError("'" + p.string() + "' row " + std::to_string(rows.size() + 1) +
                              ": expected " + std::to_string(header.size()) + " cells");
      rows.push_back(std::move(cells));
    }
  }

  [[noreturn]] void fail(size_t row, const std::string& message) const {
    throw ValidationError("'" + path.string() + "' row " + std::to_string(row + 1) + ": " +
                          message);
  }
};

double parse_double(const std::string& text, const CsvReader& csv, size_t row) {
  try {
    size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) csv.fail(row, "trailing characters in number '" + text + "'");
    return v;
  } catch (const std::exception&) {
    csv.fail(row, "not a number: '" + text + "'");
  }
}

void check_id(const std::string& id, const std::string& what) {
  if (id.empty()) throw ValidationError(what + " id is empty");
  if (id.find(',') != std::string::npos || id.find('\n') != std::string::npos)
    throw ValidationError(what + " id '" + id + "' contains a separator character");
}

int require_reviewer(const Venue& venue, const std::string& id, const CsvReader& csv,
                     size_t row) {
  const auto idx = venue.reviewer_index(id);
  if (!idx) csv.fail(row, "unknown reviewer '" + id + "'");
  return *idx;
}

int require_paper(const Venue& venue, const std::string& id, const CsvReader& csv, size_t row) {
  const auto idx = venue.paper_index(id);
  if (!idx) csv.fail(row, "unknown paper '" + id + "'");
  return *idx;
}

}  // namespace

std::string format_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.9g", value);
  return buffer;
}

Venue read_venue_json(const std::filesystem::path& path) {
  const json doc = parse_json(path);
  Venue venue;
  try {
    for (const auto& p : doc.at("papers")) {
      venue.paper_ids.push_back(p.get<std::string>());
      check_id(venue.paper_ids.back(), "paper");
    }
    for (const auto& r : doc.at("reviewers")) {
      venue.reviewer_ids.push_back(r.at("id").get<std::string>());
      check_id(venue.reviewer_ids.back(), "reviewer");
      venue.reviewer_cap.conservativeResize(venue.reviewer_ids.size());
      venue.reviewer_cap(static_cast<Eigen::Index>(venue.reviewer_ids.size()) - 1) =
          r.at("cap").get<int>();
      venue.profile_provided.push_back(r.value("profile", true));
    }
    venue.paper_load = doc.at("paper_load").get<int>();
    venue.bid_scheme = doc.value("bid_scheme", std::string{});
    venue.conflict = bool_grid(venue.num_reviewers(), venue.num_papers());
    for (const auto& c : doc.value("conflicts", json::array())) {
      const std::string rid = c.at(0).get<std::string>();
      const std::string pid = c.at(1).get<std::string>();
      const auto r = venue.reviewer_index(rid);
      const auto p = venue.paper_index(pid);
      if (!r) throw ValidationError("conflict references unknown reviewer '" + rid + "'");
      if (!p) throw ValidationError("conflict references unknown paper '" + pid + "'");
      venue.conflict(*r, *p) = true;
    }
  } catch (const json::exception& e) {
    throw ValidationError("'" + path.string() + "': " + e.what());
  }
  venue.validate();
  return venue;
}

void write_venue_json(const Venue& venue, const std::filesystem::path& path) {
  json doc;
  doc["papers"] = venue.paper_ids;
  doc["reviewers"] = json::array();
  for (int r = 0; r < venue.num_reviewers(); ++r) {
    json item{{"id", venue.reviewer_ids[static_cast<size_t>(r)]}, {"cap", venue.reviewer_cap(r)}};
    if (!venue.profile_provided[static_cast<size_t>(r)]) item["profile"] = false;
    doc["reviewers"].push_back(item);
  }
  doc["paper_load"] = venue.paper_load;
  if (!venue.bid_scheme.empty()) doc["bid_scheme"] = venue.bid_scheme;
  doc["conflicts"] = json::array();
  for (int r = 0; r < venue.num_reviewers(); ++r)
    for (int p = 0; p < venue.num_papers(); ++p)
      if (venue.conflict(r, p))
        doc["conflicts"].push_back(
            {venue.reviewer_ids[static_cast<size_t>(r)], venue.paper_ids[static_cast<size_t>(p)]});
  write_file(path, doc.dump(2) + "\n");
}

PairTable read_scores_csv(const std::filesystem::path& path, const Venue& venue) {
  const CsvReader csv(path, {"reviewer", "paper", "T", "K", "bid"});
  const int nr = venue.num_reviewers();
  const int np = venue.num_papers();
  PairTable pairs;
  pairs.text_sim = Eigen::MatrixXd::Zero(nr, np);
  pairs.has_text = bool_grid(nr, np);
  pairs.subject = Eigen::MatrixXd::Zero(nr, np);
  pairs.has_subject = bool_grid(nr, np);
  pairs.bid = Eigen::MatrixXi::Constant(nr, np, -1);

  BoolGrid seen = bool_grid(nr, np);
  for (size_t row = 0; row < csv.rows.size(); ++row) {
    const auto& cells = csv.rows[row];
    const int r = require_reviewer(venue, cells[0], csv, row);
    const int p = require_paper(venue, cells[1], csv, row);
    if (venue.conflict(r, p)) csv.fail(row, "score row for a conflicted pair");
    if (seen(r, p)) csv.fail(row, "duplicate pair " + venue.pair_name(r, p));
    seen(r, p) = true;
    if (!cells[2].empty()) {
      const double t = parse_double(cells[2], csv, row);
      if (t < 0.0 || t > 1.0) csv.fail(row, "T outside [0, 1]");
      pairs.text_sim(r, p) = t;
      pairs.has_text(r, p) = true;
    }
    if (!cells[3].empty()) {
      const double k = parse_double(cells[3], csv, row);
      if (k < 0.0 || k > 1.0) csv.fail(row, "K outside [0, 1]");
      pairs.subject(r, p) = k;
      pairs.has_subject(r, p) = true;
    }
    if (!cells[4].empty()) {
      const std::string& label = cells[4];
      auto it = std::find(pairs.bid_labels.begin(), pairs.bid_labels.end(), label);
      if (it == pairs.bid_labels.end()) {
        if (!venue.bid_scheme.empty() &&
            !BidScheme::from_name(venue.bid_scheme).has_label(label))
          csv.fail(row, "bid label '" + label + "' not in the venue's '" + venue.bid_scheme +
                            "' vocabulary");
        pairs.bid_labels.push_back(label);
        it = pairs.bid_labels.end() - 1;
      }
      pairs.bid(r, p) = static_cast<int>(it - pairs.bid_labels.begin());
    }
  }
  for (int r = 0; r < nr; ++r)
    for (int p = 0; p < np; ++p)
      if (!venue.conflict(r, p) && !seen(r, p))
        throw ValidationError("'" + path.string() + "': missing score row for pair " +
                              venue.pair_name(r, p));
  return pairs;
}

void write_scores_csv(const Venue& venue, const PairTable& pairs,
                      const std::filesystem::path& path) {
  std::ostringstream out;
  out << "reviewer,paper,T,K,bid\n";
  for (int r = 0; r < venue.num_reviewers(); ++r)
    for (int p = 0; p < venue.num_papers(); ++p) {
      if (venue.conflict(r, p)) continue;
      out << venue.reviewer_ids[static_cast<size_t>(r)] << ','
          << venue.paper_ids[static_cast<size_t>(p)] << ',';
      if (pairs.has_text(r, p)) out << format_double(pairs.text_sim(r, p));
      out << ',';
      if (pairs.has_subject(r, p)) out << format_double(pairs.subject(r, p));
      out << ',';
      if (const auto label = pairs.bid_label(r, p)) out << *label;
      out << '\n';
    }
  write_file(path, out.str());
}

std::vector<OutcomeRecord> read_outcomes_csv(const std::filesystem::path& path,
                                             const Venue& venue) {
  const CsvReader csv(path, {"reviewer", "paper", "value", "status"});
  std::vector<OutcomeRecord> records;
  for (size_t row = 0; row < csv.rows.size(); ++row) {
    const auto& cells = csv.rows[row];
    OutcomeRecord rec;
    rec.reviewer = require_reviewer(venue, cells[0], csv, row);
    rec.paper = require_paper(venue, cells[1], csv, row);
    if (!cells[2].empty()) rec.value = parse_double(cells[2], csv, row);
    try {
      rec.status = outcome_status_from_string(cells[3]);
    } catch (const ValidationError& e) {
      csv.fail(row, e.what());
    }
    rec.source_row = static_cast<int>(row) + 1;
    records.push_back(rec);
  }
  return records;
}

void write_outcomes_csv(const Venue& venue, const std::vector<OutcomeRecord>& records,
                        const std::filesystem::path& path) {
  std::ostringstream out;
  out << "reviewer,paper,value,status\n";
  for (const auto& rec : records) {
    out << venue.reviewer_ids[static_cast<size_t>(rec.reviewer)] << ','
        << venue.paper_ids[static_cast<size_t>(rec.paper)] << ',';
    if (rec.value) out << format_double(*rec.value);
    out << ',' << to_string(rec.status) << '\n';
  }
  write_file(path, out.str());
}

LoadedData load_venue(const std::filesystem::path& venue_json,
                      const std::filesystem::path& scores_csv,
                      const std::filesystem::path& outcomes_csv, const OutcomeScale* scale) {
  LoadedData data;
  data.venue = read_venue_json(venue_json);
  data.pairs = read_scores_csv(scores_csv, data.venue);
  data.outcomes = read_outcomes_csv(outcomes_csv, data.venue);
  validate_outcomes(data.venue, data.outcomes, scale);
  return data;
}

Eigen::MatrixXd read_marginals_csv(const std::filesystem::path& path, const Venue& venue) {
  const CsvReader csv(path, {"reviewer", "paper", "probability"});
  Eigen::MatrixXd prob = Eigen::MatrixXd::Zero(venue.num_reviewers(), venue.num_papers());
  BoolGrid seen = bool_grid(venue.num_reviewers(), venue.num_papers());
  for (size_t row = 0; row < csv.rows.size(); ++row) {
    const auto& cells = csv.rows[row];
    const int r = require_reviewer(venue, cells[0], csv, row);
    const int p = require_paper(venue, cells[1], csv, row);
    if (venue.conflict(r, p)) csv.fail(row, "marginal for a conflicted pair");
    if (seen(r, p)) csv.fail(row, "duplicate pair " + venue.pair_name(r, p));
    seen(r, p) = true;
    const double v = parse_double(cells[2], csv, row);
    if (v < -1e-12 || v > 1.0 + 1e-12) csv.fail(row, "probability outside [0, 1]");
    prob(r, p) = std::min(std::max(v, 0.0), 1.0);
  }
  for (int r = 0; r < venue.num_reviewers(); ++r)
    for (int p = 0; p < venue.num_papers(); ++p)
      if (!venue.conflict(r, p) && !seen(r, p))
        throw ValidationError("'" + path.string() + "': missing marginal for pair " +
                              venue.pair_name(r, p));
  return prob;
}

void write_marginals_csv(const Venue& venue, const Eigen::MatrixXd& prob,
                         const std::filesystem::path& path) {
  std::ostringstream out;
  out << "reviewer,paper,probability\n";
  for (int r = 0; r < venue.num_reviewers(); ++r)
    for (int p = 0; p < venue.num_papers(); ++p) {
      if (venue.conflict(r, p)) continue;
      out << venue.reviewer_ids[static_cast<size_t>(r)] << ','
          << venue.paper_ids[static_cast<size_t>(p)] << ',' << format_double(prob(r, p)) << '\n';
    }
  write_file(path, out.str());
}

namespace {
constexpr char kCovMagic[8] = {'O', 'F', 'R', 'C', 'O', 'V', '0', '1'};

template <typename T>
void put(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ValidationError("'" + path.string() + "': truncated covariance file");
  return value;
}
}  // namespace

void write_covariance(const CovarianceAccumulator& cov, const Venue& venue,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out.write(kCovMagic, sizeof(kCovMagic));
  put(out, static_cast<std::uint64_t>(cov.num_pairs()));
  put(out, static_cast<std::int64_t>(cov.count()));
  put(out, cov.seed());
  for (int i = 0; i < cov.num_pairs(); ++i) put(out, cov.marginal(i));
  put(out, static_cast<std::uint64_t>(cov.co_occurrence().size()));
  std::vector<std::uint64_t> keys;
  keys.reserve(cov.co_occurrence().size());
  for (const auto& [k, v] : cov.co_occurrence()) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  for (const std::uint64_t k : keys) {
    const auto a = static_cast<std::uint32_t>(k >> 32);
    const auto b = static_cast<std::uint32_t>(k & 0xffffffffu);
    put(out, a);
    put(out, b);
    put(out, cov.covariance(static_cast<int>(a), static_cast<int>(b)));
  }

  json sidecar;
  sidecar["n_pairs"] = cov.num_pairs();
  sidecar["n_samples"] = cov.count();
  sidecar["seed"] = cov.seed();
  sidecar["pairs"] = json::array();
  for (int i = 0; i < cov.num_pairs(); ++i) {
    const auto [r, p] = venue.pair_from_index(i);
    sidecar["pairs"].push_back({{"index", i},
                                {"reviewer", venue.reviewer_ids[static_cast<size_t>(r)]},
                                {"paper", venue.paper_ids[static_cast<size_t>(p)]}});
  }
  write_file(path.string() + ".json", sidecar.dump(2) + "\n");
}

CovarianceAccumulator read_covariance(const std::filesystem::path& path, const Venue& venue) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCovMagic, sizeof(kCovMagic)) != 0)
    throw ValidationError("'" + path.string() + "': not a covariance file");
  const auto n_pairs = get<std::uint64_t>(in, path);
  const auto n_samples = get<std::int64_t>(in, path);
  const auto seed = get<std::uint64_t>(in, path);
  if (n_pairs != static_cast<std::uint64_t>(venue.num_pairs()))
    throw ValidationError("'" + path.string() + "': covariance pair count does not match venue");

  const double n = static_cast<double>(n_samples);
  std::vector<double> marginals(n_pairs);
  for (auto& m : marginals) m = get<double>(in, path);
  const auto n_triplets = get<std::uint64_t>(in, path);

  // Rebuild the raw accumulator sums; counts are integers, so snap them.
  Eigen::VectorXd first(static_cast<Eigen::Index>(n_pairs));
  for (std::uint64_t i = 0; i < n_pairs; ++i)
    first(static_cast<Eigen::Index>(i)) = std::round(marginals[i] * n);
  std::unordered_map<std::uint64_t, double> second;
  for (std::uint64_t t = 0; t < n_triplets; ++t) {
    const auto a = get<std::uint32_t>(in, path);
    const auto b = get<std::uint32_t>(in, path);
    const auto value = get<double>(in, path);
    const double joint = value + marginals[a] * marginals[b];
    second[CovarianceAccumulator::key(static_cast<int>(a), static_cast<int>(b))] =
        std::round(joint * n);
  }
  return CovarianceAccumulator::from_raw(static_cast<int>(n_pairs), n_samples, seed,
                                         std::move(first), std::move(second));
}

PolicyParams read_policy_json(const std::filesystem::path& path) {
  const json doc = parse_json(path);
  PolicyParams params;
  try {
    params.family = policy_family_from_string(doc.at("family").get<std::string>());
    params.w_text = doc.value("w_text", params.w_text);
    params.lambda_bid = doc.value("lambda_bid", params.lambda_bid);
    params.q = doc.value("q", params.q);
  } catch (const json::exception& e) {
    throw ValidationError("'" + path.string() + "': " + e.what());
  }
  params.validate();
  return params;
}

void write_policy_json(const PolicyParams& params, const std::filesystem::path& path) {
  json doc{{"family", to_string(params.family)},
           {"w_text", params.w_text},
           {"lambda_bid", params.lambda_bid},
           {"q", params.q}};
  write_file(path, doc.dump(2) + "\n");
}

void write_model_json(const TrainedImputer& model, const Venue& venue,
                      const std::filesystem::path& path) {
  json doc;
  doc["kind"] = to_string(model.kind);
  doc["y_min"] = model.y_min;
  doc["y_max"] = model.y_max;
  doc["hyperparameter"] = model.chosen_hyperparameter;
  doc["cv_mae"] = model.cv_mae;
  doc["seed"] = model.seed;
  if (model.kind == ImputerKind::clf_logistic) {
    doc["one_hot_bid"] = model.features.one_hot_bid;
    doc["standardize"] = model.features.standardize;
    doc["feature_names"] = model.feature_names;
    doc["constant_predictor"] = model.constant_predictor;
    doc["constant_value"] = model.constant_value;
    const auto vec = [](const Eigen::VectorXd& v) {
      return std::vector<double>(v.data(), v.data() + v.size());
    };
    doc["feature_fill"] = vec(model.feature_fill);
    doc["feature_mean"] = vec(model.feature_mean);
    doc["feature_scale"] = vec(model.feature_scale);
    doc["classes"] = model.classes;
    doc["weights"] = json::array();
    for (Eigen::Index c = 0; c < model.weights.rows(); ++c)
      doc["weights"].push_back(
          std::vector<double>(model.weights.row(c).data(),
                              model.weights.row(c).data() + model.weights.cols()));
  } else {
    doc["k"] = model.k_neighbors;
    doc["train_mean"] = model.train_mean;
    doc["ratings"] = json::array();
    for (const auto& pt : model.train_ratings)
      doc["ratings"].push_back({{"reviewer", venue.reviewer_ids[static_cast<size_t>(pt.reviewer)]},
                                {"paper", venue.paper_ids[static_cast<size_t>(pt.paper)]},
                                {"value", pt.outcome}});
  }
  write_file(path, doc.dump(2) + "\n");
}

TrainedImputer read_model_json(const std::filesystem::path& path, const Venue& venue) {
  const json doc = parse_json(path);
  TrainedImputer model;
  try {
    model.kind = imputer_kind_from_string(doc.at("kind").get<std::string>());
    model.y_min = doc.at("y_min").get<double>();
    model.y_max = doc.at("y_max").get<double>();
    model.chosen_hyperparameter = doc.value("hyperparameter", 0.0);
    model.cv_mae = doc.value("cv_mae", 0.0);
    model.seed = doc.value("seed", 0ull);
    if (model.kind == ImputerKind::clf_logistic) {
      model.features.one_hot_bid = doc.at("one_hot_bid").get<bool>();
      model.features.standardize = doc.at("standardize").get<bool>();
      model.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
      model.constant_predictor = doc.value("constant_predictor", false);
      model.constant_value = doc.value("constant_value", 0.0);
      const auto vec = [&](const char* key) {
        const auto v = doc.at(key).get<std::vector<double>>();
        return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()))
            .eval();
      };
      model.feature_fill = vec("feature_fill");
      model.feature_mean = vec("feature_mean");
      model.feature_scale = vec("feature_scale");
      model.classes = doc.at("classes").get<std::vector<double>>();
      const auto rows = doc.at("weights");
      if (!rows.empty()) {
        model.weights.resize(static_cast<Eigen::Index>(rows.size()),
                             static_cast<Eigen::Index>(rows[0].size()));
        for (Eigen::Index c = 0; c < model.weights.rows(); ++c) {
          const auto row = rows[static_cast<size_t>(c)].get<std::vector<double>>();
          for (Eigen::Index f = 0; f < model.weights.cols(); ++f)
            model.weights(c, f) = row[static_cast<size_t>(f)];
        }
      }
    } else {
      model.k_neighbors = doc.at("k").get<int>();
      model.train_mean = doc.at("train_mean").get<double>();
      for (const auto& item : doc.at("ratings")) {
        ObservedPoint pt;
        const std::string rid = item.at("reviewer").get<std::string>();
        const std::string pid = item.at("paper").get<std::string>();
        const auto r = venue.reviewer_index(rid);
        const auto p = venue.paper_index(pid);
        if (!r || !p)
          throw ValidationError("model rating references unknown pair (" + rid + ", " + pid + ")");
        pt.reviewer = *r;
        pt.paper = *p;
        pt.outcome = item.at("value").get<double>();
        model.train_ratings.push_back(pt);
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError("'" + path.string() + "': " + e.what());
  }
  return model;
}

}  // namespace offrev
