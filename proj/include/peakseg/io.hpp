#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "peakseg/bench.hpp"
#include "peakseg/calendar.hpp"
#include "peakseg/classify.hpp"
#include "peakseg/error.hpp"
#include "peakseg/format.hpp"
#include "peakseg/spectral.hpp"
#include "peakseg/synth.hpp"
#include "peakseg/wcr.hpp"

namespace peakseg {

using json = nlohmann::ordered_json;

inline constexpr int kArtifactVersion = 1;

// ---- files -------------------------------------------------------------------------

inline std::string read_file(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  if (!in)
    throw Error(Errc::missing_artifact, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes through a temporary file so readers never see a partial artifact.
inline void write_file(const std::filesystem::path &p, std::string_view bytes) {
  if (p.has_parent_path())
    std::filesystem::create_directories(p.parent_path());
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw Error(Errc::invalid_argument, "cannot write " + p.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
      throw Error(Errc::invalid_argument, "short write to " + p.string());
  }
  std::filesystem::rename(tmp, p);
}

inline std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw Error(Errc::numeric, "SHA-256 failed");
  static const char *hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline std::string dump(const json &j) { return j.dump(1) + "\n"; }

inline json parse_json(const std::string &text, const std::string &what) {
  try {
    return json::parse(text);
  } catch (const json::exception &e) {
    throw Error(Errc::parse, what + ": " + e.what());
  }
}

// ---- CSV tables --------------------------------------------------------------------

/// Rows of a CSV file whose header must equal `header` exactly.
struct CsvTable {
  std::string name;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines; // 1-based source line of each row

  [[noreturn]] void fail(std::size_t row, const std::string &what) const {
    throw ParseError(lines[row], name + ": " + what);
  }

  double real(std::size_t row, std::size_t col) const {
    double v = 0.0;
    const std::string &s = rows[row][col];
    if (s == "nan")
      return std::numeric_limits<double>::quiet_NaN();
    if (!parse_double(s, v))
      fail(row, "bad number '" + s + "'");
    return v;
  }

  long long integer(std::size_t row, std::size_t col) const {
    const std::string &s = rows[row][col];
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(s, &used);
    } catch (const std::exception &) {
      used = 0;
    }
    if (used == 0 || used != s.size())
      fail(row, "bad integer '" + s + "'");
    return v;
  }
};

inline CsvTable parse_csv_table(const std::string &text, std::string_view header,
                                const std::string &name) {
  CsvTable t;
  t.name = name;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != header)
    throw ParseError(1, name + ": expected header '" + std::string(header) + "'");
  std::size_t ncol = split_fields(header).size();
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    auto sv = strip_cr(line);
    if (sv.empty())
      continue;
    auto f = split_fields(sv);
    if (f.size() != ncol)
      throw ParseError(lineno, name + ": expected " + std::to_string(ncol) + " fields");
    t.rows.emplace_back(f.begin(), f.end());
    t.lines.push_back(lineno);
  }
  return t;
}

// ---- JSON helpers ------------------------------------------------------------------

/// Non-finite reals are stored as null.
inline json real_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline double json_real(const json &j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

template <class T> T field(const json &j, const char *key, const std::string &what) {
  if (!j.is_object() || !j.contains(key))
    throw Error(Errc::parse, what + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception &e) {
    throw Error(Errc::parse, what + ": field '" + key + "': " + e.what());
  }
}

inline void check_version(const json &j, const std::string &what) {
  int v = field<int>(j, "version", what);
  if (v != kArtifactVersion)
    throw Error(Errc::parse, what + ": unsupported version " + std::to_string(v));
}

inline json matrix_json(const Eigen::MatrixXd &m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd json_matrix(const json &j, const std::string &what) {
  if (!j.is_array() || j.empty())
    throw Error(Errc::parse, what + ": expected a non-empty matrix");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (!j[r].is_array() || static_cast<Eigen::Index>(j[r].size()) != cols)
      throw Error(Errc::parse, what + ": ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = j[r][c].get<double>();
  }
  return m;
}

inline json profile_json(const Profile &p) { return json(std::vector<double>(p.begin(), p.end())); }

inline Profile json_profile(const json &j, const std::string &what) {
  auto v = j.get<std::vector<double>>();
  if (v.size() != kHoursPerDay)
    throw Error(Errc::parse, what + ": expected 24 values");
  Profile p{};
  std::copy(v.begin(), v.end(), p.begin());
  return p;
}

// ---- pattern bank ------------------------------------------------------------------

/// Clusters of one season together with the customers they were built from.
struct SeasonBank {
  Season season = Season::spring;
  SeasonPatterns patterns;
  std::vector<std::string> customer_ids; // aligned with patterns.labels
};

struct PatternBank {
  SpectralConfig config;
  std::array<SeasonBank, 4> seasons;

  const SeasonBank &operator[](Season s) const { return seasons[static_cast<std::size_t>(s)]; }
  SeasonBank &operator[](Season s) { return seasons[static_cast<std::size_t>(s)]; }
};

inline json to_json(const PatternBank &b) {
  json j;
  j["version"] = kArtifactVersion;
  j["config"] = {{"phi", b.config.phi},
                 {"k_min", b.config.k_min},
                 {"k_max", b.config.k_max},
                 {"seed", b.config.seed},
                 {"normalize_profiles", b.config.normalize_profiles}};
  json seasons = json::array();
  for (const auto &s : b.seasons) {
    json e;
    e["season"] = to_string(s.season);
    e["k"] = s.patterns.k;
    json cents = json::array();
    for (const auto &c : s.patterns.centroids)
      cents.push_back(profile_json(c));
    e["centroids"] = std::move(cents);
    e["member_counts"] = s.patterns.member_counts;
    json curve = json::array();
    for (const auto &[k, v] : s.patterns.dbi_curve)
      curve.push_back({{"k", k}, {"dbi", real_json(v)}});
    e["dbi_curve"] = std::move(curve);
    e["eigenvalues"] = std::vector<double>(s.patterns.eigenvalues.data(),
                                           s.patterns.eigenvalues.data() +
                                               s.patterns.eigenvalues.size());
    json assign = json::array();
    for (std::size_t i = 0; i < s.customer_ids.size(); ++i)
      assign.push_back({{"customer_id", s.customer_ids[i]}, {"label", s.patterns.labels[i]}});
    e["assignments"] = std::move(assign);
    seasons.push_back(std::move(e));
  }
  j["seasons"] = std::move(seasons);
  return j;
}

inline PatternBank pattern_bank_from_json(const json &j) {
  const std::string what = "patterns.json";
  check_version(j, what);
  PatternBank b;
  const json &c = j.at("config");
  b.config.phi = field<int>(c, "phi", what);
  b.config.k_min = field<int>(c, "k_min", what);
  b.config.k_max = field<int>(c, "k_max", what);
  b.config.seed = field<std::uint64_t>(c, "seed", what);
  b.config.normalize_profiles = field<bool>(c, "normalize_profiles", what);
  const json &seasons = j.at("seasons");
  if (!seasons.is_array() || seasons.size() != 4)
    throw Error(Errc::parse, what + ": expected 4 seasons");
  for (const auto &e : seasons) {
    Season s = season_from_string(field<std::string>(e, "season", what));
    SeasonBank &sb = b[s];
    sb.season = s;
    sb.patterns.k = field<int>(e, "k", what);
    for (const auto &cj : e.at("centroids"))
      sb.patterns.centroids.push_back(json_profile(cj, what));
    sb.patterns.member_counts = field<std::vector<std::size_t>>(e, "member_counts", what);
    for (const auto &p : e.at("dbi_curve"))
      sb.patterns.dbi_curve.emplace_back(field<int>(p, "k", what), json_real(p.at("dbi")));
    auto ev = field<std::vector<double>>(e, "eigenvalues", what);
    sb.patterns.eigenvalues = Eigen::Map<Eigen::VectorXd>(ev.data(), static_cast<Eigen::Index>(ev.size()));
    for (const auto &a : e.at("assignments")) {
      sb.customer_ids.push_back(field<std::string>(a, "customer_id", what));
      int label = field<int>(a, "label", what);
      if (label < 0 || label >= sb.patterns.k)
        throw Error(Errc::parse, what + ": label out of range");
      sb.patterns.labels.push_back(label);
    }
    if (static_cast<int>(sb.patterns.centroids.size()) != sb.patterns.k ||
        static_cast<int>(sb.patterns.member_counts.size()) != sb.patterns.k)
      throw Error(Errc::parse, what + ": centroid count does not match k");
  }
  return b;
}

// ---- classifier --------------------------------------------------------------------

inline const char *to_string(FeatureMap m) { return m == FeatureMap::hourly ? "hourly" : "coarse3"; }

struct SeasonMlr {
  Season season = Season::spring;
  MlrModel model;
  std::size_t n_train = 0;
  CvReport cv_meter;
  std::optional<CvReport> cv_survey; // scored on survey features
};

struct MlrBank {
  std::array<SeasonMlr, 4> seasons;

  const SeasonMlr &operator[](Season s) const { return seasons[static_cast<std::size_t>(s)]; }
  SeasonMlr &operator[](Season s) { return seasons[static_cast<std::size_t>(s)]; }
};

inline json to_json(const CvReport &r) {
  json f = json::array();
  for (double v : r.fold_auc)
    f.push_back(real_json(v));
  json sk = json::array();
  for (const auto &s : r.skipped)
    sk.push_back(s);
  return {{"fold_auc", std::move(f)},
          {"fold_sizes", r.fold_sizes},
          {"skipped_classes", std::move(sk)},
          {"mean_auc", real_json(r.mean_auc)}};
}

inline CvReport cv_report_from_json(const json &j) {
  const std::string what = "mlr_model.json";
  CvReport r;
  for (const auto &v : j.at("fold_auc"))
    r.fold_auc.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
  r.fold_sizes = field<std::vector<std::size_t>>(j, "fold_sizes", what);
  r.skipped = field<std::vector<std::vector<int>>>(j, "skipped_classes", what);
  const json &m = j.at("mean_auc");
  r.mean_auc = m.is_null() ? std::numeric_limits<double>::quiet_NaN() : m.get<double>();
  return r;
}

inline json to_json(const MlrBank &b) {
  json j;
  j["version"] = kArtifactVersion;
  const auto &any = b.seasons[0].model;
  j["ridge"] = any.ridge;
  j["features"] = {{"map", to_string(any.features.map)},
                   {"h", kHoursPerDay},
                   {"bias", any.features.bias}};
  json seasons = json::array();
  for (const auto &s : b.seasons) {
    json e;
    e["season"] = to_string(s.season);
    e["k"] = s.model.weights.rows();
    e["weights"] = matrix_json(s.model.weights);
    e["n_train"] = s.n_train;
    e["training"] = {{"iterations", s.model.iterations},
                     {"converged", s.model.converged},
                     {"final_loglik", s.model.final_loglik},
                     {"trace", s.model.trace}};
    e["cv_meter"] = to_json(s.cv_meter);
    e["cv_survey"] = s.cv_survey ? to_json(*s.cv_survey) : json(nullptr);
    seasons.push_back(std::move(e));
  }
  j["seasons"] = std::move(seasons);
  return j;
}

inline MlrBank mlr_bank_from_json(const json &j) {
  const std::string what = "mlr_model.json";
  check_version(j, what);
  MlrBank b;
  double ridge = field<double>(j, "ridge", what);
  FeatureSpec fs;
  std::string map = field<std::string>(j.at("features"), "map", what);
  if (map == "hourly")
    fs.map = FeatureMap::hourly;
  else if (map == "coarse3")
    fs.map = FeatureMap::coarse3;
  else
    throw Error(Errc::parse, what + ": unknown feature map '" + map + "'");
  fs.bias = field<bool>(j.at("features"), "bias", what);
  const json &seasons = j.at("seasons");
  if (!seasons.is_array() || seasons.size() != 4)
    throw Error(Errc::parse, what + ": expected 4 seasons");
  for (const auto &e : seasons) {
    Season s = season_from_string(field<std::string>(e, "season", what));
    SeasonMlr &m = b[s];
    m.season = s;
    m.model.weights = json_matrix(e.at("weights"), what);
    if (m.model.weights.cols() != fs.dim())
      throw Error(Errc::parse, what + ": weight width does not match the feature spec");
    m.model.features = fs;
    m.model.ridge = ridge;
    m.n_train = field<std::size_t>(e, "n_train", what);
    const json &t = e.at("training");
    m.model.iterations = field<int>(t, "iterations", what);
    m.model.converged = field<bool>(t, "converged", what);
    m.model.final_loglik = field<double>(t, "final_loglik", what);
    m.model.trace = field<std::vector<double>>(t, "trace", what);
    m.cv_meter = cv_report_from_json(e.at("cv_meter"));
    if (!e.at("cv_survey").is_null())
      m.cv_survey = cv_report_from_json(e.at("cv_survey"));
  }
  return b;
}

// ---- regression --------------------------------------------------------------------

struct WcrBank {
  std::array<WcrSeasonModel, 4> seasons;
  std::array<ClusterRegression, 4> baseline; // global OLS per season

  const WcrSeasonModel &operator[](Season s) const {
    return seasons[static_cast<std::size_t>(s)];
  }
  WcrSeasonModel &operator[](Season s) { return seasons[static_cast<std::size_t>(s)]; }
};

inline json to_json(const ClusterRegression &r) {
  return {{"cluster", r.cluster},
          {"slope", r.slope},
          {"intercept", r.intercept},
          {"n", r.n},
          {"residual_variance", r.residual_variance},
          {"mean_residual", r.mean_residual},
          {"heteroskedasticity", real_json(r.heteroskedasticity)}};
}

inline ClusterRegression regression_from_json(const json &j) {
  const std::string what = "wcr_model.json";
  ClusterRegression r;
  r.cluster = field<int>(j, "cluster", what);
  r.slope = field<double>(j, "slope", what);
  r.intercept = field<double>(j, "intercept", what);
  r.n = field<std::size_t>(j, "n", what);
  r.residual_variance = field<double>(j, "residual_variance", what);
  r.mean_residual = field<double>(j, "mean_residual", what);
  r.heteroskedasticity = json_real(j.at("heteroskedasticity"));
  return r;
}

inline json to_json(const WcrBank &b) {
  json j;
  j["version"] = kArtifactVersion;
  json seasons = json::array();
  for (Season s : kSeasons) {
    json e;
    e["season"] = to_string(s);
    json cl = json::array();
    for (const auto &r : b[s].clusters)
      cl.push_back(to_json(r));
    e["clusters"] = std::move(cl);
    e["baseline"] = to_json(b.baseline[static_cast<std::size_t>(s)]);
    seasons.push_back(std::move(e));
  }
  j["seasons"] = std::move(seasons);
  return j;
}

inline WcrBank wcr_bank_from_json(const json &j) {
  const std::string what = "wcr_model.json";
  check_version(j, what);
  WcrBank b;
  const json &seasons = j.at("seasons");
  if (!seasons.is_array() || seasons.size() != 4)
    throw Error(Errc::parse, what + ": expected 4 seasons");
  for (const auto &e : seasons) {
    Season s = season_from_string(field<std::string>(e, "season", what));
    for (const auto &r : e.at("clusters"))
      b[s].clusters.push_back(regression_from_json(r));
    for (std::size_t z = 0; z < b[s].clusters.size(); ++z)
      if (b[s].clusters[z].cluster != static_cast<int>(z))
        throw Error(Errc::parse, what + ": clusters out of order");
    b.baseline[static_cast<std::size_t>(s)] = regression_from_json(e.at("baseline"));
  }
  return b;
}

// ---- ground truth ------------------------------------------------------------------

inline json to_json(const GroundTruth &g, const SynthConfig &cfg) {
  json j;
  j["version"] = kArtifactVersion;
  j["seed"] = cfg.seed;
  j["n_customers"] = g.customers.size();
  j["base_load_kw"] = cfg.base_load_kw;
  json cs = json::array();
  for (const auto &c : g.customers) {
    json a;
    for (Season s : kSeasons)
      a[to_string(s)] = to_string(static_cast<Archetype>(c.archetype[static_cast<std::size_t>(s)]));
    cs.push_back({{"customer_id", c.customer_id},
                  {"archetype", std::move(a)},
                  {"scale_kwh", c.scale_kwh},
                  {"observable", c.observable},
                  {"survey_archetype", to_string(static_cast<Archetype>(c.survey_archetype))}});
  }
  j["customers"] = std::move(cs);
  return j;
}

/// Per-customer seasonal archetype ids, for adjusted-Rand scoring.
inline std::string labels_csv(const GroundTruth &g) {
  std::string o = "customer_id,spring,summer,autumn,winter,survey_archetype,observable\n";
  for (const auto &c : g.customers) {
    o += c.customer_id;
    for (int a : c.archetype)
      o += ',' + std::to_string(a);
    o += ',' + std::to_string(c.survey_archetype);
    o += c.observable ? ",1\n" : ",0\n";
  }
  return o;
}

} // namespace peakseg
