#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "peakseg/bench.hpp"
#include "peakseg/calendar.hpp"
#include "peakseg/classify.hpp"
#include "peakseg/cmpc.hpp"
#include "peakseg/config.hpp"
#include "peakseg/error.hpp"
#include "peakseg/format.hpp"
#include "peakseg/ingest.hpp"
#include "peakseg/io.hpp"
#include "peakseg/spectral.hpp"
#include "peakseg/synth.hpp"
#include "peakseg/wcr.hpp"

namespace peakseg {

namespace fs = std::filesystem;

// ============================================================================
// In-memory stages. The file-backed subcommands below are thin wrappers.
// ============================================================================

struct Population {
  std::vector<MeterSeries> meters;
  FeederSeries feeder;
};

struct CleanedPopulation {
  Population pop;
  std::vector<CleanSummary> report; // one row per meter
  std::size_t feeder_replaced = 0;
  std::size_t feeder_filled = 0;
};

inline CleanedPopulation clean_population(const Population &raw) {
  CleanedPopulation out;
  out.pop.meters.reserve(raw.meters.size());
  for (const auto &m : raw.meters) {
    auto c = clean_series(m);
    out.report.push_back({m.customer_id, c.n_replaced, c.n_filled});
    out.pop.meters.push_back(std::move(c.series));
  }
  auto f = clean_series(raw.feeder);
  out.feeder_replaced = f.n_replaced;
  out.feeder_filled = f.n_filled;
  out.pop.feeder = std::move(f.series);
  return out;
}

inline std::vector<MonthlyBilling> billing_of(std::span<const MeterSeries> meters) {
  std::vector<MonthlyBilling> out;
  for (const auto &m : meters) {
    auto b = aggregate_monthly(m);
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

// ---- roles -------------------------------------------------------------------------

/// Observable (train) / unobservable (test) customer split.
struct Roles {
  std::vector<std::string> ids;
  std::vector<char> train;
  std::unordered_map<std::string, std::size_t> index;

  bool has(const std::string &id) const { return index.count(id) != 0; }
  bool is_train(const std::string &id) const {
    auto it = index.find(id);
    return it != index.end() && train[it->second];
  }
  void add(std::string id, bool is_train) {
    if (!index.emplace(id, ids.size()).second)
      throw Error(Errc::duplicate_key, "customer " + id + " listed twice");
    ids.push_back(std::move(id));
    train.push_back(is_train ? 1 : 0);
  }
};

inline Roles assign_roles(std::span<const MeterSeries> meters, double ratio, std::uint64_t seed) {
  auto split = split_train_test(meters.size(), ratio, seed);
  std::vector<char> tr(meters.size(), 0);
  for (std::size_t i : split.train)
    tr[i] = 1;
  Roles r;
  for (std::size_t i = 0; i < meters.size(); ++i)
    r.add(meters[i].customer_id, tr[i] != 0);
  return r;
}

// ---- per-customer lookups ----------------------------------------------------------

/// (customer, month) -> value.
class MonthlyIndex {
public:
  void set(const std::string &id, MonthKey m, double v) { map_[{id, m}] = v; }
  std::optional<double> get(const std::string &id, MonthKey m) const {
    auto it = map_.find({id, m});
    if (it == map_.end())
      return std::nullopt;
    return it->second;
  }
  std::size_t size() const { return map_.size(); }

private:
  std::map<std::pair<std::string, MonthKey>, double> map_;
};

inline MonthlyIndex index_of(std::span<const CmpcRecord> rows) {
  MonthlyIndex ix;
  for (const auto &r : rows)
    ix.set(r.customer_id, r.month, r.value);
  return ix;
}

inline MonthlyIndex index_of(std::span<const MonthlyBilling> rows) {
  MonthlyIndex ix;
  for (const auto &r : rows)
    ix.set(r.customer_id, r.month, r.energy);
  return ix;
}

struct TimingRow {
  std::string customer_id;
  Season season = Season::spring;
  std::size_t n_days = 0;
  Profile x{};
};

/// Peak timing distribution of every customer in every season with at least
/// one complete day.
inline std::vector<TimingRow> timing_table(std::span<const MeterSeries> meters,
                                           const SeasonCalendar &cal) {
  std::vector<TimingRow> out;
  for (const auto &m : meters)
    for (Season s : kSeasons) {
      try {
        auto ptd = peak_timing_distribution(m, DayWindow::of_season(s, cal));
        out.push_back({m.customer_id, s, ptd.n_days, ptd.x});
      } catch (const Error &e) {
        if (e.code() != Errc::insufficient_data)
          throw;
      }
    }
  return out;
}

/// Feature vectors per (customer, season). Survey rows apply to every season.
class FeatureIndex {
public:
  static FeatureIndex from_timing(std::span<const TimingRow> rows) {
    FeatureIndex ix;
    for (const auto &r : rows)
      ix.seasonal_[{r.customer_id, static_cast<int>(r.season)}] = r.x;
    return ix;
  }
  static FeatureIndex from_survey(std::span<const SurveyRow> rows) {
    FeatureIndex ix;
    for (const auto &r : rows)
      if (!ix.any_season_.emplace(r.customer_id, r.x).second)
        throw Error(Errc::duplicate_key, "survey lists " + r.customer_id + " twice");
    return ix;
  }

  const Profile *find(const std::string &id, Season s) const {
    if (auto it = any_season_.find(id); it != any_season_.end())
      return &it->second;
    if (auto it = seasonal_.find({id, static_cast<int>(s)}); it != seasonal_.end())
      return &it->second;
    return nullptr;
  }

private:
  std::map<std::pair<std::string, int>, Profile> seasonal_;
  std::unordered_map<std::string, Profile> any_season_;
};

// ---- clustering --------------------------------------------------------------------

/// Spectral patterns per season, built from the training customers only.
inline PatternBank cluster_population(std::span<const MeterSeries> meters,
                                      const FeederSeries &feeder, const Roles &roles,
                                      const SeasonCalendar &cal, const SpectralConfig &cfg) {
  std::vector<MeterSeries> train;
  for (const auto &m : meters)
    if (roles.is_train(m.customer_id))
      train.push_back(m);
  auto split = split_seasons(train, feeder, cal);
  PatternBank bank;
  bank.config = cfg;
  for (Season s : kSeasons) {
    const auto &members = split[s].members;
    std::vector<Profile> profiles;
    SeasonBank &sb = bank[s];
    sb.season = s;
    for (const auto &mem : members) {
      profiles.push_back(mem.profile);
      sb.customer_ids.push_back(mem.customer_id);
    }
    try {
      sb.patterns = select_k_and_cluster(profiles, cfg);
    } catch (const Error &e) {
      throw Error(e.code(), std::string(to_string(s)) + ": " + e.what());
    }
  }
  return bank;
}

// ---- training ----------------------------------------------------------------------

struct EnergyCmpcPairs {
  std::vector<double> energy;
  std::vector<double> cmpc;
  std::vector<int> label;
};

/// (E, F) samples of the clustered customers for every month of `season`.
inline EnergyCmpcPairs season_pairs(const SeasonBank &sb, const MonthlyIndex &energy,
                                    const MonthlyIndex &cmpc, std::span<const MonthKey> months,
                                    const SeasonCalendar &cal) {
  EnergyCmpcPairs p;
  for (std::size_t i = 0; i < sb.customer_ids.size(); ++i)
    for (MonthKey m : months) {
      if (cal.of(m) != sb.season)
        continue;
      auto e = energy.get(sb.customer_ids[i], m);
      auto f = cmpc.get(sb.customer_ids[i], m);
      if (!e || !f)
        continue;
      p.energy.push_back(*e);
      p.cmpc.push_back(*f);
      p.label.push_back(sb.patterns.labels[i]);
    }
  return p;
}

struct TrainedModels {
  MlrBank mlr;
  WcrBank wcr;
};

/// Classifier on the clustered customers' own timing features, scored by
/// k-fold CV on the same features and, when `survey` is given, on survey
/// features of the same customers. Per-cluster OLS uses the hard labels.
inline TrainedModels train_models(const PipelineConfig &cfg, const PatternBank &bank,
                                  const FeatureIndex &timing, const FeatureIndex *survey,
                                  const MonthlyIndex &energy, const MonthlyIndex &cmpc,
                                  std::span<const MonthKey> months) {
  TrainedModels out;
  for (Season s : kSeasons) {
    const SeasonBank &sb = bank[s];
    const std::string tag = to_string(s);
    std::vector<Profile> feats;
    for (const auto &id : sb.customer_ids) {
      const Profile *x = timing.find(id, s);
      if (!x)
        throw Error(Errc::insufficient_data, tag + ": no timing features for " + id);
      feats.push_back(*x);
    }
    SeasonMlr &sm = out.mlr[s];
    sm.season = s;
    sm.n_train = feats.size();
    Eigen::MatrixXd x = design_matrix(feats, cfg.classify.features);
    sm.model = train_irls(x, sb.patterns.labels, sb.patterns.k, cfg.classify.irls);
    sm.cv_meter = kfold_cv({x, {}, sb.patterns.labels, sb.patterns.k}, cfg.classify.k_folds,
                           cfg.run.seed, cfg.classify.irls);
    if (survey) {
      std::vector<Profile> sv;
      for (const auto &id : sb.customer_ids) {
        const Profile *p = survey->find(id, s);
        if (!p)
          throw Error(Errc::parse, "survey has no row for " + id);
        sv.push_back(*p);
      }
      sm.cv_survey = kfold_cv({x, design_matrix(sv, cfg.classify.features), sb.patterns.labels,
                               sb.patterns.k},
                              cfg.classify.k_folds, cfg.run.seed, cfg.classify.irls);
    }

    auto pairs = season_pairs(sb, energy, cmpc, months, cfg.calendar);
    WcrSeasonModel &wm = out.wcr[s];
    for (int z = 0; z < sb.patterns.k; ++z) {
      std::vector<double> e, f;
      for (std::size_t i = 0; i < pairs.label.size(); ++i)
        if (pairs.label[i] == z) {
          e.push_back(pairs.energy[i]);
          f.push_back(pairs.cmpc[i]);
        }
      try {
        auto r = fit_cluster_ols(e, f);
        r.cluster = z;
        wm.clusters.push_back(r);
      } catch (const Error &err) {
        throw Error(err.code(), tag + " cluster " + std::to_string(z) + ": " + err.what());
      }
    }
    try {
      out.wcr.baseline[static_cast<std::size_t>(s)] = baseline_ols_peak(pairs.energy, pairs.cmpc);
    } catch (const Error &err) {
      throw Error(err.code(), tag + " baseline: " + err.what());
    }
  }
  return out;
}

// ---- estimation --------------------------------------------------------------------

struct EstimateRow {
  std::string customer_id;
  MonthKey month;
  Season season = Season::spring;
  double energy = 0.0;
  std::optional<double> actual;
  double raw = 0.0;       // before clamping
  double estimated = 0.0; // clamped to [0, 1]
  double baseline = 0.0;  // global OLS, clamped
  int top_cluster = 0;
  std::vector<double> probs;

  bool clamped() const { return raw != estimated; }
};

inline EstimateRow estimate_one(const TrainedModels &m, const std::string &id, MonthKey month,
                                Season s, double energy, const Profile &features) {
  const SeasonMlr &sm = m.mlr[s];
  EstimateRow r;
  r.customer_id = id;
  r.month = month;
  r.season = s;
  r.energy = energy;
  r.probs = predict(sm.model, features);
  r.raw = estimate(m.wcr[s], r.probs, energy);
  r.estimated = clamp_share(r.raw);
  r.baseline = clamp_share(m.wcr.baseline[static_cast<std::size_t>(s)](energy));
  r.top_cluster = static_cast<int>(std::max_element(r.probs.begin(), r.probs.end()) -
                                   r.probs.begin());
  return r;
}

struct EstimateResult {
  std::vector<EstimateRow> rows;
  std::vector<std::string> skipped; // "customer season" without features
};

/// CMPC estimates for every billing month of the unobservable customers.
inline EstimateResult estimate_population(const TrainedModels &m, const Roles &roles,
                                          std::span<const MonthlyBilling> billing,
                                          const FeatureIndex &features, const MonthlyIndex &cmpc,
                                          const SeasonCalendar &cal) {
  EstimateResult out;
  std::set<std::pair<std::string, int>> missing;
  for (const auto &b : billing) {
    if (!roles.has(b.customer_id) || roles.is_train(b.customer_id))
      continue;
    Season s = cal.of(b.month);
    const Profile *x = features.find(b.customer_id, s);
    if (!x) {
      if (missing.insert({b.customer_id, static_cast<int>(s)}).second)
        out.skipped.push_back(b.customer_id + " " + to_string(s));
      continue;
    }
    auto row = estimate_one(m, b.customer_id, b.month, s, b.energy, *x);
    row.actual = cmpc.get(b.customer_id, b.month);
    out.rows.push_back(std::move(row));
  }
  return out;
}

inline std::string estimates_csv(std::span<const EstimateRow> rows) {
  std::string o = "customer_id,year,month,cmpc_actual,cmpc_estimated,clamped\n";
  for (const auto &r : rows) {
    o += r.customer_id + ',' + std::to_string(r.month.year) + ',' +
         std::to_string(r.month.month) + ',';
    if (r.actual)
      append_double(o, *r.actual);
    o += ',';
    append_double(o, r.estimated);
    o += r.clamped() ? ",1\n" : ",0\n";
  }
  return o;
}

inline constexpr std::string_view kDetailsHeader =
    "customer_id,year,month,season,energy_kwh,cmpc_actual,cmpc_raw,cmpc_estimated,"
    "baseline_estimated,top_cluster,probabilities";

/// Probabilities are ';'-separated since k differs between seasons.
inline std::string estimate_details_csv(std::span<const EstimateRow> rows) {
  std::string o(kDetailsHeader);
  o += '\n';
  for (const auto &r : rows) {
    o += r.customer_id + ',' + std::to_string(r.month.year) + ',' +
         std::to_string(r.month.month) + ',' + to_string(r.season) + ',';
    append_double(o, r.energy);
    o += ',';
    if (r.actual)
      append_double(o, *r.actual);
    o += ',';
    append_double(o, r.raw);
    o += ',';
    append_double(o, r.estimated);
    o += ',';
    append_double(o, r.baseline);
    o += ',' + std::to_string(r.top_cluster) + ',';
    for (std::size_t z = 0; z < r.probs.size(); ++z) {
      if (z)
        o += ';';
      append_double(o, r.probs[z]);
    }
    o += '\n';
  }
  return o;
}

inline std::vector<EstimateRow> parse_estimate_details(const std::string &text) {
  auto t = parse_csv_table(text, kDetailsHeader, "estimate_details.csv");
  std::vector<EstimateRow> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto &f = t.rows[i];
    EstimateRow r;
    r.customer_id = f[0];
    r.month = {static_cast<int>(t.integer(i, 1)), static_cast<unsigned>(t.integer(i, 2))};
    try {
      r.season = season_from_string(f[3]);
    } catch (const Error &e) {
      t.fail(i, e.what());
    }
    r.energy = t.real(i, 4);
    if (!f[5].empty())
      r.actual = t.real(i, 5);
    r.raw = t.real(i, 6);
    r.estimated = t.real(i, 7);
    r.baseline = t.real(i, 8);
    r.top_cluster = static_cast<int>(t.integer(i, 9));
    std::string_view p = f[10];
    std::size_t pos = 0;
    while (pos <= p.size()) {
      std::size_t semi = p.find(';', pos);
      if (semi == std::string_view::npos)
        semi = p.size();
      double v = 0.0;
      if (!parse_double(p.substr(pos, semi - pos), v))
        t.fail(i, "bad probability list");
      r.probs.push_back(v);
      pos = semi + 1;
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---- metrics -----------------------------------------------------------------------

/// Accuracy of one season. "records" pools every customer-month; "cluster
/// average" is the mean of per-cluster values, grouping by the most probable
/// cluster. NaN marks a value that is undefined for the data at hand.
struct SeasonMetrics {
  Season season = Season::spring;
  std::size_t n_records = 0;
  double r2_records = std::numeric_limits<double>::quiet_NaN();
  double mape_records = std::numeric_limits<double>::quiet_NaN();
  double r2_cluster_avg = std::numeric_limits<double>::quiet_NaN();
  double mape_cluster_avg = std::numeric_limits<double>::quiet_NaN();
  std::size_t clusters_scored = 0;
  double baseline_r2 = std::numeric_limits<double>::quiet_NaN();
  double baseline_mape = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

template <class F> double or_nan(F &&f) {
  try {
    return f();
  } catch (const Error &e) {
    if (e.code() == Errc::insufficient_data)
      return std::numeric_limits<double>::quiet_NaN();
    throw;
  }
}

} // namespace detail

inline SeasonMetrics season_metrics(std::span<const EstimateRow> rows, Season s) {
  SeasonMetrics m;
  m.season = s;
  std::vector<double> a, p, b;
  std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_cluster;
  for (const auto &r : rows) {
    if (r.season != s || !r.actual)
      continue;
    a.push_back(*r.actual);
    p.push_back(r.estimated);
    b.push_back(r.baseline);
    by_cluster[r.top_cluster].first.push_back(*r.actual);
    by_cluster[r.top_cluster].second.push_back(r.estimated);
  }
  m.n_records = a.size();
  m.r2_records = detail::or_nan([&] { return r2(a, p); });
  m.mape_records = detail::or_nan([&] { return mape(a, p).percent; });
  m.baseline_r2 = detail::or_nan([&] { return r2(a, b); });
  m.baseline_mape = detail::or_nan([&] { return mape(a, b).percent; });
  double sr = 0.0, sm = 0.0;
  for (const auto &[z, ap] : by_cluster) {
    double cr = detail::or_nan([&] { return r2(ap.first, ap.second); });
    double cm = detail::or_nan([&] { return mape(ap.first, ap.second).percent; });
    if (std::isfinite(cr) && std::isfinite(cm)) {
      sr += cr;
      sm += cm;
      ++m.clusters_scored;
    }
  }
  if (m.clusters_scored > 0) {
    m.r2_cluster_avg = sr / static_cast<double>(m.clusters_scored);
    m.mape_cluster_avg = sm / static_cast<double>(m.clusters_scored);
  }
  return m;
}

struct OverallMetrics {
  std::size_t n_records = 0;
  double r2 = std::numeric_limits<double>::quiet_NaN();
  double mape = std::numeric_limits<double>::quiet_NaN();
  double baseline_r2 = std::numeric_limits<double>::quiet_NaN();
  double baseline_mape = std::numeric_limits<double>::quiet_NaN();
};

inline OverallMetrics overall_metrics(std::span<const EstimateRow> rows) {
  OverallMetrics o;
  std::vector<double> a, p, b;
  for (const auto &r : rows)
    if (r.actual) {
      a.push_back(*r.actual);
      p.push_back(r.estimated);
      b.push_back(r.baseline);
    }
  o.n_records = a.size();
  o.r2 = detail::or_nan([&] { return r2(a, p); });
  o.mape = detail::or_nan([&] { return mape(a, p).percent; });
  o.baseline_r2 = detail::or_nan([&] { return r2(a, b); });
  o.baseline_mape = detail::or_nan([&] { return mape(a, b).percent; });
  return o;
}

// ---- demand response ---------------------------------------------------------------

/// Month holding the feeder's largest hourly value (earliest on ties).
inline MonthKey peak_month(const FeederSeries &feeder) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < feeder.values.size(); ++i)
    if (!is_missing(feeder.values[i]) && (!best || feeder.values[i] > feeder.values[*best]))
      best = i;
  if (!best)
    throw Error(Errc::insufficient_data, "feeder has no data");
  return month_of(feeder.start + static_cast<HourStamp>(*best));
}

/// Ranking inputs that need no trained model: energy, customer peak, entropy
/// and actual CMPC over the DR month.
inline CandidateMetrics base_candidate_metrics(std::span<const MeterSeries> houses,
                                               const FeederSeries &feeder, MonthKey month,
                                               const DrConfig &dr) {
  CandidateMetrics c;
  auto peaks = daily_peaks(feeder, month);
  auto window = DayWindow::of_month(month);
  for (const auto &h : houses) {
    c.customer_ids.push_back(h.customer_id);
    double e = 0.0;
    for (HourStamp t = std::max(month_start(month), h.start);
         t < std::min(month_end(month), h.end()); ++t) {
      double v = h.values[static_cast<std::size_t>(t - h.start)];
      if (!is_missing(v))
        e += v;
    }
    c.energy.push_back(e);
    c.peak.push_back(customer_peak(h, month));
    c.entropy.push_back(profile_entropy(h, window, dr.entropy, dr.entropy_bins));
    c.cmpc_actual.push_back(compute_cmpc(h, peaks.peaks).value);
  }
  return c;
}

/// Runs `strategies` over the horizon starting on the first day of `month`.
inline std::vector<DrSimResult> run_dr(const DrConfig &dr, std::span<const MeterSeries> houses,
                                       MonthKey month, const CandidateMetrics &metrics,
                                       std::span<const Strategy> strategies, std::uint64_t seed) {
  std::vector<DrSimResult> out;
  for (Strategy s : strategies)
    out.push_back(simulate_dr(dr.sim, houses, first_day(month), rank_candidates(s, metrics, seed),
                              s));
  return out;
}

// ============================================================================
// File-backed subcommands.
// ============================================================================

enum class Step { synth, ingest, cmpc, cluster, train, estimate, bench, dr, report };

inline constexpr std::array<Step, 9> kSteps = {Step::synth,   Step::ingest,   Step::cmpc,
                                               Step::cluster, Step::train,    Step::estimate,
                                               Step::bench,   Step::dr,       Step::report};

inline const char *to_string(Step s) {
  switch (s) {
  case Step::synth: return "synth";
  case Step::ingest: return "ingest";
  case Step::cmpc: return "cmpc";
  case Step::cluster: return "cluster";
  case Step::train: return "train";
  case Step::estimate: return "estimate";
  case Step::bench: return "bench";
  case Step::dr: return "dr";
  case Step::report: return "report";
  }
  return "?";
}

inline Step step_from_string(std::string_view s) {
  for (Step x : kSteps)
    if (s == to_string(x))
      return x;
  throw Error(Errc::invalid_argument, "unknown subcommand '" + std::string(s) + "'");
}

struct ArtifactInfo {
  std::string_view name;
  Step producer;
};

/// Every artifact and the one subcommand that writes it. The three raw inputs
/// are addressed by these logical names; their paths come from [paths].
inline constexpr ArtifactInfo kArtifacts[] = {
    {"sm_readings.csv", Step::synth},       {"scada.csv", Step::synth},
    {"survey.csv", Step::synth},            {"ground_truth.json", Step::synth},
    {"labels.csv", Step::synth},            {"clean_readings.csv", Step::ingest},
    {"clean_scada.csv", Step::ingest},      {"clean_report.csv", Step::ingest},
    {"billing.csv", Step::ingest},          {"customers.csv", Step::ingest},
    {"cmpc.csv", Step::cmpc},               {"timing.csv", Step::cmpc},
    {"coincidence.csv", Step::cmpc},        {"patterns.json", Step::cluster},
    {"mlr_model.json", Step::train},        {"wcr_model.json", Step::train},
    {"estimates.csv", Step::estimate},      {"estimate_details.csv", Step::estimate},
    {"bench_peak.csv", Step::bench},        {"bench_entropy.csv", Step::bench},
    {"bench_baseline.csv", Step::bench},    {"bench_summary.json", Step::bench},
    {"dr_report.csv", Step::dr},            {"strategy_summary.json", Step::dr},
    {"report.json", Step::report},          {"report_seasonal.csv", Step::report},
    {"pattern_centroids.csv", Step::report}, {"dbi_curve.csv", Step::report},
};

inline Step producer_of(std::string_view artifact) {
  for (const auto &a : kArtifacts)
    if (a.name == artifact)
      return a.producer;
  throw Error(Errc::invalid_argument, "unknown artifact " + std::string(artifact));
}

inline constexpr std::string_view kManifestName = "manifest.json";

/// SHA-256 of the canonical config, ignoring the output directory so that
/// the same run in two places hashes alike.
inline std::string config_hash(const PipelineConfig &cfg) {
  PipelineConfig c = cfg;
  c.paths.out_dir = PathsConfig{}.out_dir;
  return sha256_hex(to_toml(c));
}

/// Output directory, artifact paths and the run manifest.
class Workspace {
public:
  Workspace(PipelineConfig cfg, bool strict) : cfg_(std::move(cfg)), strict_(strict) {
    validate(cfg_);
  }

  const PipelineConfig &config() const { return cfg_; }
  fs::path out_dir() const { return cfg_.paths.out_dir; }

  fs::path path(std::string_view artifact) const {
    producer_of(artifact);
    auto under_out = [&](const std::string &p) {
      fs::path q(p);
      return q.is_absolute() ? q : out_dir() / q;
    };
    if (artifact == "sm_readings.csv")
      return under_out(cfg_.paths.readings);
    if (artifact == "scada.csv")
      return under_out(cfg_.paths.scada);
    if (artifact == "survey.csv")
      return under_out(cfg_.paths.survey);
    return out_dir() / std::string(artifact);
  }

  bool exists(std::string_view artifact) const { return fs::exists(path(artifact)); }

  /// Declares the inputs of `step`: each must exist, and under --strict must
  /// hash-match what its producer recorded under the same config.
  void begin(Step step, std::initializer_list<std::string_view> required,
             std::initializer_list<std::string_view> optional = {}) {
    step_ = step;
    t0_ = std::chrono::steady_clock::now();
    inputs_ = json::object();
    outputs_ = json::object();
    for (auto a : required)
      if (!exists(a))
        throw Error(Errc::missing_artifact,
                    std::string(to_string(step)) + ": missing " + path(a).string() +
                        "; run `peakseg " + to_string(producer_of(a)) + "` first");
    json manifest = load_manifest();
    bool internal = false; // some input comes from a step other than synth
    for (auto a : required)
      internal = internal || producer_of(a) != Step::synth;
    if (strict_ && (internal || !manifest.is_null())) {
      if (manifest.is_null())
        throw Error(Errc::manifest_mismatch,
                    "--strict: no " + std::string(kManifestName) + " in " + out_dir().string());
      if (manifest.value("config_hash", "") != config_hash(cfg_))
        throw Error(Errc::manifest_mismatch,
                    "--strict: config hash differs from the one recorded in the manifest");
    }
    auto record = [&](std::string_view a) {
      std::string h = sha256_hex(read_file(path(a)));
      if (strict_) {
        const char *prod = to_string(producer_of(a));
        const json &steps = manifest["steps"];
        bool recorded = steps.contains(prod) && steps[prod]["outputs"].contains(a);
        bool external = producer_of(a) == Step::synth && !steps.contains(prod);
        if (!recorded && !external)
          throw Error(Errc::manifest_mismatch, "--strict: " + std::string(a) +
                                                   " is not recorded in the manifest; rerun `peakseg " +
                                                   prod + "`");
        if (recorded && steps[prod]["outputs"][std::string(a)] != h)
          throw Error(Errc::manifest_mismatch, "--strict: " + std::string(a) +
                                                   " changed since `peakseg " + prod + "` wrote it");
      }
      inputs_[std::string(a)] = h;
    };
    for (auto a : required)
      record(a);
    for (auto a : optional)
      if (exists(a))
        record(a);
  }

  void write(std::string_view artifact, std::string_view bytes) {
    if (producer_of(artifact) != step_)
      throw Error(Errc::invalid_argument, std::string(artifact) + " belongs to `" +
                                              to_string(producer_of(artifact)) + "`");
    write_file(path(artifact), bytes);
    outputs_[std::string(artifact)] = sha256_hex(bytes);
  }

  /// Records the step in manifest.json. Entries made under another config are dropped.
  void finish() {
    double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    json old = load_manifest();
    const std::string hash = config_hash(cfg_);
    json steps = json::object();
    if (!old.is_null() && old.value("config_hash", "") == hash && old.contains("steps"))
      steps = old["steps"];
    steps[to_string(step_)] = {{"inputs", inputs_}, {"outputs", outputs_}, {"seconds", secs}};
    json ordered = json::object();
    for (Step s : kSteps)
      if (steps.contains(to_string(s)))
        ordered[to_string(s)] = steps[to_string(s)];
    json m;
    m["version"] = kArtifactVersion;
    m["tool"] = "peakseg";
    m["config_hash"] = hash;
    m["steps"] = std::move(ordered);
    write_file(out_dir() / std::string(kManifestName), dump(m));
  }

  std::string read(std::string_view artifact) const { return read_file(path(artifact)); }

private:
  json load_manifest() const {
    fs::path p = out_dir() / std::string(kManifestName);
    if (!fs::exists(p))
      return nullptr;
    try {
      return json::parse(read_file(p));
    } catch (const json::exception &) {
      if (strict_)
        throw Error(Errc::manifest_mismatch, "--strict: manifest.json is not valid JSON");
      return nullptr;
    }
  }

  PipelineConfig cfg_;
  bool strict_ = false;
  Step step_ = Step::synth;
  std::chrono::steady_clock::time_point t0_;
  json inputs_;
  json outputs_;
};

// ---- artifact readers --------------------------------------------------------------

inline Population read_population(const Workspace &ws, std::string_view readings,
                                  std::string_view scada) {
  Population p;
  {
    std::ifstream in(ws.path(scada), std::ios::binary);
    if (!in)
      throw Error(Errc::missing_artifact, "cannot open " + ws.path(scada).string());
    try {
      p.feeder = parse_scada(in);
    } catch (const Error &e) {
      throw Error(e.code(), std::string(scada) + ": " + e.what());
    }
  }
  std::vector<RawReading> raw;
  {
    std::ifstream in(ws.path(readings), std::ios::binary);
    if (!in)
      throw Error(Errc::missing_artifact, "cannot open " + ws.path(readings).string());
    try {
      raw = parse_readings(in);
    } catch (const Error &e) {
      throw Error(e.code(), std::string(readings) + ": " + e.what());
    }
  }
  p.meters = to_series(raw, HourRange{p.feeder.start, p.feeder.end()});
  return p;
}

inline std::string roles_csv(const Roles &r) {
  std::string o = "customer_id,role\n";
  for (std::size_t i = 0; i < r.ids.size(); ++i)
    o += r.ids[i] + (r.train[i] ? ",train\n" : ",test\n");
  return o;
}

inline Roles parse_roles(const std::string &text) {
  auto t = parse_csv_table(text, "customer_id,role", "customers.csv");
  Roles r;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto &role = t.rows[i][1];
    if (role != "train" && role != "test")
      t.fail(i, "role must be train or test");
    r.add(t.rows[i][0], role == "train");
  }
  return r;
}

inline std::vector<MonthlyBilling> parse_billing(const std::string &text) {
  auto t = parse_csv_table(text, "customer_id,year,month,kwh", "billing.csv");
  std::vector<MonthlyBilling> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    auto mo = t.integer(i, 2);
    if (mo < 1 || mo > 12)
      t.fail(i, "month out of range");
    out.push_back({t.rows[i][0], {static_cast<int>(t.integer(i, 1)), static_cast<unsigned>(mo)},
                   t.real(i, 3)});
  }
  return out;
}

inline std::vector<CmpcRecord> parse_cmpc(const std::string &text) {
  auto t = parse_csv_table(text, "customer_id,year,month,cmpc,n_days", "cmpc.csv");
  std::vector<CmpcRecord> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    auto mo = t.integer(i, 2);
    if (mo < 1 || mo > 12)
      t.fail(i, "month out of range");
    CmpcRecord r;
    r.customer_id = t.rows[i][0];
    r.month = {static_cast<int>(t.integer(i, 1)), static_cast<unsigned>(mo)};
    r.value = t.real(i, 3);
    r.n_days = static_cast<std::size_t>(t.integer(i, 4));
    out.push_back(std::move(r));
  }
  return out;
}

inline std::string timing_header() {
  std::string h = "customer_id,season,n_days";
  for (int i = 0; i < kHoursPerDay; ++i)
    h += ",x" + std::to_string(i);
  return h;
}

inline std::string timing_csv(std::span<const TimingRow> rows) {
  std::string o = timing_header() + "\n";
  for (const auto &r : rows) {
    o += r.customer_id + ',' + to_string(r.season) + ',' + std::to_string(r.n_days);
    for (double v : r.x) {
      o += ',';
      append_double(o, v);
    }
    o += '\n';
  }
  return o;
}

inline std::vector<TimingRow> parse_timing(const std::string &text) {
  auto t = parse_csv_table(text, timing_header(), "timing.csv");
  std::vector<TimingRow> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    TimingRow r;
    r.customer_id = t.rows[i][0];
    try {
      r.season = season_from_string(t.rows[i][1]);
    } catch (const Error &e) {
      t.fail(i, e.what());
    }
    r.n_days = static_cast<std::size_t>(t.integer(i, 2));
    for (int h = 0; h < kHoursPerDay; ++h)
      r.x[h] = t.real(i, static_cast<std::size_t>(3 + h));
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<SurveyRow> read_survey(const Workspace &ws) {
  std::istringstream in(ws.read("survey.csv"));
  try {
    return parse_survey(in);
  } catch (const Error &e) {
    throw Error(e.code(), std::string("survey.csv: ") + e.what());
  }
}

/// Months spanned by the billing records, ascending.
inline std::vector<MonthKey> billing_months(std::span<const MonthlyBilling> billing) {
  std::set<MonthKey> s;
  for (const auto &b : billing)
    s.insert(b.month);
  return {s.begin(), s.end()};
}

/// Features used at estimation time, per [run] estimate_features.
inline FeatureIndex estimation_features(const Workspace &ws) {
  if (ws.config().run.estimate_features == EstimateFeatures::survey)
    return FeatureIndex::from_survey(read_survey(ws));
  return FeatureIndex::from_timing(parse_timing(ws.read("timing.csv")));
}

inline TrainedModels read_models(const Workspace &ws) {
  TrainedModels m;
  m.mlr = mlr_bank_from_json(parse_json(ws.read("mlr_model.json"), "mlr_model.json"));
  m.wcr = wcr_bank_from_json(parse_json(ws.read("wcr_model.json"), "wcr_model.json"));
  for (Season s : kSeasons)
    if (m.mlr[s].model.weights.rows() != static_cast<Eigen::Index>(m.wcr[s].clusters.size()))
      throw Error(Errc::parse, std::string(to_string(s)) +
                                   ": classifier and regression disagree on the cluster count");
  return m;
}

inline std::string_view estimate_feature_artifact(const PipelineConfig &c) {
  return c.run.estimate_features == EstimateFeatures::survey ? "survey.csv" : "timing.csv";
}

// ---- subcommands -------------------------------------------------------------------

inline void cmd_synth(Workspace &ws) {
  ws.begin(Step::synth, {});
  const auto &cfg = ws.config();
  SynthOutput s = generate(cfg.synth);
  {
    std::ostringstream o;
    write_readings(o, s.meters);
    ws.write("sm_readings.csv", o.str());
  }
  {
    std::ostringstream o;
    write_scada(o, s.feeder);
    ws.write("scada.csv", o.str());
  }
  {
    std::ostringstream o;
    write_survey(o, s.survey);
    ws.write("survey.csv", o.str());
  }
  ws.write("ground_truth.json", dump(to_json(s.truth, cfg.synth)));
  ws.write("labels.csv", labels_csv(s.truth));
  ws.finish();
}

inline void cmd_ingest(Workspace &ws) {
  ws.begin(Step::ingest, {"sm_readings.csv", "scada.csv"});
  const auto &cfg = ws.config();
  Population raw = read_population(ws, "sm_readings.csv", "scada.csv");
  if (raw.meters.empty())
    throw Error(Errc::dataset_empty, "sm_readings.csv holds no customer");
  CleanedPopulation c = clean_population(raw);
  {
    std::ostringstream o;
    write_readings(o, c.pop.meters);
    ws.write("clean_readings.csv", o.str());
  }
  {
    std::ostringstream o;
    write_scada(o, c.pop.feeder);
    ws.write("clean_scada.csv", o.str());
  }
  {
    std::ostringstream o;
    write_clean_report(o, c.report);
    ws.write("clean_report.csv", o.str());
  }
  {
    std::ostringstream o;
    write_billing(o, billing_of(c.pop.meters));
    ws.write("billing.csv", o.str());
  }
  ws.write("customers.csv",
           roles_csv(assign_roles(c.pop.meters, cfg.wcr.split_ratio, cfg.run.seed)));
  ws.finish();
}

inline void cmd_cmpc(Workspace &ws) {
  ws.begin(Step::cmpc, {"clean_readings.csv", "clean_scada.csv"});
  const auto &cfg = ws.config();
  Population p = read_population(ws, "clean_readings.csv", "clean_scada.csv");
  {
    std::ostringstream o;
    write_cmpc(o, compute_all_cmpc(p.meters, p.feeder));
    ws.write("cmpc.csv", o.str());
  }
  ws.write("timing.csv", timing_csv(timing_table(p.meters, cfg.calendar)));
  std::string co = "year,month,coincidence_rate\n";
  for (MonthKey m : months_of(p.feeder)) {
    co += std::to_string(m.year) + ',' + std::to_string(m.month) + ',';
    append_double(co, coincidence_rate(p.meters, p.feeder, m));
    co += '\n';
  }
  ws.write("coincidence.csv", co);
  ws.finish();
}

inline void cmd_cluster(Workspace &ws) {
  ws.begin(Step::cluster, {"clean_readings.csv", "clean_scada.csv", "customers.csv"});
  const auto &cfg = ws.config();
  Population p = read_population(ws, "clean_readings.csv", "clean_scada.csv");
  Roles roles = parse_roles(ws.read("customers.csv"));
  PatternBank bank = cluster_population(p.meters, p.feeder, roles, cfg.calendar, cfg.spectral);
  ws.write("patterns.json", dump(to_json(bank)));
  ws.finish();
}

inline void cmd_train(Workspace &ws) {
  ws.begin(Step::train, {"patterns.json", "timing.csv", "cmpc.csv", "billing.csv"},
           {"survey.csv"});
  const auto &cfg = ws.config();
  PatternBank bank = pattern_bank_from_json(parse_json(ws.read("patterns.json"), "patterns.json"));
  auto timing = FeatureIndex::from_timing(parse_timing(ws.read("timing.csv")));
  auto billing = parse_billing(ws.read("billing.csv"));
  auto cmpc = parse_cmpc(ws.read("cmpc.csv"));
  std::optional<FeatureIndex> survey;
  if (ws.exists("survey.csv"))
    survey = FeatureIndex::from_survey(read_survey(ws));
  auto months = billing_months(billing);
  TrainedModels m = train_models(cfg, bank, timing, survey ? &*survey : nullptr,
                                 index_of(std::span<const MonthlyBilling>(billing)),
                                 index_of(std::span<const CmpcRecord>(cmpc)), months);
  ws.write("mlr_model.json", dump(to_json(m.mlr)));
  ws.write("wcr_model.json", dump(to_json(m.wcr)));
  ws.finish();
}

inline void cmd_estimate(Workspace &ws) {
  const auto &cfg = ws.config();
  ws.begin(Step::estimate, {"mlr_model.json", "wcr_model.json", "billing.csv", "customers.csv",
                            estimate_feature_artifact(cfg)},
           {"cmpc.csv"});
  TrainedModels m = read_models(ws);
  Roles roles = parse_roles(ws.read("customers.csv"));
  auto billing = parse_billing(ws.read("billing.csv"));
  MonthlyIndex cmpc;
  if (ws.exists("cmpc.csv")) {
    auto rows = parse_cmpc(ws.read("cmpc.csv"));
    cmpc = index_of(std::span<const CmpcRecord>(rows));
  }
  auto res = estimate_population(m, roles, billing, estimation_features(ws), cmpc, cfg.calendar);
  for (const auto &s : res.skipped)
    std::cerr << "estimate: no features for " << s << ", skipped\n";
  ws.write("estimates.csv", estimates_csv(res.rows));
  ws.write("estimate_details.csv", estimate_details_csv(res.rows));
  ws.finish();
}

inline void cmd_bench(Workspace &ws) {
  ws.begin(Step::bench, {"clean_readings.csv", "clean_scada.csv", "cmpc.csv",
                         "estimate_details.csv"});
  const auto &cfg = ws.config();
  Population p = read_population(ws, "clean_readings.csv", "clean_scada.csv");
  auto cmpc_rows = parse_cmpc(ws.read("cmpc.csv"));
  auto cmpc = index_of(std::span<const CmpcRecord>(cmpc_rows));
  auto details = parse_estimate_details(ws.read("estimate_details.csv"));

  // customer peak against the customer's actual coincident load
  std::string peak_csv = "customer_id,year,month,customer_peak_kw,coincident_kw,cmpc,peak_ratio\n";
  std::vector<double> ratios;
  auto months = months_of(p.feeder);
  std::vector<DailyPeaks> peaks_by_month;
  for (MonthKey m : months)
    peaks_by_month.push_back(daily_peaks(p.feeder, m));
  for (const auto &meter : p.meters)
    for (std::size_t i = 0; i < months.size(); ++i) {
      auto f = cmpc.get(meter.customer_id, months[i]);
      if (!f || peaks_by_month[i].peaks.empty())
        continue;
      double pk = customer_peak(meter, months[i]);
      double co = coincident_load(meter, peaks_by_month[i].peaks);
      double ratio = co > 0.0 ? pk / co : std::numeric_limits<double>::quiet_NaN();
      peak_csv += meter.customer_id + ',' + std::to_string(months[i].year) + ',' +
                  std::to_string(months[i].month) + ',';
      append_double(peak_csv, pk);
      peak_csv += ',';
      append_double(peak_csv, co);
      peak_csv += ',';
      append_double(peak_csv, *f);
      peak_csv += ',';
      if (std::isfinite(ratio)) {
        append_double(peak_csv, ratio);
        ratios.push_back(ratio);
      } else {
        peak_csv += "nan";
      }
      peak_csv += '\n';
    }
  ws.write("bench_peak.csv", peak_csv);

  // entropy against the season-mean CMPC
  std::string ent_csv = "customer_id,season,entropy,cmpc_mean\n";
  json ent_json = json::array();
  for (Season s : kSeasons) {
    std::vector<double> ent, cm;
    for (const auto &meter : p.meters) {
      double h = 0.0;
      try {
        h = profile_entropy(meter, DayWindow::of_season(s, cfg.calendar), cfg.dr.entropy,
                            cfg.dr.entropy_bins);
      } catch (const Error &e) {
        if (e.code() != Errc::insufficient_data)
          throw;
        continue;
      }
      double sum = 0.0;
      int n = 0;
      for (MonthKey m : months)
        if (cfg.calendar.of(m) == s)
          if (auto f = cmpc.get(meter.customer_id, m)) {
            sum += *f;
            ++n;
          }
      if (n == 0)
        continue;
      ent.push_back(h);
      cm.push_back(sum / n);
      ent_csv += meter.customer_id + ',' + to_string(s) + ',';
      append_double(ent_csv, h);
      ent_csv += ',';
      append_double(ent_csv, cm.back());
      ent_csv += '\n';
    }
    double r = detail::or_nan([&] { return pearson(ent, cm); });
    ent_json.push_back({{"season", to_string(s)}, {"n", ent.size()}, {"pearson_r", real_json(r)}});
  }
  ws.write("bench_entropy.csv", ent_csv);

  // weighted clusterwise regression against the global OLS baseline
  std::string base_csv = "season,n_records,wcr_r2,wcr_mape,baseline_r2,baseline_mape\n";
  for (Season s : kSeasons) {
    auto m = season_metrics(details, s);
    base_csv += std::string(to_string(s)) + ',' + std::to_string(m.n_records);
    for (double v : {m.r2_records, m.mape_records, m.baseline_r2, m.baseline_mape}) {
      base_csv += ',';
      if (std::isfinite(v))
        append_double(base_csv, v);
      else
        base_csv += "nan";
    }
    base_csv += '\n';
  }
  ws.write("bench_baseline.csv", base_csv);

  auto overall = overall_metrics(details);
  json summary;
  summary["version"] = kArtifactVersion;
  std::sort(ratios.begin(), ratios.end());
  auto quantile = [&](double q) {
    if (ratios.empty())
      return json(nullptr);
    auto i = static_cast<std::size_t>(std::llround(q * static_cast<double>(ratios.size() - 1)));
    return json(ratios[i]);
  };
  summary["peak_ratio"] = {{"n", ratios.size()},
                           {"median", quantile(0.5)},
                           {"p90", quantile(0.9)},
                           {"max", quantile(1.0)}};
  summary["entropy"] = {{"mode", to_string(cfg.dr.entropy)}, {"seasons", ent_json}};
  summary["baseline"] = {{"n_records", overall.n_records},
                         {"wcr_mape", real_json(overall.mape)},
                         {"baseline_mape", real_json(overall.baseline_mape)},
                         {"mape_gain", real_json(overall.baseline_mape - overall.mape)}};
  ws.write("bench_summary.json", dump(summary));
  ws.finish();
}

inline void cmd_dr(Workspace &ws) {
  const auto &cfg = ws.config();
  ws.begin(Step::dr, {"clean_readings.csv", "clean_scada.csv", "mlr_model.json",
                      "wcr_model.json", estimate_feature_artifact(cfg)});
  Population p = read_population(ws, "clean_readings.csv", "clean_scada.csv");
  if (p.meters.size() < cfg.dr.sim.n_houses)
    throw Error(Errc::insufficient_data, "DR needs " + std::to_string(cfg.dr.sim.n_houses) +
                                             " customers, found " +
                                             std::to_string(p.meters.size()));
  std::vector<MeterSeries> houses(p.meters.begin(),
                                  p.meters.begin() + static_cast<std::ptrdiff_t>(cfg.dr.sim.n_houses));
  MonthKey month = cfg.dr.month.empty() ? peak_month(p.feeder) : parse_month(cfg.dr.month);
  CandidateMetrics metrics = base_candidate_metrics(houses, p.feeder, month, cfg.dr);
  TrainedModels models = read_models(ws);
  FeatureIndex features = estimation_features(ws);
  Season s = cfg.calendar.of(month);
  for (std::size_t i = 0; i < houses.size(); ++i) {
    const Profile *x = features.find(houses[i].customer_id, s);
    if (!x)
      throw Error(Errc::insufficient_data, "no features for " + houses[i].customer_id);
    auto row = estimate_one(models, houses[i].customer_id, month, s, metrics.energy[i], *x);
    metrics.cmpc_estimated.push_back(row.estimated);
    metrics.baseline.push_back(row.baseline);
  }
  auto results = run_dr(cfg.dr, houses, month, metrics, kStrategies, cfg.run.seed);
  {
    std::ostringstream o;
    write_dr_report(o, results);
    ws.write("dr_report.csv", o.str());
  }
  json j;
  j["version"] = kArtifactVersion;
  j["month"] = format_month(month);
  j["n_houses"] = cfg.dr.sim.n_houses;
  j["selected"] = selection_size(cfg.dr.sim);
  j["elasticity"] = cfg.dr.sim.elasticity;
  j["horizon_days"] = cfg.dr.sim.horizon_days;
  j["window_hours"] = cfg.dr.sim.window_hours;
  json totals = json::array();
  for (const auto &r : results)
    totals.push_back({{"strategy", to_string(r.strategy)},
                      {"total_kwh", r.total_kwh},
                      {"mean_daily_kwh", r.total_kwh / static_cast<double>(r.days.size())}});
  j["strategies"] = std::move(totals);
  json imp = json::array();
  for (const auto &i : pairwise_improvements(results))
    imp.push_back({{"strategy", to_string(i.better)},
                   {"over", to_string(i.over)},
                   {"percent", real_json(i.percent)}});
  j["improvements"] = std::move(imp);
  ws.write("strategy_summary.json", dump(j));
  ws.finish();
}

inline void cmd_report(Workspace &ws) {
  ws.begin(Step::report, {"estimates.csv", "estimate_details.csv", "mlr_model.json",
                          "patterns.json"});
  auto details = parse_estimate_details(ws.read("estimate_details.csv"));
  auto est = parse_csv_table(ws.read("estimates.csv"),
                             "customer_id,year,month,cmpc_actual,cmpc_estimated,clamped",
                             "estimates.csv");
  if (est.rows.size() != details.size())
    throw Error(Errc::parse, "estimates.csv and estimate_details.csv differ in length");
  MlrBank mlr = mlr_bank_from_json(parse_json(ws.read("mlr_model.json"), "mlr_model.json"));
  PatternBank bank = pattern_bank_from_json(parse_json(ws.read("patterns.json"), "patterns.json"));

  auto num = [](std::string &o, double v) {
    if (std::isfinite(v))
      append_double(o, v);
    else
      o += "nan";
  };
  std::string seasonal =
      "season,k,n_records,r2_records,mape_records,r2_cluster_avg,mape_cluster_avg,"
      "baseline_r2,baseline_mape,auc_meter,auc_survey\n";
  json seasons = json::array();
  for (Season s : kSeasons) {
    auto m = season_metrics(details, s);
    double auc_m = mlr[s].cv_meter.mean_auc;
    double auc_s = mlr[s].cv_survey ? mlr[s].cv_survey->mean_auc
                                    : std::numeric_limits<double>::quiet_NaN();
    seasonal += std::string(to_string(s)) + ',' + std::to_string(bank[s].patterns.k) + ',' +
                std::to_string(m.n_records);
    for (double v : {m.r2_records, m.mape_records, m.r2_cluster_avg, m.mape_cluster_avg,
                     m.baseline_r2, m.baseline_mape, auc_m, auc_s}) {
      seasonal += ',';
      num(seasonal, v);
    }
    seasonal += '\n';
    seasons.push_back({{"season", to_string(s)},
                       {"k", bank[s].patterns.k},
                       {"n_records", m.n_records},
                       {"r2_records", real_json(m.r2_records)},
                       {"mape_records", real_json(m.mape_records)},
                       {"r2_cluster_avg", real_json(m.r2_cluster_avg)},
                       {"mape_cluster_avg", real_json(m.mape_cluster_avg)},
                       {"clusters_scored", m.clusters_scored},
                       {"baseline_r2", real_json(m.baseline_r2)},
                       {"baseline_mape", real_json(m.baseline_mape)},
                       {"auc_meter", real_json(auc_m)},
                       {"auc_survey", real_json(auc_s)}});
  }
  auto overall = overall_metrics(details);
  std::size_t clamped = 0, no_actual = 0;
  for (const auto &r : details) {
    clamped += r.clamped() ? 1 : 0;
    no_actual += r.actual ? 0 : 1;
  }
  json rep;
  rep["version"] = kArtifactVersion;
  rep["estimates"] = {{"rows", details.size()},
                      {"clamped", clamped},
                      {"without_actual", no_actual}};
  rep["overall"] = {{"n_records", overall.n_records},
                    {"r2", real_json(overall.r2)},
                    {"mape", real_json(overall.mape)},
                    {"baseline_r2", real_json(overall.baseline_r2)},
                    {"baseline_mape", real_json(overall.baseline_mape)}};
  rep["seasons"] = std::move(seasons);
  ws.write("report.json", dump(rep));
  ws.write("report_seasonal.csv", seasonal);

  std::string cents = "season,cluster,members";
  for (int h = 0; h < kHoursPerDay; ++h)
    cents += ",h" + std::to_string(h);
  cents += '\n';
  std::string curve = "season,k,dbi\n";
  for (Season s : kSeasons) {
    const auto &pt = bank[s].patterns;
    for (int z = 0; z < pt.k; ++z) {
      cents += std::string(to_string(s)) + ',' + std::to_string(z) + ',' +
               std::to_string(pt.member_counts[static_cast<std::size_t>(z)]);
      for (double v : pt.centroids[static_cast<std::size_t>(z)]) {
        cents += ',';
        append_double(cents, v);
      }
      cents += '\n';
    }
    for (const auto &[k, v] : pt.dbi_curve) {
      curve += std::string(to_string(s)) + ',' + std::to_string(k) + ',';
      num(curve, v);
      curve += '\n';
    }
  }
  ws.write("pattern_centroids.csv", cents);
  ws.write("dbi_curve.csv", curve);
  ws.finish();
}

inline void run_step(Workspace &ws, Step s) {
  switch (s) {
  case Step::synth: return cmd_synth(ws);
  case Step::ingest: return cmd_ingest(ws);
  case Step::cmpc: return cmd_cmpc(ws);
  case Step::cluster: return cmd_cluster(ws);
  case Step::train: return cmd_train(ws);
  case Step::estimate: return cmd_estimate(ws);
  case Step::bench: return cmd_bench(ws);
  case Step::dr: return cmd_dr(ws);
  case Step::report: return cmd_report(ws);
  }
}

inline void run_all(Workspace &ws) {
  for (Step s : kSteps)
    run_step(ws, s);
}

} // namespace peakseg
