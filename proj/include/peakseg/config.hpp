#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <toml.hpp>

#include "peakseg/bench.hpp"
#include "peakseg/calendar.hpp"
#include "peakseg/classify.hpp"
#include "peakseg/error.hpp"
#include "peakseg/format.hpp"
#include "peakseg/spectral.hpp"
#include "peakseg/synth.hpp"

namespace peakseg {

/// Input and artifact locations. Relative paths resolve against `out_dir`.
struct PathsConfig {
  std::string out_dir = "out";
  std::string readings = "sm_readings.csv";
  std::string scada = "scada.csv";
  std::string survey = "survey.csv";

  bool operator==(const PathsConfig &) const = default;
};

enum class EstimateFeatures {
  meter,  // held-out customers' own meter timing distributions
  survey, // survey.csv rows
};

inline const char *to_string(EstimateFeatures f) {
  return f == EstimateFeatures::meter ? "meter" : "survey";
}

struct RunConfig {
  std::uint64_t seed = 42;
  EstimateFeatures estimate_features = EstimateFeatures::meter;

  bool operator==(const RunConfig &) const = default;
};

struct ClassifyConfig {
  IrlsOptions irls{};
  FeatureSpec features{};
  int k_folds = 5;

  bool operator==(const ClassifyConfig &) const = default;
};

struct WcrConfig {
  double split_ratio = 0.8; // share of customers treated as observable

  bool operator==(const WcrConfig &) const = default;
};

struct DrConfig {
  DrSimConfig sim{};
  std::string month; // "YYYY-MM"; empty picks the month of the highest system peak
  EntropyMode entropy = EntropyMode::peak_hour;
  int entropy_bins = 10;

  bool operator==(const DrConfig &) const = default;
};

struct PipelineConfig {
  PathsConfig paths{};
  RunConfig run{};
  SynthConfig synth{};
  SeasonCalendar calendar{};
  SpectralConfig spectral{};
  ClassifyConfig classify{};
  WcrConfig wcr{};
  DrConfig dr{};

  PipelineConfig() { apply_seed(run.seed); }

  bool operator==(const PipelineConfig &) const = default;

  /// Propagates the run seed into every module that draws random numbers.
  void apply_seed(std::uint64_t seed) {
    run.seed = seed;
    synth.seed = seed;
    spectral.seed = seed;
    spectral.embed.seed = seed;
  }
};

namespace detail {

class Section {
public:
  Section(const toml::table *t, std::string name, std::set<std::string> keys)
      : t_(t), name_(std::move(name)), keys_(std::move(keys)) {
    if (!t_)
      return;
    for (auto &&[k, v] : *t_)
      if (!keys_.count(std::string(k.str())))
        fail(std::string(k.str()), "unknown key");
  }

  template <class T> void get(const char *key, T &out) const {
    const toml::node *n = t_ ? t_->get(key) : nullptr;
    if (!n)
      return;
    if constexpr (std::is_same_v<T, bool>) {
      auto v = n->value_exact<bool>();
      if (!v)
        fail(key, "expected a boolean");
      out = *v;
    } else if constexpr (std::is_same_v<T, std::string>) {
      auto v = n->value_exact<std::string>();
      if (!v)
        fail(key, "expected a string");
      out = *v;
    } else if constexpr (std::is_floating_point_v<T>) {
      auto v = n->value<double>(); // integers are accepted for reals
      if (!v)
        fail(key, "expected a number");
      out = *v;
    } else {
      auto v = n->value_exact<std::int64_t>();
      if (!v)
        fail(key, "expected an integer");
      if (*v < 0 && std::is_unsigned_v<T>)
        fail(key, "must not be negative");
      out = static_cast<T>(*v);
    }
  }

  std::vector<std::int64_t> ints(const char *key, std::vector<std::int64_t> fallback) const {
    const toml::node *n = t_ ? t_->get(key) : nullptr;
    if (!n)
      return fallback;
    const toml::array *a = n->as_array();
    if (!a)
      fail(key, "expected an array of integers");
    std::vector<std::int64_t> out;
    for (const auto &e : *a) {
      auto v = e.value_exact<std::int64_t>();
      if (!v)
        fail(key, "expected an array of integers");
      out.push_back(*v);
    }
    return out;
  }

  [[noreturn]] void fail(std::string_view key, std::string_view what) const {
    throw Error(Errc::config, "[" + name_ + "] " + std::string(key) + ": " + std::string(what));
  }

private:
  const toml::table *t_;
  std::string name_;
  std::set<std::string> keys_;
};

inline std::string quote(std::string_view s) {
  std::ostringstream os;
  os << toml::value<std::string>(std::string(s));
  return os.str();
}

/// Shortest round-trip decimal, always in TOML float form.
inline std::string num(double v) {
  std::string s = format_double(v);
  if (s.find_first_of(".eEn") == std::string::npos)
    s += ".0";
  return s;
}

} // namespace detail

inline void validate(const PipelineConfig &c) {
  if (c.spectral.phi < 1)
    throw Error(Errc::config, "[spectral] phi must be at least 1");
  if (c.spectral.k_min < 2 || c.spectral.k_max < c.spectral.k_min)
    throw Error(Errc::config, "[spectral] need 2 <= k_min <= k_max");
  if (!(c.classify.irls.ridge > 0.0))
    throw Error(Errc::config, "[classify] ridge must be positive");
  if (c.classify.k_folds < 2)
    throw Error(Errc::config, "[classify] k_folds must be at least 2");
  if (!(c.wcr.split_ratio > 0.0 && c.wcr.split_ratio < 1.0))
    throw Error(Errc::config, "[wcr] split_ratio must lie in (0, 1)");
  if (c.dr.entropy_bins < 1)
    throw Error(Errc::config, "[dr] entropy_bins must be positive");
  if (!c.dr.month.empty())
    try {
      parse_month(c.dr.month);
    } catch (const Error &e) {
      throw Error(Errc::config, std::string("[dr] month: ") + e.what());
    }
  validate(c.dr.sim);
}

inline PipelineConfig parse_config(std::string_view text) {
  toml::table doc;
  try {
    doc = toml::parse(text);
  } catch (const toml::parse_error &e) {
    throw Error(Errc::config, "config line " + std::to_string(e.source().begin.line) + ": " +
                                  std::string(e.description()));
  }
  static const std::set<std::string> sections = {"paths",    "run",     "synth",    "calendar",
                                                 "spectral", "classify", "wcr", "dr"};
  for (auto &&[k, v] : doc) {
    if (!sections.count(std::string(k.str())))
      throw Error(Errc::config, "unknown config section [" + std::string(k.str()) + "]");
    if (!v.is_table())
      throw Error(Errc::config, "config entry " + std::string(k.str()) + " must be a section");
  }
  auto table = [&](const char *name) { return doc[name].as_table(); };

  PipelineConfig c;
  {
    detail::Section s(table("paths"), "paths", {"out_dir", "readings", "scada", "survey"});
    s.get("out_dir", c.paths.out_dir);
    s.get("readings", c.paths.readings);
    s.get("scada", c.paths.scada);
    s.get("survey", c.paths.survey);
  }
  {
    detail::Section s(table("run"), "run", {"seed", "estimate_features"});
    std::uint64_t seed = c.run.seed;
    s.get("seed", seed);
    std::string f = to_string(c.run.estimate_features);
    s.get("estimate_features", f);
    if (f == "meter")
      c.run.estimate_features = EstimateFeatures::meter;
    else if (f == "survey")
      c.run.estimate_features = EstimateFeatures::survey;
    else
      s.fail("estimate_features", "expected \"meter\" or \"survey\"");
    c.apply_seed(seed);
  }
  {
    auto &y = c.synth;
    detail::Section s(table("synth"), "synth",
                      {"n_customers", "start", "n_months", "archetypes", "scale_median_kwh",
                       "scale_sigma", "noise", "hourly_sigma", "daily_sigma", "weather_sigma",
                       "month_sigma", "switch_prob", "label_noise", "survey_blend",
                       "base_load_kw", "observable_fraction", "kwh_decimals"});
    s.get("n_customers", y.n_customers);
    std::string start = format_month({y.start_year, y.start_month});
    s.get("start", start);
    try {
      MonthKey m = parse_month(start);
      y.start_year = m.year;
      y.start_month = m.month;
    } catch (const Error &) {
      s.fail("start", "expected \"YYYY-MM\"");
    }
    s.get("n_months", y.n_months);
    std::vector<std::int64_t> def(y.archetypes.begin(), y.archetypes.end());
    auto arch = s.ints("archetypes", def);
    y.archetypes.assign(arch.begin(), arch.end());
    s.get("scale_median_kwh", y.scale_median_kwh);
    s.get("scale_sigma", y.scale_sigma);
    s.get("noise", y.noise);
    s.get("hourly_sigma", y.hourly_sigma);
    s.get("daily_sigma", y.daily_sigma);
    s.get("weather_sigma", y.weather_sigma);
    s.get("month_sigma", y.month_sigma);
    s.get("switch_prob", y.switch_prob);
    s.get("label_noise", y.label_noise);
    s.get("survey_blend", y.survey_blend);
    s.get("base_load_kw", y.base_load_kw);
    s.get("observable_fraction", y.observable_fraction);
    s.get("kwh_decimals", y.kwh_decimals);
  }
  {
    detail::Section s(table("calendar"), "calendar", {"spring", "summer", "autumn", "winter"});
    std::array<int, 12> seen{};
    const SeasonCalendar defaults{};
    for (Season season : kSeasons) {
      std::vector<std::int64_t> def;
      for (int m = 1; m <= 12; ++m)
        if (defaults.by_month[m - 1] == season)
          def.push_back(m);
      auto months = s.ints(to_string(season), def);
      for (auto m : months) {
        if (m < 1 || m > 12)
          s.fail(to_string(season), "months must lie in 1..12");
        ++seen[m - 1];
        c.calendar.by_month[m - 1] = season;
      }
    }
    for (int m = 0; m < 12; ++m)
      if (seen[m] != 1)
        s.fail("month " + std::to_string(m + 1), "must belong to exactly one season");
  }
  {
    auto &p = c.spectral;
    detail::Section s(table("spectral"), "spectral",
                      {"phi", "k_min", "k_max", "normalize_profiles", "laplacian", "dense_limit",
                       "iterative_tol", "iterative_max_iter", "residual_tol", "kmeans_restarts",
                       "kmeans_max_iter", "kmeans_tol"});
    s.get("phi", p.phi);
    s.get("k_min", p.k_min);
    s.get("k_max", p.k_max);
    s.get("normalize_profiles", p.normalize_profiles);
    std::string form =
        p.embed.form == LaplacianForm::symmetric_laplacian ? "symmetric" : "normalized_affinity";
    s.get("laplacian", form);
    if (form == "symmetric")
      p.embed.form = LaplacianForm::symmetric_laplacian;
    else if (form == "normalized_affinity")
      p.embed.form = LaplacianForm::normalized_affinity;
    else
      s.fail("laplacian", "expected \"symmetric\" or \"normalized_affinity\"");
    s.get("dense_limit", p.embed.dense_limit);
    s.get("iterative_tol", p.embed.iterative_tol);
    s.get("iterative_max_iter", p.embed.iterative_max_iter);
    s.get("residual_tol", p.embed.residual_tol);
    s.get("kmeans_restarts", p.kmeans.restarts);
    s.get("kmeans_max_iter", p.kmeans.max_iter);
    s.get("kmeans_tol", p.kmeans.tol);
  }
  {
    auto &k = c.classify;
    detail::Section s(table("classify"), "classify",
                      {"ridge", "max_iter", "tol", "max_halvings", "features", "bias", "k_folds"});
    s.get("ridge", k.irls.ridge);
    s.get("max_iter", k.irls.max_iter);
    s.get("tol", k.irls.tol);
    s.get("max_halvings", k.irls.max_halvings);
    std::string f = k.features.map == FeatureMap::hourly ? "hourly" : "coarse3";
    s.get("features", f);
    if (f == "hourly")
      k.features.map = FeatureMap::hourly;
    else if (f == "coarse3")
      k.features.map = FeatureMap::coarse3;
    else
      s.fail("features", "expected \"hourly\" or \"coarse3\"");
    s.get("bias", k.features.bias);
    s.get("k_folds", k.k_folds);
  }
  {
    detail::Section s(table("wcr"), "wcr", {"split_ratio"});
    s.get("split_ratio", c.wcr.split_ratio);
  }
  {
    auto &d = c.dr;
    detail::Section s(table("dr"), "dr",
                      {"n_houses", "fraction", "elasticity", "horizon_days", "window_hours",
                       "month", "entropy", "entropy_bins"});
    s.get("n_houses", d.sim.n_houses);
    s.get("fraction", d.sim.fraction);
    s.get("elasticity", d.sim.elasticity);
    s.get("horizon_days", d.sim.horizon_days);
    s.get("window_hours", d.sim.window_hours);
    s.get("month", d.month);
    std::string e = to_string(d.entropy);
    s.get("entropy", e);
    d.entropy = entropy_mode_from_string(e);
    s.get("entropy_bins", d.entropy_bins);
  }
  validate(c);
  return c;
}

inline PipelineConfig load_config(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(Errc::missing_artifact, "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Canonical TOML rendering; parse_config(to_toml(c)) == c.
inline std::string to_toml(const PipelineConfig &c) {
  using detail::num;
  using detail::quote;
  std::string o;
  auto line = [&](std::string_view k, const std::string &v) {
    o += k;
    o += " = ";
    o += v;
    o += '\n';
  };
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  auto i = [](auto v) { return std::to_string(v); };

  o += "[paths]\n";
  line("out_dir", quote(c.paths.out_dir));
  line("readings", quote(c.paths.readings));
  line("scada", quote(c.paths.scada));
  line("survey", quote(c.paths.survey));

  o += "\n[run]\n";
  line("seed", i(c.run.seed));
  line("estimate_features", quote(to_string(c.run.estimate_features)));

  const auto &y = c.synth;
  o += "\n[synth]\n";
  line("n_customers", i(y.n_customers));
  line("start", quote(format_month({y.start_year, y.start_month})));
  line("n_months", i(y.n_months));
  std::string arch = "[";
  for (std::size_t k = 0; k < y.archetypes.size(); ++k)
    arch += (k ? ", " : "") + std::to_string(y.archetypes[k]);
  line("archetypes", arch + "]");
  line("scale_median_kwh", num(y.scale_median_kwh));
  line("scale_sigma", num(y.scale_sigma));
  line("noise", num(y.noise));
  line("hourly_sigma", num(y.hourly_sigma));
  line("daily_sigma", num(y.daily_sigma));
  line("weather_sigma", num(y.weather_sigma));
  line("month_sigma", num(y.month_sigma));
  line("switch_prob", num(y.switch_prob));
  line("label_noise", num(y.label_noise));
  line("survey_blend", num(y.survey_blend));
  line("base_load_kw", num(y.base_load_kw));
  line("observable_fraction", num(y.observable_fraction));
  line("kwh_decimals", i(y.kwh_decimals));

  o += "\n[calendar]\n";
  for (Season s : kSeasons) {
    std::string months = "[";
    bool first = true;
    for (int m = 1; m <= 12; ++m)
      if (c.calendar.by_month[m - 1] == s) {
        months += (first ? "" : ", ") + std::to_string(m);
        first = false;
      }
    line(to_string(s), months + "]");
  }

  const auto &p = c.spectral;
  o += "\n[spectral]\n";
  line("phi", i(p.phi));
  line("k_min", i(p.k_min));
  line("k_max", i(p.k_max));
  line("normalize_profiles", b(p.normalize_profiles));
  line("laplacian", quote(p.embed.form == LaplacianForm::symmetric_laplacian
                              ? "symmetric"
                              : "normalized_affinity"));
  line("dense_limit", i(p.embed.dense_limit));
  line("iterative_tol", num(p.embed.iterative_tol));
  line("iterative_max_iter", i(p.embed.iterative_max_iter));
  line("residual_tol", num(p.embed.residual_tol));
  line("kmeans_restarts", i(p.kmeans.restarts));
  line("kmeans_max_iter", i(p.kmeans.max_iter));
  line("kmeans_tol", num(p.kmeans.tol));

  const auto &k = c.classify;
  o += "\n[classify]\n";
  line("ridge", num(k.irls.ridge));
  line("max_iter", i(k.irls.max_iter));
  line("tol", num(k.irls.tol));
  line("max_halvings", i(k.irls.max_halvings));
  line("features", quote(k.features.map == FeatureMap::hourly ? "hourly" : "coarse3"));
  line("bias", b(k.features.bias));
  line("k_folds", i(k.k_folds));

  o += "\n[wcr]\n";
  line("split_ratio", num(c.wcr.split_ratio));

  const auto &d = c.dr;
  o += "\n[dr]\n";
  line("n_houses", i(d.sim.n_houses));
  line("fraction", num(d.sim.fraction));
  line("elasticity", num(d.sim.elasticity));
  line("horizon_days", i(d.sim.horizon_days));
  line("window_hours", i(d.sim.window_hours));
  line("month", quote(d.month));
  line("entropy", quote(to_string(d.entropy)));
  line("entropy_bins", i(d.entropy_bins));
  return o;
}

} // namespace peakseg
