#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "peakseg/calendar.hpp"
#include "peakseg/classify.hpp"
#include "peakseg/cmpc.hpp"
#include "peakseg/error.hpp"
#include "peakseg/series.hpp"
#include "peakseg/wcr.hpp"

namespace peakseg {

/// Behavioural families. Each has one daily shape per season.
enum class Archetype {
  morning_peaker = 0,
  evening_peaker = 1,
  dual_peak = 2,
  flat = 3,
  midday_dip = 4,
  night_heavy = 5,
};

inline constexpr int kArchetypeCount = 6;

inline const char *to_string(Archetype a) {
  switch (a) {
  case Archetype::morning_peaker: return "morning-peaker";
  case Archetype::evening_peaker: return "evening-peaker";
  case Archetype::dual_peak: return "dual-peak";
  case Archetype::flat: return "flat";
  case Archetype::midday_dip: return "midday-dip";
  case Archetype::night_heavy: return "night-heavy";
  }
  return "?";
}

namespace detail {

inline double bump(int h, double centre, double width, double height) {
  double d = std::abs(h - centre);
  d = std::min(d, 24.0 - d); // wrap around midnight
  return height * std::exp(-0.5 * (d / width) * (d / width));
}

} // namespace detail

/// Daily load shape of a family in a season; entries sum to 1.
inline Profile archetype_shape(Archetype a, Season s) {
  const bool summer = s == Season::summer;
  const bool winter = s == Season::winter;
  Profile p{};
  for (int h = 0; h < kHoursPerDay; ++h) {
    double v = 0.0;
    switch (a) {
    case Archetype::morning_peaker:
      v = 0.5 + detail::bump(h, winter ? 7.5 : 7.0, 1.2, winter ? 3.4 : 3.0) +
          detail::bump(h, 19.0, 2.0, 0.8) + (summer ? detail::bump(h, 16.0, 2.0, 0.6) : 0.0);
      break;
    case Archetype::evening_peaker:
      v = 0.5 + detail::bump(h, summer ? 18.0 : (winter ? 18.5 : 19.0), summer ? 2.0 : 1.5, 3.0) +
          detail::bump(h, 7.0, 1.0, 0.5);
      break;
    case Archetype::dual_peak:
      v = 0.5 + detail::bump(h, 7.5, 1.2, winter ? 2.6 : 2.2) +
          detail::bump(h, 19.0, 1.5, summer ? 2.6 : 2.4);
      break;
    case Archetype::flat:
      v = 1.0 + detail::bump(h, 12.0, 6.0, 0.15);
      break;
    case Archetype::midday_dip:
      v = 1.3 - detail::bump(h, 12.5, 2.5, 1.0) + detail::bump(h, 20.5, 1.2, summer ? 1.1 : 0.9);
      break;
    case Archetype::night_heavy:
      v = 0.5 + detail::bump(h, 2.0, 2.0, winter ? 2.8 : 2.5) + detail::bump(h, 19.0, 1.5, 0.6);
      break;
    }
    p[h] = v;
  }
  double sum = 0.0;
  for (double v : p)
    sum += v;
  for (double &v : p)
    v /= sum;
  return p;
}

/// Seasonal energy level relative to the annual median.
inline double season_level(Season s) {
  switch (s) {
  case Season::spring: return 0.9;
  case Season::summer: return 1.3;
  case Season::autumn: return 0.95;
  case Season::winter: return 1.15;
  }
  return 1.0;
}

struct SynthConfig {
  std::size_t n_customers = 400;
  int start_year = 2017;
  unsigned start_month = 1;
  int n_months = 12;
  std::uint64_t seed = 42;
  std::vector<int> archetypes = {0, 1, 2, 3, 4, 5};

  double scale_median_kwh = 580.0; // median monthly kWh at level 1
  double scale_sigma = 0.55;       // lognormal spread of customer scale

  /// Multiplies every stochastic perturbation below; 0 gives noiseless shapes.
  double noise = 1.0;
  double hourly_sigma = 0.25;
  double daily_sigma = 0.10;
  double weather_sigma = 0.2;  // shared day-to-day factor
  double month_sigma = 0.08;   // customer-month factor

  double switch_prob = 0.0;  // chance a customer changes family in a season
  double label_noise = 0.6;  // chance the survey describes a random family
  double survey_blend = 0.25; // weight of a random probability vector in the survey

  double base_load_kw = 0.0;
  double observable_fraction = 0.8;
  int kwh_decimals = 6;

  bool operator==(const SynthConfig &) const = default;
};

struct CustomerTruth {
  std::string customer_id;
  std::array<int, 4> archetype{}; // per season, Archetype index
  double scale_kwh = 0.0;
  bool observable = true;
  int survey_archetype = 0;
};

struct GroundTruth {
  std::vector<CustomerTruth> customers;
};

struct SynthOutput {
  std::vector<MeterSeries> meters;
  FeederSeries feeder;
  std::vector<SurveyRow> survey;
  GroundTruth truth;
};

namespace detail {

inline double lognormal_unit(std::mt19937_64 &rng, double sigma) {
  if (sigma <= 0.0)
    return 1.0;
  std::normal_distribution<double> n(0.0, 1.0);
  return std::exp(sigma * n(rng) - 0.5 * sigma * sigma);
}

inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

inline double round_decimals(double v, int decimals) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, decimals);
  double out = 0.0;
  std::from_chars(buf, r.ptr, out);
  return out;
}

inline std::string customer_name(std::size_t i, std::size_t n) {
  std::string digits = std::to_string(i + 1);
  std::size_t width = std::max<std::size_t>(4, std::to_string(n).size());
  return "C" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

} // namespace detail

/// Expected daily-peak-hour histogram of a family, averaged over the four
/// seasons, estimated from `days` simulated days under the hourly noise.
inline Profile archetype_timing(Archetype a, double hourly_sigma, std::uint64_t seed,
                                int days = 2000) {
  Profile hist{};
  auto rng = detail::stream(seed, 7, static_cast<std::uint64_t>(a));
  int total = 0;
  for (Season s : kSeasons) {
    Profile shape = archetype_shape(a, s);
    for (int d = 0; d < days; ++d) {
      double day[kHoursPerDay];
      for (int h = 0; h < kHoursPerDay; ++h)
        day[h] = shape[h] * detail::lognormal_unit(rng, hourly_sigma);
      hist[argmax_hour(day)] += 1.0;
      ++total;
    }
  }
  for (double &v : hist)
    v /= total;
  return hist;
}

/// Draws a synthetic population: hourly meters, the feeder (exact sum of
/// the printed meter values plus a constant base load), survey timing
/// features and the ground truth behind them.
inline SynthOutput generate(const SynthConfig &cfg) {
  const std::size_t n = cfg.n_customers;
  if (cfg.archetypes.empty())
    throw Error(Errc::config, "no archetypes configured");
  for (int a : cfg.archetypes)
    if (a < 0 || a >= kArchetypeCount)
      throw Error(Errc::config, "unknown archetype " + std::to_string(a));
  if (n < 2 * cfg.archetypes.size())
    throw Error(Errc::config, "need at least two customers per archetype");
  if (cfg.n_months < 1 || cfg.start_month < 1 || cfg.start_month > 12)
    throw Error(Errc::config, "bad month span");
  auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob_ok(cfg.label_noise) || !prob_ok(cfg.survey_blend) || !prob_ok(cfg.switch_prob) ||
      !(cfg.observable_fraction > 0.0 && cfg.observable_fraction < 1.0) || cfg.noise < 0.0)
    throw Error(Errc::config, "probability setting outside [0, 1]");

  const double nz = cfg.noise;
  const MonthKey first{cfg.start_year, cfg.start_month};
  MonthKey last = first;
  for (int i = 1; i < cfg.n_months; ++i)
    last = last.next();
  const std::int64_t day0 = first_day(first);
  const std::int64_t day_end = first_day(last.next());
  const auto n_days = static_cast<std::size_t>(day_end - day0);
  const HourStamp h0 = day_start(day0);
  const std::size_t n_hours = n_days * kHoursPerDay;
  const SeasonCalendar calendar{};

  // shared day factors: weather follows an AR(1) in log space
  std::vector<double> day_factor(n_days);
  {
    auto rng = detail::stream(cfg.seed, 1, 0);
    std::normal_distribution<double> nd(0.0, 1.0);
    double sig = cfg.weather_sigma * nz;
    double x = 0.0;
    for (std::size_t d = 0; d < n_days; ++d) {
      x = 0.6 * x + std::sqrt(1.0 - 0.36) * nd(rng);
      double weekday = static_cast<double>(((day0 + static_cast<std::int64_t>(d)) % 7 + 7) % 7);
      // 1970-01-01 was a Thursday: offsets 2 and 3 are Saturday and Sunday
      double dow = (weekday == 2.0 || weekday == 3.0) ? 1.05 : 1.0;
      day_factor[d] = dow * std::exp(sig * x - 0.5 * sig * sig);
    }
  }

  std::array<std::array<Profile, 4>, kArchetypeCount> shapes{};
  for (int a = 0; a < kArchetypeCount; ++a)
    for (Season s : kSeasons)
      shapes[a][static_cast<std::size_t>(s)] = archetype_shape(static_cast<Archetype>(a), s);

  SynthOutput out;
  out.truth.customers.resize(n);
  TrainTestSplit split;
  try {
    split = split_train_test(n, cfg.observable_fraction, cfg.seed);
  } catch (const Error &e) {
    throw Error(Errc::config, std::string("observable_fraction: ") + e.what());
  }
  std::vector<char> observable(n, 0);
  for (std::size_t i : split.train)
    observable[i] = 1;

  const auto n_arch = static_cast<int>(cfg.archetypes.size());
  {
    auto rng = detail::stream(cfg.seed, 2, 0);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> pick(0, n_arch - 1);
    for (std::size_t i = 0; i < n; ++i) {
      auto &c = out.truth.customers[i];
      c.customer_id = detail::customer_name(i, n);
      // balanced base families, shuffled below
      int base = cfg.archetypes[i % cfg.archetypes.size()];
      c.archetype.fill(base);
      c.scale_kwh = cfg.scale_median_kwh * std::exp(cfg.scale_sigma * nd(rng));
      c.observable = observable[i] != 0;
    }
    // decouple family from customer index
    for (std::size_t i = n; i > 1; --i) {
      std::uniform_int_distribution<std::size_t> j(0, i - 1);
      std::swap(out.truth.customers[i - 1].archetype, out.truth.customers[j(rng)].archetype);
    }
    for (auto &c : out.truth.customers) {
      for (auto &a : c.archetype)
        if (unit(rng) < cfg.switch_prob)
          a = cfg.archetypes[pick(rng)];
      c.survey_archetype = unit(rng) < cfg.label_noise ? cfg.archetypes[pick(rng)]
                                                       : c.archetype[0];
    }
  }

  out.meters.resize(n);
  std::vector<double> feeder(n_hours, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto &c = out.truth.customers[i];
    auto rng = detail::stream(cfg.seed, 3, i);
    std::vector<double> v(n_hours);
    MonthKey month{0, 1};
    double month_factor = 1.0;
    for (std::size_t d = 0; d < n_days; ++d) {
      const std::int64_t day = day0 + static_cast<std::int64_t>(d);
      MonthKey m = month_of_day(day);
      if (m != month) {
        month = m;
        month_factor = detail::lognormal_unit(rng, cfg.month_sigma * nz);
      }
      Season s = calendar.of(m);
      const Profile &shape = shapes[c.archetype[static_cast<std::size_t>(s)]][static_cast<std::size_t>(s)];
      double daily = c.scale_kwh * season_level(s) * month_factor * day_factor[d] *
                     detail::lognormal_unit(rng, cfg.daily_sigma * nz) * (12.0 / 365.25);
      for (int h = 0; h < kHoursPerDay; ++h) {
        double x = daily * shape[h] * detail::lognormal_unit(rng, cfg.hourly_sigma * nz);
        x = detail::round_decimals(x, cfg.kwh_decimals);
        v[d * kHoursPerDay + h] = x;
      }
    }
    for (std::size_t k = 0; k < n_hours; ++k)
      feeder[k] += v[k];
    out.meters[i] = make_meter(c.customer_id, h0, std::move(v));
  }
  for (double &f : feeder)
    f += cfg.base_load_kw;
  out.feeder = make_feeder(h0, std::move(feeder));

  std::array<Profile, kArchetypeCount> timing{};
  for (int a : cfg.archetypes)
    timing[a] = archetype_timing(static_cast<Archetype>(a), cfg.hourly_sigma * nz, cfg.seed);
  {
    auto rng = detail::stream(cfg.seed, 4, 0);
    std::exponential_distribution<double> ex(1.0);
    for (const auto &c : out.truth.customers) {
      SurveyRow row;
      row.customer_id = c.customer_id;
      Profile u{};
      double us = 0.0;
      for (double &x : u) {
        x = ex(rng);
        us += x;
      }
      double sum = 0.0;
      for (int h = 0; h < kHoursPerDay; ++h) {
        row.x[h] = (1.0 - cfg.survey_blend) * timing[c.survey_archetype][h] +
                   cfg.survey_blend * u[h] / us;
        sum += row.x[h];
      }
      for (double &x : row.x)
        x /= sum;
      out.survey.push_back(row);
    }
  }
  return out;
}

} // namespace peakseg
