#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "peakseg/calendar.hpp"
#include "peakseg/cmpc.hpp"
#include "peakseg/error.hpp"
#include "peakseg/format.hpp"
#include "peakseg/series.hpp"
#include "peakseg/wcr.hpp"

namespace peakseg {

/// Largest hourly value of the customer in `month`.
inline double customer_peak(const MeterSeries &meter, MonthKey month) {
  HourStamp b = std::max(month_start(month), meter.start);
  HourStamp e = std::min(month_end(month), meter.end());
  double best = -std::numeric_limits<double>::infinity();
  for (HourStamp h = b; h < e; ++h) {
    double v = meter.values[static_cast<std::size_t>(h - meter.start)];
    if (!is_missing(v))
      best = std::max(best, v);
  }
  if (!std::isfinite(best))
    throw Error(Errc::insufficient_data, "no data for " + meter.customer_id + " in month");
  return best;
}

/// Mean customer load at the system peak hours, in kW.
inline double coincident_load(const MeterSeries &meter, std::span<const DailyPeak> peaks) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto &p : peaks) {
    double x = meter.at(p.stamp());
    if (is_missing(x))
      continue;
    sum += x;
    ++n;
  }
  if (n == 0)
    throw Error(Errc::insufficient_data, "no usable days for " + meter.customer_id);
  return sum / static_cast<double>(n);
}

/// Shannon entropy in nats; zero-probability terms contribute nothing.
inline double shannon_entropy(std::span<const double> p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0)
      h -= x * std::log(x);
  return h;
}

enum class EntropyMode {
  peak_hour,        // over the daily peak-hour distribution
  consumption_bins, // over equal-width bins of hourly consumption
};

inline constexpr std::size_t kMinEntropyDays = 7;

inline const char *to_string(EntropyMode m) {
  return m == EntropyMode::peak_hour ? "peak_hour" : "consumption_bins";
}

inline EntropyMode entropy_mode_from_string(std::string_view s) {
  if (s == "peak_hour")
    return EntropyMode::peak_hour;
  if (s == "consumption_bins")
    return EntropyMode::consumption_bins;
  throw Error(Errc::config, "unknown entropy mode '" + std::string(s) + "'");
}

inline double profile_entropy(const MeterSeries &meter, const DayWindow &window,
                              EntropyMode mode = EntropyMode::peak_hour, int bins = 10) {
  if (mode == EntropyMode::peak_hour) {
    PeakTimingDistribution ptd;
    try {
      ptd = peak_timing_distribution(meter, window);
    } catch (const Error &e) {
      if (e.code() == Errc::insufficient_data)
        throw Error(Errc::insufficient_data, "entropy needs 7 complete days for " +
                                                 meter.customer_id);
      throw;
    }
    if (ptd.n_days < kMinEntropyDays)
      throw Error(Errc::insufficient_data,
                  "entropy needs 7 complete days for " + meter.customer_id);
    return shannon_entropy(ptd.x);
  }
  if (bins < 1)
    throw Error(Errc::invalid_argument, "entropy needs at least one bin");
  std::vector<double> v;
  std::size_t days = 0;
  for (std::int64_t d = std::max(window.first_day, meter.first_day());
       d < std::min(window.end_day, meter.last_day()); ++d) {
    if (!window.contains(d) || !meter.complete_day(d))
      continue;
    const double *p = meter.values.data() + (day_start(d) - meter.start);
    v.insert(v.end(), p, p + kHoursPerDay);
    ++days;
  }
  if (days < kMinEntropyDays)
    throw Error(Errc::insufficient_data, "entropy needs 7 complete days for " + meter.customer_id);
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  if (*hi == *lo)
    return 0.0;
  std::vector<double> hist(static_cast<std::size_t>(bins), 0.0);
  double width = (*hi - *lo) / bins;
  for (double x : v) {
    auto b = static_cast<std::size_t>((x - *lo) / width);
    hist[std::min(b, hist.size() - 1)] += 1.0;
  }
  for (double &h : hist)
    h /= static_cast<double>(v.size());
  return shannon_entropy(hist);
}

/// Single global least-squares map from monthly energy to CMPC.
inline ClusterRegression baseline_ols_peak(std::span<const double> energy,
                                           std::span<const double> cmpc) {
  return fit_cluster_ols(energy, cmpc);
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2)
    throw Error(Errc::invalid_argument, "correlation needs two aligned samples");
  double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
  double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(b.size());
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (!(saa > 0.0 && sbb > 0.0))
    throw Error(Errc::insufficient_data, "correlation undefined for constant samples");
  return sab / std::sqrt(saa * sbb);
}

// ---- targeting strategies ----------------------------------------------------------

enum class Strategy {
  random,
  monthly_demand_rank,
  customer_peak_rank,
  entropy_rank,
  cmpc_rank_actual,
  cmpc_rank_estimated,
  baseline_ols,
};

inline constexpr Strategy kStrategies[] = {
    Strategy::random,           Strategy::monthly_demand_rank, Strategy::customer_peak_rank,
    Strategy::entropy_rank,     Strategy::cmpc_rank_actual,    Strategy::cmpc_rank_estimated,
    Strategy::baseline_ols,
};

inline const char *to_string(Strategy s) {
  switch (s) {
  case Strategy::random: return "random";
  case Strategy::monthly_demand_rank: return "monthly_demand_rank";
  case Strategy::customer_peak_rank: return "customer_peak_rank";
  case Strategy::entropy_rank: return "entropy_rank";
  case Strategy::cmpc_rank_actual: return "cmpc_rank_actual";
  case Strategy::cmpc_rank_estimated: return "cmpc_rank_estimated";
  case Strategy::baseline_ols: return "baseline_ols";
  }
  return "?";
}

inline Strategy strategy_from_string(std::string_view s) {
  for (Strategy x : kStrategies)
    if (s == to_string(x))
      return x;
  throw Error(Errc::config, "unknown strategy '" + std::string(s) + "'");
}

/// Per-candidate scores the strategies rank by; vectors are index-aligned.
struct CandidateMetrics {
  std::vector<std::string> customer_ids;
  std::vector<double> energy;         // monthly kWh
  std::vector<double> peak;           // customer peak kW
  std::vector<double> entropy;        // nats
  std::vector<double> cmpc_actual;
  std::vector<double> cmpc_estimated;
  std::vector<double> baseline;       // global OLS estimate

  std::size_t size() const { return customer_ids.size(); }
};

/// Candidate indices, most preferred first. Score ties keep index order;
/// `random` is a seeded shuffle.
inline std::vector<std::size_t> rank_candidates(Strategy s, const CandidateMetrics &m,
                                                std::uint64_t seed) {
  const std::size_t n = m.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (s == Strategy::random) {
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
  }
  const std::vector<double> *score = nullptr;
  bool ascending = false;
  switch (s) {
  case Strategy::monthly_demand_rank: score = &m.energy; break;
  case Strategy::customer_peak_rank: score = &m.peak; break;
  case Strategy::entropy_rank: score = &m.entropy; ascending = true; break;
  case Strategy::cmpc_rank_actual: score = &m.cmpc_actual; break;
  case Strategy::cmpc_rank_estimated: score = &m.cmpc_estimated; break;
  case Strategy::baseline_ols: score = &m.baseline; break;
  case Strategy::random: break;
  }
  if (score->size() != n)
    throw Error(Errc::invalid_argument,
                std::string("no ") + to_string(s) + " score for every candidate");
  for (double v : *score)
    if (!std::isfinite(v))
      throw Error(Errc::numeric, std::string("non-finite ") + to_string(s) + " score");
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return ascending ? (*score)[a] < (*score)[b] : (*score)[a] > (*score)[b];
  });
  return idx;
}

// ---- direct load control simulation -----------------------------------------------

struct DrSimConfig {
  std::size_t n_houses = 300;
  double fraction = 0.35;
  double elasticity = 0.21; // p.u. of a selected house's load shed in the window
  int horizon_days = 28;
  int window_hours = 1; // control window starting at the daily system peak hour

  bool operator==(const DrSimConfig &) const = default;
};

inline void validate(const DrSimConfig &c) {
  if (!(c.fraction > 0.0 && c.fraction <= 1.0))
    throw Error(Errc::config, "DR selection fraction must lie in (0, 1]");
  if (!(c.elasticity >= 0.0 && c.elasticity <= 1.0))
    throw Error(Errc::config, "DR elasticity must lie in [0, 1]");
  if (c.horizon_days < 1 || c.window_hours < 1 || c.window_hours > kHoursPerDay || c.n_houses < 1)
    throw Error(Errc::config, "DR horizon, window and house count must be positive");
}

inline std::size_t selection_size(const DrSimConfig &c) {
  return static_cast<std::size_t>(std::llround(c.fraction * static_cast<double>(c.n_houses)));
}

struct DrDay {
  std::int64_t day = 0;
  double peak_before_kw = 0.0;
  double peak_after_kw = 0.0;
  double reduction_kwh = 0.0; // peak delta over a one-hour interval
};

struct DrSimResult {
  Strategy strategy = Strategy::random;
  std::vector<std::size_t> selected; // ascending house indices
  std::vector<DrDay> days;
  double total_kwh = 0.0;
};

/// Each day, selected houses shed `elasticity` of their load during the
/// window that starts at the system peak hour. The reduction is the original
/// daily peak minus the peak of the modified system series.
inline DrSimResult simulate_dr(const DrSimConfig &cfg, std::span<const MeterSeries> houses,
                               std::int64_t first_day, std::span<const std::size_t> ranking,
                               Strategy strategy = Strategy::random) {
  validate(cfg);
  if (houses.size() != cfg.n_houses)
    throw Error(Errc::invalid_argument, "expected " + std::to_string(cfg.n_houses) +
                                            " houses, got " + std::to_string(houses.size()));
  if (ranking.size() != houses.size())
    throw Error(Errc::invalid_argument, "ranking does not cover every house");
  const std::size_t n_sel = selection_size(cfg);
  if (n_sel == 0)
    throw Error(Errc::invalid_argument, "selection fraction selects no house");
  for (const auto &h : houses)
    for (std::int64_t d = first_day; d < first_day + cfg.horizon_days; ++d)
      if (!h.complete_day(d))
        throw Error(Errc::insufficient_data,
                    h.customer_id + " lacks complete data over the DR horizon");

  DrSimResult out;
  out.strategy = strategy;
  out.selected.assign(ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(n_sel));
  std::sort(out.selected.begin(), out.selected.end());
  for (std::int64_t d = first_day; d < first_day + cfg.horizon_days; ++d) {
    std::array<double, kHoursPerDay> sys{}, shed{};
    for (std::size_t j = 0; j < houses.size(); ++j) {
      const double *v = houses[j].values.data() + (day_start(d) - houses[j].start);
      for (int h = 0; h < kHoursPerDay; ++h)
        sys[h] += v[h];
    }
    int t = argmax_hour(sys.data());
    int stop = std::min(kHoursPerDay, t + cfg.window_hours);
    for (std::size_t j : out.selected) {
      const double *v = houses[j].values.data() + (day_start(d) - houses[j].start);
      for (int h = t; h < stop; ++h)
        shed[h] += v[h];
    }
    DrDay day;
    day.day = d;
    day.peak_before_kw = sys[t];
    double after = 0.0;
    for (int h = 0; h < kHoursPerDay; ++h)
      after = std::max(after, sys[h] - cfg.elasticity * shed[h]);
    day.peak_after_kw = after;
    day.reduction_kwh = std::max(0.0, day.peak_before_kw - after);
    out.total_kwh += day.reduction_kwh;
    out.days.push_back(day);
  }
  return out;
}

struct Improvement {
  Strategy better = Strategy::random;
  Strategy over = Strategy::random;
  double percent = 0.0; // NaN when the reference total is zero
};

/// 100 * (total_a - total_b) / total_b for every ordered pair a != b.
inline std::vector<Improvement> pairwise_improvements(std::span<const DrSimResult> results) {
  std::vector<Improvement> out;
  for (const auto &a : results)
    for (const auto &b : results) {
      if (&a == &b)
        continue;
      double pct = b.total_kwh > 0.0 ? 100.0 * (a.total_kwh - b.total_kwh) / b.total_kwh
                                     : std::numeric_limits<double>::quiet_NaN();
      out.push_back({a.strategy, b.strategy, pct});
    }
  return out;
}

inline void write_dr_report(std::ostream &os, std::span<const DrSimResult> results) {
  std::string buf = "strategy,day,peak_before_kw,peak_after_kw,reduction_kwh\n";
  for (const auto &r : results)
    for (const auto &d : r.days) {
      buf += to_string(r.strategy);
      buf += ',';
      buf += format_hour(day_start(d.day)).substr(0, 10);
      buf += ',';
      append_double(buf, d.peak_before_kw);
      buf += ',';
      append_double(buf, d.peak_after_kw);
      buf += ',';
      append_double(buf, d.reduction_kwh);
      buf += '\n';
    }
  os << buf;
}

} // namespace peakseg
