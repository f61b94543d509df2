#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "peakseg/calendar.hpp"
#include "peakseg/error.hpp"
#include "peakseg/format.hpp"
#include "peakseg/series.hpp"

namespace peakseg {

struct RawReading {
  std::string customer_id;
  MinuteStamp timestamp = 0;
  double kwh = 0.0; // energy over the interval ending at `timestamp`
};

namespace detail {

struct PairHash {
  std::size_t operator()(const std::pair<std::string, MinuteStamp> &p) const {
    return std::hash<std::string>{}(p.first) ^
           (std::hash<MinuteStamp>{}(p.second) * 0x9e3779b97f4a7c15ULL);
  }
};

inline void expect_header(std::istream &in, std::string_view header,
                          std::string &line) {
  if (!std::getline(in, line))
    throw Error(Errc::dataset_empty, "empty file");
  if (strip_cr(line) != header)
    throw ParseError(1, "expected header '" + std::string(header) + "'");
}

} // namespace detail

/// Reads `customer_id,timestamp,kwh` CSV. Row order is preserved. Blank
/// lines are skipped; any other malformed row aborts with its line number.
inline std::vector<RawReading> parse_readings(std::istream &in) {
  std::string line;
  detail::expect_header(in, "customer_id,timestamp,kwh", line);
  std::vector<RawReading> out;
  std::unordered_set<std::pair<std::string, MinuteStamp>, detail::PairHash> seen;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view row = strip_cr(line);
    if (row.empty())
      continue;
    auto f = split_fields(row);
    if (f.size() != 3)
      throw ParseError(lineno, "expected 3 fields");
    if (f[0].empty())
      throw ParseError(lineno, "empty customer_id");
    RawReading r;
    r.customer_id = std::string(f[0]);
    try {
      r.timestamp = parse_timestamp(f[1]);
    } catch (const Error &e) {
      throw ParseError(lineno, e.what());
    }
    if (!parse_double(f[2], r.kwh))
      throw ParseError(lineno, "bad kwh '" + std::string(f[2]) + "'");
    if (!seen.emplace(r.customer_id, r.timestamp).second)
      throw Error(Errc::duplicate_key,
                  "line " + std::to_string(lineno) + ": duplicate reading for " +
                      r.customer_id + " at " + std::string(f[1]));
    out.push_back(std::move(r));
  }
  if (out.empty())
    throw Error(Errc::dataset_empty, "no readings");
  return out;
}

/// Reads `timestamp,system_kw` CSV into an hourly grid. Sub-hourly rows are
/// averaged into their hour bin.
inline FeederSeries parse_scada(std::istream &in) {
  std::string line;
  detail::expect_header(in, "timestamp,system_kw", line);
  std::map<HourStamp, std::pair<double, int>> bins;
  std::unordered_set<MinuteStamp> seen;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view row = strip_cr(line);
    if (row.empty())
      continue;
    auto f = split_fields(row);
    if (f.size() != 2)
      throw ParseError(lineno, "expected 2 fields");
    MinuteStamp t;
    try {
      t = parse_timestamp(f[0]);
    } catch (const Error &e) {
      throw ParseError(lineno, e.what());
    }
    double kw;
    if (!parse_double(f[1], kw))
      throw ParseError(lineno, "bad system_kw '" + std::string(f[1]) + "'");
    if (!seen.insert(t).second)
      throw Error(Errc::duplicate_key, "line " + std::to_string(lineno) +
                                           ": duplicate timestamp " +
                                           std::string(f[0]));
    auto &b = bins[hour_bin(t)];
    b.first += kw;
    b.second += 1;
  }
  if (bins.empty())
    throw Error(Errc::dataset_empty, "no scada rows");
  FeederSeries fs;
  fs.start = bins.begin()->first;
  fs.values.assign(static_cast<std::size_t>(bins.rbegin()->first - fs.start + 1),
                   kMissing);
  for (const auto &[h, b] : bins)
    fs.values[static_cast<std::size_t>(h - fs.start)] = b.first / b.second;
  return fs;
}

/// Half-open hour range used to pin every series to a common grid.
struct HourRange {
  HourStamp begin = 0;
  HourStamp end = 0;
};

/// Groups readings into one hourly series per customer, in order of first
/// appearance. Sub-hourly readings are summed into their hour bin. Without
/// `grid` each series spans its own first..last reading.
inline std::vector<MeterSeries>
to_series(std::span<const RawReading> readings,
          std::optional<HourRange> grid = std::nullopt) {
  std::vector<MeterSeries> out;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::pair<HourStamp, HourStamp>> span_of;
  for (const auto &r : readings) {
    auto [it, fresh] = index.emplace(r.customer_id, out.size());
    HourStamp h = hour_bin(r.timestamp);
    if (fresh) {
      MeterSeries m;
      m.customer_id = r.customer_id;
      out.push_back(std::move(m));
      span_of.emplace_back(h, h);
    } else {
      auto &s = span_of[it->second];
      s.first = std::min(s.first, h);
      s.second = std::max(s.second, h);
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    HourStamp b = grid ? grid->begin : span_of[i].first;
    HourStamp e = grid ? grid->end : span_of[i].second + 1;
    out[i].start = b;
    out[i].values.assign(static_cast<std::size_t>(std::max<HourStamp>(e - b, 0)),
                         kMissing);
  }
  for (const auto &r : readings) {
    auto &m = out[index.at(r.customer_id)];
    HourStamp h = hour_bin(r.timestamp);
    if (h < m.start || h >= m.end())
      continue;
    double &slot = m.values[static_cast<std::size_t>(h - m.start)];
    slot = is_missing(slot) ? r.kwh : slot + r.kwh;
  }
  return out;
}

template <class Series> struct CleanResult {
  Series series;
  std::size_t n_replaced = 0; // samples flagged erroneous and interpolated
  std::size_t n_filled = 0;   // missing hours filled
};

namespace detail {

/// Fills NaN runs by linear interpolation between the nearest present
/// neighbours; leading/trailing runs take the nearest present value.
inline void interpolate_gaps(std::vector<double> &v) {
  const std::size_t n = v.size();
  std::size_t prev = n; // index of last present value, n = none yet
  for (std::size_t i = 0; i < n; ++i) {
    if (is_missing(v[i]))
      continue;
    if (prev == n) {
      for (std::size_t j = 0; j < i; ++j)
        v[j] = v[i];
    } else if (i > prev + 1) {
      double a = v[prev], b = v[i];
      double span = static_cast<double>(i - prev);
      for (std::size_t j = prev + 1; j < i; ++j)
        v[j] = a + (b - a) * static_cast<double>(j - prev) / span;
    }
    prev = i;
  }
  if (prev != n)
    for (std::size_t j = prev + 1; j < n; ++j)
      v[j] = v[prev];
}

/// Flags |x - mean| / std > threshold over present values; population std.
inline std::size_t flag_outliers(const std::vector<double> &v,
                                 std::vector<char> &flag, double threshold) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double x : v)
    if (!is_missing(x)) {
      sum += x;
      ++n;
    }
  if (n == 0)
    return 0;
  double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double x : v)
    if (!is_missing(x))
      ss += (x - mean) * (x - mean);
  double sd = std::sqrt(ss / static_cast<double>(n));
  if (!(sd > 0.0))
    return 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!is_missing(v[i]) && std::abs(v[i] - mean) / sd > threshold) {
      flag[i] = 1;
      ++hits;
    }
  return hits;
}

} // namespace detail

inline constexpr double kOutlierZ = 5.0;

/// Replaces erroneous samples (negative, or |z| > 5 against the series'
/// own mean and std) and fills missing hours by linear interpolation.
///
/// The first screen uses the raw series statistics. Screening repeats on the
/// repaired series until nothing is flagged, so the output is a fixed point:
/// cleaning it again returns it unchanged.
template <class Series> CleanResult<Series> clean_series(const Series &in) {
  CleanResult<Series> out;
  out.series = in;
  auto &v = out.series.values;
  const std::size_t present = in.present();
  if (present < 3)
    throw Error(Errc::insufficient_data,
                "series has " + std::to_string(present) + " samples, need 3");
  out.n_filled = v.size() - present;

  std::vector<char> replaced(v.size(), 0);
  std::vector<char> flag(v.size(), 0);
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!is_missing(v[i]) && v[i] < 0.0)
      flag[i] = 1;
  detail::flag_outliers(v, flag, kOutlierZ);

  constexpr int kMaxPasses = 64;
  for (int pass = 0;; ++pass) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < v.size(); ++i)
      if (flag[i]) {
        if (!is_missing(v[i]))
          replaced[i] = 1;
        v[i] = kMissing;
        flag[i] = 0;
        ++hits;
      }
    if (hits == 0 && pass > 0)
      break;
    std::size_t alive = 0;
    for (double x : v)
      alive += is_missing(x) ? 0 : 1;
    if (alive == 0)
      throw Error(Errc::insufficient_data, "no valid samples survive screening");
    detail::interpolate_gaps(v);
    if (pass == kMaxPasses)
      break;
    detail::flag_outliers(v, flag, kOutlierZ);
  }
  out.n_replaced = static_cast<std::size_t>(
      std::count(replaced.begin(), replaced.end(), char{1}));
  return out;
}

struct CleanSummary {
  std::string customer_id;
  std::size_t n_replaced = 0;
  std::size_t n_filled = 0;
};

inline void write_clean_report(std::ostream &os,
                               std::span<const CleanSummary> rows) {
  std::string buf = "customer_id,n_replaced,n_filled\n";
  for (const auto &r : rows) {
    buf += r.customer_id;
    buf += ',';
    buf += std::to_string(r.n_replaced);
    buf += ',';
    buf += std::to_string(r.n_filled);
    buf += '\n';
  }
  os << buf;
}

// ---- seasons ---------------------------------------------------------------

struct SeasonalMember {
  std::string customer_id;
  std::size_t series_index = 0; // position in the input series list
  std::size_t n_days = 0;
  Profile profile{}; // mean kWh per hour-of-day over the season's days
};

struct SeasonalDataset {
  Season season = Season::spring;
  std::vector<SeasonalMember> members;
};

struct SeasonWarning {
  std::string customer_id;
  Season season;
};

struct SeasonSplit {
  std::array<SeasonalDataset, 4> datasets;
  /// Feeder copies holding only their season's hours; other hours are NaN.
  std::array<FeederSeries, 4> feeders;
  std::vector<SeasonWarning> warnings;

  const SeasonalDataset &operator[](Season s) const {
    return datasets[static_cast<std::size_t>(s)];
  }
};

/// Average daily profile over the complete days selected by `window`.
inline std::optional<std::pair<Profile, std::size_t>>
average_profile(const HourlySeries &s, const DayWindow &window) {
  Profile acc{};
  std::size_t days = 0;
  for (std::int64_t d = s.first_day(); d < s.last_day(); ++d) {
    if (!window.contains(d) || !s.complete_day(d))
      continue;
    auto off = static_cast<std::size_t>(day_start(d) - s.start);
    for (int h = 0; h < kHoursPerDay; ++h)
      acc[h] += s.values[off + h];
    ++days;
  }
  if (days == 0)
    return std::nullopt;
  for (double &x : acc)
    x /= static_cast<double>(days);
  return std::make_pair(acc, days);
}

/// Partitions cleaned meter data and the feeder by season and computes each
/// customer's average daily profile per season. Customers without a complete
/// day in a season are left out of that season and reported.
inline SeasonSplit split_seasons(std::span<const MeterSeries> meters,
                                 const FeederSeries &feeder,
                                 const SeasonCalendar &calendar = {}) {
  SeasonSplit out;
  for (Season s : kSeasons) {
    auto i = static_cast<std::size_t>(s);
    out.datasets[i].season = s;
    FeederSeries f = feeder;
    for (std::size_t k = 0; k < f.values.size(); ++k)
      if (calendar.of_hour(f.start + static_cast<HourStamp>(k)) != s)
        f.values[k] = kMissing;
    out.feeders[i] = std::move(f);
  }
  for (std::size_t j = 0; j < meters.size(); ++j) {
    const auto &m = meters[j];
    std::array<Profile, 4> acc{};
    std::array<std::size_t, 4> days{};
    for (std::int64_t d = m.first_day(); d < m.last_day(); ++d) {
      if (!m.complete_day(d))
        continue;
      auto si = static_cast<std::size_t>(calendar.of_day(d));
      auto off = static_cast<std::size_t>(day_start(d) - m.start);
      for (int h = 0; h < kHoursPerDay; ++h)
        acc[si][h] += m.values[off + h];
      ++days[si];
    }
    for (Season s : kSeasons) {
      auto si = static_cast<std::size_t>(s);
      if (days[si] == 0) {
        out.warnings.push_back({m.customer_id, s});
        continue;
      }
      SeasonalMember mem;
      mem.customer_id = m.customer_id;
      mem.series_index = j;
      mem.n_days = days[si];
      for (int h = 0; h < kHoursPerDay; ++h)
        mem.profile[h] = acc[si][h] / static_cast<double>(days[si]);
      out.datasets[si].members.push_back(std::move(mem));
    }
  }
  return out;
}

// ---- billing ---------------------------------------------------------------

struct MonthlyBilling {
  std::string customer_id;
  MonthKey month;
  double energy = 0.0; // kWh
};

/// One record per calendar month holding at least one sample.
inline std::vector<MonthlyBilling> aggregate_monthly(const MeterSeries &s) {
  std::vector<MonthlyBilling> out;
  if (s.empty())
    return out;
  MonthKey m = month_of(s.start);
  HourStamp h = s.start;
  while (h < s.end()) {
    HourStamp stop = std::min(month_end(m), s.end());
    double sum = 0.0;
    bool any = false;
    for (; h < stop; ++h) {
      double v = s.values[static_cast<std::size_t>(h - s.start)];
      if (!is_missing(v)) {
        sum += v;
        any = true;
      }
    }
    if (any)
      out.push_back({s.customer_id, m, sum});
    m = m.next();
  }
  return out;
}

inline void write_billing(std::ostream &os,
                          std::span<const MonthlyBilling> rows) {
  std::string buf = "customer_id,year,month,kwh\n";
  for (const auto &r : rows) {
    buf += r.customer_id;
    buf += ',' + std::to_string(r.month.year) + ',' +
           std::to_string(r.month.month) + ',';
    append_double(buf, r.energy);
    buf += '\n';
  }
  os << buf;
}

/// Writes meter series back out in `sm_readings.csv` layout (hourly stamps,
/// missing hours omitted). `fixed_decimals < 0` prints shortest round-trip.
inline void write_readings(std::ostream &os, std::span<const MeterSeries> meters,
                           int fixed_decimals = -1) {
  os << "customer_id,timestamp,kwh\n";
  std::string buf;
  for (const auto &m : meters) {
    buf.clear();
    for (std::size_t i = 0; i < m.values.size(); ++i) {
      double v = m.values[i];
      if (is_missing(v))
        continue;
      buf += m.customer_id;
      buf += ',';
      buf += format_hour(m.start + static_cast<HourStamp>(i));
      buf += ',';
      if (fixed_decimals >= 0)
        append_fixed(buf, v, fixed_decimals);
      else
        append_double(buf, v);
      buf += '\n';
    }
    os << buf;
  }
}

inline void write_scada(std::ostream &os, const FeederSeries &f) {
  std::string buf = "timestamp,system_kw\n";
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    if (is_missing(f.values[i]))
      continue;
    buf += format_hour(f.start + static_cast<HourStamp>(i));
    buf += ',';
    append_double(buf, f.values[i]);
    buf += '\n';
  }
  os << buf;
}

} // namespace peakseg
