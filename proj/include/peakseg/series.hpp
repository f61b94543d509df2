#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "peakseg/calendar.hpp"

namespace peakseg {

/// 24 hourly values of one (average) day.
using Profile = std::array<double, kHoursPerDay>;

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

/// Dense hourly grid starting at `start`; NaN marks a missing hour.
struct HourlySeries {
  HourStamp start = 0;
  std::vector<double> values;

  HourStamp end() const { return start + static_cast<HourStamp>(values.size()); }
  bool empty() const { return values.empty(); }

  double at(HourStamp h) const {
    if (h < start || h >= end())
      return kMissing;
    return values[static_cast<std::size_t>(h - start)];
  }

  std::size_t present() const {
    std::size_t n = 0;
    for (double v : values)
      n += is_missing(v) ? 0 : 1;
    return n;
  }

  /// Fraction of grid hours that carry a value.
  double coverage() const {
    return values.empty() ? 0.0
                          : static_cast<double>(present()) /
                                static_cast<double>(values.size());
  }

  /// True when all 24 hours of `day` are present.
  bool complete_day(std::int64_t day) const {
    HourStamp h0 = day_start(day);
    if (h0 < start || h0 + kHoursPerDay > end())
      return false;
    auto off = static_cast<std::size_t>(h0 - start);
    for (int h = 0; h < kHoursPerDay; ++h)
      if (is_missing(values[off + h]))
        return false;
    return true;
  }

  /// Range of days that overlap the grid, as [first, last).
  std::int64_t first_day() const { return day_of(start); }
  std::int64_t last_day() const { return empty() ? first_day() : day_of(end() - 1) + 1; }
};

/// One customer's hourly consumption, kWh per hour.
struct MeterSeries : HourlySeries {
  std::string customer_id;
};

/// System-level load, kW per hour.
struct FeederSeries : HourlySeries {};

inline MeterSeries make_meter(std::string id, HourStamp start,
                              std::vector<double> kwh) {
  MeterSeries m;
  m.customer_id = std::move(id);
  m.start = start;
  m.values = std::move(kwh);
  return m;
}

inline FeederSeries make_feeder(HourStamp start, std::vector<double> kw) {
  FeederSeries f;
  f.start = start;
  f.values = std::move(kw);
  return f;
}

/// Day filter used by per-window statistics: an optional day range and an
/// optional season.
struct DayWindow {
  std::int64_t first_day = std::numeric_limits<std::int64_t>::min();
  std::int64_t end_day = std::numeric_limits<std::int64_t>::max();
  std::optional<Season> season;
  SeasonCalendar calendar{};

  static DayWindow all() { return {}; }

  static DayWindow of_season(Season s, SeasonCalendar cal = {}) {
    DayWindow w;
    w.season = s;
    w.calendar = cal;
    return w;
  }

  static DayWindow of_month(MonthKey m) {
    DayWindow w;
    w.first_day = peakseg::first_day(m);
    w.end_day = peakseg::first_day(m.next());
    return w;
  }

  static DayWindow of_days(std::int64_t first, std::int64_t end) {
    DayWindow w;
    w.first_day = first;
    w.end_day = end;
    return w;
  }

  bool contains(std::int64_t day) const {
    if (day < first_day || day >= end_day)
      return false;
    return !season || calendar.of_day(day) == *season;
  }
};

} // namespace peakseg
