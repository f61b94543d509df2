#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "peakseg/calendar.hpp"
#include "peakseg/error.hpp"
#include "peakseg/format.hpp"
#include "peakseg/series.hpp"

namespace peakseg {

struct DailyPeak {
  std::int64_t day = 0;
  int hour = 0;    // hour-of-day of the system peak, 0..23
  double kw = 0.0; // system peak value

  HourStamp stamp() const { return day_start(day) + hour; }
};

struct DailyPeaks {
  std::vector<DailyPeak> peaks;
  std::vector<std::int64_t> skipped_days; // days lacking complete feeder data
};

/// Argmax over 24 values; the earliest hour wins ties.
inline int argmax_hour(const double *day) {
  int best = 0;
  for (int h = 1; h < kHoursPerDay; ++h)
    if (day[h] > day[best])
      best = h;
  return best;
}

/// System peak (value and hour) of every day in `window` that the feeder
/// covers completely. Incomplete days are skipped and listed.
inline DailyPeaks daily_peaks(const FeederSeries &feeder, const DayWindow &window) {
  DailyPeaks out;
  std::int64_t first = std::max(window.first_day, feeder.first_day());
  std::int64_t last = std::min(window.end_day, feeder.last_day());
  for (std::int64_t d = first; d < last; ++d) {
    if (!window.contains(d))
      continue;
    if (!feeder.complete_day(d)) {
      out.skipped_days.push_back(d);
      continue;
    }
    const double *v = feeder.values.data() + (day_start(d) - feeder.start);
    int h = argmax_hour(v);
    out.peaks.push_back({d, h, v[h]});
  }
  return out;
}

inline DailyPeaks daily_peaks(const FeederSeries &feeder, MonthKey month) {
  return daily_peaks(feeder, DayWindow::of_month(month));
}

/// Coincident monthly peak contribution of one customer.
struct CmpcRecord {
  std::string customer_id;
  MonthKey month;
  double value = 0.0;
  std::size_t n_days = 0;
};

/// Mean over days of the customer's load at the system peak hour divided by
/// the system peak. Days where the meter has no value at t_d are dropped.
inline CmpcRecord compute_cmpc(const MeterSeries &meter,
                               std::span<const DailyPeak> peaks) {
  if (peaks.empty())
    throw Error(Errc::insufficient_data, "no daily peaks for " + meter.customer_id);
  CmpcRecord rec;
  rec.customer_id = meter.customer_id;
  rec.month = month_of_day(peaks.front().day);
  double sum = 0.0;
  for (const auto &p : peaks) {
    if (!(p.kw > 0.0))
      throw Error(Errc::numeric, "non-positive system peak on " +
                                     format_hour(p.stamp()));
    double x = meter.at(p.stamp());
    if (is_missing(x))
      continue;
    sum += x / p.kw;
    ++rec.n_days;
  }
  if (rec.n_days == 0)
    throw Error(Errc::insufficient_data,
                "no usable days for " + meter.customer_id);
  rec.value = sum / static_cast<double>(rec.n_days);
  return rec;
}

/// Months touched by a series, in order.
inline std::vector<MonthKey> months_of(const HourlySeries &s) {
  std::vector<MonthKey> out;
  if (s.empty())
    return out;
  for (MonthKey m = month_of(s.start); month_start(m) < s.end(); m = m.next())
    out.push_back(m);
  return out;
}

/// CMPC for every customer and every month the feeder covers. Customer
/// months without usable days are omitted.
inline std::vector<CmpcRecord> compute_all_cmpc(std::span<const MeterSeries> meters,
                                                const FeederSeries &feeder) {
  std::vector<CmpcRecord> out;
  std::vector<DailyPeaks> by_month;
  auto months = months_of(feeder);
  for (MonthKey m : months)
    by_month.push_back(daily_peaks(feeder, m));
  for (const auto &meter : meters)
    for (std::size_t i = 0; i < months.size(); ++i) {
      if (by_month[i].peaks.empty())
        continue;
      if (meter.end() <= month_start(months[i]) ||
          meter.start >= month_end(months[i]))
        continue;
      try {
        out.push_back(compute_cmpc(meter, by_month[i].peaks));
      } catch (const Error &e) {
        if (e.code() != Errc::insufficient_data)
          throw;
      }
    }
  return out;
}

inline void write_cmpc(std::ostream &os, std::span<const CmpcRecord> rows) {
  std::string buf = "customer_id,year,month,cmpc,n_days\n";
  for (const auto &r : rows) {
    buf += r.customer_id;
    buf += ',' + std::to_string(r.month.year) + ',' +
           std::to_string(r.month.month) + ',';
    append_double(buf, r.value);
    buf += ',' + std::to_string(r.n_days) + '\n';
  }
  os << buf;
}

/// Probability over hour-of-day of the customer's daily peak.
struct PeakTimingDistribution {
  std::string customer_id;
  Profile x{};
  std::size_t n_days = 0;
};

/// Fraction of complete days in `window` on which the customer's own daily
/// maximum falls at each hour (earliest hour on ties).
inline PeakTimingDistribution peak_timing_distribution(const MeterSeries &meter,
                                                       const DayWindow &window) {
  PeakTimingDistribution out;
  out.customer_id = meter.customer_id;
  std::array<std::size_t, kHoursPerDay> counts{};
  std::int64_t first = std::max(window.first_day, meter.first_day());
  std::int64_t last = std::min(window.end_day, meter.last_day());
  for (std::int64_t d = first; d < last; ++d) {
    if (!window.contains(d) || !meter.complete_day(d))
      continue;
    ++counts[argmax_hour(meter.values.data() + (day_start(d) - meter.start))];
    ++out.n_days;
  }
  if (out.n_days == 0)
    throw Error(Errc::insufficient_data,
                "no complete day in window for " + meter.customer_id);
  for (int h = 0; h < kHoursPerDay; ++h)
    out.x[h] = static_cast<double>(counts[h]) / static_cast<double>(out.n_days);
  return out;
}

namespace detail {

inline std::optional<HourStamp> monthly_argmax(const HourlySeries &s, MonthKey m) {
  HourStamp b = std::max(month_start(m), s.start);
  HourStamp e = std::min(month_end(m), s.end());
  std::optional<HourStamp> best;
  double bv = 0.0;
  for (HourStamp h = b; h < e; ++h) {
    double v = s.values[static_cast<std::size_t>(h - s.start)];
    if (is_missing(v))
      continue;
    if (!best || v > bv) {
      best = h;
      bv = v;
    }
  }
  return best;
}

} // namespace detail

/// Share of customers whose monthly peak hour equals the feeder's monthly
/// peak hour. Customers without data in the month are not counted.
inline double coincidence_rate(std::span<const MeterSeries> meters,
                               const FeederSeries &feeder, MonthKey month) {
  if (meters.empty())
    throw Error(Errc::invalid_argument, "coincidence_rate needs customers");
  auto sys = detail::monthly_argmax(feeder, month);
  if (!sys)
    throw Error(Errc::insufficient_data, "feeder has no data in month");
  std::size_t hit = 0, total = 0;
  for (const auto &m : meters) {
    auto own = detail::monthly_argmax(m, month);
    if (!own)
      continue;
    ++total;
    hit += (*own == *sys) ? 1 : 0;
  }
  if (total == 0)
    throw Error(Errc::insufficient_data, "no customer has data in month");
  return static_cast<double>(hit) / static_cast<double>(total);
}

} // namespace peakseg
