#pragma once

#include <array>
#include <chrono>
#include <compare>
#include <cstdio>
#include <cstdint>
#include <string>
#include <string_view>

#include "peakseg/error.hpp"

namespace peakseg {

inline constexpr int kHoursPerDay = 24;

/// Whole hours since 1970-01-01T00:00. Timezone-naive local time.
using HourStamp = std::int64_t;
/// Whole minutes since 1970-01-01T00:00 (raw reading resolution).
using MinuteStamp = std::int64_t;

struct MonthKey {
  int year = 1970;
  unsigned month = 1; // 1..12

  auto operator<=>(const MonthKey &) const = default;

  MonthKey next() const {
    return month == 12 ? MonthKey{year + 1, 1} : MonthKey{year, month + 1};
  }
};

namespace detail {

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0)))
    --q;
  return q;
}

inline std::chrono::year_month_day civil(std::int64_t day) {
  return std::chrono::year_month_day{
      std::chrono::sys_days{std::chrono::days{day}}};
}

inline bool parse_uint(std::string_view s, int &out) {
  if (s.empty())
    return false;
  int v = 0;
  for (char c : s) {
    if (c < '0' || c > '9')
      return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  return true;
}

} // namespace detail

inline std::int64_t day_of(HourStamp h) {
  return detail::floor_div(h, kHoursPerDay);
}

inline int hour_of_day(HourStamp h) {
  return static_cast<int>(h - day_of(h) * kHoursPerDay);
}

inline HourStamp day_start(std::int64_t day) { return day * kHoursPerDay; }

inline std::int64_t day_number(int year, unsigned month, unsigned day) {
  using namespace std::chrono;
  return sys_days{std::chrono::year{year} / std::chrono::month{month} /
                  std::chrono::day{day}}
      .time_since_epoch()
      .count();
}

inline MonthKey month_of_day(std::int64_t day) {
  auto ymd = detail::civil(day);
  return {static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month())};
}

inline MonthKey month_of(HourStamp h) { return month_of_day(day_of(h)); }

inline std::int64_t first_day(MonthKey m) { return day_number(m.year, m.month, 1); }

inline int days_in_month(MonthKey m) {
  return static_cast<int>(first_day(m.next()) - first_day(m));
}

inline HourStamp month_start(MonthKey m) { return day_start(first_day(m)); }
inline HourStamp month_end(MonthKey m) { return month_start(m.next()); }

/// Parses `YYYY-MM-DDTHH:MM:SS` into minutes since the epoch. Throws
/// Errc::parse on any deviation from that layout or out-of-range field.
inline MinuteStamp parse_timestamp(std::string_view s) {
  if (s.size() != 19 || s[4] != '-' || s[7] != '-' || s[10] != 'T' ||
      s[13] != ':' || s[16] != ':')
    throw Error(Errc::parse, "bad timestamp '" + std::string(s) + "'");
  int y, mo, d, hh, mi, ss;
  if (!detail::parse_uint(s.substr(0, 4), y) ||
      !detail::parse_uint(s.substr(5, 2), mo) ||
      !detail::parse_uint(s.substr(8, 2), d) ||
      !detail::parse_uint(s.substr(11, 2), hh) ||
      !detail::parse_uint(s.substr(14, 2), mi) ||
      !detail::parse_uint(s.substr(17, 2), ss))
    throw Error(Errc::parse, "bad timestamp '" + std::string(s) + "'");
  using namespace std::chrono;
  year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(mo)},
                     std::chrono::day{unsigned(d)}};
  if (!ymd.ok() || hh > 23 || mi > 59 || ss > 59)
    throw Error(Errc::parse, "timestamp out of range '" + std::string(s) + "'");
  std::int64_t day = sys_days{ymd}.time_since_epoch().count();
  // seconds are accepted for layout compatibility; resolution is one minute
  return (day * kHoursPerDay + hh) * 60 + mi + (ss > 0 ? 1 : 0);
}

/// Hour bin of a reading. A stamp marks the end of the metered interval, so
/// sub-hourly stamps fold into the hour bin that ends at the next full hour.
inline HourStamp hour_bin(MinuteStamp m) {
  std::int64_t h = detail::floor_div(m, 60);
  return (m - h * 60) > 0 ? h + 1 : h;
}

inline std::string format_hour(HourStamp h) {
  auto ymd = detail::civil(day_of(h));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:00:00",
                static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()), hour_of_day(h));
  return buf;
}

enum class Season { spring = 0, summer = 1, autumn = 2, winter = 3 };

inline constexpr std::array<Season, 4> kSeasons = {
    Season::spring, Season::summer, Season::autumn, Season::winter};

inline const char *to_string(Season s) {
  switch (s) {
  case Season::spring: return "spring";
  case Season::summer: return "summer";
  case Season::autumn: return "autumn";
  case Season::winter: return "winter";
  }
  return "?";
}

inline Season season_from_string(std::string_view s) {
  for (Season v : kSeasons)
    if (s == to_string(v))
      return v;
  throw Error(Errc::config, "unknown season '" + std::string(s) + "'");
}

/// "YYYY-MM".
inline MonthKey parse_month(std::string_view s) {
  int y = 0, m = 0;
  if (s.size() != 7 || s[4] != '-' || !detail::parse_uint(s.substr(0, 4), y) ||
      !detail::parse_uint(s.substr(5, 2), m) || m < 1 || m > 12)
    throw Error(Errc::parse, "bad month '" + std::string(s) + "', expected YYYY-MM");
  return {y, static_cast<unsigned>(m)};
}

inline std::string format_month(MonthKey m) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u", m.year, m.month);
  return buf;
}

/// Month-to-season map. Default is the meteorological convention.
struct SeasonCalendar {
  std::array<Season, 12> by_month = {
      Season::winter, Season::winter, Season::spring, Season::spring,
      Season::spring, Season::summer, Season::summer, Season::summer,
      Season::autumn, Season::autumn, Season::autumn, Season::winter};

  Season of(MonthKey m) const { return by_month[m.month - 1]; }
  Season of_day(std::int64_t day) const { return of(month_of_day(day)); }
  Season of_hour(HourStamp h) const { return of(month_of(h)); }

  bool operator==(const SeasonCalendar &) const = default;
};

} // namespace peakseg
