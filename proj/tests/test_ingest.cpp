#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "peakseg/ingest.hpp"

using namespace peakseg;

namespace {

MinuteStamp ts(const char *s) { return parse_timestamp(s); }

std::vector<RawReading> parse(const std::string &text) {
  std::istringstream in(text);
  return parse_readings(in);
}

MeterSeries series(std::vector<double> v, HourStamp start = 0) {
  return make_meter("c", start, std::move(v));
}

/// z of the largest deviation, population std, computed independently.
double max_z(const std::vector<double> &v) {
  double mean = 0;
  for (double x : v)
    mean += x;
  mean /= v.size();
  double ss = 0, worst = 0;
  for (double x : v)
    ss += (x - mean) * (x - mean);
  double sd = std::sqrt(ss / v.size());
  for (double x : v)
    worst = std::max(worst, std::abs(x - mean) / sd);
  return worst;
}

} // namespace

TEST(Calendar, TimestampRoundTrip) {
  HourStamp h = hour_bin(ts("2017-07-04T18:00:00"));
  EXPECT_EQ(format_hour(h), "2017-07-04T18:00:00");
  EXPECT_EQ(hour_of_day(h), 18);
  EXPECT_EQ(month_of(h), (MonthKey{2017, 7}));
  EXPECT_EQ(days_in_month({2016, 2}), 29);
  EXPECT_EQ(days_in_month({2017, 2}), 28);
}

TEST(Calendar, RejectsBadTimestamps) {
  for (const char *bad : {"2017-07-04 18:00:00", "2017-13-01T00:00:00", "2017-02-30T00:00:00",
                          "2017-07-04T24:00:00", "2017-7-4T18:00:00"})
    EXPECT_THROW(parse_timestamp(bad), Error) << bad;
}

TEST(Calendar, MeteorologicalSeasons) {
  SeasonCalendar cal;
  EXPECT_EQ(cal.of({2017, 12}), Season::winter);
  EXPECT_EQ(cal.of({2017, 2}), Season::winter);
  EXPECT_EQ(cal.of({2017, 3}), Season::spring);
  EXPECT_EQ(cal.of({2017, 6}), Season::summer);
  EXPECT_EQ(cal.of({2017, 11}), Season::autumn);
}

TEST(ParseReadings, SingleRow) {
  auto r = parse("customer_id,timestamp,kwh\nC1,2017-01-01T01:00:00,0.5\n");
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].customer_id, "C1");
  EXPECT_DOUBLE_EQ(r[0].kwh, 0.5);
}

TEST(ParseReadings, BadNumberCitesLine) {
  try {
    parse("customer_id,timestamp,kwh\nC1,2017-01-01T01:00:00,abc\n");
    FAIL();
  } catch (const ParseError &e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.code(), Errc::parse);
  }
}

TEST(ParseReadings, DuplicateKey) {
  try {
    parse("customer_id,timestamp,kwh\nC1,2017-01-01T01:00:00,1\n"
          "C2,2017-01-01T01:00:00,1\nC1,2017-01-01T01:00:00,2\n");
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), Errc::duplicate_key);
  }
}

TEST(ParseReadings, EmptyFile) {
  try {
    parse("");
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), Errc::dataset_empty);
  }
  try {
    parse("customer_id,timestamp,kwh\n");
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), Errc::dataset_empty);
  }
}

TEST(ParseReadings, PreservesOrderAndCrlf) {
  auto r = parse("customer_id,timestamp,kwh\r\nB,2017-01-01T02:00:00,2\r\nA,2017-01-01T01:00:00,1\r\n");
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].customer_id, "B");
  EXPECT_EQ(r[1].customer_id, "A");
}

TEST(ToSeries, SubHourlyReadingsSumIntoHour) {
  auto r = parse("customer_id,timestamp,kwh\nC,2017-01-01T00:30:00,0.25\n"
                 "C,2017-01-01T01:00:00,0.5\nC,2017-01-01T03:00:00,1\n");
  auto s = to_series(r);
  ASSERT_EQ(s.size(), 1u);
  HourStamp h1 = hour_bin(ts("2017-01-01T01:00:00"));
  EXPECT_EQ(s[0].start, h1);
  ASSERT_EQ(s[0].values.size(), 3u);
  EXPECT_DOUBLE_EQ(s[0].values[0], 0.75);
  EXPECT_TRUE(is_missing(s[0].values[1]));
  EXPECT_DOUBLE_EQ(s[0].values[2], 1.0);
}

TEST(ToSeries, GridPinsEverySeries) {
  auto r = parse("customer_id,timestamp,kwh\nA,2017-01-01T01:00:00,1\nB,2017-01-01T02:00:00,2\n");
  HourStamp b = hour_bin(ts("2017-01-01T00:00:00"));
  auto s = to_series(r, HourRange{b, b + 4});
  ASSERT_EQ(s.size(), 2u);
  for (const auto &m : s) {
    EXPECT_EQ(m.start, b);
    EXPECT_EQ(m.values.size(), 4u);
  }
  EXPECT_DOUBLE_EQ(s[1].values[2], 2.0);
}

TEST(ParseScada, HourlyGrid) {
  std::istringstream in("timestamp,system_kw\n2017-01-01T00:00:00,10\n2017-01-01T02:00:00,12\n");
  auto f = parse_scada(in);
  ASSERT_EQ(f.values.size(), 3u);
  EXPECT_TRUE(is_missing(f.values[1]));
  EXPECT_DOUBLE_EQ(f.values[2], 12.0);
}

TEST(CleanSeries, ConstantPassesThrough) {
  auto c = clean_series(series({5, 5, 5, 5}));
  EXPECT_EQ(c.series.values, (std::vector<double>{5, 5, 5, 5}));
  EXPECT_EQ(c.n_replaced, 0u);
}

TEST(CleanSeries, SpikeFixtureExceedsThreshold) {
  std::vector<double> v(29, 1.0);
  v.push_back(100.0);
  // A lone spike among n points has z <= sqrt(n - 1); 30 points allow z > 5.
  ASSERT_GT(max_z(v), 5.0);
  std::vector<double> twenty(19, 1.0);
  twenty.push_back(100.0);
  ASSERT_LT(max_z(twenty), 5.0);

  auto c = clean_series(series(v));
  EXPECT_EQ(c.n_replaced, 1u);
  EXPECT_DOUBLE_EQ(c.series.values.back(), 1.0);
  for (double x : c.series.values)
    EXPECT_DOUBLE_EQ(x, 1.0);
}

TEST(CleanSeries, InteriorGapIsMidpoint) {
  auto c = clean_series(series({1, 2, kMissing, 4, 5}));
  EXPECT_DOUBLE_EQ(c.series.values[2], 3.0);
  EXPECT_EQ(c.n_filled, 1u);
  EXPECT_EQ(c.n_replaced, 0u);
}

TEST(CleanSeries, BoundaryGapsTakeNearestValue) {
  auto c = clean_series(series({kMissing, kMissing, 2, 3, 4, kMissing}));
  EXPECT_EQ(c.series.values, (std::vector<double>{2, 2, 2, 3, 4, 4}));
  EXPECT_EQ(c.n_filled, 3u);
}

TEST(CleanSeries, TooShort) {
  try {
    clean_series(series({1, 2}));
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), Errc::insufficient_data);
  }
  EXPECT_THROW(clean_series(series({1, kMissing, 2, kMissing})), Error);
}

TEST(CleanSeries, Idempotent) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd(1.0, 0.2);
  std::uniform_int_distribution<int> pos(0, 199);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(200);
    for (double &x : v)
      x = std::abs(nd(rng));
    for (int s = 0; s < trial % 6; ++s)
      v[pos(rng)] = 20.0 + 10.0 * s;
    for (int g = 0; g < trial % 4; ++g)
      v[pos(rng)] = kMissing;
    auto once = clean_series(series(v));
    auto twice = clean_series(once.series);
    EXPECT_EQ(once.series.values, twice.series.values) << trial;
    EXPECT_EQ(twice.n_replaced, 0u);
    EXPECT_EQ(twice.n_filled, 0u);
  }
}

TEST(CleanSeries, NoOutlierNoGapIsExactCopy) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  std::vector<double> v(500);
  for (double &x : v)
    x = u(rng);
  ASSERT_LT(max_z(v), 5.0);
  auto c = clean_series(series(v));
  EXPECT_EQ(c.series.values, v);
  EXPECT_EQ(c.n_replaced, 0u);
}

TEST(SplitSeasons, JulyOnlyCustomer) {
  HourStamp jul = month_start({2017, 7});
  std::vector<double> v(31 * 24, 1.0);
  std::vector<MeterSeries> m{make_meter("J", jul, v)};
  auto f = make_feeder(month_start({2017, 1}), std::vector<double>(365 * 24, 5.0));
  auto split = split_seasons(m, f);
  EXPECT_EQ(split[Season::summer].members.size(), 1u);
  EXPECT_EQ(split[Season::summer].members[0].n_days, 31u);
  for (Season s : {Season::spring, Season::autumn, Season::winter})
    EXPECT_TRUE(split[s].members.empty());
  EXPECT_EQ(split.warnings.size(), 3u);
}

TEST(SplitSeasons, IdenticalDaysGiveThatDay) {
  Profile day;
  for (int h = 0; h < 24; ++h)
    day[h] = 0.1 * h + 0.3;
  std::vector<double> v;
  for (int d = 0; d < 10; ++d)
    v.insert(v.end(), day.begin(), day.end());
  std::vector<MeterSeries> m{make_meter("A", month_start({2017, 4}), v)};
  auto split = split_seasons(m, FeederSeries{});
  ASSERT_EQ(split[Season::spring].members.size(), 1u);
  for (int h = 0; h < 24; ++h)
    EXPECT_NEAR(split[Season::spring].members[0].profile[h], day[h], 1e-15);
}

TEST(SplitSeasons, TwoDayMean) {
  std::vector<double> v(48);
  std::vector<double> want(24);
  for (int h = 0; h < 24; ++h) {
    v[h] = h;
    v[24 + h] = 100.0 - 3.0 * h;
    want[h] = (v[h] + v[24 + h]) / 2.0;
  }
  std::vector<MeterSeries> m{make_meter("A", month_start({2017, 10}), v)};
  auto split = split_seasons(m, FeederSeries{});
  ASSERT_EQ(split[Season::autumn].members.size(), 1u);
  for (int h = 0; h < 24; ++h)
    EXPECT_DOUBLE_EQ(split[Season::autumn].members[0].profile[h], want[h]);
}

TEST(SplitSeasons, FeederHoursPartitioned) {
  HourStamp b = month_start({2017, 1});
  auto f = make_feeder(b, std::vector<double>(365 * 24, 1.0));
  auto split = split_seasons(std::span<const MeterSeries>{}, f);
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    int owners = 0;
    for (Season s : kSeasons)
      owners += is_missing(split.feeders[static_cast<std::size_t>(s)].values[i]) ? 0 : 1;
    ASSERT_EQ(owners, 1) << i;
  }
}

TEST(AggregateMonthly, OneDayOfOnes) {
  auto b = aggregate_monthly(make_meter("A", month_start({2017, 3}) + 24 * 4,
                                        std::vector<double>(24, 1.0)));
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b[0].month, (MonthKey{2017, 3}));
  EXPECT_DOUBLE_EQ(b[0].energy, 24.0);
}

TEST(AggregateMonthly, ThirtyDayMonth) {
  auto b = aggregate_monthly(make_meter("A", month_start({2017, 6}),
                                        std::vector<double>(30 * 24, 2.0)));
  ASSERT_EQ(b.size(), 1u);
  EXPECT_DOUBLE_EQ(b[0].energy, 2.0 * 24 * 30);
}

TEST(AggregateMonthly, EmptySeries) { EXPECT_TRUE(aggregate_monthly(MeterSeries{}).empty()); }

TEST(AggregateMonthly, SplitsAtMonthBoundary) {
  HourStamp b = month_start({2017, 2}) - 24;
  auto out = aggregate_monthly(make_meter("A", b, std::vector<double>(48, 1.5)));
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].month, (MonthKey{2017, 1}));
  EXPECT_DOUBLE_EQ(out[0].energy, 36.0);
  EXPECT_DOUBLE_EQ(out[1].energy, 36.0);
}

TEST(AggregateMonthly, Linear) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  HourStamp b = month_start({2017, 1});
  std::vector<double> x(24 * 90), y(24 * 90), s(24 * 90);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = u(rng);
    y[i] = u(rng);
    s[i] = x[i] + y[i];
  }
  auto ax = aggregate_monthly(make_meter("A", b, x));
  auto ay = aggregate_monthly(make_meter("A", b, y));
  auto as = aggregate_monthly(make_meter("A", b, s));
  ASSERT_EQ(as.size(), 3u);
  for (std::size_t i = 0; i < as.size(); ++i)
    EXPECT_NEAR(as[i].energy, ax[i].energy + ay[i].energy, 1e-9 * as[i].energy);
}

TEST(CleanReport, Layout) {
  std::ostringstream os;
  std::vector<CleanSummary> rows{{"A", 2, 3}};
  write_clean_report(os, rows);
  EXPECT_EQ(os.str(), "customer_id,n_replaced,n_filled\nA,2,3\n");
}
