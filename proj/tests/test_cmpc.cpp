#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "peakseg/cmpc.hpp"

using namespace peakseg;

namespace {

const MonthKey kJun{2017, 6};

std::vector<double> repeat_day(const std::vector<double> &day, int days) {
  std::vector<double> v;
  for (int d = 0; d < days; ++d)
    v.insert(v.end(), day.begin(), day.end());
  return v;
}

std::vector<double> ramp() {
  std::vector<double> d(24);
  for (int h = 0; h < 24; ++h)
    d[h] = h + 1.0;
  return d;
}

/// Random meters over June plus a feeder equal to their exact sum.
struct Population {
  std::vector<MeterSeries> meters;
  FeederSeries feeder;
};

Population random_population(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.05, 3.0);
  Population p;
  std::vector<double> sum(30 * 24, 0.0);
  for (int j = 0; j < n; ++j) {
    std::vector<double> v(30 * 24);
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = u(rng);
      sum[i] += v[i];
    }
    p.meters.push_back(make_meter("C" + std::to_string(j), month_start(kJun), v));
  }
  p.feeder = make_feeder(month_start(kJun), sum);
  return p;
}

} // namespace

TEST(DailyPeaks, ConstantFeederTiesToMidnight) {
  auto f = make_feeder(month_start(kJun), std::vector<double>(30 * 24, 10.0));
  auto p = daily_peaks(f, kJun);
  ASSERT_EQ(p.peaks.size(), 30u);
  for (const auto &d : p.peaks) {
    EXPECT_EQ(d.hour, 0);
    EXPECT_DOUBLE_EQ(d.kw, 10.0);
  }
}

TEST(DailyPeaks, Ramp) {
  auto f = make_feeder(month_start(kJun), repeat_day(ramp(), 30));
  auto p = daily_peaks(f, kJun);
  ASSERT_EQ(p.peaks.size(), 30u);
  EXPECT_EQ(p.peaks[0].hour, 23);
  EXPECT_DOUBLE_EQ(p.peaks[0].kw, 24.0);
}

TEST(DailyPeaks, BimodalTieTakesEarlier) {
  std::vector<double> day(24, 1.0);
  day[8] = day[19] = 7.0;
  auto f = make_feeder(month_start(kJun), repeat_day(day, 30));
  EXPECT_EQ(daily_peaks(f, kJun).peaks[3].hour, 8);
}

TEST(DailyPeaks, IncompleteDaySkipped) {
  auto v = repeat_day(ramp(), 30);
  v[24 * 4 + 5] = kMissing;
  auto p = daily_peaks(make_feeder(month_start(kJun), v), kJun);
  EXPECT_EQ(p.peaks.size(), 29u);
  ASSERT_EQ(p.skipped_days.size(), 1u);
  EXPECT_EQ(p.skipped_days[0], first_day(kJun) + 4);
}

TEST(ComputeCmpc, SelfContributionIsOne) {
  auto v = repeat_day(ramp(), 30);
  auto f = make_feeder(month_start(kJun), v);
  auto m = make_meter("A", month_start(kJun), v);
  auto r = compute_cmpc(m, daily_peaks(f, kJun).peaks);
  EXPECT_DOUBLE_EQ(r.value, 1.0);
  EXPECT_EQ(r.n_days, 30u);
  EXPECT_EQ(r.month, kJun);
}

TEST(ComputeCmpc, ConstantMeter) {
  auto f = make_feeder(month_start(kJun), std::vector<double>(30 * 24, 10.0));
  auto m = make_meter("A", month_start(kJun), std::vector<double>(30 * 24, 1.0));
  EXPECT_DOUBLE_EQ(compute_cmpc(m, daily_peaks(f, kJun).peaks).value, 0.1);
}

TEST(ComputeCmpc, ThreeDayMean) {
  std::vector<DailyPeak> peaks;
  std::vector<double> meter(72, 0.0);
  const double ratios[] = {0.1, 0.2, 0.3};
  double want = 0.0;
  for (int d = 0; d < 3; ++d) {
    peaks.push_back({first_day(kJun) + d, 18, 10.0});
    meter[24 * d + 18] = ratios[d] * 10.0;
    want += meter[24 * d + 18] / 10.0;
  }
  want /= 3.0;
  auto r = compute_cmpc(make_meter("A", month_start(kJun), meter), peaks);
  EXPECT_NEAR(r.value, 0.2, 1e-15);
  EXPECT_DOUBLE_EQ(r.value, want);
}

TEST(ComputeCmpc, MissingMeterDaysDropped) {
  std::vector<DailyPeak> peaks{{first_day(kJun), 1, 10.0}, {first_day(kJun) + 1, 1, 10.0}};
  std::vector<double> meter(48, 2.0);
  meter[25] = kMissing;
  auto r = compute_cmpc(make_meter("A", month_start(kJun), meter), peaks);
  EXPECT_EQ(r.n_days, 1u);
  EXPECT_DOUBLE_EQ(r.value, 0.2);
}

TEST(ComputeCmpc, Errors) {
  auto m = make_meter("A", month_start(kJun), std::vector<double>(24, 1.0));
  try {
    compute_cmpc(m, {});
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), Errc::insufficient_data);
  }
  std::vector<DailyPeak> zero{{first_day(kJun), 3, 0.0}};
  try {
    compute_cmpc(m, zero);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), Errc::numeric);
  }
  std::vector<DailyPeak> later{{first_day(kJun) + 5, 3, 1.0}};
  EXPECT_THROW(compute_cmpc(m, later), Error);
}

TEST(ComputeCmpc, SharesSumToOneWhenFeederIsTheSum) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto p = random_population(seed, 40);
    auto rows = compute_all_cmpc(p.meters, p.feeder);
    ASSERT_EQ(rows.size(), 40u);
    double sum = 0.0;
    for (const auto &r : rows)
      sum += r.value;
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(ComputeCmpc, ScaleCovariance) {
  auto p = random_population(9, 10);
  auto peaks = daily_peaks(p.feeder, kJun).peaks;
  for (double c : {0.5, 2.0, 3.7}) {
    MeterSeries scaled = p.meters[3];
    for (double &v : scaled.values)
      v *= c;
    double base = compute_cmpc(p.meters[3], peaks).value;
    EXPECT_NEAR(compute_cmpc(scaled, peaks).value, c * base, 1e-14 * c * base);
  }
}

TEST(ComputeCmpc, BoundedByLargestDailyRatio) {
  auto p = random_population(13, 8);
  auto peaks = daily_peaks(p.feeder, kJun).peaks;
  for (const auto &m : p.meters) {
    double worst = 0.0;
    for (const auto &d : peaks)
      worst = std::max(worst, m.at(d.stamp()) / d.kw);
    double f = compute_cmpc(m, peaks).value;
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, worst);
    EXPECT_LE(f, 1.0);
  }
}

TEST(PeakTiming, FixedHour) {
  std::vector<double> day(24, 1.0);
  day[18] = 3.0;
  auto ptd = peak_timing_distribution(make_meter("A", month_start(kJun), repeat_day(day, 10)),
                                      DayWindow::all());
  for (int h = 0; h < 24; ++h)
    EXPECT_EQ(ptd.x[h], h == 18 ? 1.0 : 0.0);
  EXPECT_EQ(ptd.n_days, 10u);
}

TEST(PeakTiming, TwoDays) {
  std::vector<double> v(48, 1.0);
  v[7] = 2.0;
  v[24 + 19] = 2.0;
  auto ptd = peak_timing_distribution(make_meter("A", month_start(kJun), v), DayWindow::all());
  EXPECT_DOUBLE_EQ(ptd.x[7], 0.5);
  EXPECT_DOUBLE_EQ(ptd.x[19], 0.5);
}

TEST(PeakTiming, FlatLoadTiesToMidnight) {
  auto ptd = peak_timing_distribution(
      make_meter("A", month_start(kJun), std::vector<double>(72, 0.7)), DayWindow::all());
  EXPECT_EQ(ptd.x[0], 1.0);
}

TEST(PeakTiming, NeedsCompleteDay) {
  std::vector<double> v(24, 1.0);
  v[3] = kMissing;
  EXPECT_THROW(peak_timing_distribution(make_meter("A", month_start(kJun), v), DayWindow::all()),
               Error);
}

TEST(PeakTiming, SumsToOne) {
  auto p = random_population(21, 20);
  for (const auto &m : p.meters) {
    auto ptd = peak_timing_distribution(m, DayWindow::of_month(kJun));
    double s = 0.0;
    for (double x : ptd.x) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
      s += x;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(PeakTiming, SeasonWindow) {
  // one day in May (spring) peaking at 6, one day in June (summer) at 20
  HourStamp b = month_start(kJun) - 24;
  std::vector<double> v(48, 1.0);
  v[6] = 5.0;
  v[24 + 20] = 5.0;
  auto m = make_meter("A", b, v);
  EXPECT_EQ(peak_timing_distribution(m, DayWindow::of_season(Season::spring)).x[6], 1.0);
  EXPECT_EQ(peak_timing_distribution(m, DayWindow::of_season(Season::summer)).x[20], 1.0);
}

TEST(Coincidence, SingleCustomerEqualsFeeder) {
  auto v = repeat_day(ramp(), 30);
  std::vector<MeterSeries> m{make_meter("A", month_start(kJun), v)};
  EXPECT_DOUBLE_EQ(coincidence_rate(m, make_feeder(month_start(kJun), v), kJun), 1.0);
}

TEST(Coincidence, HalfOfTwo) {
  auto v = repeat_day(ramp(), 30);
  std::vector<double> w(v.rbegin(), v.rend());
  std::vector<MeterSeries> m{make_meter("A", month_start(kJun), v),
                             make_meter("B", month_start(kJun), w)};
  EXPECT_DOUBLE_EQ(coincidence_rate(m, make_feeder(month_start(kJun), v), kJun), 0.5);
}

TEST(Coincidence, EmptyInput) {
  EXPECT_THROW(coincidence_rate({}, make_feeder(month_start(kJun), std::vector<double>(24, 1.0)), kJun),
               Error);
}

TEST(WriteCmpc, Layout) {
  std::ostringstream os;
  std::vector<CmpcRecord> rows{{"A", kJun, 0.25, 30}};
  write_cmpc(os, rows);
  EXPECT_EQ(os.str(), "customer_id,year,month,cmpc,n_days\nA,2017,6,0.25,30\n");
}
