#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "peakseg/ingest.hpp"
#include "peakseg/spectral.hpp"
#include "peakseg/synth.hpp"

using namespace peakseg;

namespace {

SynthConfig small(std::size_t n, int months = 2) {
  SynthConfig c;
  c.n_customers = n;
  c.n_months = months;
  c.start_month = 6;
  return c;
}

} // namespace

TEST(ArchetypeShape, NormalizedAndPositive) {
  for (int a = 0; a < kArchetypeCount; ++a)
    for (Season s : kSeasons) {
      Profile p = archetype_shape(static_cast<Archetype>(a), s);
      EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
      for (double v : p)
        EXPECT_GT(v, 0.0);
    }
}

TEST(ArchetypeShape, EveningPeakerPeaksInTheEvening) {
  Profile p = archetype_shape(Archetype::evening_peaker, Season::summer);
  EXPECT_EQ(argmax_hour(p.data()), 18);
  p = archetype_shape(Archetype::morning_peaker, Season::spring);
  EXPECT_EQ(argmax_hour(p.data()), 7);
}

TEST(Generate, Deterministic) {
  auto a = generate(small(12));
  auto b = generate(small(12));
  ASSERT_EQ(a.meters.size(), b.meters.size());
  for (std::size_t i = 0; i < a.meters.size(); ++i) {
    EXPECT_EQ(a.meters[i].customer_id, b.meters[i].customer_id);
    EXPECT_EQ(a.meters[i].values, b.meters[i].values);
    EXPECT_EQ(a.survey[i].x, b.survey[i].x);
    EXPECT_EQ(a.truth.customers[i].archetype, b.truth.customers[i].archetype);
  }
  EXPECT_EQ(a.feeder.values, b.feeder.values);
  auto other = small(12);
  other.seed = 43;
  EXPECT_NE(generate(other).meters[0].values, a.meters[0].values);
}

TEST(Generate, FeederIsExactSumPlusBaseLoad) {
  for (double base : {0.0, 2.5}) {
    auto c = small(15);
    c.base_load_kw = base;
    auto g = generate(c);
    ASSERT_EQ(g.feeder.values.size(), g.meters[0].values.size());
    for (std::size_t h = 0; h < g.feeder.values.size(); ++h) {
      double s = 0.0;
      for (const auto &m : g.meters)
        s += m.values[h];
      ASSERT_EQ(g.feeder.values[h], s + base) << h;
    }
  }
}

TEST(Generate, SpanAndIds) {
  auto g = generate(small(12, 3));
  EXPECT_EQ(g.feeder.start, month_start({2017, 6}));
  EXPECT_EQ(g.feeder.end(), month_end({2017, 8}));
  EXPECT_EQ(g.meters[0].customer_id, "C0001");
  EXPECT_EQ(g.meters[11].customer_id, "C0012");
  for (std::size_t i = 0; i < g.meters.size(); ++i) {
    EXPECT_EQ(g.survey[i].customer_id, g.meters[i].customer_id);
    EXPECT_EQ(g.truth.customers[i].customer_id, g.meters[i].customer_id);
  }
}

TEST(Generate, SurveyRowsAreDistributions) {
  auto g = generate(small(24));
  for (const auto &row : g.survey) {
    EXPECT_NEAR(std::accumulate(row.x.begin(), row.x.end(), 0.0), 1.0, 1e-12);
    for (double v : row.x)
      EXPECT_GE(v, 0.0);
  }
}

TEST(Generate, ObservableShareFollowsFraction) {
  auto c = small(50);
  c.observable_fraction = 0.7;
  auto g = generate(c);
  auto n = std::count_if(g.truth.customers.begin(), g.truth.customers.end(),
                         [](const CustomerTruth &t) { return t.observable; });
  EXPECT_EQ(n, 35);
}

TEST(Generate, BalancedFamilies) {
  auto g = generate(small(60));
  std::array<int, kArchetypeCount> count{};
  for (const auto &c : g.truth.customers)
    ++count[c.archetype[0]];
  for (int k : count)
    EXPECT_EQ(k, 10);
}

TEST(Generate, NoiselessSingleFamilyPeaksWithTheFamily) {
  // smallest population the two-per-family rule admits for one family
  auto c = small(2, 12);
  c.start_month = 1;
  c.noise = 0.0;
  c.archetypes = {1};
  c.observable_fraction = 0.5;
  auto g = generate(c);
  SeasonCalendar cal;
  for (std::int64_t d = g.feeder.first_day(); d < g.feeder.last_day(); ++d) {
    int want = argmax_hour(archetype_shape(Archetype::evening_peaker, cal.of_day(d)).data());
    const double *v = g.feeder.values.data() + (day_start(d) - g.feeder.start);
    ASSERT_EQ(argmax_hour(v), want) << format_hour(day_start(d));
  }
}

TEST(Generate, ConfigErrors) {
  auto expect_config = [](SynthConfig c) {
    try {
      generate(c);
      FAIL();
    } catch (const Error &e) {
      EXPECT_EQ(e.code(), Errc::config);
    }
  };
  auto one = small(1);
  one.archetypes = {1};
  expect_config(one);
  expect_config(small(11));
  auto bad = small(12);
  bad.archetypes = {0, 6};
  expect_config(bad);
  bad = small(12);
  bad.observable_fraction = 1.0;
  expect_config(bad);
  auto two = small(2);
  two.archetypes = {1};
  expect_config(two); // an 80/20 split of two customers leaves no one unobservable
  bad = small(12);
  bad.label_noise = 1.5;
  expect_config(bad);
  bad = small(12);
  bad.noise = -1.0;
  expect_config(bad);
}

TEST(Generate, CalibrationTargetsOnDefaults) {
  auto g = generate(SynthConfig{});
  std::size_t below = 0, total = 0;
  for (const auto &m : g.meters)
    for (const auto &b : aggregate_monthly(m)) {
      ++total;
      below += b.energy < 1000.0;
    }
  EXPECT_GE(static_cast<double>(below) / static_cast<double>(total), 0.75);
  double rate = 0.0;
  auto months = months_of(g.feeder);
  for (MonthKey m : months)
    rate += coincidence_rate(g.meters, g.feeder, m);
  rate /= static_cast<double>(months.size());
  EXPECT_GE(rate, 0.03);
  EXPECT_LE(rate, 0.09);
}

TEST(Generate, NoiselessFamiliesAreRecoverable) {
  auto c = small(90);
  c.noise = 0.0;
  c.archetypes = {0, 2, 3};
  auto g = generate(c);
  auto split = split_seasons(g.meters, g.feeder, SeasonCalendar{});
  std::vector<Profile> profiles;
  std::vector<int> truth;
  for (const auto &m : split[Season::summer].members) {
    profiles.push_back(m.profile);
    truth.push_back(g.truth.customers[m.series_index].archetype[static_cast<std::size_t>(Season::summer)]);
  }
  auto pat = select_k_and_cluster(profiles, SpectralConfig{});
  EXPECT_EQ(pat.k, 3);
  EXPECT_DOUBLE_EQ(adjusted_rand_index(pat.labels, truth), 1.0);
}
