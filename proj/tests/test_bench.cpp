#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "peakseg/bench.hpp"
#include "peakseg/synth.hpp"

using namespace peakseg;

namespace {

const MonthKey kJul{2017, 7};

MeterSeries meter_of(const std::string &id, const std::vector<double> &day, int days) {
  std::vector<double> v;
  for (int d = 0; d < days; ++d)
    v.insert(v.end(), day.begin(), day.end());
  return make_meter(id, month_start(kJul), v);
}

std::vector<MeterSeries> random_houses(std::uint64_t seed, int n, int days) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  std::uniform_int_distribution<int> hour(0, 23);
  std::vector<MeterSeries> out;
  for (int j = 0; j < n; ++j) {
    std::vector<double> v(static_cast<std::size_t>(days) * 24);
    int favourite = hour(rng);
    for (std::size_t i = 0; i < v.size(); ++i)
      v[i] = u(rng) * (static_cast<int>(i % 24) == favourite ? 3.0 : 1.0);
    out.push_back(make_meter("H" + std::to_string(j), month_start(kJul), v));
  }
  return out;
}

std::vector<std::size_t> identity(std::size_t n) {
  std::vector<std::size_t> r(n);
  for (std::size_t i = 0; i < n; ++i)
    r[i] = i;
  return r;
}

} // namespace

TEST(CustomerPeak, Examples) {
  EXPECT_DOUBLE_EQ(customer_peak(meter_of("A", std::vector<double>(24, 2.0), 31), kJul), 2.0);
  std::vector<double> ramp(24);
  for (int h = 0; h < 24; ++h)
    ramp[h] = h + 1.0;
  EXPECT_DOUBLE_EQ(customer_peak(meter_of("A", ramp, 31), kJul), 24.0);
  EXPECT_THROW(customer_peak(meter_of("A", ramp, 31), MonthKey{2017, 9}), Error);
}

TEST(Entropy, FixedPeakHourIsZero) {
  std::vector<double> day(24, 1.0);
  day[18] = 4.0;
  EXPECT_DOUBLE_EQ(profile_entropy(meter_of("A", day, 14), DayWindow::all()), 0.0);
}

TEST(Entropy, UniformPeakHourIsLn24) {
  std::vector<double> v;
  for (int d = 0; d < 48; ++d)
    for (int h = 0; h < 24; ++h)
      v.push_back(h == d % 24 ? 5.0 : 1.0);
  auto m = make_meter("A", month_start(kJul), v);
  EXPECT_NEAR(profile_entropy(m, DayWindow::all()), std::log(24.0), 1e-12);
}

TEST(Entropy, TwoEquiprobableHoursIsLn2) {
  std::vector<double> v;
  for (int d = 0; d < 10; ++d)
    for (int h = 0; h < 24; ++h)
      v.push_back(h == (d % 2 ? 7 : 19) ? 5.0 : 1.0);
  auto m = make_meter("A", month_start(kJul), v);
  EXPECT_NEAR(profile_entropy(m, DayWindow::all()), std::log(2.0), 1e-15);
}

TEST(Entropy, NeedsSevenDays) {
  auto m = meter_of("A", std::vector<double>(24, 1.0), 6);
  for (EntropyMode mode : {EntropyMode::peak_hour, EntropyMode::consumption_bins}) {
    try {
      profile_entropy(m, DayWindow::all(), mode);
      FAIL();
    } catch (const Error &e) {
      EXPECT_EQ(e.code(), Errc::insufficient_data);
    }
  }
  EXPECT_NO_THROW(profile_entropy(meter_of("A", std::vector<double>(24, 1.0), 7), DayWindow::all()));
}

TEST(Entropy, ConsumptionBins) {
  EXPECT_EQ(profile_entropy(meter_of("A", std::vector<double>(24, 1.0), 7), DayWindow::all(),
                            EntropyMode::consumption_bins),
            0.0);
  std::vector<double> day(24, 1.0);
  for (int h = 12; h < 24; ++h)
    day[h] = 3.0;
  EXPECT_NEAR(profile_entropy(meter_of("A", day, 7), DayWindow::all(),
                              EntropyMode::consumption_bins, 4),
              std::log(2.0), 1e-15);
}

TEST(Pearson, Examples) {
  std::vector<double> a{1, 2, 3, 4}, b{2, 4, 6, 8}, c{4, 3, 2, 1}, k{1, 1, 1, 1};
  EXPECT_NEAR(pearson(a, b), 1.0, 1e-15);
  EXPECT_NEAR(pearson(a, c), -1.0, 1e-15);
  EXPECT_THROW(pearson(a, k), Error);
}

TEST(Baseline, ExactLinearPopulation) {
  std::vector<double> e{120, 400, 650, 900}, f;
  for (double x : e)
    f.push_back(0.0004 * x + 0.02);
  auto r = baseline_ols_peak(e, f);
  for (std::size_t i = 0; i < e.size(); ++i)
    EXPECT_NEAR(r(e[i]), f[i], 1e-15);
}

TEST(Baseline, WorseThanClusterwiseOnTwoSlopeMixture) {
  const double w[2] = {0.0004, 0.0016}, b[2] = {0.01, 0.005};
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> energy(200, 1800);
  std::normal_distribution<double> noise(0.0, 0.0005);
  std::vector<double> e, f;
  std::vector<int> z;
  for (int i = 0; i < 400; ++i) {
    z.push_back(i % 2);
    e.push_back(energy(rng));
    f.push_back(w[z.back()] * e.back() + b[z.back()] + noise(rng));
  }
  WcrSeasonModel m;
  for (int c = 0; c < 2; ++c) {
    std::vector<double> ec, fc;
    for (std::size_t i = 0; i < e.size(); ++i)
      if (z[i] == c) {
        ec.push_back(e[i]);
        fc.push_back(f[i]);
      }
    m.clusters.push_back(fit_cluster_ols(ec, fc));
  }
  auto base = baseline_ols_peak(e, f);
  std::vector<double> pw, pb;
  for (std::size_t i = 0; i < e.size(); ++i) {
    std::vector<double> p(2, 0.0);
    p[z[i]] = 1.0;
    pw.push_back(estimate(m, p, e[i]));
    pb.push_back(base(e[i]));
  }
  EXPECT_GT(mape(f, pb).percent, mape(f, pw).percent);
}

TEST(Rank, OrderingsAndTies) {
  CandidateMetrics m;
  m.customer_ids = {"A", "B", "C", "D"};
  m.energy = {5, 9, 5, 1};
  m.peak = {1, 1, 3, 2};
  m.entropy = {0.5, 0.1, 0.5, 2.0};
  m.cmpc_actual = {0.1, 0.4, 0.3, 0.2};
  m.cmpc_estimated = {0.2, 0.2, 0.3, 0.1};
  m.baseline = {0.3, 0.1, 0.2, 0.4};
  using V = std::vector<std::size_t>;
  EXPECT_EQ(rank_candidates(Strategy::monthly_demand_rank, m, 1), (V{1, 0, 2, 3}));
  EXPECT_EQ(rank_candidates(Strategy::customer_peak_rank, m, 1), (V{2, 3, 0, 1}));
  EXPECT_EQ(rank_candidates(Strategy::entropy_rank, m, 1), (V{1, 0, 2, 3}));
  EXPECT_EQ(rank_candidates(Strategy::cmpc_rank_actual, m, 1), (V{1, 2, 3, 0}));
  EXPECT_EQ(rank_candidates(Strategy::cmpc_rank_estimated, m, 1), (V{2, 0, 1, 3}));
  EXPECT_EQ(rank_candidates(Strategy::baseline_ols, m, 1), (V{3, 0, 2, 1}));
}

TEST(Rank, DeterministicUnderSeed) {
  CandidateMetrics m;
  for (int i = 0; i < 50; ++i)
    m.customer_ids.push_back(std::to_string(i));
  for (Strategy s : {Strategy::random})
    EXPECT_EQ(rank_candidates(s, m, 7), rank_candidates(s, m, 7));
  EXPECT_NE(rank_candidates(Strategy::random, m, 7), rank_candidates(Strategy::random, m, 8));
  m.energy.assign(49, 1.0);
  EXPECT_THROW(rank_candidates(Strategy::monthly_demand_rank, m, 1), Error);
}

TEST(SimulateDr, SingleHouseClosedForm) {
  std::vector<double> day(24, 1.0);
  day[18] = 10.0;
  day[7] = 4.0;
  std::vector<MeterSeries> one{meter_of("A", day, 28)};
  DrSimConfig c;
  c.n_houses = 1;
  c.fraction = 1.0;
  std::vector<std::size_t> rank{0};
  auto r = simulate_dr(c, one, first_day(kJul), rank);
  ASSERT_EQ(r.days.size(), 28u);
  for (const auto &d : r.days) {
    EXPECT_DOUBLE_EQ(d.peak_before_kw, 10.0);
    EXPECT_NEAR(d.reduction_kwh, 0.21 * 10.0, 1e-12);
  }
  EXPECT_NEAR(r.total_kwh, 28 * 2.1, 1e-10);
}

TEST(SimulateDr, ZeroElasticityGivesZero) {
  auto houses = random_houses(3, 40, 28);
  DrSimConfig c;
  c.n_houses = 40;
  c.elasticity = 0.0;
  CandidateMetrics m;
  for (const auto &h : houses)
    m.customer_ids.push_back(h.customer_id);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto r = simulate_dr(c, houses, first_day(kJul), rank_candidates(Strategy::random, m, seed));
    EXPECT_EQ(r.total_kwh, 0.0);
  }
}

TEST(SimulateDr, MonotoneInElasticityAndFraction) {
  auto houses = random_houses(5, 60, 28);
  auto rank = identity(60);
  DrSimConfig c;
  c.n_houses = 60;
  double prev = -1.0;
  for (double e = 0.0; e <= 1.0; e += 0.05) {
    c.elasticity = e;
    double t = simulate_dr(c, houses, first_day(kJul), rank).total_kwh;
    EXPECT_GE(t, prev) << e;
    prev = t;
  }
  c.elasticity = 0.21;
  prev = -1.0;
  for (double f = 0.05; f <= 1.0; f += 0.05) {
    c.fraction = f;
    double t = simulate_dr(c, houses, first_day(kJul), rank).total_kwh;
    EXPECT_GE(t, prev) << f;
    prev = t;
  }
}

TEST(SimulateDr, PeakNeverRises) {
  auto houses = random_houses(6, 30, 28);
  DrSimConfig c;
  c.n_houses = 30;
  c.window_hours = 3;
  auto r = simulate_dr(c, houses, first_day(kJul), identity(30));
  double sum = 0.0;
  for (const auto &d : r.days) {
    EXPECT_LE(d.peak_after_kw, d.peak_before_kw);
    EXPECT_GE(d.reduction_kwh, 0.0);
    sum += d.reduction_kwh;
  }
  EXPECT_DOUBLE_EQ(r.total_kwh, sum);
  EXPECT_EQ(r.selected.size(), 11u);
}

TEST(SimulateDr, CoincidentHouseBeatsLargeFlatHouse) {
  // A uses the most energy but is flat; B carries the system peak
  std::vector<double> flat(24, 3.0), spiky(24, 0.5), small(24, 1.0);
  spiky[18] = 6.0;
  std::vector<MeterSeries> houses{meter_of("A", flat, 31), meter_of("B", spiky, 31),
                                  meter_of("C", small, 31), meter_of("D", small, 31)};
  auto month = kJul;
  DrSimConfig sim;
  sim.n_houses = 4;
  sim.fraction = 0.25;
  sim.elasticity = 0.05;
  FeederSeries feeder = make_feeder(month_start(month), std::vector<double>(31 * 24, 0.0));
  for (const auto &h : houses)
    for (std::size_t i = 0; i < h.values.size(); ++i)
      feeder.values[i] += h.values[i];
  auto peaks = daily_peaks(feeder, month).peaks;
  CandidateMetrics m;
  for (const auto &h : houses) {
    m.customer_ids.push_back(h.customer_id);
    m.energy.push_back(std::accumulate(h.values.begin(), h.values.end(), 0.0));
    m.cmpc_actual.push_back(compute_cmpc(h, peaks).value);
  }
  auto demand = simulate_dr(sim, houses, first_day(month),
                            rank_candidates(Strategy::monthly_demand_rank, m, 1));
  auto cmpc = simulate_dr(sim, houses, first_day(month),
                          rank_candidates(Strategy::cmpc_rank_actual, m, 1));
  EXPECT_EQ(demand.selected, (std::vector<std::size_t>{0}));
  EXPECT_EQ(cmpc.selected, (std::vector<std::size_t>{1}));
  EXPECT_NEAR(demand.total_kwh, 28 * 0.05 * 3.0, 1e-10);
  EXPECT_NEAR(cmpc.total_kwh, 28 * 0.05 * 6.0, 1e-10);
}

TEST(SimulateDr, Errors) {
  auto houses = random_houses(1, 10, 28);
  DrSimConfig c;
  c.n_houses = 10;
  c.fraction = 0.01;
  EXPECT_THROW(simulate_dr(c, houses, first_day(kJul), identity(10)), Error);
  c.fraction = 0.5;
  c.n_houses = 11;
  EXPECT_THROW(simulate_dr(c, houses, first_day(kJul), identity(10)), Error);
  c.n_houses = 10;
  c.horizon_days = 40;
  EXPECT_THROW(simulate_dr(c, houses, first_day(kJul), identity(10)), Error);
  c.horizon_days = 28;
  c.elasticity = 1.5;
  EXPECT_THROW(simulate_dr(c, houses, first_day(kJul), identity(10)), Error);
}

TEST(Improvements, Pairwise) {
  std::vector<DrSimResult> r(2);
  r[0].strategy = Strategy::cmpc_rank_actual;
  r[0].total_kwh = 150.0;
  r[1].strategy = Strategy::random;
  r[1].total_kwh = 100.0;
  auto imp = pairwise_improvements(r);
  ASSERT_EQ(imp.size(), 2u);
  EXPECT_DOUBLE_EQ(imp[0].percent, 50.0);
  EXPECT_NEAR(imp[1].percent, -100.0 / 3.0, 1e-12);
}

TEST(DrReport, Layout) {
  DrSimResult r;
  r.strategy = Strategy::entropy_rank;
  r.days.push_back({first_day(kJul), 10.0, 8.0, 2.0});
  std::ostringstream os;
  write_dr_report(os, std::span<const DrSimResult>(&r, 1));
  EXPECT_EQ(os.str(), "strategy,day,peak_before_kw,peak_after_kw,reduction_kwh\n"
                      "entropy_rank,2017-07-01,10,8,2\n");
}

TEST(GeneratorStylizedFacts, EntropyAndPeakRatio) {
  auto g = generate(SynthConfig{});
  auto peaks = daily_peaks(g.feeder, kJul).peaks;
  std::vector<double> ent, cmpc;
  double ratio_max = 0.0;
  for (const auto &m : g.meters) {
    ent.push_back(profile_entropy(m, DayWindow::of_month(kJul)));
    cmpc.push_back(compute_cmpc(m, peaks).value);
    ratio_max = std::max(ratio_max, customer_peak(m, kJul) / coincident_load(m, peaks));
  }
  EXPECT_LE(std::abs(pearson(cmpc, ent)), 0.3);
  EXPECT_GE(ratio_max, 5.0);
}

TEST(GeneratorStylizedFacts, StrictOrderingAtLowElasticity) {
  auto g = generate(SynthConfig{});
  DrSimConfig c;
  c.elasticity = 0.05;
  std::vector<MeterSeries> houses(g.meters.begin(), g.meters.begin() + 300);
  auto peaks = daily_peaks(g.feeder, kJul).peaks;
  CandidateMetrics m;
  for (const auto &h : houses) {
    m.customer_ids.push_back(h.customer_id);
    double e = 0.0;
    for (HourStamp t = month_start(kJul); t < month_end(kJul); ++t)
      e += h.at(t);
    m.energy.push_back(e);
    m.cmpc_actual.push_back(compute_cmpc(h, peaks).value);
  }
  auto run = [&](Strategy s) {
    return simulate_dr(c, houses, first_day(kJul), rank_candidates(s, m, 42)).total_kwh;
  };
  double cmpc = run(Strategy::cmpc_rank_actual), demand = run(Strategy::monthly_demand_rank),
         random = run(Strategy::random);
  EXPECT_GT(cmpc, demand);
  EXPECT_GT(demand, random);
}
