#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "peakseg/error.hpp"

namespace peakseg {

/// Affine map from monthly energy (kWh) to CMPC for one cluster.
struct ClusterRegression {
  int cluster = 0;
  double slope = 0.0;     // CMPC per kWh
  double intercept = 0.0; // dimensionless
  std::size_t n = 0;
  double residual_variance = 0.0; // SS_res / (n - 2), 0 when n == 2
  double mean_residual = 0.0;
  double heteroskedasticity = 1.0; // residual variance, upper half of E over lower half

  double operator()(double energy) const { return slope * energy + intercept; }
};

/// Closed-form least squares of F on [E, 1] in centred form.
inline ClusterRegression fit_cluster_ols(std::span<const double> energy,
                                         std::span<const double> cmpc) {
  if (energy.size() != cmpc.size())
    throw Error(Errc::invalid_argument, "energy and CMPC differ in length");
  const std::size_t n = energy.size();
  if (n < 2)
    throw Error(Errc::insufficient_data, "OLS needs at least 2 points");
  if (std::all_of(energy.begin(), energy.end(), [&](double e) { return e == energy[0]; }))
    throw Error(Errc::rank_deficient, "all energy values identical");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += energy[i];
    my += cmpc[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (energy[i] - mx) * (energy[i] - mx);
    sxy += (energy[i] - mx) * (cmpc[i] - my);
  }
  if (!(sxx > 0.0))
    throw Error(Errc::rank_deficient, "no spread in energy");
  ClusterRegression r;
  r.n = n;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  if (!std::isfinite(r.slope) || !std::isfinite(r.intercept))
    throw Error(Errc::numeric, "non-finite regression coefficients");

  std::vector<std::pair<double, double>> res(n);
  double ss = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double e = cmpc[i] - r(energy[i]);
    res[i] = {energy[i], e};
    ss += e * e;
    sum += e;
  }
  r.mean_residual = sum / static_cast<double>(n);
  r.residual_variance = n > 2 ? ss / static_cast<double>(n - 2) : 0.0;
  if (n >= 4) {
    std::sort(res.begin(), res.end());
    auto var = [](auto b, auto e) {
      double s = 0.0;
      double c = static_cast<double>(e - b);
      for (auto it = b; it != e; ++it)
        s += it->second * it->second;
      return s / c;
    };
    double lo = var(res.begin(), res.begin() + n / 2);
    double hi = var(res.begin() + n / 2, res.end());
    r.heteroskedasticity = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  }
  return r;
}

/// Per-season list of cluster regressions, indexed by cluster id.
struct WcrSeasonModel {
  std::vector<ClusterRegression> clusters;
};

/// Probability-weighted sum of the cluster regressions at `energy`.
inline double estimate(const WcrSeasonModel &model, std::span<const double> probs,
                       double energy) {
  if (probs.size() != model.clusters.size())
    throw Error(Errc::invalid_argument,
                "got " + std::to_string(probs.size()) + " class probabilities for " +
                    std::to_string(model.clusters.size()) + " clusters");
  if (energy < 0.0)
    throw Error(Errc::invalid_argument, "negative monthly energy");
  double f = 0.0;
  for (std::size_t z = 0; z < probs.size(); ++z)
    f += probs[z] * model.clusters[z](energy);
  return f;
}

/// CMPC is a share; estimates are reported clamped to [0, 1].
inline double clamp_share(double f) { return std::clamp(f, 0.0, 1.0); }

struct TrainTestSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded customer-level split: round(ratio * n) customers train, the rest
/// test. Both index lists are ascending.
inline TrainTestSplit split_train_test(std::size_t n, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0))
    throw Error(Errc::invalid_argument, "split ratio must lie in (0, 1)");
  auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n)
    throw Error(Errc::insufficient_data, "split leaves one side empty");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  TrainTestSplit s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

/// Coefficient of determination 1 - SS_res / SS_tot.
inline double r2(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.size() != predicted.size())
    throw Error(Errc::invalid_argument, "actual and predicted differ in length");
  if (actual.size() < 2)
    throw Error(Errc::insufficient_data, "R^2 needs at least 2 points");
  double mean = std::accumulate(actual.begin(), actual.end(), 0.0) /
                static_cast<double>(actual.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    ss_res += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
    ss_tot += (actual[i] - mean) * (actual[i] - mean);
  }
  if (!(ss_tot > 0.0))
    throw Error(Errc::insufficient_data, "R^2 undefined for constant actuals");
  return 1.0 - ss_res / ss_tot;
}

struct Mape {
  double percent = std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  std::size_t zero_actuals = 0; // excluded records
};

/// Mean of |a - p| / |a| in percent over records with a != 0.
inline Mape mape(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.size() != predicted.size())
    throw Error(Errc::invalid_argument, "actual and predicted differ in length");
  if (actual.size() < 2)
    throw Error(Errc::insufficient_data, "MAPE needs at least 2 points");
  Mape m;
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] == 0.0) {
      ++m.zero_actuals;
      continue;
    }
    sum += std::abs(actual[i] - predicted[i]) / std::abs(actual[i]);
    ++m.used;
  }
  if (m.used == 0)
    throw Error(Errc::insufficient_data, "MAPE needs a non-zero actual");
  m.percent = 100.0 * sum / static_cast<double>(m.used);
  return m;
}

} // namespace peakseg
