#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "peakseg/error.hpp"
#include "peakseg/series.hpp"

namespace peakseg {

inline constexpr double kInfiniteIndex = std::numeric_limits<double>::infinity();

inline Eigen::MatrixXd to_matrix(std::span<const Profile> profiles) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(profiles.size()), kHoursPerDay);
  for (std::size_t i = 0; i < profiles.size(); ++i)
    for (int h = 0; h < kHoursPerDay; ++h)
      m(static_cast<Eigen::Index>(i), h) = profiles[i][h];
  return m;
}

inline Eigen::MatrixXd squared_distances(const Eigen::MatrixXd &x) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double s = (x.row(i) - x.row(j)).squaredNorm();
      d(i, j) = s;
      d(j, i) = s;
    }
  }
  return d;
}

/// Fully connected similarity graph with self-tuning kernel widths.
struct SimilarityGraph {
  Eigen::MatrixXd vertices; // n x 24
  Eigen::MatrixXd weights;  // n x n, symmetric, unit diagonal
  Eigen::VectorXd scales;   // per-vertex kernel width
  std::vector<std::size_t> clamped; // vertices whose width was zero

  Eigen::Index size() const { return weights.rows(); }
};

/// W_ij = exp(-|Vi - Vj|^2 / (a_i a_j)) with a_i the distance from V_i to its
/// phi-th nearest other vertex. A zero width (duplicates among the first
/// phi neighbours) is raised to the smallest positive pairwise distance.
/// Weights are floored at the smallest normal double so that W stays
/// strictly positive.
inline SimilarityGraph build_graph(const Eigen::MatrixXd &profiles, int phi) {
  const Eigen::Index n = profiles.rows();
  if (phi < 1)
    throw Error(Errc::invalid_argument, "neighbour rank must be >= 1");
  if (n < phi + 1)
    throw Error(Errc::invalid_argument,
                "need at least " + std::to_string(phi + 1) + " profiles, got " +
                    std::to_string(n));
  if (!profiles.allFinite())
    throw Error(Errc::numeric, "non-finite profile value");

  SimilarityGraph g;
  g.vertices = profiles;
  Eigen::MatrixXd d2 = squared_distances(profiles);

  double min_pos = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (d2(i, j) > 0.0)
        min_pos = std::min(min_pos, d2(i, j));
  if (!std::isfinite(min_pos))
    throw Error(Errc::degenerate_input, "all profiles are identical");
  min_pos = std::sqrt(min_pos);

  g.scales.resize(n);
  std::vector<double> row(static_cast<std::size_t>(n - 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t k = 0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i)
        row[k++] = d2(i, j);
    auto nth = row.begin() + (phi - 1);
    std::nth_element(row.begin(), nth, row.end());
    double a = std::sqrt(*nth);
    if (!(a > 0.0)) {
      a = min_pos;
      g.clamped.push_back(static_cast<std::size_t>(i));
    }
    g.scales(i) = a;
  }

  const double floor = std::numeric_limits<double>::min();
  g.weights.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    g.weights(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double w = std::exp(-d2(i, j) / (g.scales(i) * g.scales(j)));
      w = std::max(w, floor);
      g.weights(i, j) = w;
      g.weights(j, i) = w;
    }
  }
  return g;
}

inline Eigen::VectorXd degrees(const Eigen::MatrixXd &w) { return w.rowwise().sum(); }

/// L = I - D^-1/2 W D^-1/2.
inline Eigen::MatrixXd normalized_laplacian(const Eigen::MatrixXd &w) {
  Eigen::VectorXd d = degrees(w);
  if ((d.array() <= 0.0).any())
    throw Error(Errc::numeric, "vertex with zero degree");
  Eigen::VectorXd s = d.array().rsqrt();
  Eigen::MatrixXd l = -(s.asDiagonal() * w * s.asDiagonal());
  l.diagonal().array() += 1.0;
  // exact symmetry regardless of rounding in the products
  return 0.5 * (l + l.transpose());
}

/// Which matrix is decomposed. Both give the same eigenvectors; the
/// affinity form takes the largest eigenvalues of D^-1/2 W D^-1/2.
enum class LaplacianForm { symmetric_laplacian, normalized_affinity };

struct EmbedOptions {
  LaplacianForm form = LaplacianForm::symmetric_laplacian;
  std::size_t dense_limit = 2000; // above this, subspace iteration
  double iterative_tol = 1e-10;
  int iterative_max_iter = 20000;
  double residual_tol = 1e-8;
  std::uint64_t seed = 0; // start block of the iterative solver

  bool operator==(const EmbedOptions &) const = default;
};

/// Leading eigenpairs of the normalized Laplacian, eigenvalues ascending.
struct SpectralBasis {
  Eigen::MatrixXd vectors;   // n x m
  Eigen::VectorXd values;    // m, ascending
  Eigen::VectorXd residuals; // |L u - lambda u|_2 per pair
  int iterations = 0;        // 0 for the dense solver
};

namespace detail {

/// Flips each column so that its largest-magnitude entry is positive.
inline void canonical_signs(Eigen::MatrixXd &v) {
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index r = 0; r < v.rows(); ++r)
      if (std::abs(v(r, c)) > best + 1e-12) {
        best = std::abs(v(r, c));
        arg = r;
      }
    if (v(arg, c) < 0.0)
      v.col(c) = -v.col(c);
  }
}

inline Eigen::VectorXd residuals(const Eigen::MatrixXd &l, const Eigen::MatrixXd &v,
                                 const Eigen::VectorXd &lambda) {
  Eigen::MatrixXd r = l * v - v * lambda.asDiagonal();
  return r.colwise().norm().transpose();
}

inline SpectralBasis dense_eigenpairs(const Eigen::MatrixXd &l, Eigen::Index m,
                                      LaplacianForm form) {
  const Eigen::Index n = l.rows();
  SpectralBasis b;
  if (form == LaplacianForm::symmetric_laplacian) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(l);
    if (es.info() != Eigen::Success)
      throw Error(Errc::numeric, "dense eigensolver failed");
    b.vectors = es.eigenvectors().leftCols(m);
    b.values = es.eigenvalues().head(m);
  } else {
    Eigen::MatrixXd a = -l;
    a.diagonal().array() += 1.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    if (es.info() != Eigen::Success)
      throw Error(Errc::numeric, "dense eigensolver failed");
    b.vectors.resize(n, m);
    b.values.resize(m);
    for (Eigen::Index c = 0; c < m; ++c) {
      b.vectors.col(c) = es.eigenvectors().col(n - 1 - c);
      b.values(c) = 1.0 - es.eigenvalues()(n - 1 - c);
    }
  }
  return b;
}

/// Block subspace iteration on 2I - L (spectrum in [0, 2]) with a
/// Rayleigh-Ritz step each sweep.
inline SpectralBasis iterative_eigenpairs(const Eigen::MatrixXd &l, Eigen::Index m,
                                          const EmbedOptions &opt) {
  const Eigen::Index n = l.rows();
  const Eigen::Index p = std::min<Eigen::Index>(n, m + std::max<Eigen::Index>(m, 8));
  Eigen::MatrixXd shifted = -l;
  shifted.diagonal().array() += 2.0;

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd q(n, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      q(i, j) = normal(rng);

  SpectralBasis b;
  for (int it = 1; it <= opt.iterative_max_iter; ++it) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(shifted * q);
    q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
    Eigen::MatrixXd h = q.transpose() * shifted * q;
    h = 0.5 * (h + h.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    b.vectors.resize(n, m);
    b.values.resize(m);
    for (Eigen::Index c = 0; c < m; ++c) {
      b.vectors.col(c) = q * es.eigenvectors().col(p - 1 - c);
      b.values(c) = 2.0 - es.eigenvalues()(p - 1 - c);
    }
    b.residuals = residuals(l, b.vectors, b.values);
    b.iterations = it;
    if (b.residuals.maxCoeff() <= opt.iterative_tol)
      return b;
  }
  throw Error(Errc::numeric,
              "subspace iteration did not converge; worst residual " +
                  std::to_string(b.residuals.maxCoeff()));
}

} // namespace detail

/// The m eigenpairs of L with smallest eigenvalues. Every pair is checked
/// against `residual_tol`; eigenvectors carry a canonical sign.
inline SpectralBasis laplacian_eigenpairs(const Eigen::MatrixXd &laplacian,
                                          std::size_t m,
                                          const EmbedOptions &opt = {}) {
  const Eigen::Index n = laplacian.rows();
  const auto mm = static_cast<Eigen::Index>(m);
  if (mm < 1 || mm > n)
    throw Error(Errc::invalid_argument, "eigenpair count out of range");
  SpectralBasis b = static_cast<std::size_t>(n) <= opt.dense_limit
                        ? detail::dense_eigenpairs(laplacian, mm, opt.form)
                        : detail::iterative_eigenpairs(laplacian, mm, opt);
  detail::canonical_signs(b.vectors);
  b.residuals = detail::residuals(laplacian, b.vectors, b.values);
  double worst = b.residuals.maxCoeff();
  if (!(worst <= opt.residual_tol))
    throw Error(Errc::numeric,
                "eigenpair residual " + std::to_string(worst) + " exceeds " +
                    std::to_string(opt.residual_tol));
  return b;
}

/// Row-normalized coordinates of each vertex in the leading eigenvectors.
struct SpectralEmbedding {
  Eigen::MatrixXd rows;        // n x k, unit rows
  Eigen::VectorXd eigenvalues; // k, ascending
  Eigen::VectorXd residuals;
  std::vector<std::size_t> zero_rows; // rows left at zero
};

inline SpectralEmbedding embedding_from_basis(const SpectralBasis &b, std::size_t k) {
  const auto kk = static_cast<Eigen::Index>(k);
  if (kk < 1 || kk > b.vectors.cols())
    throw Error(Errc::invalid_argument, "embedding dimension out of range");
  SpectralEmbedding e;
  e.rows = b.vectors.leftCols(kk);
  e.eigenvalues = b.values.head(kk);
  e.residuals = b.residuals.head(kk);
  for (Eigen::Index i = 0; i < e.rows.rows(); ++i) {
    double norm = e.rows.row(i).norm();
    if (norm > 0.0)
      e.rows.row(i) /= norm;
    else
      e.zero_rows.push_back(static_cast<std::size_t>(i));
  }
  return e;
}

inline SpectralEmbedding embed(const SimilarityGraph &g, std::size_t k,
                               const EmbedOptions &opt = {}) {
  if (k < 2 || static_cast<Eigen::Index>(k) > g.size())
    throw Error(Errc::invalid_argument, "embed needs 2 <= k <= n");
  return embedding_from_basis(
      laplacian_eigenpairs(normalized_laplacian(g.weights), k, opt), k);
}

// ---- k-means ---------------------------------------------------------------

struct KMeansOptions {
  int restarts = 10;
  int max_iter = 300;
  double tol = 1e-6; // relative inertia change

  bool operator==(const KMeansOptions &) const = default;
};

struct ClusterAssignment {
  std::vector<int> labels;   // 0..k-1, numbered by first appearance
  Eigen::MatrixXd centroids; // k x d
  double inertia = 0.0;
  int reseeds = 0; // empty clusters re-seeded in the winning run
};

inline std::size_t count_distinct_rows(const Eigen::MatrixXd &x) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      rows[static_cast<std::size_t>(i)].push_back(x(i, j));
  std::sort(rows.begin(), rows.end());
  return static_cast<std::size_t>(std::unique(rows.begin(), rows.end()) - rows.begin());
}

namespace detail {

struct LloydRun {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;
  double inertia = 0.0;
  int reseeds = 0;
};

inline double assign(const Eigen::MatrixXd &x, const Eigen::MatrixXd &c,
                     std::vector<int> &labels, Eigen::VectorXd &dist) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    int best = 0;
    double bd = (x.row(i) - c.row(0)).squaredNorm();
    for (Eigen::Index z = 1; z < c.rows(); ++z) {
      double d = (x.row(i) - c.row(z)).squaredNorm();
      if (d < bd) {
        bd = d;
        best = static_cast<int>(z);
      }
    }
    labels[static_cast<std::size_t>(i)] = best;
    dist(i) = bd;
    total += bd;
  }
  return total;
}

inline Eigen::MatrixXd plus_plus_init(const Eigen::MatrixXd &x, int k,
                                      std::mt19937_64 &rng) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd c(k, x.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  c.row(0) = x.row(pick(rng));
  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i)
    d2(i) = (x.row(i) - c.row(0)).squaredNorm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int z = 1; z < k; ++z) {
    double total = d2.sum();
    Eigen::Index chosen = n - 1;
    double target = unit(rng) * total;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      acc += d2(i);
      if (d2(i) > 0.0 && acc >= target) {
        chosen = i;
        break;
      }
    }
    while (d2(chosen) <= 0.0 && chosen > 0)
      --chosen;
    c.row(z) = x.row(chosen);
    for (Eigen::Index i = 0; i < n; ++i)
      d2(i) = std::min(d2(i), (x.row(i) - c.row(z)).squaredNorm());
  }
  return c;
}

inline LloydRun lloyd(const Eigen::MatrixXd &x, Eigen::MatrixXd c,
                      const KMeansOptions &opt) {
  const Eigen::Index n = x.rows();
  const Eigen::Index k = c.rows();
  LloydRun run;
  run.labels.assign(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd dist(n);
  double inertia = assign(x, c, run.labels, dist);
  for (int it = 0; it < opt.max_iter; ++it) {
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k, x.cols());
    std::vector<Eigen::Index> count(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sum.row(run.labels[i]) += x.row(i);
      ++count[run.labels[i]];
    }
    for (Eigen::Index z = 0; z < k; ++z) {
      if (count[z] > 0) {
        c.row(z) = sum.row(z) / static_cast<double>(count[z]);
        continue;
      }
      // empty cluster: move it onto the point farthest from its centroid
      Eigen::Index far = 0;
      for (Eigen::Index i = 1; i < n; ++i)
        if (dist(i) > dist(far))
          far = i;
      c.row(z) = x.row(far);
      dist(far) = 0.0;
      ++run.reseeds;
    }
    double next = assign(x, c, run.labels, dist);
    bool done = std::abs(inertia - next) <= opt.tol * std::max(inertia, 0.0) ||
                next == 0.0;
    inertia = next;
    if (done)
      break;
  }
  run.centroids = std::move(c);
  run.inertia = inertia;
  return run;
}

} // namespace detail

/// k-means++ seeding and Lloyd iterations, best of `restarts` by inertia.
/// Labels are renumbered by first appearance so equal partitions compare
/// equal.
inline ClusterAssignment kmeans(const Eigen::MatrixXd &x, int k, std::uint64_t seed,
                                const KMeansOptions &opt = {}) {
  if (k < 1 || k > x.rows())
    throw Error(Errc::invalid_argument, "k out of range for k-means");
  if (count_distinct_rows(x) < static_cast<std::size_t>(k))
    throw Error(Errc::invalid_argument, "fewer distinct points than clusters");
  detail::LloydRun best;
  bool have = false;
  for (int r = 0; r < std::max(opt.restarts, 1); ++r) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(r)};
    std::mt19937_64 rng(seq);
    auto run = detail::lloyd(x, detail::plus_plus_init(x, k, rng), opt);
    if (!have || run.inertia < best.inertia) {
      best = std::move(run);
      have = true;
    }
  }
  ClusterAssignment out;
  std::vector<int> remap(static_cast<std::size_t>(k), -1);
  int next = 0;
  out.labels.resize(best.labels.size());
  for (std::size_t i = 0; i < best.labels.size(); ++i) {
    int &m = remap[best.labels[i]];
    if (m < 0)
      m = next++;
    out.labels[i] = m;
  }
  out.centroids.resize(k, x.cols());
  for (int z = 0; z < k; ++z)
    if (remap[z] >= 0)
      out.centroids.row(remap[z]) = best.centroids.row(z);
  out.inertia = best.inertia;
  out.reseeds = best.reseeds;
  return out;
}

// ---- validation indices -----------------------------------------------------

/// Mean member vector per cluster.
inline Eigen::MatrixXd cluster_means(const Eigen::MatrixXd &x,
                                     std::span<const int> labels, int k) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(k, x.cols());
  std::vector<double> n(static_cast<std::size_t>(k), 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    c.row(labels[i]) += x.row(static_cast<Eigen::Index>(i));
    n[labels[i]] += 1.0;
  }
  for (int z = 0; z < k; ++z) {
    if (n[z] == 0.0)
      throw Error(Errc::invalid_argument, "empty cluster " + std::to_string(z));
    c.row(z) /= n[z];
  }
  return c;
}

/// Davies-Bouldin index: mean over clusters of max_j (s_i + s_j) / d_ij
/// with s the mean member distance to the centroid and d the centroid
/// distance. Coincident centroids give +infinity.
inline double dbi(const Eigen::MatrixXd &x, std::span<const int> labels, int k) {
  if (k < 2)
    throw Error(Errc::invalid_argument, "DBI needs k >= 2");
  Eigen::MatrixXd c = cluster_means(x, labels, k);
  Eigen::VectorXd scatter = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(k);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    scatter(labels[i]) += (x.row(static_cast<Eigen::Index>(i)) - c.row(labels[i])).norm();
    count(labels[i]) += 1.0;
  }
  scatter = scatter.cwiseQuotient(count);
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    double worst = 0.0;
    for (int j = 0; j < k; ++j) {
      if (i == j)
        continue;
      double d = (c.row(i) - c.row(j)).norm();
      if (d == 0.0)
        return kInfiniteIndex;
      worst = std::max(worst, (scatter(i) + scatter(j)) / d);
    }
    total += worst;
  }
  return total / k;
}

/// Normalized cut: sum over clusters of cut(A, V\A) / vol(A), vol being the
/// degree sum (self-loops included).
inline double ncut_value(const Eigen::MatrixXd &w, std::span<const int> labels, int k) {
  if (k < 2)
    throw Error(Errc::invalid_argument, "Ncut needs k >= 2");
  const Eigen::Index n = w.rows();
  std::vector<double> cut(static_cast<std::size_t>(k), 0.0);
  std::vector<double> vol(static_cast<std::size_t>(k), 0.0);
  std::vector<int> size(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    int a = labels[static_cast<std::size_t>(i)];
    ++size[a];
    for (Eigen::Index j = 0; j < n; ++j) {
      vol[a] += w(i, j);
      if (labels[static_cast<std::size_t>(j)] != a)
        cut[a] += w(i, j);
    }
  }
  double total = 0.0;
  for (int z = 0; z < k; ++z) {
    if (size[z] == 0)
      throw Error(Errc::invalid_argument, "empty cluster " + std::to_string(z));
    total += cut[z] / vol[z];
  }
  return total;
}

/// Adjusted Rand index between two labelings of the same points.
inline double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size())
    throw Error(Errc::invalid_argument, "labelings differ in length");
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    ra[a[i]] += 1.0;
    rb[b[i]] += 1.0;
  }
  auto c2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double sij = 0.0, sa = 0.0, sb = 0.0;
  for (const auto &[_, v] : joint)
    sij += c2(v);
  for (const auto &[_, v] : ra)
    sa += c2(v);
  for (const auto &[_, v] : rb)
    sb += c2(v);
  double expected = sa * sb / c2(static_cast<double>(a.size()));
  double maximum = 0.5 * (sa + sb);
  if (maximum == expected)
    return 1.0; // both labelings trivial and identical in structure
  return (sij - expected) / (maximum - expected);
}

// ---- model selection ---------------------------------------------------------

struct SpectralConfig {
  int phi = 7;
  int k_min = 2;
  int k_max = 15;
  std::uint64_t seed = 42;
  bool normalize_profiles = true; // divide each profile by its maximum
  EmbedOptions embed{};
  KMeansOptions kmeans{};

  bool operator==(const SpectralConfig &) const = default;
};

/// Clustering result for one season.
struct SeasonPatterns {
  int k = 0;
  std::vector<int> labels;            // input order
  std::vector<Profile> centroids;     // mean member profile, kWh
  std::vector<std::size_t> member_counts;
  std::vector<std::pair<int, double>> dbi_curve;
  Eigen::VectorXd eigenvalues;        // of the chosen embedding
};

inline Profile max_normalized(const Profile &p) {
  double m = *std::max_element(p.begin(), p.end());
  Profile out = p;
  if (m > 0.0)
    for (double &v : out)
      v /= m;
  return out;
}

/// Spectral clustering of one season's average profiles for every k in the
/// configured range; keeps the k with the smallest Davies-Bouldin index
/// (smaller k on ties).
///
/// Points are processed in lexicographic profile order, which makes the
/// result independent of input order; labels are reported in input order and
/// numbered by first appearance in that canonical order.
inline SeasonPatterns select_k_and_cluster(std::span<const Profile> profiles,
                                           const SpectralConfig &cfg) {
  const std::size_t n = profiles.size();
  if (cfg.k_min < 2)
    throw Error(Errc::invalid_argument, "k range must start at 2 or more");
  const int k_hi = std::min<int>(cfg.k_max, static_cast<int>(n) - 1);
  if (k_hi < cfg.k_min)
    throw Error(Errc::insufficient_data,
                "too few profiles (" + std::to_string(n) + ") for k range");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return profiles[a] < profiles[b];
  });
  std::vector<Profile> space(n);
  for (std::size_t i = 0; i < n; ++i)
    space[i] = cfg.normalize_profiles ? max_normalized(profiles[order[i]])
                                      : profiles[order[i]];
  Eigen::MatrixXd x = to_matrix(space);

  SimilarityGraph g = build_graph(x, cfg.phi);
  EmbedOptions eo = cfg.embed;
  eo.seed = cfg.seed;
  SpectralBasis basis = laplacian_eigenpairs(normalized_laplacian(g.weights),
                                             static_cast<std::size_t>(k_hi), eo);

  SeasonPatterns out;
  double best = kInfiniteIndex;
  std::vector<int> best_labels;
  for (int k = cfg.k_min; k <= k_hi; ++k) {
    SpectralEmbedding e = embedding_from_basis(basis, static_cast<std::size_t>(k));
    double score = kInfiniteIndex;
    std::vector<int> labels;
    if (count_distinct_rows(e.rows) >= static_cast<std::size_t>(k)) {
      labels = kmeans(e.rows, k, cfg.seed, cfg.kmeans).labels;
      score = dbi(x, labels, k);
    }
    out.dbi_curve.emplace_back(k, score);
    if (score < best) {
      best = score;
      out.k = k;
      best_labels = std::move(labels);
    }
  }
  if (out.k == 0)
    throw Error(Errc::degenerate_input, "no candidate k produced a valid clustering");
  out.eigenvalues = basis.values.head(out.k);

  out.labels.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    out.labels[order[i]] = best_labels[i];
  out.centroids.assign(static_cast<std::size_t>(out.k), Profile{});
  out.member_counts.assign(static_cast<std::size_t>(out.k), 0);
  for (std::size_t i = 0; i < n; ++i) {
    auto z = static_cast<std::size_t>(out.labels[i]);
    ++out.member_counts[z];
    for (int h = 0; h < kHoursPerDay; ++h)
      out.centroids[z][h] += profiles[i][h];
  }
  for (std::size_t z = 0; z < out.centroids.size(); ++z)
    for (double &v : out.centroids[z])
      v /= static_cast<double>(out.member_counts[z]);
  return out;
}

} // namespace peakseg
