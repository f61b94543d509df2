#pragma once

// Reference implementations used only as test oracles. They share no code
// with the library and favour obviousness over speed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat zeros(std::size_t r, std::size_t c) { return Mat(r, std::vector<double>(c, 0.0)); }

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues ascending and eigenvectors as columns of `vecs`.
inline std::vector<double> jacobi_eigen(Mat a, Mat &vecs, int sweeps = 100) {
  const std::size_t n = a.size();
  vecs = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i)
    vecs[i][i] = 1.0;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q)
        off += a[p][q] * a[p][q];
    if (off < 1e-300)
      break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300)
          continue;
        double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double vkp = vecs[k][p], vkq = vecs[k][q];
          vecs[k][p] = c * vkp - s * vkq;
          vecs[k][q] = s * vkp + c * vkq;
        }
      }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a[i][i] < a[j][j]; });
  std::vector<double> vals(n);
  Mat sorted = zeros(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    vals[c] = a[order[c]][order[c]];
    for (std::size_t r = 0; r < n; ++r)
      sorted[r][c] = vecs[r][order[c]];
  }
  vecs = std::move(sorted);
  return vals;
}

/// I - D^-1/2 W D^-1/2, written out element by element.
inline Mat sym_laplacian(const Mat &w) {
  const std::size_t n = w.size();
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      d[i] += w[i][j];
  Mat l = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      l[i][j] = (i == j ? 1.0 : 0.0) - w[i][j] / std::sqrt(d[i] * d[j]);
  return l;
}

/// Solves A x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> solve(Mat a, std::vector<double> b) {
  const std::size_t n = a.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c]))
        piv = r;
    if (a[piv][c] == 0.0)
      throw std::runtime_error("singular system");
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k)
        a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k)
      s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

/// Least squares of y on [x, 1] through the 2x2 normal equations.
inline std::pair<double, double> normal_equations_line(const std::vector<double> &x,
                                                       const std::vector<double> &y) {
  double sxx = 0, sx = 0, sxy = 0, sy = 0, n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += x[i] * x[i];
    sx += x[i];
    sxy += x[i] * y[i];
    sy += y[i];
  }
  auto sol = solve({{sxx, sx}, {sx, n}}, {sxy, sy});
  return {sol[0], sol[1]};
}

/// Area under the empirical ROC curve by the trapezoid rule. Tied scores
/// move along one diagonal segment.
inline double trapezoid_auc(const std::vector<double> &scores, const std::vector<char> &pos) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double P = 0, N = 0;
  for (char p : pos)
    (p ? P : N) += 1.0;
  double tp = 0, fp = 0, area = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    double dtp = 0, dfp = 0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (pos[idx[j]] ? dtp : dfp) += 1.0;
      ++j;
    }
    double x0 = fp / N, x1 = (fp + dfp) / N;
    double y0 = tp / P, y1 = (tp + dtp) / P;
    area += (x1 - x0) * (y0 + y1) / 2.0;
    tp += dtp;
    fp += dfp;
    i = j;
  }
  return area;
}

/// Normalized cut of a labelling, summed over clusters.
inline double ncut(const Mat &w, const std::vector<int> &labels, int k) {
  double total = 0.0;
  for (int z = 0; z < k; ++z) {
    double cut = 0.0, vol = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (labels[i] != z)
        continue;
      for (std::size_t j = 0; j < w.size(); ++j) {
        vol += w[i][j];
        if (labels[j] != z)
          cut += w[i][j];
      }
    }
    total += cut / vol;
  }
  return total;
}

/// Adjusted Rand index by explicit pair counting.
inline double ari_pairs(const std::vector<int> &a, const std::vector<int> &b) {
  const std::size_t n = a.size();
  double both = 0, only_a = 0, only_b = 0, total = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      bool sa = a[i] == a[j], sb = b[i] == b[j];
      both += sa && sb;
      only_a += sa && !sb;
      only_b += !sa && sb;
      total += 1.0;
    }
  double pa = both + only_a, pb = both + only_b;
  double expected = pa * pb / total;
  double maximum = 0.5 * (pa + pb);
  return (both - expected) / (maximum - expected);
}

/// Every labelling of n points into exactly k non-empty clusters, up to
/// label permutation (restricted growth strings).
inline std::vector<std::vector<int>> partitions(std::size_t n, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(n, 0);
  auto rec = [&](auto &&self, std::size_t i, int used) -> void {
    if (i == n) {
      if (used == k)
        out.push_back(cur);
      return;
    }
    for (int z = 0; z <= std::min(used, k - 1); ++z) {
      cur[i] = z;
      self(self, i + 1, std::max(used, z + 1));
    }
  };
  rec(rec, 0, 0);
  return out;
}

} // namespace oracle
