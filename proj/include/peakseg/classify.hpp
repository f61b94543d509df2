#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "peakseg/error.hpp"
#include "peakseg/format.hpp"
#include "peakseg/series.hpp"

namespace peakseg {

// ---- features ----------------------------------------------------------------

enum class FeatureMap {
  hourly,  // the 24-bin peak timing distribution as is
  coarse3, // mass in the morning (7-9), afternoon (12-14), evening (18-21)
};

struct FeatureSpec {
  FeatureMap map = FeatureMap::hourly;
  bool bias = true;

  int dim() const { return (map == FeatureMap::hourly ? kHoursPerDay : 3) + (bias ? 1 : 0); }
  bool operator==(const FeatureSpec &) const = default;
};

inline Eigen::VectorXd feature_vector(const Profile &timing, const FeatureSpec &spec) {
  Eigen::VectorXd f(spec.dim());
  int n = 0;
  if (spec.map == FeatureMap::hourly) {
    for (int h = 0; h < kHoursPerDay; ++h)
      f(n++) = timing[h];
  } else {
    f(n++) = timing[7] + timing[8];
    f(n++) = timing[12] + timing[13];
    f(n++) = timing[18] + timing[19] + timing[20];
  }
  if (spec.bias)
    f(n++) = 1.0;
  return f;
}

inline Eigen::MatrixXd design_matrix(std::span<const Profile> timings,
                                     const FeatureSpec &spec) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(timings.size()), spec.dim());
  for (std::size_t i = 0; i < timings.size(); ++i)
    x.row(static_cast<Eigen::Index>(i)) = feature_vector(timings[i], spec).transpose();
  return x;
}

/// Class-membership indicator matrix (one row per sample, a single 1 each).
inline Eigen::MatrixXd one_hot(std::span<const int> labels, int k) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels.size()), k);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= k)
      throw Error(Errc::invalid_argument, "label out of range");
    c(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return c;
}

// ---- softmax model -------------------------------------------------------------

/// Row-wise softmax of `scores` with max subtraction.
inline Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd &scores) {
  Eigen::MatrixXd p(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    double m = scores.row(i).maxCoeff();
    Eigen::RowVectorXd e = (scores.row(i).array() - m).exp();
    p.row(i) = e / e.sum();
  }
  return p;
}

struct LogLikelihood {
  double value = 0.0;       // ridge-penalized
  Eigen::MatrixXd gradient; // k x d
};

/// J(w) = sum_j [ sum_z c_jz w_z.x_j - log sum_z exp(w_z.x_j) ] - ridge/2 |w|^2
/// and its gradient sum_j (c_j - p_j) x_j^T - ridge w.
inline LogLikelihood mlr_loglik(const Eigen::MatrixXd &w, const Eigen::MatrixXd &x,
                                const Eigen::MatrixXd &targets, double ridge) {
  if (w.cols() != x.cols() || targets.rows() != x.rows() || targets.cols() != w.rows())
    throw Error(Errc::invalid_argument, "inconsistent MLR dimensions");
  if (!w.allFinite() || !x.allFinite() || !targets.allFinite() || !std::isfinite(ridge))
    throw Error(Errc::numeric, "non-finite MLR input");
  Eigen::MatrixXd s = x * w.transpose(); // M x k
  LogLikelihood out;
  double j = 0.0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    double m = s.row(i).maxCoeff();
    double lse = m + std::log((s.row(i).array() - m).exp().sum());
    j += targets.row(i).dot(s.row(i)) - targets.row(i).sum() * lse;
  }
  out.value = j - 0.5 * ridge * w.squaredNorm();
  Eigen::MatrixXd p = softmax_rows(s);
  out.gradient = (targets - p).transpose() * x - ridge * w;
  return out;
}

struct IrlsOptions {
  double ridge = 1e-3;
  int max_iter = 100;
  double tol = 1e-8; // on the max-norm of the gradient
  int max_halvings = 40;

  bool operator==(const IrlsOptions &) const = default;
};

struct MlrModel {
  Eigen::MatrixXd weights; // k x d
  FeatureSpec features{};
  double ridge = 1e-3;
  int iterations = 0;
  bool converged = false;
  double final_loglik = 0.0;
  std::vector<double> trace; // penalized J after each accepted step, initial first

  int classes() const { return static_cast<int>(weights.rows()); }
};

namespace detail {

/// Negative Hessian of the penalized J with respect to the class-major
/// stacking of w; positive definite for ridge > 0.
inline Eigen::MatrixXd neg_hessian(const Eigen::MatrixXd &x, const Eigen::MatrixXd &p,
                                   double ridge) {
  const Eigen::Index k = p.cols(), d = x.cols();
  Eigen::MatrixXd h(k * d, k * d);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = a; b < k; ++b) {
      Eigen::VectorXd s = (a == b) ? Eigen::VectorXd(p.col(a).array() * (1.0 - p.col(a).array()))
                                   : Eigen::VectorXd(-p.col(a).array() * p.col(b).array());
      Eigen::MatrixXd block = x.transpose() * (s.asDiagonal() * x);
      h.block(a * d, b * d, d, d) = block;
      if (a != b)
        h.block(b * d, a * d, d, d) = block.transpose();
    }
  h.diagonal().array() += ridge;
  return h;
}

inline Eigen::VectorXd stack(const Eigen::MatrixXd &w) {
  Eigen::VectorXd v(w.size());
  for (Eigen::Index z = 0; z < w.rows(); ++z)
    v.segment(z * w.cols(), w.cols()) = w.row(z).transpose();
  return v;
}

inline Eigen::MatrixXd unstack(const Eigen::VectorXd &v, Eigen::Index k, Eigen::Index d) {
  Eigen::MatrixXd w(k, d);
  for (Eigen::Index z = 0; z < k; ++z)
    w.row(z) = v.segment(z * d, d).transpose();
  return w;
}

} // namespace detail

/// Ridge-penalized maximum likelihood by Newton steps (IRLS) with step
/// halving; every accepted step leaves J no smaller than before.
inline MlrModel train_irls(const Eigen::MatrixXd &x, std::span<const int> labels, int k,
                           const IrlsOptions &opt = {}) {
  if (!(opt.ridge > 0.0))
    throw Error(Errc::invalid_argument, "ridge strength must be positive");
  if (k < 2)
    throw Error(Errc::invalid_argument, "need at least two classes");
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    throw Error(Errc::invalid_argument, "label count differs from sample count");
  std::vector<int> count(static_cast<std::size_t>(k), 0);
  for (int l : labels) {
    if (l < 0 || l >= k)
      throw Error(Errc::invalid_argument, "label out of range");
    ++count[l];
  }
  for (int z = 0; z < k; ++z)
    if (count[z] == 0)
      throw Error(Errc::insufficient_data, "class " + std::to_string(z) + " absent from training");

  const Eigen::MatrixXd c = one_hot(labels, k);
  MlrModel m;
  m.ridge = opt.ridge;
  m.weights = Eigen::MatrixXd::Zero(k, x.cols());
  LogLikelihood cur = mlr_loglik(m.weights, x, c, opt.ridge);
  m.trace.push_back(cur.value);
  for (int it = 0; it < opt.max_iter; ++it) {
    if (cur.gradient.cwiseAbs().maxCoeff() < opt.tol) {
      m.converged = true;
      break;
    }
    Eigen::MatrixXd p = softmax_rows(x * m.weights.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(detail::neg_hessian(x, p, opt.ridge));
    if (llt.info() != Eigen::Success)
      throw Error(Errc::numeric, "MLR Hessian not invertible");
    Eigen::MatrixXd step =
        detail::unstack(llt.solve(detail::stack(cur.gradient)), k, x.cols());
    double t = 1.0;
    bool accepted = false;
    for (int hv = 0; hv <= opt.max_halvings; ++hv, t *= 0.5) {
      Eigen::MatrixXd trial = m.weights + t * step;
      LogLikelihood next = mlr_loglik(trial, x, c, opt.ridge);
      if (next.value >= cur.value) {
        m.weights = std::move(trial);
        cur = std::move(next);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // no ascent left at working precision
      m.converged = true;
      break;
    }
    ++m.iterations;
    m.trace.push_back(cur.value);
  }
  if (!m.converged && cur.gradient.cwiseAbs().maxCoeff() < opt.tol)
    m.converged = true;
  m.final_loglik = cur.value;
  return m;
}

struct ClassProbabilities {
  std::string customer_id;
  std::vector<double> p;
};

inline std::vector<double> predict(const MlrModel &model, const Profile &timing) {
  Eigen::VectorXd f = feature_vector(timing, model.features);
  Eigen::MatrixXd s = (model.weights * f).transpose();
  Eigen::MatrixXd p = softmax_rows(s);
  return {p.data(), p.data() + p.size()};
}

inline Eigen::MatrixXd predict_matrix(const Eigen::MatrixXd &weights, const Eigen::MatrixXd &x) {
  return softmax_rows(x * weights.transpose());
}

// ---- AUC -------------------------------------------------------------------------

/// Area under the ROC curve as the Mann-Whitney rank statistic with
/// midranks for ties.
inline double auc_binary(std::span<const double> scores, std::span<const char> positive) {
  if (scores.size() != positive.size())
    throw Error(Errc::invalid_argument, "scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  double pos = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]])
      ++j;
    double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t)
      if (positive[idx[t]]) {
        rank_sum += midrank;
        pos += 1.0;
      }
    i = j + 1;
  }
  double neg = static_cast<double>(n) - pos;
  if (pos == 0.0 || neg == 0.0)
    throw Error(Errc::insufficient_data, "AUC undefined without both classes");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

/// One-vs-rest AUC of class `z`.
inline double auc_ovr(std::span<const double> scores, std::span<const int> labels, int z) {
  std::vector<char> pos(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    pos[i] = labels[i] == z ? 1 : 0;
  return auc_binary(scores, pos);
}

struct MacroAuc {
  double value = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> per_class; // NaN where undefined
  std::vector<int> skipped;      // classes without positives or negatives
};

/// Unweighted mean of one-vs-rest AUCs over the classes where it is defined.
inline MacroAuc macro_auc(const Eigen::MatrixXd &probs, std::span<const int> labels) {
  MacroAuc out;
  const int k = static_cast<int>(probs.cols());
  double sum = 0.0;
  int used = 0;
  for (int z = 0; z < k; ++z) {
    std::vector<double> s(labels.size());
    std::size_t npos = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      s[i] = probs(static_cast<Eigen::Index>(i), z);
      npos += labels[i] == z ? 1 : 0;
    }
    if (npos == 0 || npos == labels.size()) {
      out.per_class.push_back(std::numeric_limits<double>::quiet_NaN());
      out.skipped.push_back(z);
      continue;
    }
    double a = auc_ovr(s, labels, z);
    out.per_class.push_back(a);
    sum += a;
    ++used;
  }
  if (used > 0)
    out.value = sum / used;
  return out;
}

// ---- cross-validation --------------------------------------------------------------

/// Samples for cross-validation. When `eval_x` is non-empty, held-out samples
/// are scored with those rows instead of `train_x` (deployment features).
struct CvDataset {
  Eigen::MatrixXd train_x;
  Eigen::MatrixXd eval_x;
  std::vector<int> labels;
  int k = 0;
};

/// Stratified fold assignment: each class is shuffled with the seed and dealt
/// round-robin, continuing the deal across classes.
inline std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> labels,
                                                               int k_folds,
                                                               std::uint64_t seed) {
  if (k_folds < 2)
    throw Error(Errc::invalid_argument, "need at least 2 folds");
  if (labels.size() < static_cast<std::size_t>(k_folds))
    throw Error(Errc::insufficient_data, "fewer samples than folds");
  int k = 0;
  for (int l : labels)
    k = std::max(k, l + 1);
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < labels.size(); ++i)
    by_class[labels[i]].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k_folds));
  std::size_t deal = 0;
  for (auto &members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t i : members)
      folds[deal++ % folds.size()].push_back(i);
  }
  for (auto &f : folds)
    std::sort(f.begin(), f.end());
  return folds;
}

struct CvReport {
  std::vector<double> fold_auc; // NaN when no class was scorable
  std::vector<std::size_t> fold_sizes;
  std::vector<std::vector<int>> skipped; // per fold, classes left out of the macro AUC
  double mean_auc = std::numeric_limits<double>::quiet_NaN();
};

inline CvReport kfold_cv(const CvDataset &data, int k_folds, std::uint64_t seed,
                         const IrlsOptions &opt = {}) {
  const Eigen::MatrixXd &ex = data.eval_x.size() > 0 ? data.eval_x : data.train_x;
  if (ex.rows() != data.train_x.rows() || ex.cols() != data.train_x.cols())
    throw Error(Errc::invalid_argument, "evaluation features do not match training features");
  auto folds = stratified_folds(data.labels, k_folds, seed);
  CvReport rep;
  double sum = 0.0;
  int used = 0;
  for (const auto &test : folds) {
    std::vector<char> in_test(data.labels.size(), 0);
    for (std::size_t i : test)
      in_test[i] = 1;
    // classes present in the training part, remapped to 0..k'-1
    std::vector<int> remap(static_cast<std::size_t>(data.k), -1);
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < data.labels.size(); ++i)
      if (!in_test[i])
        train.push_back(i);
    std::vector<char> present(static_cast<std::size_t>(data.k), 0);
    for (std::size_t i : train)
      present[data.labels[i]] = 1;
    int kk = 0;
    for (int z = 0; z < data.k; ++z)
      if (present[z])
        remap[z] = kk++;
    Eigen::MatrixXd tx(static_cast<Eigen::Index>(train.size()), data.train_x.cols());
    std::vector<int> tl(train.size());
    for (std::size_t r = 0; r < train.size(); ++r) {
      tx.row(static_cast<Eigen::Index>(r)) = data.train_x.row(static_cast<Eigen::Index>(train[r]));
      tl[r] = remap[data.labels[train[r]]];
    }
    Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(test.size()), data.k);
    std::vector<int> test_labels(test.size());
    if (kk >= 2) {
      MlrModel m = train_irls(tx, tl, kk, opt);
      for (std::size_t r = 0; r < test.size(); ++r) {
        Eigen::MatrixXd p = predict_matrix(m.weights, ex.row(static_cast<Eigen::Index>(test[r])));
        for (int z = 0; z < data.k; ++z)
          if (remap[z] >= 0)
            probs(static_cast<Eigen::Index>(r), z) = p(0, remap[z]);
      }
    }
    for (std::size_t r = 0; r < test.size(); ++r)
      test_labels[r] = data.labels[test[r]];
    MacroAuc auc = macro_auc(probs, test_labels);
    rep.fold_auc.push_back(auc.value);
    rep.fold_sizes.push_back(test.size());
    rep.skipped.push_back(auc.skipped);
    if (std::isfinite(auc.value)) {
      sum += auc.value;
      ++used;
    }
  }
  if (used > 0)
    rep.mean_auc = sum / used;
  return rep;
}

// ---- survey features ---------------------------------------------------------------

struct SurveyRow {
  std::string customer_id;
  Profile x{};
};

inline std::string survey_header() {
  std::string h = "customer_id";
  for (int i = 0; i < kHoursPerDay; ++i)
    h += ",x" + std::to_string(i);
  return h;
}

/// Reads `customer_id,x0,...,x23`; every row must be a probability vector
/// (entries in [0, 1], sum 1 within 1e-6).
inline std::vector<SurveyRow> parse_survey(std::istream &in) {
  std::string line;
  if (!std::getline(in, line))
    throw Error(Errc::dataset_empty, "empty survey file");
  if (strip_cr(line) != survey_header())
    throw ParseError(1, "expected header '" + survey_header() + "'");
  std::vector<SurveyRow> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view row = strip_cr(line);
    if (row.empty())
      continue;
    auto f = split_fields(row);
    if (f.size() != kHoursPerDay + 1)
      throw ParseError(lineno, "expected 25 fields");
    SurveyRow r;
    r.customer_id = std::string(f[0]);
    double sum = 0.0;
    for (int h = 0; h < kHoursPerDay; ++h) {
      if (!parse_double(f[h + 1], r.x[h]) || r.x[h] < 0.0 || r.x[h] > 1.0)
        throw ParseError(lineno, "bad probability '" + std::string(f[h + 1]) + "'");
      sum += r.x[h];
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw ParseError(lineno, "row sums to " + format_double(sum) + ", expected 1");
    out.push_back(std::move(r));
  }
  if (out.empty())
    throw Error(Errc::dataset_empty, "no survey rows");
  return out;
}

inline void write_survey(std::ostream &os, std::span<const SurveyRow> rows) {
  std::string buf = survey_header() + "\n";
  for (const auto &r : rows) {
    buf += r.customer_id;
    for (double v : r.x) {
      buf += ',';
      append_double(buf, v);
    }
    buf += '\n';
  }
  os << buf;
}

} // namespace peakseg
