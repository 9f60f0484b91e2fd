#pragma once

// Label diffusion over a normalized affinity graph: solve (I - alpha S) Z = Y
// one class column at a time with conjugate gradient, turn rows of Z into
// class distributions, and derive pseudo-labels with entropy certainty and
// class-balance weights.

#include "lpssl/corpus.hpp"
#include "lpssl/dense.hpp"
#include "lpssl/error.hpp"
#include "lpssl/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace lpssl {

/// One-hot rows for labeled points, zero rows otherwise.
template <typename Scalar = double>
DenseRows<Scalar> seed_matrix(const IndexedDataset& dataset) {
  if (dataset.labeled_count() == 0) throw Error(ErrorKind::NoLabeledPoints, "seed matrix needs labeled points");
  DenseRows<Scalar> y = DenseRows<Scalar>::Zero(static_cast<Eigen::Index>(dataset.size()), dataset.num_classes);
  for (std::size_t i = 0; i < dataset.size(); ++i)
    if (dataset.labeled_mask[i]) y(static_cast<Eigen::Index>(i), dataset.gold_labels[i]) = Scalar(1);
  return y;
}

/// Classes without any labeled example; propagation still runs but those
/// columns stay zero.
inline std::vector<int> classes_without_seeds(const IndexedDataset& dataset) {
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(dataset.num_classes), 0);
  for (std::size_t i = 0; i < dataset.size(); ++i)
    if (dataset.labeled_mask[i]) seen[static_cast<std::size_t>(dataset.gold_labels[i])] = 1;
  std::vector<int> missing;
  for (int c = 0; c < dataset.num_classes; ++c)
    if (!seen[static_cast<std::size_t>(c)]) missing.push_back(c);
  return missing;
}

struct DiffusionOptions {
  double alpha = 0.99;
  double tol = 1e-6;
  int max_iter = 1000;
};

template <typename Scalar>
struct LabelDistribution {
  /// Row-processed distribution: clamped, renormalized, uniform on fallback rows.
  DenseRows<Scalar> values;
  /// Solver output Z before any row processing.
  DenseRows<Scalar> raw;
  /// max_c ||(I - alpha S) z_c - y_c||_2, evaluated on `raw`.
  Scalar residual_norm = 0;
  std::vector<Scalar> column_residuals;
  std::vector<Scalar> column_rhs_norms;
  /// Largest CG iteration count over class columns.
  int iterations = 0;
  bool converged = true;
  std::vector<std::uint8_t> fallback;

  std::size_t fallback_count() const {
    return static_cast<std::size_t>(std::count(fallback.begin(), fallback.end(), 1));
  }
};

template <typename Scalar>
class NotConvergedError : public Error {
 public:
  NotConvergedError(LabelDistribution<Scalar> partial, const std::string& what)
      : Error(ErrorKind::NotConverged, what), partial_(std::move(partial)) {}

  const LabelDistribution<Scalar>& partial() const noexcept { return partial_; }

 private:
  LabelDistribution<Scalar> partial_;
};

namespace detail {

template <typename Scalar>
using Column = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// out = x - alpha * S x
template <typename Scalar>
void apply_system(const Eigen::SparseMatrix<Scalar, Eigen::RowMajor>& s, Scalar alpha, const Column<Scalar>& x,
                  Column<Scalar>& out) {
  out.noalias() = s * x;
  out = x - alpha * out;
}

struct CgOutcome {
  int iterations = 0;
  bool converged = false;
};

// Conjugate gradient from x = 0. Convergence is always confirmed on the
// explicitly recomputed residual; a stale recursive residual triggers a
// restart from the current iterate.
template <typename Scalar>
CgOutcome conjugate_gradient(const Eigen::SparseMatrix<Scalar, Eigen::RowMajor>& s, Scalar alpha,
                             const Column<Scalar>& b, Column<Scalar>& x, Scalar tol, int max_iter) {
  const Eigen::Index n = b.size();
  x = Column<Scalar>::Zero(n);
  const Scalar threshold = tol * b.norm();
  if (threshold == Scalar(0)) return {0, true};

  Column<Scalar> r = b;
  Column<Scalar> p = r;
  Column<Scalar> ap(n);
  Scalar rr = r.squaredNorm();
  CgOutcome outcome;
  while (outcome.iterations < max_iter) {
    apply_system(s, alpha, p, ap);
    const Scalar step = rr / p.dot(ap);
    x.noalias() += step * p;
    r.noalias() -= step * ap;
    ++outcome.iterations;
    Scalar rr_next = r.squaredNorm();
    if (std::sqrt(rr_next) <= threshold) {
      apply_system(s, alpha, x, ap);
      r = b - ap;
      rr_next = r.squaredNorm();
      if (std::sqrt(rr_next) <= threshold) {
        outcome.converged = true;
        return outcome;
      }
      p = r;
      rr = rr_next;
      continue;
    }
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  return outcome;
}

}  // namespace detail

/// ||(I - alpha S) z_c - y_c||_2 for every class column.
template <typename Scalar>
std::vector<Scalar> diffusion_residuals(const SparseAffinity<Scalar>& s, Scalar alpha, const DenseRows<Scalar>& z,
                                        const DenseRows<Scalar>& y) {
  DenseRows<Scalar> r = z - alpha * (s.matrix * z) - y;
  std::vector<Scalar> out(static_cast<std::size_t>(r.cols()));
  for (Eigen::Index c = 0; c < r.cols(); ++c) out[static_cast<std::size_t>(c)] = r.col(c).norm();
  return out;
}

/// Clamps negatives, renormalizes each row to sum 1; rows whose mass is below
/// 1e-12 become uniform and are flagged.
template <typename Scalar>
void normalize_rows(const DenseRows<Scalar>& raw, DenseRows<Scalar>& values, std::vector<std::uint8_t>& fallback) {
  values = raw.cwiseMax(Scalar(0));
  fallback.assign(static_cast<std::size_t>(values.rows()), 0);
  const Scalar uniform = Scalar(1) / static_cast<Scalar>(values.cols());
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    const Scalar mass = values.row(i).sum();
    if (!(mass >= Scalar(1e-12))) {
      values.row(i).setConstant(uniform);
      fallback[static_cast<std::size_t>(i)] = 1;
    } else {
      values.row(i) /= mass;
    }
  }
}

/// Solves (I - alpha S) Z = Y. Throws NotConvergedError, carrying the partial
/// distribution, when any column misses `tol` within `max_iter` iterations.
template <typename Scalar>
LabelDistribution<Scalar> diffuse(const SparseAffinity<Scalar>& s, const DenseRows<Scalar>& y,
                                  const DiffusionOptions& options = {}) {
  if (!(options.alpha > 0.0 && options.alpha < 1.0))
    throw Error(ErrorKind::AlphaOutOfRange, "alpha must lie in (0, 1), got " + std::to_string(options.alpha));
  if (!(options.tol > 0.0)) throw Error(ErrorKind::InvalidConfig, "tol must be > 0");
  if (options.max_iter < 1) throw Error(ErrorKind::InvalidConfig, "max_iter must be >= 1");
  if (!s.normalized) throw Error(ErrorKind::InvalidConfig, "diffuse expects a normalized affinity");
  if (y.rows() != s.n())
    throw Error(ErrorKind::DimensionMismatch, "seed matrix has " + std::to_string(y.rows()) + " rows, graph has " +
                                                  std::to_string(s.n()) + " nodes");

  const auto alpha = static_cast<Scalar>(options.alpha);
  LabelDistribution<Scalar> z;
  z.raw.resize(y.rows(), y.cols());
  detail::Column<Scalar> b, x;
  for (Eigen::Index c = 0; c < y.cols(); ++c) {
    b = y.col(c);
    const auto outcome =
        detail::conjugate_gradient(s.matrix, alpha, b, x, static_cast<Scalar>(options.tol), options.max_iter);
    z.raw.col(c) = x;
    z.iterations = std::max(z.iterations, outcome.iterations);
    z.converged = z.converged && outcome.converged;
  }

  z.column_residuals = diffusion_residuals(s, alpha, z.raw, y);
  z.column_rhs_norms.resize(static_cast<std::size_t>(y.cols()));
  for (Eigen::Index c = 0; c < y.cols(); ++c) z.column_rhs_norms[static_cast<std::size_t>(c)] = y.col(c).norm();
  z.residual_norm = *std::max_element(z.column_residuals.begin(), z.column_residuals.end());
  normalize_rows(z.raw, z.values, z.fallback);

  if (!z.converged) {
    const std::string msg = "conjugate gradient stopped after " + std::to_string(z.iterations) +
                            " iterations with residual " + std::to_string(static_cast<double>(z.residual_norm));
    throw NotConvergedError<Scalar>(std::move(z), msg);
  }
  return z;
}

/// 1 - H(p) / ln C with natural-log entropy and 0 log 0 = 0. The row is
/// renormalized first; the result is clamped to [0, 1].
template <typename Derived>
double certainty_weight(const Eigen::MatrixBase<Derived>& row) {
  const auto c = row.size();
  if (c <= 1) return 1.0;
  double total = 0.0;
  for (Eigen::Index j = 0; j < c; ++j) total += std::max(0.0, static_cast<double>(row[j]));
  if (!(total > 0.0)) return 0.0;
  double entropy = 0.0;
  for (Eigen::Index j = 0; j < c; ++j) {
    const double p = std::max(0.0, static_cast<double>(row[j])) / total;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  return std::clamp(1.0 - entropy / std::log(static_cast<double>(c)), 0.0, 1.0);
}

struct PseudoLabelSet {
  std::vector<int> labels;
  std::vector<double> certainty;
  std::vector<double> class_weights;
  /// 1 where the label is a gold seed.
  std::vector<std::uint8_t> source_mask;
  /// 1 where the diffused row fell back to uniform.
  std::vector<std::uint8_t> fallback;

  std::size_t size() const noexcept { return labels.size(); }
};

/// zeta_j = N / (C n_j) over seeds and non-fallback pseudo-labels; classes
/// with n_j = 0 get 0.
inline std::vector<double> class_weights(const PseudoLabelSet& pseudo, int num_classes) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t i = 0; i < pseudo.size(); ++i) {
    if (!pseudo.source_mask[i] && !pseudo.fallback.empty() && pseudo.fallback[i]) continue;
    ++counts[static_cast<std::size_t>(pseudo.labels[i])];
  }
  std::size_t total = 0;
  for (auto n : counts) total += n;
  std::vector<double> zeta(counts.size(), 0.0);
  for (std::size_t j = 0; j < counts.size(); ++j)
    if (counts[j] > 0)
      zeta[j] = static_cast<double>(total) / (static_cast<double>(num_classes) * static_cast<double>(counts[j]));
  return zeta;
}

/// Argmax labels (smallest class on ties) with entropy certainty; seeds keep
/// their gold label and certainty 1; fallback rows get certainty 0.
template <typename Scalar>
PseudoLabelSet extract_pseudo_labels(const LabelDistribution<Scalar>& z, const IndexedDataset& dataset) {
  const auto n = static_cast<std::size_t>(z.values.rows());
  if (n != dataset.size())
    throw Error(ErrorKind::DimensionMismatch, "distribution has " + std::to_string(n) + " rows, dataset has " +
                                                  std::to_string(dataset.size()));
  PseudoLabelSet out;
  out.labels.resize(n);
  out.certainty.resize(n);
  out.source_mask = dataset.labeled_mask;
  out.fallback = z.fallback.empty() ? std::vector<std::uint8_t>(n, 0) : z.fallback;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    if (dataset.labeled_mask[i]) {
      out.labels[i] = dataset.gold_labels[i];
      out.certainty[i] = 1.0;
      continue;
    }
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < z.values.cols(); ++c)
      if (z.values(r, c) > z.values(r, best)) best = c;
    out.labels[i] = static_cast<int>(best);
    out.certainty[i] = out.fallback[i] ? 0.0 : certainty_weight(z.values.row(r));
  }
  out.class_weights = class_weights(out, dataset.num_classes);
  return out;
}

}  // namespace lpssl
