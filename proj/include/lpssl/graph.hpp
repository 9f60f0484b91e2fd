#pragma once

// Cosine kNN affinity graph over document features.
//
//   features --l2_normalize--> unit rows --knn_search--> neighbor lists
//            --build_affinity--> W = max(W_dir, W_dir^T), w_ij = sim^gamma
//            --normalize_affinity--> S = D^-1/2 W D^-1/2

#include "lpssl/dense.hpp"
#include "lpssl/error.hpp"

#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace lpssl {

template <typename Scalar>
struct FeatureMatrix {
  DenseRows<Scalar> values;
  bool normalized = false;
  /// Rows that were all zero at normalization time.
  std::vector<Eigen::Index> zero_rows;

  Eigen::Index rows() const noexcept { return values.rows(); }
  Eigen::Index dim() const noexcept { return values.cols(); }

  template <typename Other>
  FeatureMatrix<Other> cast() const {
    return {values.template cast<Other>(), normalized, zero_rows};
  }
};

template <typename Scalar>
FeatureMatrix<Scalar> l2_normalize(FeatureMatrix<Scalar> features) {
  features.zero_rows.clear();
  for (Eigen::Index i = 0; i < features.values.rows(); ++i) {
    auto row = features.values.row(i);
    const Scalar norm = row.norm();
    if (norm > Scalar(0))
      row /= norm;
    else
      features.zero_rows.push_back(i);
  }
  features.normalized = true;
  return features;
}

/// k neighbors per row, most similar first.
template <typename Scalar>
struct NeighborLists {
  Eigen::Index n = 0;
  Eigen::Index k = 0;
  Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> indices;
  DenseRows<Scalar> similarities;
};

/// Exact brute-force cosine kNN. Candidates are ranked by dot product with
/// ties going to the smaller index; reported similarities are clamped to
/// [0, 1]. Similarities are computed blockwise as dense products.
template <typename Scalar>
NeighborLists<Scalar> knn_search(const FeatureMatrix<Scalar>& features, Eigen::Index k,
                                 Eigen::Index block_rows = 256) {
  const Eigen::Index n = features.rows();
  if (!features.normalized) throw Error(ErrorKind::InvalidConfig, "knn_search expects l2-normalized features");
  if (k < 1) throw Error(ErrorKind::InvalidConfig, "k must be >= 1");
  if (k >= n)
    throw Error(ErrorKind::KTooLarge, "k = " + std::to_string(k) + " requires more than " + std::to_string(n) +
                                          " points");

  NeighborLists<Scalar> out;
  out.n = n;
  out.k = k;
  out.indices.resize(n, k);
  out.similarities.resize(n, k);

  std::vector<std::int32_t> order(static_cast<std::size_t>(n));
  DenseRows<Scalar> gram;
  for (Eigen::Index start = 0; start < n; start += block_rows) {
    const Eigen::Index rows = std::min(block_rows, n - start);
    gram.noalias() = features.values.middleRows(start, rows) * features.values.transpose();
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Eigen::Index i = start + r;
      const auto sims = gram.row(r);
      std::iota(order.begin(), order.end(), 0);
      // move self to the back so it is never selected
      std::swap(order[static_cast<std::size_t>(i)], order.back());
      const auto better = [&](std::int32_t a, std::int32_t b) {
        if (sims[a] != sims[b]) return sims[a] > sims[b];
        return a < b;
      };
      std::partial_sort(order.begin(), order.begin() + k, order.end() - 1, better);
      for (Eigen::Index j = 0; j < k; ++j) {
        const auto nb = order[static_cast<std::size_t>(j)];
        out.indices(i, j) = nb;
        out.similarities(i, j) = std::clamp(sims[nb], Scalar(0), Scalar(1));
      }
    }
  }
  return out;
}

template <typename Scalar>
struct SparseAffinity {
  Eigen::SparseMatrix<Scalar, Eigen::RowMajor> matrix;
  Eigen::Index k = 0;
  double gamma = 0.0;
  bool normalized = false;
  /// Nodes with no incident edge; filled by normalize_affinity.
  std::vector<Eigen::Index> isolated;

  Eigen::Index n() const noexcept { return matrix.rows(); }
  Eigen::Index nnz() const noexcept { return matrix.nonZeros(); }
};

/// w_ij = sim_ij^gamma for every listed pair, symmetrized by elementwise max.
/// Zero weights are not stored.
template <typename Scalar>
SparseAffinity<Scalar> build_affinity(const NeighborLists<Scalar>& neighbors, double gamma) {
  if (!(gamma > 0.0)) throw Error(ErrorKind::InvalidConfig, "gamma must be > 0");
  using Triplet = Eigen::Triplet<Scalar>;
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(2 * neighbors.n * neighbors.k));
  for (Eigen::Index i = 0; i < neighbors.n; ++i) {
    for (Eigen::Index j = 0; j < neighbors.k; ++j) {
      const Scalar w = std::pow(neighbors.similarities(i, j), static_cast<Scalar>(gamma));
      if (!(w > Scalar(0))) continue;
      const auto nb = neighbors.indices(i, j);
      triplets.emplace_back(i, nb, w);
      triplets.emplace_back(nb, i, w);
    }
  }
  SparseAffinity<Scalar> out;
  out.k = neighbors.k;
  out.gamma = gamma;
  out.matrix.resize(neighbors.n, neighbors.n);
  out.matrix.setFromTriplets(triplets.begin(), triplets.end(),
                             [](const Scalar& a, const Scalar& b) { return std::max(a, b); });
  out.matrix.makeCompressed();
  return out;
}

/// S = D^-1/2 W D^-1/2 on the existing sparsity pattern.
template <typename Scalar>
SparseAffinity<Scalar> normalize_affinity(SparseAffinity<Scalar> w) {
  using Matrix = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_sqrt_degree(w.n());
  w.isolated.clear();
  for (Eigen::Index i = 0; i < w.n(); ++i) {
    Scalar degree(0);
    for (typename Matrix::InnerIterator it(w.matrix, i); it; ++it) degree += it.value();
    if (degree > Scalar(0)) {
      inv_sqrt_degree[i] = Scalar(1) / std::sqrt(degree);
    } else {
      inv_sqrt_degree[i] = Scalar(0);
      w.isolated.push_back(i);
    }
  }
  for (Eigen::Index i = 0; i < w.n(); ++i)
    for (typename Matrix::InnerIterator it(w.matrix, i); it; ++it)
      it.valueRef() *= inv_sqrt_degree[i] * inv_sqrt_degree[it.col()];
  w.normalized = true;
  return w;
}

/// Convenience chain used by the pipeline.
template <typename Scalar>
SparseAffinity<Scalar> build_graph(const FeatureMatrix<Scalar>& features, Eigen::Index k, double gamma) {
  const auto unit = features.normalized ? features : l2_normalize(features);
  return normalize_affinity(build_affinity(knn_search(unit, k), gamma));
}

}  // namespace lpssl
