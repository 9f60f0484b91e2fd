#include "lpssl/graph.hpp"
#include "lpssl/random.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <numeric>

using namespace lpssl;

namespace {

FeatureMatrix<double> features_of(DenseRows<double> values) { return l2_normalize(FeatureMatrix<double>{std::move(values)}); }

DenseRows<double> random_rows(Rng& rng, Eigen::Index n, Eigen::Index d) {
  DenseRows<double> m(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = standard_normal(rng);
  return m;
}

}  // namespace

TEST_CASE("l2 normalization") {
  DenseRows<double> m(2, 2);
  m << 3, 4, 0, 0;
  const auto f = features_of(m);
  CHECK(f.values(0, 0) == doctest::Approx(0.6));
  CHECK(f.values(0, 1) == doctest::Approx(0.8));
  CHECK(f.values.row(1).isZero());
  CHECK(f.zero_rows == std::vector<Eigen::Index>{1});
}

TEST_CASE("kNN on three points") {
  DenseRows<double> m(3, 2);
  m << 1, 0, 0.8, 0.6, 0, 1;
  const auto nb = knn_search(features_of(m), 1);
  CHECK(nb.indices(0, 0) == 1);
  CHECK(nb.indices(1, 0) == 0);  // 0.8 vs 0.6
  CHECK(nb.indices(2, 0) == 1);
  CHECK(nb.similarities(0, 0) == doctest::Approx(0.8));
  CHECK(nb.similarities(2, 0) == doctest::Approx(0.6));
  CHECK_THROWS_AS(knn_search(features_of(m), 3), Error);
}

TEST_CASE("kNN agrees with exhaustive sorting") {
  Rng rng(11);
  const auto f = features_of(random_rows(rng, 50, 8));
  for (Eigen::Index block : {7, 256}) {
    const auto nb = knn_search(f, 5, block);
    for (Eigen::Index i = 0; i < 50; ++i) {
      std::vector<std::pair<double, int>> all;
      for (int j = 0; j < 50; ++j)
        if (j != i) all.emplace_back(f.values.row(i).dot(f.values.row(j)), j);
      std::sort(all.begin(), all.end(), [](auto a, auto b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
      for (Eigen::Index r = 0; r < 5; ++r) {
        CHECK(nb.indices(i, r) == all[static_cast<std::size_t>(r)].second);
        CHECK(nb.similarities(i, r) == doctest::Approx(std::clamp(all[static_cast<std::size_t>(r)].first, 0.0, 1.0)));
      }
    }
  }
}

TEST_CASE("kNN ties break toward the smaller index") {
  DenseRows<double> m(4, 2);
  m << 1, 0, 1, 0, 1, 0, 0, 1;
  const auto nb = knn_search(features_of(m), 2);
  CHECK(nb.indices(2, 0) == 0);
  CHECK(nb.indices(2, 1) == 1);
  CHECK(nb.indices(3, 0) == 0);
}

TEST_CASE("affinity weights") {
  NeighborLists<double> nb;
  nb.n = 3;
  nb.k = 1;
  nb.indices.resize(3, 1);
  nb.similarities.resize(3, 1);
  nb.indices << 1, 0, 0;
  nb.similarities << 1.0, 1.0, 0.5;
  const auto w = build_affinity(nb, 3.0);
  CHECK(w.matrix.coeff(0, 1) == 1.0);
  CHECK(w.matrix.coeff(0, 2) == doctest::Approx(0.125));
  // 2 -> 0 only listed in one direction, mirrored
  CHECK(w.matrix.coeff(2, 0) == doctest::Approx(0.125));
  CHECK(w.matrix.coeff(1, 2) == 0.0);
}

TEST_CASE("asymmetric pair takes the larger weight") {
  NeighborLists<double> nb;
  nb.n = 2;
  nb.k = 1;
  nb.indices.resize(2, 1);
  nb.similarities.resize(2, 1);
  nb.indices << 1, 0;
  nb.similarities << 0.5, 0.9;
  const auto w = build_affinity(nb, 1.0);
  CHECK(w.matrix.coeff(0, 1) == doctest::Approx(0.9));
  CHECK(w.matrix.coeff(1, 0) == doctest::Approx(0.9));
}

TEST_CASE("normalized two-node edge") {
  Eigen::SparseMatrix<double, Eigen::RowMajor> m(2, 2);
  m.insert(0, 1) = 4.0;
  m.insert(1, 0) = 4.0;
  SparseAffinity<double> w;
  w.matrix = m;
  const auto s = normalize_affinity(w);
  CHECK(s.matrix.coeff(0, 1) == doctest::Approx(1.0));
  CHECK(s.isolated.empty());
}

TEST_CASE("normalized affinity has spectral radius at most one") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto s = build_graph(features_of(random_rows(rng, 10, 4)), 3, 2.0);
    const Eigen::MatrixXd dense = Eigen::MatrixXd(s.matrix);
    CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense);
    CHECK(eig.eigenvalues().cwiseAbs().maxCoeff() <= 1.0 + 1e-9);
    CHECK((dense.diagonal().array() == 0.0).all());
  }
}

TEST_CASE("isolated node from orthogonal and zero features") {
  DenseRows<double> m(4, 3);
  m << 1, 0, 0, 1, 0.1, 0, 0.9, 0.1, 0, 0, 0, 1;
  const auto s = build_graph(features_of(m), 2, 3.0);
  CHECK(s.isolated == std::vector<Eigen::Index>{3});
  for (Eigen::Index j = 0; j < 4; ++j) CHECK(s.matrix.coeff(3, j) == 0.0);

  DenseRows<double> z(3, 2);
  z << 1, 0, 0, 0, 1, 0.1;
  const auto f = features_of(z);
  CHECK(f.zero_rows == std::vector<Eigen::Index>{1});
  const auto sz = build_graph(f, 1, 3.0);
  CHECK(sz.isolated == std::vector<Eigen::Index>{1});
}

TEST_CASE("graph sparsity, symmetry and determinism") {
  Rng rng(9);
  const auto f = features_of(random_rows(rng, 200, 16).cwiseAbs());
  const auto a = build_graph(f, 10, 3.0);
  const auto b = build_graph(f, 10, 3.0);
  CHECK(a.nnz() <= 2 * 200 * 10);
  CHECK(a.nnz() >= 200 * 10);
  const Eigen::SparseMatrix<double, Eigen::RowMajor> t = a.matrix.transpose();
  CHECK((a.matrix - t).norm() < 1e-14);
  CHECK(Eigen::MatrixXd(a.matrix) == Eigen::MatrixXd(b.matrix));

  const auto w = build_affinity(knn_search(f, 10), 3.0);
  const auto s = normalize_affinity(w);
  CHECK(w.nnz() == s.nnz());
}

TEST_CASE("float and double graphs agree") {
  Rng rng(3);
  const auto f = features_of(random_rows(rng, 60, 6).cwiseAbs());
  const auto d = build_graph(f, 4, 3.0);
  const auto s = build_graph(f.cast<float>(), 4, 3.0);
  CHECK((Eigen::MatrixXd(d.matrix) - Eigen::MatrixXf(s.matrix).cast<double>()).cwiseAbs().maxCoeff() < 1e-5);
}
