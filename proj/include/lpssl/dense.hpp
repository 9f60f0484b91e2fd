#pragma once

#include <Eigen/Core>

namespace lpssl {

/// Row-major dense matrix; rows are samples throughout the library.
template <typename Scalar>
using DenseRows = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

}  // namespace lpssl
