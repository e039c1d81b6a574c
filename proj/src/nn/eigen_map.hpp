#pragma once

#include <Eigen/Core>

#include "ddsd/nn/tensor.hpp"

namespace ddsd::nn::detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using RowVectorMap = Eigen::Map<Eigen::RowVectorXd>;
using ConstRowVectorMap = Eigen::Map<const Eigen::RowVectorXd>;

inline MatrixMap as_matrix(Tensor& t, std::size_t rows, std::size_t cols) {
  return MatrixMap(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
inline ConstMatrixMap as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMatrixMap(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
// Views a 2-D tensor with its own shape.
inline MatrixMap as_matrix(Tensor& t) { return as_matrix(t, t.dim(0), t.dim(1)); }
inline ConstMatrixMap as_matrix(const Tensor& t) { return as_matrix(t, t.dim(0), t.dim(1)); }
inline RowVectorMap as_row(Tensor& t) { return RowVectorMap(t.data(), static_cast<Eigen::Index>(t.size())); }
inline ConstRowVectorMap as_row(const Tensor& t) {
  return ConstRowVectorMap(t.data(), static_cast<Eigen::Index>(t.size()));
}

}  // namespace ddsd::nn::detail
