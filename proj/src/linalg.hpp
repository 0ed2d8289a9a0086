#pragma once

#include <Eigen/Core>

namespace ssf::linalg {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
Eigen::Map<const RowMat<T>> view(const T* p, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const RowMat<T>>(p, rows, cols);
}

template <class T>
Eigen::Map<RowMat<T>> view(T* p, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<RowMat<T>>(p, rows, cols);
}

}  // namespace ssf::linalg
