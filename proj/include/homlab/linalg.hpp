#pragma once

// Small dense helpers for symmetric d x d matrices: Loewner-order tests,
// extreme eigenvalues, and packed upper-triangular storage.

#include "homlab/types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace homlab {

template <typename Derived>
typename Derived::Scalar max_eigenvalue(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> sym = (a + a.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(sym, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

template <typename Derived>
typename Derived::Scalar min_eigenvalue(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> sym = (a + a.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(sym, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

/// lower <= upper in the positive-semidefinite order, with absolute slack `tol`.
template <typename DerivedA, typename DerivedB>
bool loewner_leq(const Eigen::MatrixBase<DerivedA>& lower,
                 const Eigen::MatrixBase<DerivedB>& upper,
                 typename DerivedA::Scalar tol = 0) {
  return min_eigenvalue(upper - lower) >= -tol;
}

template <typename Derived>
bool is_positive_definite(const Eigen::MatrixBase<Derived>& a) {
  return min_eigenvalue(a) > 0;
}

/// Upper-triangular entries, row by row: (0,0), (0,1), ..., (1,1), ...
template <typename Derived>
Vector<typename Derived::Scalar> pack_symmetric(const Eigen::MatrixBase<Derived>& a) {
  const int d = static_cast<int>(a.rows());
  Vector<typename Derived::Scalar> out(packed_size(d));
  int k = 0;
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) out(k++) = a(i, j);
  return out;
}

template <typename Derived>
Matrix<typename Derived::Scalar> unpack_symmetric(const Eigen::MatrixBase<Derived>& packed,
                                                  int d) {
  Matrix<typename Derived::Scalar> a(d, d);
  int k = 0;
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      a(i, j) = packed(k);
      a(j, i) = packed(k);
      ++k;
    }
  return a;
}

}  // namespace homlab
