#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "hadlrr/error.hpp"
#include "hadlrr/types.hpp"

namespace hadlrr {

/// Thin SVD, m = U * diag(sigma) * V^T with sigma nonincreasing.
template <typename Scalar>
struct SvdFactors {
  MatrixX<Scalar> U;
  VectorX<Scalar> sigma;
  MatrixX<Scalar> V;

  MatrixX<Scalar> reconstruct() const { return U * sigma.asDiagonal() * V.transpose(); }
};

template <typename Derived>
SvdFactors<typename Derived::Scalar> thin_svd(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (!m.allFinite()) throw NumericalError("svd: input contains non-finite values");
  Eigen::BDCSVD<MatrixX<Scalar>> svd(m.derived(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

template <typename Derived>
typename Derived::Scalar nuclear_norm(const Eigen::MatrixBase<Derived>& m) {
  if (m.size() == 0) return 0;
  return thin_svd(m).sigma.sum();
}

/// Sum of column l2 norms.
template <typename Derived>
typename Derived::Scalar l21_norm(const Eigen::MatrixBase<Derived>& m) {
  return m.colwise().norm().sum();
}

/// argmin_Z 1/2 |rhs - A Z|_F^2 + lambda/2 |Z|_F^2, solved through a Cholesky
/// factorisation of (A^T A + lambda I). A singular system at lambda = 0
/// raises NumericalError.
template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> ridge_solve(const Eigen::MatrixBase<DerivedA>& gram_side,
                                               const Eigen::MatrixBase<DerivedB>& rhs,
                                               typename DerivedA::Scalar lambda) {
  using Scalar = typename DerivedA::Scalar;
  if (!(lambda >= 0)) throw std::invalid_argument("ridge_solve: lambda must be >= 0");
  if (gram_side.rows() != rhs.rows())
    throw std::invalid_argument("ridge_solve: row count of system and rhs differ");
  const Index n = gram_side.cols();
  MatrixX<Scalar> gram = gram_side.transpose() * gram_side;
  gram.diagonal().array() += lambda;
  Eigen::LLT<MatrixX<Scalar>> llt(gram);
  const bool singular =
      llt.info() != Eigen::Success ||
      (lambda == 0 && n > 0 &&
       llt.rcond() < static_cast<Scalar>(n) * std::numeric_limits<Scalar>::epsilon());
  if (singular)
    throw NumericalError("ridge_solve: singular normal equations at lambda = 0; raise lambda");
  return llt.solve(gram_side.transpose() * rhs);
}

/// Singular value thresholding: U * max(Sigma - tau, 0) * V^T.
template <typename Derived>
MatrixX<typename Derived::Scalar> svt(const Eigen::MatrixBase<Derived>& m,
                                      typename Derived::Scalar tau) {
  if (!(tau >= 0)) throw std::invalid_argument("svt: tau must be >= 0");
  if (tau == 0) {
    if (!m.allFinite()) throw NumericalError("svt: input contains non-finite values");
    return m;
  }
  auto f = thin_svd(m);
  f.sigma = (f.sigma.array() - tau).cwiseMax(0).matrix();
  return f.reconstruct();
}

/// Column-group soft threshold, the prox of tau * |.|_{2,1} over columns.
template <typename Derived>
MatrixX<typename Derived::Scalar> prox_l21_columns(const Eigen::MatrixBase<Derived>& r,
                                                   typename Derived::Scalar tau) {
  using Scalar = typename Derived::Scalar;
  if (!(tau >= 0)) throw std::invalid_argument("prox_l21_columns: tau must be >= 0");
  MatrixX<Scalar> out(r.rows(), r.cols());
  for (Index j = 0; j < r.cols(); ++j) {
    const Scalar norm = r.col(j).norm();
    if (norm <= tau || norm == 0)
      out.col(j).setZero();
    else
      out.col(j) = r.col(j) * ((norm - tau) / norm);
  }
  return out;
}

}  // namespace hadlrr
