#include "tunmix/spd.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace tunmix::spd {

Eigen::LLT<Matrix> factor(const Matrix& X, std::string_view what) {
  Eigen::LLT<Matrix> llt(X);
  if (llt.info() == Eigen::Success) return llt;

  const double mean_diag = X.diagonal().mean();
  if (std::isfinite(mean_diag) && mean_diag > 0.0) {
    Matrix shifted = X;
    shifted.diagonal().array() += kJitter * mean_diag;
    llt.compute(shifted);
    if (llt.info() == Eigen::Success) return llt;
  }
  throw NumericalError(std::string(what) + ": matrix is not positive definite after jitter retry");
}

Matrix inverse(const Matrix& X, std::string_view what) {
  const auto llt = factor(X, what);
  Matrix inv = llt.solve(Matrix::Identity(X.rows(), X.cols()));
  symmetrize(inv);
  return inv;
}

double log_det(const Eigen::LLT<Matrix>& llt) {
  const auto& L = llt.matrixLLT();
  double acc = 0.0;
  for (Index i = 0; i < L.rows(); ++i) acc += std::log(L(i, i));
  return 2.0 * acc;
}

Matrix sqrt_factor(const Matrix& X) {
  const Index n = X.rows();
  Eigen::LDLT<Matrix> ldlt(X);
  Vector d = ldlt.vectorD();
  for (Index i = 0; i < n; ++i) d(i) = d(i) > 0.0 ? std::sqrt(d(i)) : 0.0;
  Matrix F = ldlt.matrixL();
  F = F * d.asDiagonal();
  // X = P^T L D L^T P  =>  F = P^T L D^{1/2}
  return ldlt.transpositionsP().transpose() * F;
}

Index clip_to_psd(Matrix& X) {
  symmetrize(X);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(X);
  Vector w = eig.eigenvalues();
  Index clipped = 0;
  for (Index i = 0; i < w.size(); ++i) {
    if (w(i) < 0.0) {
      w(i) = 0.0;
      ++clipped;
    }
  }
  if (clipped > 0) {
    X = eig.eigenvectors() * w.asDiagonal() * eig.eigenvectors().transpose();
    symmetrize(X);
  }
  return clipped;
}

double min_eigenvalue(const Matrix& X) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(X, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

}  // namespace tunmix::spd
