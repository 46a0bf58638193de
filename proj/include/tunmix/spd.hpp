#pragma once

#include "tunmix/types.hpp"

#include <Eigen/Cholesky>

#include <string_view>

namespace tunmix::spd {

// Relative diagonal jitter applied on the single retry.
inline constexpr double kJitter = 1e-10;

inline void symmetrize(Matrix& X) { X = 0.5 * (X + X.transpose()).eval(); }

// Cholesky factor of a symmetric positive-definite matrix. On failure the
// diagonal is shifted once by kJitter * mean(diag) and the factorization is
// retried; a second failure throws NumericalError naming `what`.
Eigen::LLT<Matrix> factor(const Matrix& X, std::string_view what);

Matrix inverse(const Matrix& X, std::string_view what);

double log_det(const Eigen::LLT<Matrix>& llt);

// F with X = F F^T for symmetric PSD X (pivoted LDL^T, negative pivots
// clipped to zero). Works for singular X, including X = 0.
Matrix sqrt_factor(const Matrix& X);

// Eigenvalue clipping at zero; returns the number of clipped eigenvalues.
Index clip_to_psd(Matrix& X);

// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& X);

}  // namespace tunmix::spd
