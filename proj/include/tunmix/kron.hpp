#pragma once

#include "tunmix/types.hpp"

#include <functional>
#include <vector>

namespace tunmix::kron {

// Standard Kronecker product; block (i, j) of the result is X(i, j) * Y.
Matrix kron_product(const Matrix& X, const Matrix& Y);

// S ~= sum_k left[k] (x) right[k].
struct KronTerms {
  std::vector<Matrix> left;
  std::vector<Matrix> right;
  // Singular values of the full rearrangement, descending (all of them, not
  // only the K retained).
  Vector spectrum;

  Index size() const { return static_cast<Index>(left.size()); }
  Matrix sum() const;
};

// Van Loan rearrangement of S (m*p x n*q) with p x q blocks: row i + j*m holds
// vec(block(i, j))^T, so that R(C (x) D) = vec(C) vec(D)^T.
Matrix rearrange(const Matrix& S, Index block_rows, Index block_cols);

// The K leading terms of the nearest-Kronecker-product expansion of S.
// Left factors are m x n, right factors block_rows x block_cols.
KronTerms nkp_decompose(const Matrix& S, Index block_rows, Index block_cols, Index K);

// T(i, j) = trace of the L x L block (i, j) of S. For S = sum_k C_k (x) D_k,
// T = sum_k tr(D_k) C_k.
Matrix block_traces(const Matrix& S, Index L);

// P x P block traces of a PL x PL matrix; tr{(A A^T (x) I_L) S} = tr{A A^T T}.
Matrix block_trace_gram(const Matrix& sigma1_tilde, Index L, Index P);

// N x P block traces of an NL x PL matrix; tr{(A^T (x) I_L) S^T} = sum A(p,n) U(n,p).
Matrix block_trace_cross(const Matrix& sigma3_tilde, Index L);

// Inner Woodbury quantities for S = B P B^T + s2 I with G = B^T B:
//   inverse    = (P^{-1} + s2^{-1} G)^{-1}, evaluated as F (I + s2^{-1} F^T G F)^{-1} F^T
//                with P = F F^T, so P may be singular;
//   log_det    = log|I + s2^{-1} F^T G F| = log|S| - NL log s2.
struct WoodburyInner {
  Matrix inverse;
  double log_det = 0.0;
};

using GramApply = std::function<Matrix(const Matrix&)>;

WoodburyInner woodbury_inner(const Matrix& P_pred, const GramApply& gram_apply, double sigma_r2);

// B^T S^{-1} = s2^{-1} B^T - s2^{-2} B^T B (P^{-1} + s2^{-1} B^T B)^{-1} B^T.
// Only PL x PL systems are factored; S itself is never formed.
Matrix woodbury_gain_factor(const Matrix& B, const Matrix& P_pred, double sigma_r2);

}  // namespace tunmix::kron
