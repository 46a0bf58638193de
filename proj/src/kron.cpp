#include "tunmix/kron.hpp"

#include "tunmix/spd.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

namespace tunmix::kron {

Matrix kron_product(const Matrix& X, const Matrix& Y) {
  Matrix out(X.rows() * Y.rows(), X.cols() * Y.cols());
  for (Index j = 0; j < X.cols(); ++j) {
    for (Index i = 0; i < X.rows(); ++i) {
      out.block(i * Y.rows(), j * Y.cols(), Y.rows(), Y.cols()) = X(i, j) * Y;
    }
  }
  return out;
}

Matrix KronTerms::sum() const {
  if (left.empty()) return {};
  Matrix acc = kron_product(left.front(), right.front());
  for (std::size_t k = 1; k < left.size(); ++k) acc += kron_product(left[k], right[k]);
  return acc;
}

namespace {

void check_divisible(const Matrix& S, Index block_rows, Index block_cols) {
  if (block_rows < 1 || block_cols < 1 || S.rows() % block_rows != 0 ||
      S.cols() % block_cols != 0) {
    throw InvalidArgument("Kronecker blocking: " + std::to_string(S.rows()) + "x" +
                          std::to_string(S.cols()) + " is not divisible into " +
                          std::to_string(block_rows) + "x" + std::to_string(block_cols) +
                          " blocks");
  }
}

}  // namespace

Matrix rearrange(const Matrix& S, Index block_rows, Index block_cols) {
  check_divisible(S, block_rows, block_cols);
  const Index m = S.rows() / block_rows;
  const Index n = S.cols() / block_cols;
  Matrix R(m * n, block_rows * block_cols);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < m; ++i) {
      const Matrix block = S.block(i * block_rows, j * block_cols, block_rows, block_cols);
      R.row(i + j * m) = Eigen::Map<const Vector>(block.data(), block.size()).transpose();
    }
  }
  return R;
}

KronTerms nkp_decompose(const Matrix& S, Index block_rows, Index block_cols, Index K) {
  const Matrix R = rearrange(S, block_rows, block_cols);
  const Index m = S.rows() / block_rows;
  const Index n = S.cols() / block_cols;
  const Index max_terms = std::min(R.rows(), R.cols());
  if (K < 1 || K > max_terms) {
    throw InvalidArgument("nkp_decompose: K=" + std::to_string(K) + " outside [1, " +
                          std::to_string(max_terms) + "]");
  }
  Eigen::JacobiSVD<Matrix> svd(R, Eigen::ComputeThinU | Eigen::ComputeThinV);
  KronTerms terms;
  terms.spectrum = svd.singularValues();
  for (Index k = 0; k < K; ++k) {
    const double scale = std::sqrt(terms.spectrum(k));
    const Vector u = scale * svd.matrixU().col(k);
    const Vector v = scale * svd.matrixV().col(k);
    terms.left.emplace_back(Eigen::Map<const Matrix>(u.data(), m, n));
    terms.right.emplace_back(Eigen::Map<const Matrix>(v.data(), block_rows, block_cols));
  }
  return terms;
}

Matrix block_traces(const Matrix& S, Index L) {
  check_divisible(S, L, L);
  const Index rows = S.rows() / L;
  const Index cols = S.cols() / L;
  Matrix T(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      T(i, j) = S.block(i * L, j * L, L, L).trace();
    }
  }
  return T;
}

Matrix block_trace_gram(const Matrix& sigma1_tilde, Index L, Index P) {
  if (sigma1_tilde.rows() != P * L || sigma1_tilde.cols() != P * L) {
    throw InvalidArgument("block_trace_gram: expected " + std::to_string(P * L) + "x" +
                          std::to_string(P * L) + " input");
  }
  return block_traces(sigma1_tilde, L);
}

Matrix block_trace_cross(const Matrix& sigma3_tilde, Index L) {
  return block_traces(sigma3_tilde, L);
}

WoodburyInner woodbury_inner(const Matrix& P_pred, const GramApply& gram_apply, double sigma_r2) {
  if (!(sigma_r2 > 0.0)) throw InvalidArgument("woodbury: sigma_r2 must be positive");
  const Index n = P_pred.rows();
  const Matrix F = spd::sqrt_factor(P_pred);
  Matrix inner = Matrix::Identity(n, n);
  inner.noalias() += (F.transpose() * gram_apply(F)) / sigma_r2;
  spd::symmetrize(inner);
  const auto llt = spd::factor(inner, "Woodbury inner matrix");
  WoodburyInner out;
  out.inverse.noalias() = F * llt.solve(F.transpose());
  spd::symmetrize(out.inverse);
  out.log_det = spd::log_det(llt);
  return out;
}

Matrix woodbury_gain_factor(const Matrix& B, const Matrix& P_pred, double sigma_r2) {
  if (B.cols() != P_pred.rows() || P_pred.rows() != P_pred.cols()) {
    throw InvalidArgument("woodbury_gain_factor: B and P_pred are not conformable");
  }
  const Matrix G = B.transpose() * B;
  const auto inner =
      woodbury_inner(P_pred, [&G](const Matrix& X) -> Matrix { return G * X; }, sigma_r2);
  Matrix out = B.transpose() / sigma_r2;
  out.noalias() -= (G * inner.inverse) * B.transpose() / (sigma_r2 * sigma_r2);
  return out;
}

}  // namespace tunmix::kron
