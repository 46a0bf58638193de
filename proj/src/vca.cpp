#include "tunmix/vca.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace tunmix::vca {

namespace {

Index numerical_rank(const Vector& singular_values, Index rows, Index cols) {
  if (singular_values.size() == 0 || singular_values(0) == 0.0) return 0;
  const double tol = static_cast<double>(std::max(rows, cols)) *
                     std::numeric_limits<double>::epsilon() * singular_values(0);
  Index r = 0;
  for (Index i = 0; i < singular_values.size(); ++i) {
    if (singular_values(i) > tol) ++r;
  }
  return r;
}

Index argmax_abs(const Eigen::RowVectorXd& v) {
  Index best = 0;
  double best_val = -1.0;
  for (Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > best_val) {
      best_val = std::abs(v(i));
      best = i;
    }
  }
  return best;
}

}  // namespace

VcaResult vca_extract(const Matrix& Y, Index P, std::uint64_t seed) {
  const Index L = Y.rows();
  const Index N = Y.cols();
  if (P < 1) throw InvalidArgument("vca: P must be at least 1");
  if (N < P) {
    throw InvalidArgument("vca: need at least P=" + std::to_string(P) + " pixels, got " +
                          std::to_string(N));
  }
  require_finite(Y, "vca input");

  Eigen::BDCSVD<Matrix> svd_raw(Y, Eigen::ComputeThinU);
  const Index rank = numerical_rank(svd_raw.singularValues(), L, N);
  if (rank < P) {
    throw RankDeficiencyError("vca: data has numerical rank " + std::to_string(rank) +
                                  ", need at least " + std::to_string(P),
                              rank);
  }

  const Vector mean = Y.rowwise().mean();
  const Matrix centered = Y.colwise() - mean;
  VcaResult out;

  if (P == 1) {
    Eigen::BDCSVD<Matrix> svd_c(centered, Eigen::ComputeThinU);
    const Index idx = svd_c.singularValues()(0) > 0.0
                          ? argmax_abs(svd_c.matrixU().col(0).transpose() * centered)
                          : Index{0};
    out.indices = {idx};
    out.endmembers = Y.col(idx);
    return out;
  }

  Eigen::BDCSVD<Matrix> svd_c(centered, Eigen::ComputeThinU);
  const Matrix Ud_c = svd_c.matrixU().leftCols(P);
  const Matrix x_p = Ud_c.transpose() * centered;

  const double n = static_cast<double>(N);
  const double power_y = Y.squaredNorm() / n;
  const double power_x = x_p.squaredNorm() / n + mean.squaredNorm();
  const double denom = power_y - power_x;
  const double numer = power_x - static_cast<double>(P) / static_cast<double>(L) * power_y;
  if (denom <= 0.0) {
    out.snr_estimate_db = std::numeric_limits<double>::infinity();
  } else if (numer <= 0.0) {
    out.snr_estimate_db = -std::numeric_limits<double>::infinity();
  } else {
    out.snr_estimate_db = 10.0 * std::log10(numer / denom);
  }
  const double snr_threshold = 15.0 + 10.0 * std::log10(static_cast<double>(P));

  Matrix proj(P, N);
  if (out.snr_estimate_db < snr_threshold) {
    const Matrix x = x_p.topRows(P - 1);
    const double c = std::sqrt(x.colwise().squaredNorm().maxCoeff());
    proj.topRows(P - 1) = x;
    proj.row(P - 1).setConstant(c);
  } else {
    out.projective = true;
    const Matrix x = svd_raw.matrixU().leftCols(P).transpose() * Y;
    const Vector u = x.rowwise().mean();
    const Eigen::RowVectorXd scale = u.transpose() * x;
    for (Index j = 0; j < N; ++j) proj.col(j) = x.col(j) / scale(j);
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix basis = Matrix::Zero(P, P);
  basis(P - 1, 0) = 1.0;
  out.indices.resize(static_cast<std::size_t>(P));
  for (Index i = 0; i < P; ++i) {
    Vector w(P);
    for (Index k = 0; k < P; ++k) w(k) = gauss(rng);
    // Remove the component in the span of the already selected vertices.
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(basis);
    Vector f = w - basis * (cod.pseudoInverse() * w);
    const double fn = f.norm();
    if (fn > 0.0) f /= fn;
    const Index idx = argmax_abs(f.transpose() * proj);
    basis.col(i) = proj.col(idx);
    out.indices[static_cast<std::size_t>(i)] = idx;
  }

  out.endmembers.resize(L, P);
  for (Index i = 0; i < P; ++i) out.endmembers.col(i) = Y.col(out.indices[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace tunmix::vca
