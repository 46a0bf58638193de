#pragma once

// Test-side helpers: random instances and dense reference implementations
// that share no code with the library.

#include "tunmix/types.hpp"

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

namespace testing {

using tunmix::Index;
using tunmix::Matrix;
using tunmix::Vector;

inline constexpr double kPi = 3.14159265358979323846;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }
  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(gen_);
  }
  Index integer(Index lo, Index hi) {
    return std::uniform_int_distribution<Index>(lo, hi)(gen_);
  }

  Matrix gaussian(Index r, Index c) {
    Matrix X(r, c);
    for (Index j = 0; j < c; ++j)
      for (Index i = 0; i < r; ++i) X(i, j) = normal();
    return X;
  }
  Vector gaussian(Index n) { return gaussian(n, 1).col(0); }

  Matrix uniform_matrix(Index r, Index c, double lo, double hi) {
    Matrix X(r, c);
    for (Index j = 0; j < c; ++j)
      for (Index i = 0; i < r; ++i) X(i, j) = uniform(lo, hi);
    return X;
  }

  // Well-conditioned SPD matrix: W W^T / n + shift I.
  Matrix spd(Index n, double shift = 0.5) {
    const Matrix W = gaussian(n, n);
    return W * W.transpose() / static_cast<double>(n) + shift * Matrix::Identity(n, n);
  }

  // Columns drawn uniformly from the probability simplex.
  Matrix simplex_columns(Index P, Index N) {
    Matrix A(P, N);
    for (Index n = 0; n < N; ++n) {
      double s = 0.0;
      for (Index p = 0; p < P; ++p) {
        A(p, n) = -std::log(uniform(1e-12, 1.0));
        s += A(p, n);
      }
      A.col(n) /= s;
    }
    return A;
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

inline double rel_err(const Matrix& got, const Matrix& want) {
  const double scale = std::max(want.norm(), 1e-300);
  return (got - want).norm() / scale;
}

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

// Explicit B = (A^T (x) I_L) diag(vec M0) by index formula:
// y(n*L + l) = sum_p A(p, n) M0(l, p) psi(p*L + l).
inline Matrix dense_glmm_B(const Matrix& A, const Matrix& M0) {
  const Index L = M0.rows();
  const Index P = M0.cols();
  const Index N = A.cols();
  Matrix B = Matrix::Zero(N * L, P * L);
  for (Index n = 0; n < N; ++n)
    for (Index p = 0; p < P; ++p)
      for (Index l = 0; l < L; ++l) B(n * L + l, p * L + l) = A(p, n) * M0(l, p);
  return B;
}

inline double gaussian_logpdf(const Vector& x, const Vector& mean, const Matrix& cov) {
  const Eigen::LDLT<Matrix> ldlt(cov);
  const Vector d = x - mean;
  double logdet = 0.0;
  for (Index i = 0; i < cov.rows(); ++i) logdet += std::log(ldlt.vectorD()(i));
  return -0.5 * (static_cast<double>(x.size()) * std::log(2.0 * kPi) + logdet +
                 d.dot(ldlt.solve(d)));
}

// Textbook Kalman update with S formed and inverted explicitly.
struct DenseUpdate {
  Vector mean;
  Matrix cov;
  Vector innovation;
  double loglik = 0.0;
};

inline DenseUpdate dense_kalman_update(const Vector& m, const Matrix& P, const Vector& y,
                                       const Matrix& B, double s2) {
  const Matrix S = B * P * B.transpose() + s2 * Matrix::Identity(B.rows(), B.rows());
  const Matrix Sinv = S.inverse();
  const Matrix K = P * B.transpose() * Sinv;
  DenseUpdate out;
  out.innovation = y - B * m;
  out.mean = m + K * out.innovation;
  out.cov = P - K * S * K.transpose();
  out.loglik = gaussian_logpdf(y, B * m, S);
  return out;
}

// Joint Gaussian posterior of (psi_0, ..., psi_T) for the random-walk model,
// from the information form of the batch least-squares problem.
struct BatchPosterior {
  std::vector<Vector> means;                 // t = 0..T
  Matrix cov;                                // full (T+1)n x (T+1)n
  Index n = 0;
  Matrix block(Index s, Index t) const { return cov.block(s * n, t * n, n, n); }
};

inline BatchPosterior batch_posterior(const std::vector<Vector>& ys, const Matrix& B,
                                      const Matrix& Q, double s2, const Vector& psi00,
                                      const Matrix& P00) {
  const Index n = B.cols();
  const auto T = static_cast<Index>(ys.size());
  const Index dim = (T + 1) * n;
  const Matrix P00i = P00.inverse();
  const Matrix Qi = Q.inverse();
  const Matrix Gi = B.transpose() * B / s2;
  Matrix H = Matrix::Zero(dim, dim);
  Vector g = Vector::Zero(dim);
  H.block(0, 0, n, n) += P00i;
  g.segment(0, n) += P00i * psi00;
  for (Index t = 1; t <= T; ++t) {
    H.block(t * n, t * n, n, n) += Qi;
    H.block((t - 1) * n, (t - 1) * n, n, n) += Qi;
    H.block(t * n, (t - 1) * n, n, n) -= Qi;
    H.block((t - 1) * n, t * n, n, n) -= Qi;
    H.block(t * n, t * n, n, n) += Gi;
    g.segment(t * n, n) += B.transpose() * ys[static_cast<std::size_t>(t - 1)] / s2;
  }
  BatchPosterior out;
  out.n = n;
  out.cov = H.inverse();
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  const Vector x = H.ldlt().solve(g);
  for (Index t = 0; t <= T; ++t) out.means.push_back(x.segment(t * n, n));
  return out;
}

// log p(y_1..y_T) from the stacked TNL-dimensional Gaussian.
inline double joint_gaussian_loglik(const std::vector<Vector>& ys, const Matrix& B, const Matrix& Q,
                                    double s2, const Vector& psi00, const Matrix& P00) {
  const auto T = static_cast<Index>(ys.size());
  const Index m = B.rows();
  Vector y(T * m), mu(T * m);
  Matrix C(T * m, T * m);
  for (Index s = 0; s < T; ++s) {
    y.segment(s * m, m) = ys[static_cast<std::size_t>(s)];
    mu.segment(s * m, m) = B * psi00;
    for (Index t = 0; t < T; ++t) {
      const double k = static_cast<double>(std::min(s, t) + 1);
      C.block(s * m, t * m, m, m) = B * (P00 + k * Q) * B.transpose();
      if (s == t) C.block(s * m, t * m, m, m) += s2 * Matrix::Identity(m, m);
    }
  }
  return gaussian_logpdf(y, mu, C);
}

// Draws a trajectory psi_0 ~ N(psi00, P00), psi_t = psi_{t-1} + q_t, y_t = B psi_t + r_t.
inline std::vector<Vector> simulate_random_walk(Rng& rng, const Matrix& B, const Matrix& Q,
                                                double s2, const Vector& psi00, const Matrix& P00,
                                                Index T) {
  const Matrix Lq = Q.llt().matrixL();
  const Matrix Lp = P00.llt().matrixL();
  Vector psi = psi00 + Lp * rng.gaussian(psi00.size());
  std::vector<Vector> ys;
  for (Index t = 0; t < T; ++t) {
    psi += Lq * rng.gaussian(psi.size());
    ys.push_back(B * psi + std::sqrt(s2) * rng.gaussian(B.rows()));
  }
  return ys;
}

// Minimum over all supports of the equality-constrained least-squares solution
// (Lagrangian KKT system per support), keeping only nonnegative candidates.
inline Vector exhaustive_simplex_qp(const Matrix& M, const Vector& y, double lambda,
                                    const Vector& a_ref) {
  const Index P = M.cols();
  const Matrix H = M.transpose() * M + lambda * Matrix::Identity(P, P);
  const Vector c = M.transpose() * y + lambda * a_ref;
  auto obj = [&](const Vector& a) {
    return (y - M * a).squaredNorm() + lambda * (a - a_ref).squaredNorm();
  };
  Vector best;
  double best_val = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1u << P); ++mask) {
    std::vector<Index> idx;
    for (Index p = 0; p < P; ++p)
      if (mask & (1u << p)) idx.push_back(p);
    const auto k = static_cast<Index>(idx.size());
    Matrix K = Matrix::Zero(k + 1, k + 1);
    Vector rhs = Vector::Zero(k + 1);
    for (Index i = 0; i < k; ++i) {
      for (Index j = 0; j < k; ++j) K(i, j) = H(idx[i], idx[j]);
      K(i, k) = 1.0;
      K(k, i) = 1.0;
      rhs(i) = c(idx[i]);
    }
    rhs(k) = 1.0;
    const Vector sol = K.fullPivLu().solve(rhs);
    Vector a = Vector::Zero(P);
    bool feasible = true;
    for (Index i = 0; i < k; ++i) {
      a(idx[i]) = sol(i);
      if (sol(i) < -1e-12) feasible = false;
    }
    if (!feasible || !a.allFinite()) continue;
    a = a.cwiseMax(0.0);
    const double v = obj(a);
    if (v < best_val) {
      best_val = v;
      best = a;
    }
  }
  return best;
}

// Unique scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("tunmix_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
