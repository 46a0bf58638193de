#include "tunmix/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace tunmix::metrics {

namespace {

void check_sequences(const std::vector<Matrix>& truth, const std::vector<Matrix>& estimate,
                     const char* what) {
  if (truth.empty() || truth.size() != estimate.size()) {
    throw InvalidArgument(std::string(what) + ": sequences must be non-empty and equally long");
  }
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (truth[t].rows() != estimate[t].rows() || truth[t].cols() != estimate[t].cols()) {
      throw InvalidArgument(std::string(what) + ": shape mismatch at frame " + std::to_string(t));
    }
  }
}

// Minimum-cost assignment of rows to columns of a square cost matrix.
std::vector<Index> hungarian(const Matrix& cost) {
  const Index n = cost.rows();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<Index> match(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
  for (Index i = 1; i <= n; ++i) {
    match[0] = i;
    Index j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const Index i0 = match[static_cast<std::size_t>(j0)];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        if (used[uj]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[uj];
        if (cur < minv[uj]) {
          minv[uj] = cur;
          way[uj] = j0;
        }
        if (minv[uj] < delta) {
          delta = minv[uj];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        if (used[uj]) {
          u[static_cast<std::size_t>(match[uj])] += delta;
          v[uj] -= delta;
        } else {
          minv[uj] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const Index j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> perm(static_cast<std::size_t>(n));
  for (Index j = 1; j <= n; ++j) perm[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return perm;
}

}  // namespace

double nrmse(const std::vector<Matrix>& truth, const std::vector<Matrix>& estimate) {
  check_sequences(truth, estimate, "nrmse");
  double acc = 0.0;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    const double denom = truth[t].squaredNorm();
    if (denom == 0.0) throw InvalidArgument("nrmse: truth frame " + std::to_string(t) + " is zero");
    acc += std::sqrt((truth[t] - estimate[t]).squaredNorm() / denom);
  }
  return acc / static_cast<double>(truth.size());
}

double spectral_angle(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw InvalidArgument("spectral angle: zero spectrum");
  // Same angle as acos of the normalized inner product, without its loss of
  // precision near 0 and pi.
  const Vector ua = a / na;
  const Vector ub = b / nb;
  return 2.0 * std::atan2((ua - ub).norm(), (ua + ub).norm());
}

double sam(const std::vector<Matrix>& truth, const std::vector<Matrix>& estimate) {
  check_sequences(truth, estimate, "sam");
  double acc = 0.0;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    for (Index k = 0; k < truth[t].cols(); ++k) {
      acc += spectral_angle(truth[t].col(k), estimate[t].col(k));
    }
  }
  return acc / static_cast<double>(truth.size());
}

std::vector<Index> align_endmembers(const Matrix& truth, const Matrix& estimate) {
  if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols()) {
    throw InvalidArgument("align_endmembers: shape mismatch");
  }
  const Index P = truth.cols();
  Matrix cost(P, P);
  for (Index k = 0; k < P; ++k) {
    for (Index j = 0; j < P; ++j) cost(k, j) = spectral_angle(truth.col(k), estimate.col(j));
  }
  if (P > 8) return hungarian(cost);

  std::vector<Index> perm(static_cast<std::size_t>(P));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::vector<Index> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (Index k = 0; k < P; ++k) c += cost(k, perm[static_cast<std::size_t>(k)]);
    if (c < best_cost) {
      best_cost = c;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Matrix permute_columns(const Matrix& M, const std::vector<Index>& perm) {
  Matrix out(M.rows(), static_cast<Index>(perm.size()));
  for (std::size_t k = 0; k < perm.size(); ++k) out.col(static_cast<Index>(k)) = M.col(perm[k]);
  return out;
}

Matrix permute_rows(const Matrix& A, const std::vector<Index>& perm) {
  Matrix out(static_cast<Index>(perm.size()), A.cols());
  for (std::size_t k = 0; k < perm.size(); ++k) out.row(static_cast<Index>(k)) = A.row(perm[k]);
  return out;
}

Scores score(const std::vector<Matrix>& true_abundances, const std::vector<Matrix>& true_endmembers,
             const std::vector<Matrix>& observed, const std::vector<Matrix>& est_abundances,
             const std::vector<Matrix>& est_endmembers) {
  check_sequences(true_endmembers, est_endmembers, "score (endmembers)");
  check_sequences(true_abundances, est_abundances, "score (abundances)");
  const auto T = static_cast<double>(true_endmembers.size());
  Matrix mean_true = Matrix::Zero(true_endmembers.front().rows(), true_endmembers.front().cols());
  Matrix mean_est = mean_true;
  for (std::size_t t = 0; t < true_endmembers.size(); ++t) {
    mean_true += true_endmembers[t] / T;
    mean_est += est_endmembers[t] / T;
  }

  Scores s;
  s.permutation = align_endmembers(mean_true, mean_est);
  std::vector<Matrix> aligned_m, aligned_a, recon;
  for (std::size_t t = 0; t < est_endmembers.size(); ++t) {
    aligned_m.push_back(permute_columns(est_endmembers[t], s.permutation));
    aligned_a.push_back(permute_rows(est_abundances[t], s.permutation));
    recon.push_back(est_endmembers[t] * est_abundances[t]);
  }
  s.nrmse_a = nrmse(true_abundances, aligned_a);
  s.nrmse_m = nrmse(true_endmembers, aligned_m);
  s.sam_m = sam(true_endmembers, aligned_m);
  s.nrmse_y = nrmse(observed, recon);
  return s;
}

}  // namespace tunmix::metrics
