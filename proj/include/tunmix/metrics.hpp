#pragma once

#include "tunmix/types.hpp"

#include <vector>

namespace tunmix::metrics {

// (1/T) sum_t ||X_t - X_t*||_F / ||X_t||_F
double nrmse(const std::vector<Matrix>& truth, const std::vector<Matrix>& estimate);

// (1/T) sum_t sum_k angle(m_{k,t}, m*_{k,t}) in radians.
double sam(const std::vector<Matrix>& truth, const std::vector<Matrix>& estimate);

double spectral_angle(const Vector& a, const Vector& b);

// perm[k] is the estimate column matched to truth column k, minimizing the
// total spectral angle. Exhaustive for P <= 8, Hungarian assignment beyond.
std::vector<Index> align_endmembers(const Matrix& truth, const Matrix& estimate);

Matrix permute_columns(const Matrix& M, const std::vector<Index>& perm);
Matrix permute_rows(const Matrix& A, const std::vector<Index>& perm);

struct Scores {
  double nrmse_a = 0.0;
  double nrmse_m = 0.0;
  double sam_m = 0.0;
  double nrmse_y = 0.0;
  std::vector<Index> permutation;
};

// Aligns the estimate to the truth using time-averaged endmembers, then scores
// abundances, endmembers and the reconstruction M_t* A_t* against `observed`.
Scores score(const std::vector<Matrix>& true_abundances, const std::vector<Matrix>& true_endmembers,
             const std::vector<Matrix>& observed, const std::vector<Matrix>& est_abundances,
             const std::vector<Matrix>& est_endmembers);

}  // namespace tunmix::metrics
