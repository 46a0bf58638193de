#pragma once

#include "tunmix/kalman.hpp"
#include "tunmix/types.hpp"

#include <optional>
#include <span>

namespace tunmix::em {

// theta = {A, P_{0|0}, Q, sigma_r^2, psi_{0|0}}.
struct EmParams {
  Matrix A;       // P x N average abundances
  Matrix P00;     // PL x PL
  Matrix Q;       // PL x PL
  double sigma_r2 = 1e-4;
  Vector psi00;   // PL

  // Throws InvalidArgument on inconsistent shapes or non-positive variance.
  void validate(Index L) const;
};

// Smoother moments summed over t = 1..T:
//   sigma1 = sum P_t^s + psi_t psi_t^T
//   sigma2 = sum P_{t-1}^s + psi_{t-1} psi_{t-1}^T      (t-1 = 0 is the initial state)
//   sigma4 = sum P_t^s G_{t-1}^T + psi_t psi_{t-1}^T
//   sigma3 = sum y_t psi_t^T                            (kept only on request)
//   sigma5_trace = sum y_t^T y_t
// gram_traces and cross_traces are the L x L block traces of
// diag(m0) sigma1 diag(m0) and sigma3 diag(m0).
struct SufficientStats {
  Index T = 0;
  Index L = 0;
  Index N = 0;
  Index P = 0;
  Matrix sigma1;
  Matrix sigma2;
  Matrix sigma4;
  std::optional<Matrix> sigma3;
  double sigma5_trace = 0.0;
  Matrix gram_traces;   // P x P
  Matrix cross_traces;  // N x P
};

struct StatsOptions {
  bool keep_sigma3 = false;
};

// Frames are L x N; the trajectory must be smoothed.
SufficientStats accumulate_stats(const kalman::Trajectory& traj, std::span<const Matrix> frames,
                                 const Matrix& M0, StatsOptions options = {});

// Expected complete-data log-likelihood with the additive constant dropped,
// using B = H(A) diag(m0) in place of H(A).
double q_function(const EmParams& theta, const SufficientStats& stats,
                  const kalman::Belief& smoothed0);

// tr{B sigma1 B^T} - 2 tr{B sigma3^T} as a function of A.
double abundance_cost(const Matrix& A, const SufficientStats& stats);

Matrix m_step_p00(const kalman::Belief& smoothed0, const Vector& psi00_old);
// (sigma1 - sigma4 - sigma4^T + sigma2) / T, floored to PSD. `clipped`
// receives the number of eigenvalues raised to zero.
Matrix m_step_q(const SufficientStats& stats, Index* clipped = nullptr);
// tr{sigma5 - 2 B sigma3^T + B sigma1 B^T} / (T L N), floored at 1e-12.
double m_step_sigma(const SufficientStats& stats, const Matrix& A);
Vector m_step_psi00(const kalman::Belief& smoothed0);
// (T_b + T_b^T)^{-1} 2 U^T; unconstrained.
Matrix m_step_abundance(const SufficientStats& stats);

// State-space model and initial belief implied by theta for reference M0.
kalman::StateSpaceModel make_model(const EmParams& theta, const Matrix& M0);
kalman::Belief initial_belief(const EmParams& theta);
std::vector<Vector> vectorize_frames(std::span<const Matrix> frames);

struct EmStep {
  EmParams next;
  kalman::Trajectory trajectory;  // smoothed under the incoming theta
  double loglik = 0.0;            // log p(y | incoming theta)
  double q_before = 0.0;          // Q(theta_k | theta_k)
  double q_after = 0.0;           // Q(theta_{k+1} | theta_k)
  Index q_clipped = 0;
};

EmStep em_iterate(std::span<const Matrix> frames, const Matrix& M0, const EmParams& theta);

}  // namespace tunmix::em
