#pragma once

#include "tunmix/observation.hpp"
#include "tunmix/types.hpp"

#include <span>
#include <vector>

namespace tunmix::kalman {

// Gaussian belief over the state psi (length PL). `t` is 0 for the initial
// belief and 1..T for frames.
struct Belief {
  Vector mean;
  Matrix cov;
  Index t = 0;
};

// Random-walk state model psi_t = psi_{t-1} + q_t, q_t ~ N(0, Q), observed as
// y_t = B psi_t + r_t with r_t ~ N(0, sigma_r2 I).
struct StateSpaceModel {
  ObservationOperator observation;
  Matrix Q;
  double sigma_r2 = 1.0;
};

struct UpdateResult {
  Belief posterior;
  Vector innovation;
  double loglik_increment = 0.0;
};

Belief predict(const Belief& prior, const Matrix& Q);

// Kalman update with B^T S^{-1} evaluated through the Woodbury identity; all
// factorizations are PL x PL.
UpdateResult update(const Belief& pred, const Vector& y, const StateSpaceModel& model);

struct Trajectory {
  Belief initial;                       // psi_{0|0}, P_{0|0}
  std::vector<Belief> predicted;        // t = 1..T
  std::vector<Belief> filtered;         // t = 1..T
  std::vector<Belief> smoothed;         // t = 1..T, empty until rts_smooth
  Belief smoothed_initial;              // psi_0^s, P_0^s
  // gains[k] = P_{k|k} P_{k+1|k}^{-1} for k = 0..T-1 (k = 0 is the initial state).
  std::vector<Matrix> smoother_gains;
  std::vector<Vector> innovations;
  std::vector<double> loglik_increments;

  Index length() const { return static_cast<Index>(filtered.size()); }
  bool is_smoothed() const { return !smoothed.empty(); }
  double loglik() const;
};

Trajectory filter(std::span<const Vector> ys, const StateSpaceModel& model, const Belief& initial);

// Rauch-Tung-Striebel backward pass, extended one step to the initial state.
Trajectory rts_smooth(Trajectory traj, const Matrix& Q);

// Prediction-error decomposition of log p(y_1..y_T).
double marginal_loglik(std::span<const Vector> ys, const StateSpaceModel& model,
                       const Belief& initial);

}  // namespace tunmix::kalman
