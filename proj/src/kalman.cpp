#include "tunmix/kalman.hpp"

#include "tunmix/kron.hpp"
#include "tunmix/spd.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace tunmix::kalman {

Belief predict(const Belief& prior, const Matrix& Q) {
  Belief out{prior.mean, prior.cov + Q, prior.t + 1};
  spd::symmetrize(out.cov);
  return out;
}

UpdateResult update(const Belief& pred, const Vector& y, const StateSpaceModel& model) {
  const auto& B = model.observation;
  if (pred.mean.size() != B.state_dim() || y.size() != B.obs_dim()) {
    throw InvalidArgument("kalman update: dimension mismatch (state " +
                          std::to_string(pred.mean.size()) + " vs " +
                          std::to_string(B.state_dim()) + ", obs " + std::to_string(y.size()) +
                          " vs " + std::to_string(B.obs_dim()) + ")");
  }
  const double s2 = model.sigma_r2;
  const auto inner = kron::woodbury_inner(
      pred.cov, [&B](const Matrix& X) -> Matrix { return B.gram_apply(X); }, s2);

  UpdateResult out;
  out.innovation = y - B.apply(pred.mean);
  const Vector b = B.apply_transpose(out.innovation);
  const Vector Jb = inner.inverse * b;

  // B^T S^{-1} v
  const Vector gain_v = b / s2 - B.gram_apply(Jb).col(0) / (s2 * s2);
  out.posterior.mean = pred.mean + pred.cov * gain_v;
  // P - P B^T S^{-1} B P equals the Woodbury inner inverse.
  out.posterior.cov = inner.inverse;
  out.posterior.t = pred.t;

  const double n_obs = static_cast<double>(y.size());
  const double quad = out.innovation.squaredNorm() / s2 - b.dot(Jb) / (s2 * s2);
  const double log_det_S = n_obs * std::log(s2) + inner.log_det;
  out.loglik_increment =
      -0.5 * (n_obs * std::log(2.0 * std::numbers::pi) + log_det_S + quad);
  return out;
}

double Trajectory::loglik() const {
  return std::accumulate(loglik_increments.begin(), loglik_increments.end(), 0.0);
}

Trajectory filter(std::span<const Vector> ys, const StateSpaceModel& model,
                  const Belief& initial) {
  if (ys.empty()) throw InvalidArgument("kalman filter: empty observation sequence");
  Trajectory traj;
  traj.initial = initial;
  traj.initial.t = 0;
  Belief current = traj.initial;
  for (const auto& y : ys) {
    Belief pred = predict(current, model.Q);
    auto upd = update(pred, y, model);
    traj.predicted.push_back(std::move(pred));
    traj.innovations.push_back(std::move(upd.innovation));
    traj.loglik_increments.push_back(upd.loglik_increment);
    current = upd.posterior;
    traj.filtered.push_back(std::move(upd.posterior));
  }
  return traj;
}

namespace {

// One backward step: returns the gain and writes the smoothed belief of the
// earlier state.
Matrix smooth_step(const Belief& filt, const Belief& next_pred, const Belief& next_smooth,
                   Belief& out) {
  const auto llt = spd::factor(next_pred.cov, "predicted covariance (smoother)");
  // G = P_f P_pred^{-1} with both symmetric: G^T = P_pred^{-1} P_f.
  const Matrix G = llt.solve(filt.cov).transpose();
  out.t = filt.t;
  out.mean = filt.mean + G * (next_smooth.mean - next_pred.mean);
  out.cov = filt.cov;
  out.cov.noalias() += G * (next_smooth.cov - next_pred.cov) * G.transpose();
  spd::symmetrize(out.cov);
  return G;
}

}  // namespace

Trajectory rts_smooth(Trajectory traj, const Matrix& /*Q*/) {
  const Index T = traj.length();
  if (T < 1 || static_cast<Index>(traj.predicted.size()) != T) {
    throw InvalidArgument("rts_smooth: trajectory is incomplete");
  }
  const auto n = static_cast<std::size_t>(T);
  traj.smoothed.assign(n, Belief{});
  traj.smoother_gains.assign(n, Matrix{});
  traj.smoothed[n - 1] = traj.filtered[n - 1];
  for (std::size_t k = n - 1; k-- > 0;) {
    traj.smoother_gains[k + 1] =
        smooth_step(traj.filtered[k], traj.predicted[k + 1], traj.smoothed[k + 1], traj.smoothed[k]);
  }
  traj.smoother_gains[0] =
      smooth_step(traj.initial, traj.predicted[0], traj.smoothed[0], traj.smoothed_initial);
  return traj;
}

double marginal_loglik(std::span<const Vector> ys, const StateSpaceModel& model,
                       const Belief& initial) {
  return filter(ys, model, initial).loglik();
}

}  // namespace tunmix::kalman
