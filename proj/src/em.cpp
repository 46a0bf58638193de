#include "tunmix/em.hpp"

#include "tunmix/kron.hpp"
#include "tunmix/spd.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace tunmix::em {

using kalman::Belief;

void EmParams::validate(Index L) const {
  const Index P = A.rows();
  const Index n = P * L;
  if (P < 1 || A.cols() < 1) throw InvalidArgument("EmParams: empty abundance matrix");
  if (P00.rows() != n || P00.cols() != n) throw InvalidArgument("EmParams: P00 must be PL x PL");
  if (Q.rows() != n || Q.cols() != n) throw InvalidArgument("EmParams: Q must be PL x PL");
  if (psi00.size() != n) throw InvalidArgument("EmParams: psi00 must have length PL");
  if (!(sigma_r2 > 0.0) || !std::isfinite(sigma_r2)) {
    throw InvalidArgument("EmParams: sigma_r2 must be positive and finite");
  }
}

std::vector<Vector> vectorize_frames(std::span<const Matrix> frames) {
  std::vector<Vector> ys;
  ys.reserve(frames.size());
  for (const auto& Y : frames) ys.emplace_back(Eigen::Map<const Vector>(Y.data(), Y.size()));
  return ys;
}

kalman::StateSpaceModel make_model(const EmParams& theta, const Matrix& M0) {
  return {ObservationOperator::glmm(theta.A, M0), theta.Q, theta.sigma_r2};
}

Belief initial_belief(const EmParams& theta) { return Belief{theta.psi00, theta.P00, 0}; }

SufficientStats accumulate_stats(const kalman::Trajectory& traj, std::span<const Matrix> frames,
                                 const Matrix& M0, StatsOptions options) {
  const Index T = traj.length();
  if (!traj.is_smoothed()) throw InvalidArgument("accumulate_stats: trajectory is not smoothed");
  if (static_cast<Index>(frames.size()) != T) {
    throw InvalidArgument("accumulate_stats: " + std::to_string(frames.size()) +
                          " frames for a trajectory of length " + std::to_string(T));
  }
  const Index L = M0.rows();
  const Index P = M0.cols();
  const Index n = L * P;
  if (traj.initial.mean.size() != n) {
    throw InvalidArgument("accumulate_stats: state length does not match M0");
  }

  SufficientStats s;
  s.T = T;
  s.L = L;
  s.P = P;
  s.N = frames.front().cols();
  s.sigma1 = Matrix::Zero(n, n);
  s.sigma2 = Matrix::Zero(n, n);
  s.sigma4 = Matrix::Zero(n, n);
  s.cross_traces = Matrix::Zero(s.N, P);
  if (options.keep_sigma3) s.sigma3 = Matrix::Zero(s.N * L, n);

  for (Index k = 0; k < T; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    const Belief& cur = traj.smoothed[uk];
    const Belief& prev = k == 0 ? traj.smoothed_initial : traj.smoothed[uk - 1];
    const Matrix& gain_prev = traj.smoother_gains[uk];
    const Matrix& Y = frames[uk];
    if (Y.rows() != L || Y.cols() != s.N) {
      throw InvalidArgument("accumulate_stats: frame " + std::to_string(k) + " has wrong shape");
    }

    s.sigma1 += cur.cov;
    s.sigma1.noalias() += cur.mean * cur.mean.transpose();
    s.sigma2 += prev.cov;
    s.sigma2.noalias() += prev.mean * prev.mean.transpose();
    s.sigma4.noalias() += cur.cov * gain_prev.transpose();
    s.sigma4.noalias() += cur.mean * prev.mean.transpose();

    const Matrix Mt = M0.cwiseProduct(Eigen::Map<const Matrix>(cur.mean.data(), L, P));
    s.cross_traces.noalias() += Y.transpose() * Mt;
    s.sigma5_trace += Y.squaredNorm();
    if (s.sigma3) {
      s.sigma3->noalias() += Eigen::Map<const Vector>(Y.data(), Y.size()) * cur.mean.transpose();
    }
  }
  spd::symmetrize(s.sigma1);
  spd::symmetrize(s.sigma2);

  const Vector m0 = Eigen::Map<const Vector>(M0.data(), M0.size());
  const Matrix sigma1_tilde = m0.asDiagonal() * s.sigma1 * m0.asDiagonal();
  s.gram_traces = kron::block_trace_gram(sigma1_tilde, L, P);
  return s;
}

namespace {

// tr{B sigma1 B^T} = tr{A A^T T_b}; tr{B sigma3^T} = sum A(p, n) U(n, p).
double fit_trace(const Matrix& A, const SufficientStats& stats) {
  return (A * A.transpose()).cwiseProduct(stats.gram_traces.transpose()).sum();
}

double cross_trace(const Matrix& A, const SufficientStats& stats) {
  return A.cwiseProduct(stats.cross_traces.transpose()).sum();
}

void check_abundance_shape(const Matrix& A, const SufficientStats& stats) {
  if (A.rows() != stats.P || A.cols() != stats.N) {
    throw InvalidArgument("abundance matrix must be " + std::to_string(stats.P) + "x" +
                          std::to_string(stats.N));
  }
}

}  // namespace

double abundance_cost(const Matrix& A, const SufficientStats& stats) {
  check_abundance_shape(A, stats);
  return fit_trace(A, stats) - 2.0 * cross_trace(A, stats);
}

double q_function(const EmParams& theta, const SufficientStats& stats, const Belief& smoothed0) {
  theta.validate(stats.L);
  check_abundance_shape(theta.A, stats);
  const double T = static_cast<double>(stats.T);
  const double n_obs = static_cast<double>(stats.N * stats.L);

  const Vector d = smoothed0.mean - theta.psi00;
  Matrix X0 = smoothed0.cov;
  X0.noalias() += d * d.transpose();
  const auto p00 = spd::factor(theta.P00, "P00 (Q function)");
  const double init_term = p00.solve(X0).trace() + spd::log_det(p00);

  const double residual =
      stats.sigma5_trace - 2.0 * cross_trace(theta.A, stats) + fit_trace(theta.A, stats);
  const double obs_term = residual / theta.sigma_r2 + T * n_obs * std::log(theta.sigma_r2);

  const Matrix XQ = stats.sigma1 - stats.sigma4 - stats.sigma4.transpose() + stats.sigma2;
  const auto q = spd::factor(theta.Q, "Q (Q function)");
  const double dyn_term = q.solve(XQ).trace() + T * spd::log_det(q);

  return -0.5 * (init_term + obs_term + dyn_term);
}

Matrix m_step_p00(const Belief& smoothed0, const Vector& psi00_old) {
  const Vector d = smoothed0.mean - psi00_old;
  Matrix out = smoothed0.cov;
  out.noalias() += d * d.transpose();
  spd::symmetrize(out);
  return out;
}

Matrix m_step_q(const SufficientStats& stats, Index* clipped) {
  if (stats.T < 1) throw InvalidArgument("m_step_q: T must be at least 1");
  Matrix Q = (stats.sigma1 - stats.sigma4 - stats.sigma4.transpose() + stats.sigma2) /
             static_cast<double>(stats.T);
  const Index n = spd::clip_to_psd(Q);
  if (clipped) *clipped = n;
  return Q;
}

double m_step_sigma(const SufficientStats& stats, const Matrix& A) {
  check_abundance_shape(A, stats);
  const double residual =
      stats.sigma5_trace - 2.0 * cross_trace(A, stats) + fit_trace(A, stats);
  const double denom = static_cast<double>(stats.T * stats.L * stats.N);
  return std::max(residual / denom, 1e-12);
}

Vector m_step_psi00(const Belief& smoothed0) { return smoothed0.mean; }

Matrix m_step_abundance(const SufficientStats& stats) {
  Matrix normal = stats.gram_traces + stats.gram_traces.transpose();
  spd::symmetrize(normal);
  const auto llt = spd::factor(normal, "abundance normal matrix");
  return llt.solve(2.0 * stats.cross_traces.transpose());
}

namespace {

// A singular Q or P00 (e.g. a zero process-noise start) sends Q to -inf.
double q_or_neg_inf(const EmParams& theta, const SufficientStats& stats, const Belief& s0) {
  try {
    return q_function(theta, stats, s0);
  } catch (const NumericalError&) {
    return -std::numeric_limits<double>::infinity();
  }
}

}  // namespace

EmStep em_iterate(std::span<const Matrix> frames, const Matrix& M0, const EmParams& theta) {
  theta.validate(M0.rows());
  const auto ys = vectorize_frames(frames);
  const auto model = make_model(theta, M0);

  EmStep step;
  step.trajectory = kalman::rts_smooth(kalman::filter(ys, model, initial_belief(theta)), theta.Q);
  step.loglik = step.trajectory.loglik();

  const auto stats = accumulate_stats(step.trajectory, frames, M0);
  const Belief& s0 = step.trajectory.smoothed_initial;

  EmParams next;
  next.A = m_step_abundance(stats);
  next.sigma_r2 = m_step_sigma(stats, next.A);
  next.Q = m_step_q(stats, &step.q_clipped);
  next.P00 = m_step_p00(s0, theta.psi00);
  next.psi00 = m_step_psi00(s0);

  step.q_before = q_or_neg_inf(theta, stats, s0);
  step.q_after = q_or_neg_inf(next, stats, s0);
  step.next = std::move(next);
  return step;
}

}  // namespace tunmix::em
