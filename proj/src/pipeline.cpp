#include "tunmix/pipeline.hpp"

#include "tunmix/fcls.hpp"
#include "tunmix/hseq_io.hpp"

#include <cmath>
#include <string>

namespace tunmix::pipeline {

void PipelineConfig::validate() const {
  if (max_iters < 1) throw InvalidArgument("pipeline: K_max must be at least 1");
  if (!(lambda >= 0.0)) throw InvalidArgument("pipeline: lambda must be nonnegative");
}

em::EmParams default_init(Index L, Index N, Index P, const Matrix& A0) {
  if (A0.rows() != P || A0.cols() != N) {
    throw InvalidArgument("default_init: A0 must be " + std::to_string(P) + "x" +
                          std::to_string(N));
  }
  const Index n = L * P;
  em::EmParams theta;
  theta.A = A0;
  theta.psi00 = Vector::Ones(n);
  theta.Q = 0.1 * Matrix::Identity(n, n);
  theta.sigma_r2 = 0.01 * 0.01;
  theta.P00 = Matrix::Identity(n, n);
  return theta;
}

Matrix initial_abundances(const HsiSequence& seq, const GlmmModel& model) {
  return fcls::fcls_refine_frame(seq.frame(0), model.M0(), std::nullopt, 0.0);
}

namespace {

bool all_finite(const em::EmParams& theta) {
  return theta.A.allFinite() && theta.P00.allFinite() && theta.Q.allFinite() &&
         std::isfinite(theta.sigma_r2) && theta.psi00.allFinite();
}

bool all_finite(const kalman::Trajectory& traj) {
  for (const auto& b : traj.smoothed) {
    if (!b.mean.allFinite()) return false;
  }
  return std::isfinite(traj.loglik());
}

}  // namespace

UnmixResult run_kalman_em(const HsiSequence& seq, const GlmmModel& model,
                          const PipelineConfig& config) {
  config.validate();
  const Index L = seq.bands();
  const Index N = seq.pixels();
  const Index P = model.endmember_count();
  const Index T = seq.frame_count();
  if (model.bands() != L) {
    throw InvalidArgument("pipeline: M0 has L=" + std::to_string(model.bands()) +
                          ", sequence has L=" + std::to_string(L));
  }
  const Matrix& M0 = model.M0();

  em::EmParams theta =
      config.init ? *config.init : default_init(L, N, P, initial_abundances(seq, model));
  theta.validate(L);

  UnmixResult result;
  const auto& frames = seq.frames();
  for (int i = 1; i <= config.max_iters; ++i) {
    em::EmStep step;
    try {
      step = em::em_iterate(frames, M0, theta);
    } catch (const NumericalError& e) {
      throw NumericalError("EM iteration " + std::to_string(i) + ": " + e.what());
    }
    if (!all_finite(step.trajectory) || !all_finite(step.next)) {
      throw NumericalError("EM iteration " + std::to_string(i) + ": non-finite state estimates");
    }
    result.iterations.push_back(IterationDiagnostics{i, step.loglik, step.q_before, step.q_after,
                                                     step.next.sigma_r2, step.q_clipped});
    theta = std::move(step.next);
  }

  // Final E-step under theta^(K).
  const auto ys = em::vectorize_frames(frames);
  kalman::Trajectory traj;
  try {
    traj = kalman::rts_smooth(
        kalman::filter(ys, em::make_model(theta, M0), em::initial_belief(theta)), theta.Q);
  } catch (const NumericalError& e) {
    throw NumericalError("final smoothing pass after EM iteration " +
                         std::to_string(config.max_iters) + ": " + e.what());
  }
  if (!all_finite(traj)) {
    throw NumericalError("final smoothing pass after EM iteration " +
                         std::to_string(config.max_iters) + ": non-finite state estimates");
  }
  result.final_loglik = traj.loglik();

  for (Index t = 0; t < T; ++t) {
    const Vector& psi = traj.smoothed[static_cast<std::size_t>(t)].mean;
    result.psi.push_back(psi);
    Matrix Psi = io::devectorize(psi, L, P);
    if (config.clamp_psi_nonneg) {
      result.clamped_entries += (Psi.array() < 0.0).count();
      Psi = Psi.cwiseMax(0.0);
    }
    Matrix Mt = M0.cwiseProduct(Psi);
    result.abundances.push_back(
        fcls::fcls_refine_frame(seq.frame(t), Mt, theta.A, config.lambda));
    result.endmembers.push_back(std::move(Mt));
  }
  result.theta_final = std::move(theta);
  return result;
}

}  // namespace tunmix::pipeline
