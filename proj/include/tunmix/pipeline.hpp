#pragma once

#include "tunmix/em.hpp"
#include "tunmix/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace tunmix::pipeline {

struct PipelineConfig {
  int max_iters = 5;
  double lambda = 1e-8;
  // When absent, default_init is used with FCLS abundances of the first frame.
  std::optional<em::EmParams> init;
  bool clamp_psi_nonneg = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct IterationDiagnostics {
  int iteration = 0;        // 1-based
  double loglik = 0.0;      // log p(y | theta before this iteration)
  double q_before = 0.0;
  double q_after = 0.0;
  double sigma_r2 = 0.0;    // after the M-step
  Index q_clipped = 0;
};

struct UnmixResult {
  std::vector<Matrix> abundances;   // T x (P x N), simplex columns
  std::vector<Matrix> endmembers;   // T x (L x P), M0 .* Psi_t^s
  std::vector<Vector> psi;          // T x PL smoothed means (before clamping)
  em::EmParams theta_final;
  std::vector<IterationDiagnostics> iterations;
  double final_loglik = 0.0;        // log p(y | theta_final)
  Index clamped_entries = 0;
};

// theta^(0): psi00 = 1, Q = 0.1 I, sigma_r = 0.01 (sigma_r2 = 1e-4), P00 = I, A = A0.
em::EmParams default_init(Index L, Index N, Index P, const Matrix& A0);

// FCLS abundances of the first frame against M0.
Matrix initial_abundances(const HsiSequence& seq, const GlmmModel& model);

UnmixResult run_kalman_em(const HsiSequence& seq, const GlmmModel& model,
                          const PipelineConfig& config);

}  // namespace tunmix::pipeline
