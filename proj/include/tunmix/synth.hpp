#pragma once

#include "tunmix/types.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace tunmix::synth {

struct SynthConfig {
  Index L = 173;
  Index N = 50;
  Index T = 10;
  Index P = 3;
  std::vector<double> dirichlet_alpha;  // empty means all ones
  double F_scale = 0.9;                 // generator transition psi_t = F psi_{t-1} + q_t
  double q_var = 0.01;
  double snr_db = 30.0;                 // +inf disables noise
  double abundance_jitter_std = 3e-3;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct GroundTruth {
  Matrix base_abundances;             // P x N
  std::vector<Matrix> abundances;     // A_t, P x N
  std::vector<Matrix> endmembers;     // M_t = M0 .* Psi_t, L x P
  std::vector<Vector> psi;            // psi_t, length PL
  std::vector<Matrix> clean;          // M_t A_t
  std::vector<Matrix> noisy;          // clean + E_t
  double noise_variance = 0.0;
};

// Frames t = 1..T follow psi_0 = 1, psi_t = F psi_{t-1} + q_t, q_t ~ N(0, q_var I);
// A_t = proj_simplex(A + dA_t) with A ~ Dirichlet(alpha) per pixel; noise is
// white Gaussian scaled to the sequence-wide SNR.
std::pair<HsiSequence, GroundTruth> generate(const SynthConfig& config, const Matrix& M0);

// Smooth nonnegative stand-in spectra: a baseline plus a few Gaussian bumps
// per endmember, deterministic in `seed`.
Matrix smooth_endmembers(Index L, Index P, std::uint64_t seed);

double empirical_snr_db(const std::vector<Matrix>& clean, const std::vector<Matrix>& noisy);

// Mean over (p, n) of the sample standard deviation of A_t(p, n) across t.
double abundance_temporal_std(const std::vector<Matrix>& abundances);

}  // namespace tunmix::synth
