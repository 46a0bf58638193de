#include "tunmix/synth.hpp"

#include "tunmix/fcls.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace tunmix::synth {

void SynthConfig::validate() const {
  if (L < 1 || N < 1 || T < 1 || P < 1) throw InvalidArgument("synth: counts must be >= 1");
  if (!dirichlet_alpha.empty()) {
    if (static_cast<Index>(dirichlet_alpha.size()) != P) {
      throw InvalidArgument("synth: dirichlet_alpha must have P entries");
    }
    for (double a : dirichlet_alpha) {
      if (!(a > 0.0)) throw InvalidArgument("synth: dirichlet_alpha entries must be positive");
    }
  }
  if (!(F_scale > 0.0 && F_scale <= 1.0)) throw InvalidArgument("synth: F_scale must be in (0, 1]");
  if (!(q_var >= 0.0)) throw InvalidArgument("synth: q_var must be nonnegative");
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
    throw InvalidArgument("synth: snr_db must be finite or +inf");
  }
  if (!(abundance_jitter_std >= 0.0)) throw InvalidArgument("synth: jitter std must be >= 0");
}

std::pair<HsiSequence, GroundTruth> generate(const SynthConfig& cfg, const Matrix& M0) {
  cfg.validate();
  if (M0.rows() != cfg.L || M0.cols() != cfg.P) {
    throw InvalidArgument("synth: M0 is " + std::to_string(M0.rows()) + "x" +
                          std::to_string(M0.cols()) + ", config wants " + std::to_string(cfg.L) +
                          "x" + std::to_string(cfg.P));
  }
  const Index L = cfg.L, N = cfg.N, T = cfg.T, P = cfg.P;
  std::mt19937_64 rng(cfg.rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  GroundTruth gt;
  gt.base_abundances.resize(P, N);
  std::vector<std::gamma_distribution<double>> gammas;
  for (Index p = 0; p < P; ++p) {
    const double alpha = cfg.dirichlet_alpha.empty() ? 1.0 : cfg.dirichlet_alpha[static_cast<std::size_t>(p)];
    gammas.emplace_back(alpha, 1.0);
  }
  for (Index n = 0; n < N; ++n) {
    for (Index p = 0; p < P; ++p) gt.base_abundances(p, n) = gammas[static_cast<std::size_t>(p)](rng);
    const double s = gt.base_abundances.col(n).sum();
    if (s > 0.0) {
      gt.base_abundances.col(n) /= s;
    } else {
      gt.base_abundances.col(n).setConstant(1.0 / static_cast<double>(P));
    }
  }

  const double q_std = std::sqrt(cfg.q_var);
  Vector psi = Vector::Ones(L * P);
  double signal_power = 0.0;
  for (Index t = 0; t < T; ++t) {
    for (Index i = 0; i < psi.size(); ++i) psi(i) = cfg.F_scale * psi(i) + q_std * gauss(rng);
    Matrix At = gt.base_abundances;
    if (cfg.abundance_jitter_std > 0.0) {
      for (Index n = 0; n < N; ++n) {
        for (Index p = 0; p < P; ++p) At(p, n) += cfg.abundance_jitter_std * gauss(rng);
        At.col(n) = fcls::project_simplex(At.col(n));
      }
    }
    Matrix Mt = M0.cwiseProduct(Eigen::Map<const Matrix>(psi.data(), L, P));
    Matrix clean = Mt * At;
    signal_power += clean.squaredNorm();
    gt.psi.push_back(psi);
    gt.abundances.push_back(std::move(At));
    gt.endmembers.push_back(std::move(Mt));
    gt.clean.push_back(std::move(clean));
  }

  const double count = static_cast<double>(L * N * T);
  gt.noise_variance = std::isinf(cfg.snr_db)
                          ? 0.0
                          : signal_power / (count * std::pow(10.0, cfg.snr_db / 10.0));
  const double noise_std = std::sqrt(gt.noise_variance);
  for (Index t = 0; t < T; ++t) {
    Matrix Y = gt.clean[static_cast<std::size_t>(t)];
    if (noise_std > 0.0) {
      for (Index n = 0; n < N; ++n) {
        for (Index l = 0; l < L; ++l) Y(l, n) += noise_std * gauss(rng);
      }
    }
    gt.noisy.push_back(std::move(Y));
  }
  return {HsiSequence(gt.noisy), std::move(gt)};
}

Matrix smooth_endmembers(Index L, Index P, std::uint64_t seed) {
  if (L < 1 || P < 1) throw InvalidArgument("smooth_endmembers: counts must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix M(L, P);
  const double span = static_cast<double>(std::max<Index>(L - 1, 1));
  for (Index p = 0; p < P; ++p) {
    const double base = 0.05 + 0.15 * unit(rng);
    const double slope = 0.2 * (unit(rng) - 0.5);
    const int bumps = 3;
    std::vector<double> centers, widths, heights;
    for (int b = 0; b < bumps; ++b) {
      centers.push_back(unit(rng));
      widths.push_back(0.05 + 0.15 * unit(rng));
      heights.push_back(0.1 + 0.5 * unit(rng));
    }
    for (Index l = 0; l < L; ++l) {
      const double x = static_cast<double>(l) / span;
      double v = base + slope * x;
      for (int b = 0; b < bumps; ++b) {
        const double z = (x - centers[static_cast<std::size_t>(b)]) / widths[static_cast<std::size_t>(b)];
        v += heights[static_cast<std::size_t>(b)] * std::exp(-0.5 * z * z);
      }
      M(l, p) = std::max(v, 0.01);
    }
  }
  return M;
}

double empirical_snr_db(const std::vector<Matrix>& clean, const std::vector<Matrix>& noisy) {
  if (clean.size() != noisy.size()) throw InvalidArgument("empirical_snr_db: length mismatch");
  double signal = 0.0, noise = 0.0;
  for (std::size_t t = 0; t < clean.size(); ++t) {
    signal += clean[t].squaredNorm();
    noise += (noisy[t] - clean[t]).squaredNorm();
  }
  if (noise == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / noise);
}

double abundance_temporal_std(const std::vector<Matrix>& abundances) {
  if (abundances.size() < 2) return 0.0;
  const auto T = static_cast<double>(abundances.size());
  Matrix mean = Matrix::Zero(abundances.front().rows(), abundances.front().cols());
  for (const auto& A : abundances) mean += A;
  mean /= T;
  Matrix var = Matrix::Zero(mean.rows(), mean.cols());
  for (const auto& A : abundances) var += (A - mean).cwiseAbs2();
  var /= (T - 1.0);
  return var.cwiseSqrt().mean();
}

}  // namespace tunmix::synth
