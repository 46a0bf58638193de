#pragma once

#include "tunmix/types.hpp"

#include <cstdint>
#include <vector>

namespace tunmix::vca {

struct VcaResult {
  Matrix endmembers;              // L x P, columns copied from Y
  std::vector<Index> indices;     // selected pixel per endmember
  double snr_estimate_db = 0.0;
  bool projective = false;        // true when the high-SNR projection was used
};

// Vertex component analysis. Deterministic for a given seed. Throws
// RankDeficiencyError if Y does not have numerical rank >= P.
VcaResult vca_extract(const Matrix& Y, Index P, std::uint64_t seed);

}  // namespace tunmix::vca
