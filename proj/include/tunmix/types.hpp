#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tunmix {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Error hierarchy. The CLI maps each family onto an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments, inconsistent shapes, violated preconditions.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Missing files, short reads, unwritable paths.
class IoError : public Error {
 public:
  using Error::Error;
};

// Manifest content that cannot be interpreted.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Factorization failure after the jitter retry, NaN states.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class RankDeficiencyError : public Error {
 public:
  RankDeficiencyError(const std::string& what, Index achieved)
      : Error(what), achieved_rank(achieved) {}
  Index achieved_rank;
};

// Observed image sequence: T frames of L bands by N pixels.
class HsiSequence {
 public:
  HsiSequence() = default;
  explicit HsiSequence(std::vector<Matrix> frames,
                       std::optional<std::vector<double>> wavelengths = std::nullopt);

  Index bands() const { return frames_.empty() ? 0 : frames_.front().rows(); }
  Index pixels() const { return frames_.empty() ? 0 : frames_.front().cols(); }
  Index frame_count() const { return static_cast<Index>(frames_.size()); }

  const Matrix& frame(Index t) const { return frames_.at(static_cast<std::size_t>(t)); }
  const std::vector<Matrix>& frames() const { return frames_; }
  const std::optional<std::vector<double>>& wavelengths() const { return wavelengths_; }

 private:
  std::vector<Matrix> frames_;
  std::optional<std::vector<double>> wavelengths_;
};

// Reference endmembers M0 (L x P) and their column-stacked vectorization m0.
class GlmmModel {
 public:
  GlmmModel() = default;
  explicit GlmmModel(Matrix M0);

  const Matrix& M0() const { return M0_; }
  const Vector& m0() const { return m0_; }
  Index bands() const { return M0_.rows(); }
  Index endmember_count() const { return M0_.cols(); }

 private:
  Matrix M0_;
  Vector m0_;
};

// Throws InvalidArgument naming the first non-finite entry.
void require_finite(const Matrix& X, const std::string& what);

}  // namespace tunmix
