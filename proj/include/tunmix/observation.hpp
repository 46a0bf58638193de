#pragma once

#include "tunmix/types.hpp"

#include <variant>

namespace tunmix {

// Linear observation map y = B psi. Either the structured GLMM operator
// B = (A^T (x) I_L) diag(m0), applied without materializing B, or an explicit
// dense matrix (used by oracles and generic tests).
class ObservationOperator {
 public:
  static ObservationOperator glmm(Matrix A, Matrix M0);
  static ObservationOperator dense(Matrix B);

  Index state_dim() const;
  Index obs_dim() const;

  Vector apply(const Vector& psi) const;
  Vector apply_transpose(const Vector& y) const;
  // (B^T B) X for X with state_dim() rows.
  Matrix gram_apply(const Matrix& X) const;
  Matrix gram() const;
  Matrix to_dense() const;

  bool is_structured() const { return std::holds_alternative<Structured>(rep_); }

 private:
  struct Structured {
    Matrix A;      // P x N
    Matrix M0;     // L x P
    Matrix AAt;    // P x P
  };
  struct Dense {
    Matrix B;
    Matrix G;
  };
  explicit ObservationOperator(std::variant<Structured, Dense> rep) : rep_(std::move(rep)) {}

  std::variant<Structured, Dense> rep_;
};

}  // namespace tunmix
