#include "tunmix/observation.hpp"

#include <string>

namespace tunmix {

ObservationOperator ObservationOperator::glmm(Matrix A, Matrix M0) {
  if (A.rows() != M0.cols()) {
    throw InvalidArgument("observation: A has " + std::to_string(A.rows()) +
                          " rows but M0 has " + std::to_string(M0.cols()) + " endmembers");
  }
  Structured s;
  s.AAt = A * A.transpose();
  s.A = std::move(A);
  s.M0 = std::move(M0);
  return ObservationOperator(std::move(s));
}

ObservationOperator ObservationOperator::dense(Matrix B) {
  Dense d;
  d.G = B.transpose() * B;
  d.B = std::move(B);
  return ObservationOperator(std::move(d));
}

Index ObservationOperator::state_dim() const {
  if (const auto* s = std::get_if<Structured>(&rep_)) return s->M0.size();
  return std::get<Dense>(rep_).B.cols();
}

Index ObservationOperator::obs_dim() const {
  if (const auto* s = std::get_if<Structured>(&rep_)) return s->M0.rows() * s->A.cols();
  return std::get<Dense>(rep_).B.rows();
}

Vector ObservationOperator::apply(const Vector& psi) const {
  if (psi.size() != state_dim()) throw InvalidArgument("observation: state length mismatch");
  if (const auto* s = std::get_if<Structured>(&rep_)) {
    const Index L = s->M0.rows();
    const Index P = s->M0.cols();
    const Matrix Mt = s->M0.cwiseProduct(Eigen::Map<const Matrix>(psi.data(), L, P));
    const Matrix Y = Mt * s->A;
    return Eigen::Map<const Vector>(Y.data(), Y.size());
  }
  return std::get<Dense>(rep_).B * psi;
}

Vector ObservationOperator::apply_transpose(const Vector& y) const {
  if (y.size() != obs_dim()) throw InvalidArgument("observation: measurement length mismatch");
  if (const auto* s = std::get_if<Structured>(&rep_)) {
    const Index L = s->M0.rows();
    const Index N = s->A.cols();
    const Matrix YAt = Eigen::Map<const Matrix>(y.data(), L, N) * s->A.transpose();
    const Matrix out = s->M0.cwiseProduct(YAt);
    return Eigen::Map<const Vector>(out.data(), out.size());
  }
  return std::get<Dense>(rep_).B.transpose() * y;
}

Matrix ObservationOperator::gram_apply(const Matrix& X) const {
  if (X.rows() != state_dim()) throw InvalidArgument("observation: gram operand row mismatch");
  if (const auto* s = std::get_if<Structured>(&rep_)) {
    // B^T B = diag(m0) (A A^T (x) I_L) diag(m0): block (p, q) is the diagonal
    // matrix m0_p .* m0_q scaled by (A A^T)(p, q).
    const Index L = s->M0.rows();
    const Index P = s->M0.cols();
    Matrix out = Matrix::Zero(X.rows(), X.cols());
    for (Index p = 0; p < P; ++p) {
      for (Index q = 0; q < P; ++q) {
        const double c = s->AAt(p, q);
        if (c == 0.0) continue;
        const Vector w = c * s->M0.col(p).cwiseProduct(s->M0.col(q));
        out.middleRows(p * L, L).noalias() += w.asDiagonal() * X.middleRows(q * L, L);
      }
    }
    return out;
  }
  return std::get<Dense>(rep_).G * X;
}

Matrix ObservationOperator::gram() const {
  if (std::holds_alternative<Dense>(rep_)) return std::get<Dense>(rep_).G;
  return gram_apply(Matrix::Identity(state_dim(), state_dim()));
}

Matrix ObservationOperator::to_dense() const {
  if (const auto* d = std::get_if<Dense>(&rep_)) return d->B;
  const auto& s = std::get<Structured>(rep_);
  const Index L = s.M0.rows();
  const Index P = s.M0.cols();
  const Index N = s.A.cols();
  Matrix B = Matrix::Zero(N * L, P * L);
  for (Index n = 0; n < N; ++n) {
    for (Index p = 0; p < P; ++p) {
      for (Index l = 0; l < L; ++l) B(n * L + l, p * L + l) = s.A(p, n) * s.M0(l, p);
    }
  }
  return B;
}

}  // namespace tunmix
