#pragma once

#include "tunmix/types.hpp"

#include <optional>
#include <vector>

namespace tunmix::fcls {

// Euclidean projection onto {a >= 0, sum a = 1} by sort-and-threshold.
Vector project_simplex(const Vector& v);

// min ||y - M a||^2 + lambda ||a - a_ref||^2  over the probability simplex.
struct SimplexQpProblem {
  Matrix M;
  Vector y;
  double lambda = 0.0;
  Vector a_ref;  // used only when lambda > 0
};

struct SolverOptions {
  double rel_tol = 1e-10;
  int max_iters = 2000;
  // Re-solve the equality-constrained problem on the detected support.
  bool polish = true;
  // Record the objective after every iteration.
  bool keep_trace = false;
};

struct FclsResult {
  Vector a;
  double objective = 0.0;
  // ||a - proj(a - grad)||_2 with grad of the objective above.
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;
};

double objective(const SimplexQpProblem& problem, const Vector& a);
double kkt_residual(const SimplexQpProblem& problem, const Vector& a);

// Accelerated projected gradient with monotone restart. Returns the best
// iterate; `converged` is false when the iteration cap was hit.
FclsResult fcls_solve(const SimplexQpProblem& problem, const SolverOptions& options = {});

// Column-wise solve of min ||Y - M A||_F^2 + lambda ||A - A_ref||_F^2 with
// simplex-constrained columns. A_ref may be omitted when lambda == 0.
Matrix fcls_refine_frame(const Matrix& Y, const Matrix& M, const std::optional<Matrix>& A_ref,
                         double lambda, const SolverOptions& options = {});

}  // namespace tunmix::fcls
