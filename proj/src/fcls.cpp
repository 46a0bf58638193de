#include "tunmix/fcls.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace tunmix::fcls {

Vector project_simplex(const Vector& v) {
  const Index P = v.size();
  if (P < 1) throw InvalidArgument("project_simplex: empty vector");
  std::vector<Index> order(static_cast<std::size_t>(P));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&v](Index a, Index b) { return v(a) > v(b); });

  double cumsum = 0.0;
  double theta = 0.0;
  for (Index j = 0; j < P; ++j) {
    const double u = v(order[static_cast<std::size_t>(j)]);
    cumsum += u;
    const double candidate = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (u - candidate > 0.0) theta = candidate;
  }
  return (v.array() - theta).cwiseMax(0.0).matrix();
}

namespace {

// Quadratic data shared by every pixel of a frame: H = M^T M + lambda I.
struct Prepared {
  Matrix H;
  double step = 0.0;  // 1 / ||H||_2
};

Prepared prepare(const Matrix& M, double lambda) {
  if (lambda < 0.0) throw InvalidArgument("fcls: lambda must be nonnegative");
  if (M.size() == 0 || M.isZero(0.0)) throw InvalidArgument("fcls: design matrix is zero");
  Prepared prep;
  const Index P = M.cols();
  prep.H = M.transpose() * M;
  prep.H.diagonal().array() += lambda;
  // Power iteration from the all-ones vector, 50 steps.
  Vector v = Vector::Ones(P) / std::sqrt(static_cast<double>(P));
  double norm_est = 0.0;
  for (int it = 0; it < 50; ++it) {
    const Vector w = prep.H * v;
    const double wn = w.norm();
    if (wn == 0.0) break;
    v = w / wn;
    norm_est = v.dot(prep.H * v);
  }
  if (!(norm_est > 0.0)) norm_est = prep.H.diagonal().sum();
  prep.step = 1.0 / norm_est;
  return prep;
}

double eval_objective(const Matrix& M, const Vector& y, double lambda, const Vector& a_ref,
                      const Vector& a) {
  double f = (y - M * a).squaredNorm();
  if (lambda > 0.0) f += lambda * (a - a_ref).squaredNorm();
  return f;
}

Vector linear_term(const Matrix& M, const Vector& y, double lambda, const Vector& a_ref) {
  Vector c = M.transpose() * y;
  if (lambda > 0.0) c += lambda * a_ref;
  return c;
}

double kkt_from(const Matrix& H, const Vector& c, const Vector& a) {
  const Vector grad = 2.0 * (H * a - c);
  return (a - project_simplex(a - grad)).norm();
}

// Equality-constrained minimizer on a support set S:
//   H_SS x + nu 1 = c_S,  1^T x = 1.
std::optional<Vector> solve_on_support(const Matrix& H, const Vector& c,
                                       const std::vector<Index>& support) {
  const auto k = static_cast<Index>(support.size());
  if (k == 0) return std::nullopt;
  Matrix K = Matrix::Zero(k + 1, k + 1);
  Vector rhs(k + 1);
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j < k; ++j) K(i, j) = H(support[static_cast<std::size_t>(i)],
                                                support[static_cast<std::size_t>(j)]);
    K(i, k) = 1.0;
    K(k, i) = 1.0;
    rhs(i) = c(support[static_cast<std::size_t>(i)]);
  }
  rhs(k) = 1.0;
  Eigen::FullPivLU<Matrix> lu(K);
  if (!lu.isInvertible()) return std::nullopt;
  const Vector sol = lu.solve(rhs);
  if (!sol.allFinite()) return std::nullopt;
  Vector out = Vector::Zero(H.rows());
  for (Index i = 0; i < k; ++i) out(support[static_cast<std::size_t>(i)]) = sol(i);
  return out;
}

// Active-set refinement seeded with the support of `a`: drop the most negative
// coordinate of the support solution, or add the coordinate whose reduced
// gradient most violates optimality, until neither applies.
std::optional<Vector> polish_on_support(const Matrix& H, const Vector& c, const Vector& a) {
  const Index P = a.size();
  std::vector<bool> in(static_cast<std::size_t>(P), false);
  const double cut = 1e-12 * std::max(1.0, a.maxCoeff());
  for (Index i = 0; i < P; ++i) in[static_cast<std::size_t>(i)] = a(i) > cut;
  std::optional<Vector> best;
  for (int round = 0; round < 4 * static_cast<int>(P) + 4; ++round) {
    std::vector<Index> support;
    for (Index i = 0; i < P; ++i)
      if (in[static_cast<std::size_t>(i)]) support.push_back(i);
    const auto sol = solve_on_support(H, c, support);
    if (!sol) return best;
    Index worst = -1;
    for (Index i : support) {
      if ((*sol)(i) < 0.0 && (worst < 0 || (*sol)(i) < (*sol)(worst))) worst = i;
    }
    if (worst >= 0) {
      in[static_cast<std::size_t>(worst)] = false;
      continue;
    }
    best = *sol;
    const Vector grad = H * (*sol) - c;
    double nu = 0.0;
    for (Index i : support) nu += grad(i);
    nu /= static_cast<double>(support.size());
    const double tol = 1e-12 * std::max(1.0, grad.cwiseAbs().maxCoeff());
    Index add = -1;
    for (Index i = 0; i < P; ++i) {
      if (in[static_cast<std::size_t>(i)]) continue;
      if (grad(i) < nu - tol && (add < 0 || grad(i) < grad(add))) add = i;
    }
    if (add < 0) return best;
    in[static_cast<std::size_t>(add)] = true;
  }
  return best;
}

FclsResult solve_prepared(const Prepared& prep, const Matrix& M, const Vector& y, double lambda,
                          const Vector& a_ref, const SolverOptions& options) {
  const Index P = M.cols();
  const Vector c = linear_term(M, y, lambda, a_ref);
  auto f = [&](const Vector& a) { return eval_objective(M, y, lambda, a_ref, a); };
  auto pg_step = [&](const Vector& z) -> Vector {
    return project_simplex(z - prep.step * (prep.H * z - c));
  };

  FclsResult res;
  Vector x = lambda > 0.0 ? project_simplex(a_ref)
                          : Vector::Constant(P, 1.0 / static_cast<double>(P));
  double fx = f(x);
  Vector z = x;
  double t = 1.0;
  for (int it = 1; it <= options.max_iters; ++it) {
    res.iterations = it;
    Vector x_new = pg_step(z);
    double f_new = f(x_new);
    if (f_new > fx) {
      // Momentum overshoot: restart from x with a plain gradient step.
      t = 1.0;
      x_new = pg_step(x);
      f_new = f(x_new);
      if (f_new > fx) {
        res.converged = true;
        if (options.keep_trace) res.trace.push_back(fx);
        break;
      }
    }
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = x_new + ((t - 1.0) / t_new) * (x_new - x);
    const double change = std::abs(fx - f_new);
    x = std::move(x_new);
    const double f_prev = fx;
    fx = f_new;
    t = t_new;
    if (options.keep_trace) res.trace.push_back(fx);
    if (change <= options.rel_tol * std::max(std::abs(f_prev), 1e-300)) {
      res.converged = true;
      break;
    }
  }

  if (options.polish) {
    if (auto polished = polish_on_support(prep.H, c, x)) {
      const Vector candidate = project_simplex(*polished);
      const double fc = f(candidate);
      if (fc <= fx * (1.0 + 1e-12) + 1e-300 &&
          kkt_from(prep.H, c, candidate) <= kkt_from(prep.H, c, x)) {
        x = candidate;
        fx = fc;
      }
    }
  }
  res.a = std::move(x);
  res.objective = fx;
  res.kkt_residual = kkt_from(prep.H, c, res.a);
  return res;
}

void check_problem(const SimplexQpProblem& p) {
  if (p.y.size() != p.M.rows()) {
    throw InvalidArgument("fcls: target length " + std::to_string(p.y.size()) +
                          " does not match design rows " + std::to_string(p.M.rows()));
  }
  if (p.lambda > 0.0 && p.a_ref.size() != p.M.cols()) {
    throw InvalidArgument("fcls: reference abundances must have length P");
  }
}

}  // namespace

double objective(const SimplexQpProblem& p, const Vector& a) {
  check_problem(p);
  return eval_objective(p.M, p.y, p.lambda, p.a_ref, a);
}

double kkt_residual(const SimplexQpProblem& p, const Vector& a) {
  check_problem(p);
  Matrix H = p.M.transpose() * p.M;
  H.diagonal().array() += p.lambda;
  return kkt_from(H, linear_term(p.M, p.y, p.lambda, p.a_ref), a);
}

FclsResult fcls_solve(const SimplexQpProblem& problem, const SolverOptions& options) {
  check_problem(problem);
  const Prepared prep = prepare(problem.M, problem.lambda);
  return solve_prepared(prep, problem.M, problem.y, problem.lambda, problem.a_ref, options);
}

Matrix fcls_refine_frame(const Matrix& Y, const Matrix& M, const std::optional<Matrix>& A_ref,
                         double lambda, const SolverOptions& options) {
  if (Y.rows() != M.rows()) {
    throw InvalidArgument("fcls_refine_frame: frame has " + std::to_string(Y.rows()) +
                          " bands, endmembers have " + std::to_string(M.rows()));
  }
  if (lambda > 0.0 && (!A_ref || A_ref->rows() != M.cols() || A_ref->cols() != Y.cols())) {
    throw InvalidArgument("fcls_refine_frame: reference abundances must be P x N");
  }
  const Prepared prep = prepare(M, lambda);
  Matrix out(M.cols(), Y.cols());
  const Vector empty;
  for (Index n = 0; n < Y.cols(); ++n) {
    const Vector a_ref = lambda > 0.0 ? Vector(A_ref->col(n)) : empty;
    out.col(n) = solve_prepared(prep, M, Y.col(n), lambda, a_ref, options).a;
  }
  return out;
}

}  // namespace tunmix::fcls
