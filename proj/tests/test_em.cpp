#include "em_oracles.hpp"
#include "support.hpp"

#include "tunmix/em.hpp"
#include "tunmix/hseq_io.hpp"
#include "tunmix/kron.hpp"
#include "tunmix/spd.hpp"

#include <doctest.h>

using namespace tunmix;
using testing::rel_err;
using testing::Rng;
using testing::dense_abundance_cost;
using testing::nkp_route_abundance;

namespace {

struct Problem {
  Matrix M0;
  em::EmParams theta;
  std::vector<Matrix> frames;
  std::vector<Vector> ys;
  Matrix B;
};

Problem make_problem(Rng& rng, Index L, Index N, Index P, Index T, double s2 = 0.01) {
  Problem pr;
  pr.M0 = rng.uniform_matrix(L, P, 0.2, 1.0);
  pr.theta.A = rng.simplex_columns(P, N);
  pr.theta.P00 = 0.1 * rng.spd(P * L, 0.5);
  pr.theta.Q = 0.01 * rng.spd(P * L, 0.5);
  pr.theta.sigma_r2 = s2;
  pr.theta.psi00 = Vector::Ones(P * L) + 0.05 * rng.gaussian(P * L);
  pr.B = testing::dense_glmm_B(pr.theta.A, pr.M0);
  pr.ys = testing::simulate_random_walk(rng, pr.B, pr.theta.Q, s2, pr.theta.psi00, pr.theta.P00, T);
  for (const auto& y : pr.ys) pr.frames.push_back(io::devectorize(y, L, N));
  return pr;
}

kalman::Trajectory smooth(const Problem& pr, const em::EmParams& theta) {
  const auto model = em::make_model(theta, pr.M0);
  return kalman::rts_smooth(kalman::filter(pr.ys, model, em::initial_belief(theta)), theta.Q);
}

// Literal transcription of the expected complete-data log-likelihood with the
// smoother moments taken from the batch joint posterior.
double q_literal(const em::EmParams& th, const Matrix& M0, const std::vector<Vector>& ys,
                 const testing::BatchPosterior& post) {
  const Matrix B = testing::dense_glmm_B(th.A, M0);
  const auto T = static_cast<Index>(ys.size());
  const Index m = B.rows();
  const Matrix P00i = th.P00.inverse();
  const Matrix Qi = th.Q.inverse();
  const Vector d0 = post.means[0] - th.psi00;
  double q = std::log(th.P00.determinant()) +
             (P00i * (post.block(0, 0) + d0 * d0.transpose())).trace();
  for (Index t = 1; t <= T; ++t) {
    const Vector dm = post.means[static_cast<std::size_t>(t)] - post.means[static_cast<std::size_t>(t - 1)];
    const Matrix E = post.block(t, t) + post.block(t - 1, t - 1) - post.block(t, t - 1) -
                     post.block(t - 1, t) + dm * dm.transpose();
    q += std::log(th.Q.determinant()) + (Qi * E).trace();
    const Vector& y = ys[static_cast<std::size_t>(t - 1)];
    const Vector r = y - B * post.means[static_cast<std::size_t>(t)];
    const double fit = r.squaredNorm() + (B * post.block(t, t) * B.transpose()).trace();
    q += static_cast<double>(m) * std::log(th.sigma_r2) + fit / th.sigma_r2;
  }
  return -0.5 * q;
}

}  // namespace

TEST_CASE("accumulate_stats trivial cases") {
  const Index L = 2, N = 2, P = 2;
  kalman::Trajectory traj;
  traj.initial = {Vector::Zero(P * L), Matrix::Identity(P * L, P * L), 0};
  traj.smoothed_initial = traj.initial;
  traj.filtered = {traj.initial};
  traj.predicted = {traj.initial};
  traj.smoothed = {{Vector::Zero(P * L), Matrix::Identity(P * L, P * L), 1}};
  traj.smoother_gains = {Matrix::Zero(P * L, P * L)};
  const std::vector<Matrix> frames{Matrix::Zero(L, N)};
  const auto st = em::accumulate_stats(traj, frames, Matrix::Ones(L, P), {true});
  CHECK(st.sigma1 == Matrix::Identity(P * L, P * L));
  CHECK(st.sigma3->norm() == 0.0);
  CHECK(st.sigma5_trace == 0.0);
  CHECK(st.cross_traces.norm() == 0.0);
}

TEST_CASE("accumulate_stats equals literal sums over the trajectory") {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const auto pr = make_problem(rng, 3, 2, 2, 5);
    const auto traj = smooth(pr, pr.theta);
    const auto st = em::accumulate_stats(traj, pr.frames, pr.M0, {true});
    const Index n = 6;
    Matrix s1 = Matrix::Zero(n, n), s2 = s1, s4 = s1, s3 = Matrix::Zero(6, n);
    double s5 = 0.0;
    for (std::size_t t = 0; t < 5; ++t) {
      const auto& cur = traj.smoothed[t];
      const auto& prev = t == 0 ? traj.smoothed_initial : traj.smoothed[t - 1];
      s1 += cur.cov + cur.mean * cur.mean.transpose();
      s2 += prev.cov + prev.mean * prev.mean.transpose();
      s4 += cur.cov * traj.smoother_gains[t].transpose() + cur.mean * prev.mean.transpose();
      s3 += pr.ys[t] * cur.mean.transpose();
      s5 += pr.ys[t].squaredNorm();
    }
    CHECK(rel_err(st.sigma1, s1) <= 1e-12);
    CHECK(rel_err(st.sigma2, s2) <= 1e-12);
    CHECK(rel_err(st.sigma4, s4) <= 1e-12);
    CHECK(rel_err(*st.sigma3, s3) <= 1e-12);
    CHECK(rel_err(st.sigma5_trace, s5) <= 1e-12);
    const Vector m0 = io::vectorize(pr.M0);
    CHECK(rel_err(st.gram_traces, kron::block_traces(m0.asDiagonal() * s1 * m0.asDiagonal(), 3)) <= 1e-12);
    CHECK(rel_err(st.cross_traces, kron::block_traces(s3 * m0.asDiagonal(), 3)) <= 1e-12);
    CHECK(spd::min_eigenvalue(st.sigma1) >= -1e-9);
    CHECK(spd::min_eigenvalue(st.sigma2) >= -1e-9);
  }
}

TEST_CASE("q_function degenerate all-identity case is zero") {
  const Index L = 2, N = 1, P = 2;
  em::SufficientStats st;
  st.T = 1;
  st.L = L;
  st.N = N;
  st.P = P;
  st.sigma1 = st.sigma2 = st.sigma4 = Matrix::Zero(P * L, P * L);
  st.gram_traces = Matrix::Zero(P, P);
  st.cross_traces = Matrix::Zero(N, P);
  em::EmParams th;
  th.A = Matrix::Constant(P, N, 0.5);
  th.P00 = Matrix::Identity(P * L, P * L);
  th.Q = th.P00;
  th.sigma_r2 = 1.0;
  th.psi00 = Vector::Zero(P * L);
  const kalman::Belief s0{Vector::Zero(P * L), Matrix::Zero(P * L, P * L), 0};
  CHECK(std::abs(em::q_function(th, st, s0)) <= 1e-14);
}

TEST_CASE("q_function matches a literal transcription on the joint posterior") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const auto pr = make_problem(rng, 3, 2, 2, 4);
    const auto traj = smooth(pr, pr.theta);
    const auto st = em::accumulate_stats(traj, pr.frames, pr.M0);
    const auto post = testing::batch_posterior(pr.ys, pr.B, pr.theta.Q, pr.theta.sigma_r2,
                                               pr.theta.psi00, pr.theta.P00);
    // Evaluate at a different theta so every term is exercised.
    em::EmParams other = pr.theta;
    other.A = rng.simplex_columns(2, 2);
    other.Q = 0.02 * rng.spd(6);
    other.P00 = 0.3 * rng.spd(6);
    other.sigma_r2 = 0.05;
    other.psi00 = rng.gaussian(6);
    const double got = em::q_function(other, st, traj.smoothed_initial);
    const double want = q_literal(other, pr.M0, pr.ys, post);
    CHECK(rel_err(got, want) <= 1e-8);
  }
}

TEST_CASE("m_step_p00 examples") {
  Rng rng(3);
  const kalman::Belief s0{rng.gaussian(4), rng.spd(4), 0};
  CHECK(em::m_step_p00(s0, s0.mean) == s0.cov);
  const kalman::Belief z{Vector::Unit(4, 0), Matrix::Zero(4, 4), 0};
  CHECK(em::m_step_p00(z, Vector::Zero(4)) == Matrix(Vector::Unit(4, 0) * Vector::Unit(4, 0).transpose()));
  const Vector old = rng.gaussian(4);
  const Vector d = s0.mean - old;
  CHECK(rel_err(em::m_step_p00(s0, old), s0.cov + d * d.transpose()) <= 1e-12);
  CHECK(em::m_step_psi00(s0) == s0.mean);
}

TEST_CASE("m_step_q equals averaged increment second moments from the joint posterior") {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const Index T = 5;
    const auto pr = make_problem(rng, 3, 2, 2, T);
    const auto traj = smooth(pr, pr.theta);
    const auto st = em::accumulate_stats(traj, pr.frames, pr.M0);
    const auto post = testing::batch_posterior(pr.ys, pr.B, pr.theta.Q, pr.theta.sigma_r2,
                                               pr.theta.psi00, pr.theta.P00);
    Matrix want = Matrix::Zero(6, 6);
    for (Index t = 1; t <= T; ++t) {
      const Vector dm = post.means[static_cast<std::size_t>(t)] - post.means[static_cast<std::size_t>(t - 1)];
      want += post.block(t, t) + post.block(t - 1, t - 1) - post.block(t, t - 1) -
              post.block(t - 1, t) + dm * dm.transpose();
    }
    want /= static_cast<double>(T);
    Index clipped = -1;
    const Matrix got = em::m_step_q(st, &clipped);
    CHECK(rel_err(got, want) <= 1e-6);
    CHECK(clipped == 0);
    CHECK(spd::min_eigenvalue(got) >= 0.0);
  }
}

TEST_CASE("m_step_q of a constant, certain trajectory is zero") {
  const Index n = 4;
  kalman::Trajectory traj;
  const Vector c = Vector::LinSpaced(n, 1.0, 2.0);
  traj.smoothed_initial = {c, Matrix::Zero(n, n), 0};
  for (int t = 0; t < 3; ++t) {
    traj.smoothed.push_back({c, Matrix::Zero(n, n), t + 1});
    traj.smoother_gains.push_back(Matrix::Zero(n, n));
  }
  traj.filtered = traj.predicted = traj.smoothed;
  traj.initial = traj.smoothed_initial;
  const std::vector<Matrix> frames(3, Matrix::Zero(2, 1));
  const auto st = em::accumulate_stats(traj, frames, Matrix::Ones(2, 2));
  CHECK(em::m_step_q(st).norm() <= 1e-13);
}

TEST_CASE("m_step_sigma cases") {
  Rng rng(5);
  SUBCASE("dense oracle") {
    for (int trial = 0; trial < 10; ++trial) {
      const auto pr = make_problem(rng, 3, 2, 2, 4);
      const auto traj = smooth(pr, pr.theta);
      const auto st = em::accumulate_stats(traj, pr.frames, pr.M0, {true});
      const Matrix A = rng.simplex_columns(2, 2);
      const Matrix B = testing::dense_glmm_B(A, pr.M0);
      const double want = (st.sigma5_trace - 2.0 * (B * st.sigma3->transpose()).trace() +
                           (B * st.sigma1 * B.transpose()).trace()) / (4.0 * 3.0 * 2.0);
      CHECK(rel_err(em::m_step_sigma(st, A), want) <= 1e-10);
    }
  }
  SUBCASE("exact fit with certain states") {
    const Index L = 3, N = 4, P = 2, T = 3;
    const Matrix M0 = rng.uniform_matrix(L, P, 0.2, 1.0);
    const Matrix A = rng.simplex_columns(P, N);
    const Matrix B = testing::dense_glmm_B(A, M0);
    kalman::Trajectory traj;
    traj.smoothed_initial = {Vector::Ones(P * L), Matrix::Zero(P * L, P * L), 0};
    std::vector<Matrix> frames;
    for (Index t = 0; t < T; ++t) {
      const Vector psi = Vector::Ones(P * L) + 0.1 * rng.gaussian(P * L);
      traj.smoothed.push_back({psi, Matrix::Zero(P * L, P * L), t + 1});
      traj.smoother_gains.push_back(Matrix::Zero(P * L, P * L));
      frames.push_back(io::devectorize(B * psi, L, N));
    }
    traj.filtered = traj.predicted = traj.smoothed;
    traj.initial = traj.smoothed_initial;
    const auto st = em::accumulate_stats(traj, frames, M0);
    CHECK(em::m_step_sigma(st, A) <= 1e-10);
  }
  SUBCASE("zero data and zero states hit the floor") {
    kalman::Trajectory traj;
    traj.smoothed_initial = {Vector::Zero(4), Matrix::Zero(4, 4), 0};
    traj.smoothed = {{Vector::Zero(4), Matrix::Zero(4, 4), 1}};
    traj.smoother_gains = {Matrix::Zero(4, 4)};
    traj.filtered = traj.predicted = traj.smoothed;
    traj.initial = traj.smoothed_initial;
    const std::vector<Matrix> frames{Matrix::Zero(2, 3)};
    const auto st = em::accumulate_stats(traj, frames, Matrix::Ones(2, 2));
    CHECK(em::m_step_sigma(st, Matrix::Constant(2, 3, 0.5)) == 1e-12);
  }
}

TEST_CASE("m_step_abundance constructed fixed point") {
  Rng rng(6);
  const Index L = 4, N = 3, P = 2;
  const Matrix A0 = rng.gaussian(P, N);
  em::SufficientStats st;
  st.T = 1;
  st.L = L;
  st.N = N;
  st.P = P;
  st.gram_traces = kron::block_trace_gram(Matrix::Identity(P * L, P * L), L, P);
  st.cross_traces = kron::block_trace_cross(
      kron::kron_product(A0.transpose(), Matrix::Identity(L, L)), L);
  CHECK(rel_err(em::m_step_abundance(st), A0) <= 1e-14);
}

TEST_CASE("m_step_abundance minimizes the abundance cost") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pr = make_problem(rng, 3, 3, 2, 4);
    const auto traj = smooth(pr, pr.theta);
    const auto st = em::accumulate_stats(traj, pr.frames, pr.M0, {true});
    const Matrix Ahat = em::m_step_abundance(st);
    const auto num = testing::minimize_abundance_cost(st, pr.M0);
    CHECK(rel_err(Ahat, num.A) <= 1e-6);
    // First-order stationarity on the dense cost at A-hat.
    CHECK(testing::fd_gradient(Ahat, st, pr.M0).norm() <= 1e-6 * num.curvature_scale);

    // Block-trace path against the explicit Kronecker-expansion path.
    CHECK(rel_err(Ahat, nkp_route_abundance(st, io::vectorize(pr.M0))) <= 1e-9);
    CHECK(rel_err(em::abundance_cost(Ahat, st), dense_abundance_cost(Ahat, st, pr.M0)) <= 1e-10);
  }
}

TEST_CASE("each M-step raises the surrogate") {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const auto pr = make_problem(rng, 3, 2, 2, 6);
    const auto step = em::em_iterate(pr.frames, pr.M0, pr.theta);
    CHECK(step.q_after >= step.q_before - 1e-9);
    step.next.validate(3);
    CHECK(spd::min_eigenvalue(step.next.Q) >= 0.0);
    CHECK(spd::min_eigenvalue(step.next.P00) >= -1e-12);
    CHECK(step.next.sigma_r2 > 0.0);

    // Perturbing any single block away from the M-step result cannot increase Q.
    const auto st = em::accumulate_stats(step.trajectory, pr.frames, pr.M0);
    const auto& s0 = step.trajectory.smoothed_initial;
    const double best = em::q_function(step.next, st, s0);
    em::EmParams w = step.next;
    w.sigma_r2 *= 1.1;
    CHECK(em::q_function(w, st, s0) <= best + 1e-9);
    w = step.next;
    w.A.array() += 0.01;
    CHECK(em::q_function(w, st, s0) <= best + 1e-9);
    w = step.next;
    w.Q *= 1.2;
    CHECK(em::q_function(w, st, s0) <= best + 1e-9);
    w = step.next;
    w.Q *= static_cast<double>(st.T);  // the un-normalized form
    CHECK(em::q_function(w, st, s0) < best);
  }
}

TEST_CASE("EM ascent of the marginal likelihood") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pr = make_problem(rng, 5, 4, 2, 8);
    em::EmParams th = pr.theta;
    th.A = rng.simplex_columns(2, 4);
    th.Q = 0.1 * Matrix::Identity(10, 10);
    th.P00 = Matrix::Identity(10, 10);
    th.sigma_r2 = 0.05;
    double prev = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < 5; ++k) {
      const auto step = em::em_iterate(pr.frames, pr.M0, th);
      const double ll = kalman::marginal_loglik(pr.ys, em::make_model(th, pr.M0), em::initial_belief(th));
      CHECK(rel_err(step.loglik, ll) <= 1e-12);
      CHECK(ll >= prev - 1e-9);
      prev = ll;
      th = step.next;
    }
  }
}

TEST_CASE("updating only A recovers the generating abundances on noiseless data") {
  Rng rng(10);
  const Index L = 4, N = 6, P = 2, T = 6;
  const Matrix M0 = rng.uniform_matrix(L, P, 0.2, 1.0);
  const Matrix A = rng.simplex_columns(P, N);
  const Matrix B = testing::dense_glmm_B(A, M0);
  em::EmParams truth;
  truth.A = A;
  // Scaling factors are pinned near one; otherwise (M0 .* Psi) A = (M0 .* Psi) G G^{-1} A
  // leaves A unidentified.
  truth.P00 = 1e-8 * Matrix::Identity(P * L, P * L);
  truth.Q = 1e-8 * Matrix::Identity(P * L, P * L);
  truth.sigma_r2 = 1e-4;
  truth.psi00 = Vector::Ones(P * L);
  std::vector<Matrix> frames;
  Vector psi = truth.psi00;
  for (Index t = 0; t < T; ++t) {
    psi += 1e-4 * rng.gaussian(P * L);
    frames.push_back(io::devectorize(B * psi, L, N));
  }
  em::EmParams th = truth;
  th.A = rng.simplex_columns(P, N);
  for (int k = 0; k < 30; ++k) {
    const auto step = em::em_iterate(frames, M0, th);
    th.A = step.next.A;
  }
  CHECK((th.A - A).norm() / A.norm() <= 0.02);
}

TEST_CASE("one EM step from the truth stays near the truth on a long sequence") {
  Rng rng(11);
  const Index L = 2, N = 4, P = 2, T = 400;
  const Matrix M0 = rng.uniform_matrix(L, P, 0.3, 1.0);
  em::EmParams truth;
  truth.A = rng.simplex_columns(P, N);
  truth.P00 = 1e-3 * Matrix::Identity(P * L, P * L);
  truth.Q = 1e-3 * Matrix::Identity(P * L, P * L);
  truth.sigma_r2 = 1e-2;
  truth.psi00 = Vector::Ones(P * L);
  const Matrix B = testing::dense_glmm_B(truth.A, M0);
  const auto ys = testing::simulate_random_walk(rng, B, truth.Q, truth.sigma_r2, truth.psi00, truth.P00, T);
  std::vector<Matrix> frames;
  for (const auto& y : ys) frames.push_back(io::devectorize(y, L, N));
  const auto step = em::em_iterate(frames, M0, truth);
  CHECK(std::abs(step.next.sigma_r2 / truth.sigma_r2 - 1.0) <= 0.15);
  CHECK(std::abs(step.next.Q.trace() / truth.Q.trace() - 1.0) <= 0.3);
  CHECK((step.next.A - truth.A).norm() / truth.A.norm() <= 0.1);
}

TEST_CASE("parameter validation") {
  em::EmParams th;
  th.A = Matrix::Constant(2, 3, 0.5);
  th.P00 = Matrix::Identity(6, 6);
  th.Q = Matrix::Identity(6, 6);
  th.psi00 = Vector::Ones(6);
  th.sigma_r2 = 0.1;
  CHECK_NOTHROW(th.validate(3));
  th.sigma_r2 = 0.0;
  CHECK_THROWS_AS(th.validate(3), InvalidArgument);
  th.sigma_r2 = 0.1;
  CHECK_THROWS_AS(th.validate(4), InvalidArgument);
}
