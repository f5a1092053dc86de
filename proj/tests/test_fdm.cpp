#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "mfgnum/fdm.hpp"

using namespace mfgnum;
using namespace mfgnum::fdm;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

DiscreteHamiltonian zero_hamiltonian() {
  DiscreteHamiltonian H;
  H.eval = [](double, double, double) { return 0.0; };
  H.d_p1 = H.d_p2 = H.d_p1p1 = H.d_p1p2 = H.d_p2p2 = H.eval;
  return H;
}

SeparableMFGProblem trivial_problem(int n, int nt, double nu) {
  SeparableMFGProblem pb;
  pb.nu = nu;
  pb.H0 = [](double, double) { return 0.0; };
  pb.f0 = [](double, double) { return 0.0; };
  pb.g = [](double, double) { return 0.0; };
  pb.m0 = [](double) { return 1.0; };
  pb.grid = DiscreteGrid1D::torus(n, nt, 1.0);
  return pb;
}

Field random_field(const DiscreteGrid1D& g, std::mt19937& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Field f(g);
  for (auto& v : f.data()) v = u(rng);
  return f;
}

/// Sup-norm gap between a coarse solution and a nested finer one at the shared nodes.
double nested_gap(const Field& coarse, const Field& fine) {
  const int r = fine.size() / coarse.size();
  const int rt = (fine.levels() - 1) / (coarse.levels() - 1);
  double gap = 0.0;
  for (int n = 0; n < coarse.levels(); ++n)
    for (int i = 0; i < coarse.size(); ++i) gap = std::max(gap, std::abs(coarse(n, i) - fine(n * rt, i * r)));
  return gap;
}

void check_density(const Field& M, double h) {
  for (int n = 0; n < M.levels(); ++n) CHECK(std::abs(level_mass(M.level(n), h) - 1.0) < 1e-8);
  double lowest = 1.0;
  for (double v : M.data()) lowest = std::min(lowest, v);
  CHECK(lowest >= -1e-10);
}

}  // namespace

TEST_CASE("quadratic discrete Hamiltonian examples") {
  const auto H = quadratic_discrete_hamiltonian();
  CHECK(H.eval(0.3, -1.0, 1.0) == 1.0);
  CHECK(H.eval(0.3, 1.0, -1.0) == 0.0);
  for (double p : {-2.0, 0.0, 3.0}) CHECK(H.eval(0.0, p, p) == doctest::Approx(0.5 * p * p));
}

TEST_CASE("discrete Hamiltonian axioms on random samples") {
  const auto H = quadratic_discrete_hamiltonian();
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> ux(0.0, 1.0), up(-10.0, 10.0), ud(0.0, 1.0);
  int failures = 0;
  for (int s = 0; s < 10000; ++s) {
    const double x = ux(rng), p1 = up(rng), p2 = up(rng), d = ud(rng);
    // monotone: nonincreasing in p1, nondecreasing in p2
    if (H.eval(x, p1 + d, p2) > H.eval(x, p1, p2) + 1e-14) ++failures;
    if (H.eval(x, p1, p2 + d) < H.eval(x, p1, p2) - 1e-14) ++failures;
    // consistent
    if (std::abs(H.eval(x, p1, p1) - 0.5 * p1 * p1) > 1e-10) ++failures;
    // differentiable
    const double e = 1e-6;
    const double fd1 = (H.eval(x, p1 + e, p2) - H.eval(x, p1 - e, p2)) / (2 * e);
    const double fd2 = (H.eval(x, p1, p2 + e) - H.eval(x, p1, p2 - e)) / (2 * e);
    if (std::abs(fd1 - H.d_p1(x, p1, p2)) > 1e-5 * std::max(1.0, std::abs(fd1))) ++failures;
    if (std::abs(fd2 - H.d_p2(x, p1, p2)) > 1e-5 * std::max(1.0, std::abs(fd2))) ++failures;
    // convex
    const double q1 = up(rng), q2 = up(rng);
    const double mid = H.eval(x, 0.5 * (p1 + q1), 0.5 * (p2 + q2));
    if (mid > 0.5 * (H.eval(x, p1, p2) + H.eval(x, q1, q2)) + 1e-12) ++failures;
  }
  CHECK(failures == 0);
}

TEST_CASE("transport operator") {
  const auto H = quadratic_discrete_hamiltonian();
  const auto g = DiscreteGrid1D::torus(24, 4, 1.0);
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0), um(0.1, 2.0);
  std::vector<double> U(24), M(24), W(24), C(24, 0.7);
  for (int trial = 0; trial < 20; ++trial) {
    for (int i = 0; i < 24; ++i) {
      U[i] = u(rng);
      M[i] = um(rng);
      W[i] = u(rng);
    }
    const auto T = transport_coeffs(H, U, M, g);
    double total = 0.0, lhs = 0.0, rhs = 0.0;
    const auto gu = nabla_h(U, g.h), gw = nabla_h(W, g.h);
    for (int i = 0; i < 24; ++i) {
      total += T[i];
      lhs += T[i] * W[i];
      const double x = g.x(i);
      rhs -= M[i] * (H.d_p1(x, gu[i].p1, gu[i].p2) * gw[i].p1 + H.d_p2(x, gu[i].p1, gu[i].p2) * gw[i].p2);
    }
    CHECK(std::abs(total) < 1e-10);
    CHECK(std::abs(lhs - rhs) < 1e-10);
  }
  for (double t : transport_coeffs(H, C, M, g)) CHECK(t == 0.0);
  CHECK_THROWS_AS(transport_coeffs(H, std::vector<double>(5), M, g), ShapeError);
}

TEST_CASE("HJB residual examples") {
  auto pb = trivial_problem(16, 10, 0.0);
  const auto H0 = zero_hamiltonian();
  Field U(pb.grid), M(pb.grid, 1.0);
  for (double r : discrete_hjb_residual(pb, H0, U, M)) CHECK(r == 0.0);

  pb.f0 = [](double, double) { return 1.0; };
  for (int n = 0; n <= 10; ++n)
    for (int i = 0; i < 16; ++i) U(n, i) = pb.grid.horizon - pb.grid.t(n);
  U.level(10)[0] = 0.0;
  for (double r : discrete_hjb_residual(pb, H0, U, M)) CHECK(std::abs(r) < 1e-12);

  U(10, 3) = 0.5;
  CHECK_THROWS_AS(discrete_hjb_residual(pb, H0, U, M), PreconditionError);
}

TEST_CASE("HJB residual of a fine solution restricted to coarse grids") {
  const auto H = quadratic_discrete_hamiltonian();
  const auto fine = fdm_picard(smooth_scenario(256, 256), H, DampingSchedule::constant(0.0), 50, 1e-10);
  REQUIRE(fine.history.converged);
  double res[2];
  int slot = 0;
  for (int n : {32, 64}) {
    const auto pb = smooth_scenario(n, n);
    const int r = 256 / n;
    Field U(pb.grid), M(pb.grid);
    for (int k = 0; k <= n; ++k)
      for (int i = 0; i < n; ++i) {
        U(k, i) = fine.U(k * r, i * r);
        M(k, i) = fine.M(k * r, i * r);
      }
    res[slot++] = sup_norm(discrete_hjb_residual(pb, H, U, M));
  }
  CHECK(res[1] < res[0] / 1.5);
}

TEST_CASE("KFP residual examples") {
  auto pb = trivial_problem(16, 10, 0.0);
  const auto H = quadratic_discrete_hamiltonian();
  Field U(pb.grid, 2.0), M(pb.grid, 1.0);
  for (double r : discrete_kfp_residual(pb, H, U, M)) CHECK(r == 0.0);
  M(0, 4) = 3.0;
  CHECK_THROWS_AS(discrete_kfp_residual(pb, H, U, M), PreconditionError);

  // Implicit heat steps from a sharp profile, solved independently with dense LU.
  const int N = 20;
  pb = trivial_problem(N, 8, 0.3);
  double norm = 0.0;
  for (int q = 0; q < 4000; ++q) norm += std::exp(20.0 * std::cos(kTwoPi * q / 4000.0)) / 4000.0;
  pb.m0 = [norm](double x) { return std::exp(20.0 * std::cos(kTwoPi * x)) / norm; };
  const auto m0 = initial_density(pb);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N, N);
  const double h = pb.grid.h, dt = pb.grid.dt;
  for (int i = 0; i < N; ++i) {
    A(i, i) = 1.0 + 2.0 * pb.nu * dt / (h * h);
    A(i, (i + 1) % N) -= pb.nu * dt / (h * h);
    A(i, (i + N - 1) % N) -= pb.nu * dt / (h * h);
  }
  Field Mh(pb.grid);
  Eigen::VectorXd cur = Eigen::Map<const Eigen::VectorXd>(m0.data(), N);
  Mh.set_level(0, m0);
  for (int n = 1; n <= 8; ++n) {
    cur = A.partialPivLu().solve(cur);
    for (int i = 0; i < N; ++i) Mh(n, i) = cur[i];
  }
  Field Uc(pb.grid, 1.0);
  CHECK(sup_norm(discrete_kfp_residual(pb, H, Uc, Mh)) < 1e-9);
}

TEST_CASE("Picard without coupling finishes in one sweep") {
  auto pb = trivial_problem(32, 16, 0.2);
  pb.H0 = [](double, double p) { return 0.5 * p * p; };
  pb.m0 = [](double x) { return 1.0 + 0.5 * std::cos(kTwoPi * x); };
  const auto sol = fdm_picard(pb, quadratic_discrete_hamiltonian(), DampingSchedule::constant(0.0), 10, 1e-10);
  CHECK(sol.history.converged);
  CHECK(sol.history.iterations() == 1);
  CHECK(sup_norm(sol.U.data()) == 0.0);
  check_density(sol.M, pb.grid.h);
}

TEST_CASE("smooth scenario: Picard and Newton agree") {
  const auto pb = smooth_scenario();
  const auto H = quadratic_discrete_hamiltonian();
  const double tol = 1e-10;
  const auto pic = fdm_picard(pb, H, DampingSchedule::constant(0.0), 100, tol);
  const auto nw = fdm_newton(pb, H, 30, tol);
  REQUIRE(pic.history.converged);
  REQUIRE(nw.history.converged);
  CHECK(sup_distance(pic.U.data(), nw.U.data()) < 1e-5);
  CHECK(sup_distance(pic.M.data(), nw.M.data()) < 1e-5);
  for (const auto* s : {&pic, &nw}) {
    check_density(s->M, pb.grid.h);
    CHECK(sup_norm(discrete_hjb_residual(pb, H, s->U, s->M)) < 10 * tol);
    CHECK(sup_norm(discrete_kfp_residual(pb, H, s->U, s->M)) < 10 * tol);
  }

  InitialGuess exact{nw.U, nw.M};
  const auto again = fdm_newton(pb, H, 5, 1e-9, exact);
  CHECK(again.history.converged);
  CHECK(again.history.iterations() == 0);
  CHECK(sup_distance(again.U.data(), nw.U.data()) == 0.0);
}

TEST_CASE("grid refinement on the smooth scenario") {
  const auto H = quadratic_discrete_hamiltonian();
  auto solve = [&](int n) {
    auto s = fdm_picard(smooth_scenario(n, n), H, DampingSchedule::constant(0.0), 100, 1e-11);
    REQUIRE(s.history.converged);
    return s;
  };
  const auto ref = solve(512);
  const auto s32 = solve(32), s64 = solve(64);
  const double eu32 = nested_gap(s32.U, ref.U), eu64 = nested_gap(s64.U, ref.U);
  const double em32 = nested_gap(s32.M, ref.M), em64 = nested_gap(s64.M, ref.M);
  CHECK(eu32 / eu64 >= 1.5);
  CHECK(em32 / em64 >= 1.5);
}

TEST_CASE("damping on the low-viscosity scenario") {
  const auto pb = congestion_lite_scenario();
  const auto H = quadratic_discrete_hamiltonian();
  const auto plain = fdm_picard(pb, H, DampingSchedule::constant(0.0), 150, 1e-8);
  const auto damped = fdm_picard(pb, H, DampingSchedule::constant(0.5), 150, 1e-8);
  CHECK_FALSE(plain.history.converged);
  CHECK_FALSE(plain.history.diverged);
  // the undamped iterates settle into a two-cycle: the step size stops shrinking
  const auto& rec = plain.history.records;
  CHECK(rec.back().delta_b > 0.5);
  CHECK(std::abs(rec.back().delta_b - rec[rec.size() - 3].delta_b) < 1e-3 * rec.back().delta_b);
  CHECK(damped.history.converged);
  check_density(damped.M, pb.grid.h);

  const auto nw = fdm_newton(pb, H, 50, 1e-10);
  REQUIRE(nw.history.converged);
  CHECK(sup_distance(damped.M.data(), nw.M.data()) < 1e-5);
}

TEST_CASE("Newton Jacobian structure") {
  const auto pb = smooth_scenario(10, 6);
  const auto H = quadratic_discrete_hamiltonian();
  std::mt19937 rng(4);
  const auto U = random_field(pb.grid, rng, -1.0, 1.0);
  const auto M = random_field(pb.grid, rng, 0.2, 2.0);
  const Eigen::MatrixXd J(newton_jacobian(pb, H, U, M));
  const int N = 10, NT = 6, L = (NT + 1) * N;
  const Eigen::MatrixXd Auu = J.block(0, 0, NT * N, NT * N);
  const Eigen::MatrixXd Amm = J.block(L + N, L + N, NT * N, NT * N);
  CHECK((Auu - Amm.transpose()).cwiseAbs().maxCoeff() < 1e-10);

  // finite-difference columns
  const Eigen::VectorXd x = stack(U, M);
  std::uniform_int_distribution<int> col(0, 2 * L - 1);
  Field Up = U, Mp = M;
  for (int s = 0; s < 20; ++s) {
    const int j = col(rng);
    const double e = 1e-6;
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += e;
    xm[j] -= e;
    unstack(xp, Up, Mp);
    const Eigen::VectorXd fp = newton_residual(pb, H, Up, Mp);
    unstack(xm, Up, Mp);
    const Eigen::VectorXd fm = newton_residual(pb, H, Up, Mp);
    const Eigen::VectorXd fd = (fp - fm) / (2 * e);
    const Eigen::VectorXd an = J.col(j);
    CHECK((fd - an).norm() / an.norm() < 1e-5);
  }
}

TEST_CASE("continuation in viscosity") {
  const auto pb = congestion_lite_scenario();
  const auto H = quadratic_discrete_hamiltonian();
  const double tol = 1e-10;
  const auto cold = fdm_newton(pb, H, 50, tol);
  REQUIRE(cold.history.converged);

  const std::vector<double> single{pb.nu};
  const auto one = continuation_in_nu(pb, H, single, 50, tol);
  CHECK(sup_distance(one.U.data(), cold.U.data()) == 0.0);
  CHECK(sup_distance(one.M.data(), cold.M.data()) == 0.0);

  const std::vector<double> coarse{0.5, 0.2, 0.05}, finer{0.5, 0.35, 0.2, 0.1, 0.05};
  const auto a = continuation_in_nu(pb, H, coarse, 50, tol);
  const auto b = continuation_in_nu(pb, H, finer, 50, tol);
  CHECK(sup_distance(a.M.data(), b.M.data()) < 1e-6);
  CHECK(sup_distance(a.U.data(), b.U.data()) < 1e-6);

  // the last stage, warm-started at nu = 0.2, needs fewer steps than the cold start
  auto mid = pb;
  mid.nu = 0.2;
  const std::vector<double> head{0.5, 0.2};
  const auto warm = continuation_in_nu(mid, H, head, 50, tol);
  const auto last = fdm_newton(pb, H, 50, tol, InitialGuess{warm.U, warm.M});
  CHECK(last.history.converged);
  CHECK(last.history.iterations() < cold.history.iterations());

  const std::vector<double> bad{0.2, 0.5, 0.05};
  CHECK_THROWS_AS(continuation_in_nu(pb, H, bad, 50, tol), PreconditionError);
  const std::vector<double> wrong_end{0.5, 0.2};
  CHECK_THROWS_AS(continuation_in_nu(pb, H, wrong_end, 50, tol), PreconditionError);
}

TEST_CASE("Lasry-Lions diagnostic") {
  auto pb = smooth_scenario();
  pb.f0 = [](double, double m) { return std::log(m); };
  pb.df0_dm = nullptr;
  auto rep = lasry_lions_diagnostic(pb, 500);
  CHECK(rep.monotone_fail == 0);
  CHECK(rep.convex_fail == 0);
  CHECK(rep.passed());

  pb.f0 = [](double, double m) { return -m; };
  rep = lasry_lions_diagnostic(pb, 500);
  CHECK(rep.monotone_fail == 500);
  CHECK_FALSE(rep.passed());
}

TEST_CASE("problem validation") {
  auto pb = smooth_scenario();
  pb.m0 = [](double) { return 2.0; };
  CHECK_THROWS_WITH_AS(initial_density(pb), doctest::Contains("m0"), PreconditionError);
  pb = smooth_scenario();
  pb.nu = -1.0;
  CHECK_THROWS_WITH_AS(fdm_newton(pb, quadratic_discrete_hamiltonian(), 5, 1e-9), doctest::Contains("nu"),
                       PreconditionError);
}
