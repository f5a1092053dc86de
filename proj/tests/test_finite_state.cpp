#include "doctest.h"

#include <cmath>
#include <numeric>
#include <random>

#include "mfgnum/finite_state.hpp"
#include "mfgnum/grid.hpp"

using namespace mfgnum;
using namespace mfgnum::finite;

namespace {

constexpr int DI = 0, DS = 1, UI = 2, US = 3;

// Rate matrix written out entry by entry from the model description.
Eigen::Matrix4d cyber_rates_by_hand(const CyberParams& p, const std::vector<double>& m, const std::vector<double>& a) {
  Eigen::Matrix4d Q = Eigen::Matrix4d::Zero();
  Q(DI, DS) = p.q_rec_D;
  Q(DI, UI) = p.rho * a[DI];
  Q(DS, DI) = p.v_H * p.q_inf_D + p.beta_DD * m[DI] + p.beta_UD * m[UI];
  Q(DS, US) = p.rho * a[DS];
  Q(UI, DI) = p.rho * a[UI];
  Q(UI, US) = p.q_rec_U;
  Q(US, DS) = p.rho * a[US];
  Q(US, UI) = p.v_H * p.q_inf_U + p.beta_UU * m[UI] + p.beta_DU * m[DI];
  for (int x = 0; x < 4; ++x) Q(x, x) = -Q.row(x).sum();
  return Q;
}

std::vector<double> random_simplex(std::mt19937& rng, int d) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> m(d);
  for (auto& v : m) v = e(rng);
  const double s = std::accumulate(m.begin(), m.end(), 0.0);
  for (auto& v : m) v /= s;
  return m;
}

FiniteMFG uncoupled_model() {
  FiniteMFG pb;
  pb.n_states = 3;
  pb.actions = {0.0, 0.5, 1.0};
  pb.rate = [](int x, int y, std::span<const double>, double a) { return (y == (x + 1) % 3) ? 0.2 + a : 0.1; };
  pb.running_cost = [](int x, std::span<const double>, double a) { return x + a * a; };
  pb.terminal_cost = [](int x, std::span<const double>) { return 0.5 * x; };
  pb.T = 2.0;
  pb.m0 = {0.2, 0.5, 0.3};
  return pb;
}

const std::vector<std::vector<double>> kCyberStarts = {{0.25, 0.25, 0.25, 0.25}, {1, 0, 0, 0}, {0, 0, 0, 1}};

// Lifted cyber control problem of the Q-learning runs: dt = 0.1, gamma = 0.5.
LiftedMDP cyber_mfc_lift() {
  auto pb = cybersecurity_model(cyber_mfc_params());
  pb.beta = discount_rate_for(0.5, 0.1);
  return mfc_lift(pb, 0.1);
}

double cubic(double t, double M) { return t * t * M * M * M + t * (2.0 - t) * M * std::abs(M) + (1.0 - 2.0 * t) * M; }

}  // namespace

TEST_CASE("hamiltonian: constant objective picks the first action") {
  FiniteMFG pb;
  pb.n_states = 2;
  pb.actions = {0.0, 1.0, 2.0};
  pb.rate = [](int, int, std::span<const double>, double) { return 0.0; };
  pb.running_cost = [](int, std::span<const double>, double) { return 1.5; };
  const std::vector<double> m{0.5, 0.5}, h{3.0, -1.0};
  const auto H = hamiltonian_finite(pb, 0, m, h);
  CHECK(H.value == -1.5);
  CHECK(H.action == 0);
}

TEST_CASE("hamiltonian: flip model gives the negative part of the jump squared") {
  const auto pb = flip_model(2.0, 21);
  const std::vector<double> m{0.5, 0.5};
  for (double jump : {-1.5, -0.5, 0.0, 0.3, 1.0}) {
    const std::vector<double> h{0.0, jump};
    const auto H = hamiltonian_finite(pb, 0, m, h);
    const double neg = std::max(0.0, -jump);
    CHECK(H.value == doctest::Approx(0.5 * neg * neg).epsilon(1e-14));
    CHECK(pb.actions[H.action] == doctest::Approx(neg).epsilon(1e-14));
  }
}

TEST_CASE("hamiltonian: cybersecurity argmax matches a brute-force scan") {
  const auto p = cyber_mfg_params();
  const auto pb = cybersecurity_model(p);
  std::mt19937 rng(7);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = random_simplex(rng, 4);
    std::vector<double> u(4);
    for (auto& v : u) v = nd(rng);
    for (int x = 0; x < 4; ++x) {
      double best = -1e300;
      int arg = -1;
      for (int k = 0; k < 2; ++k) {
        const auto Q = cyber_rates_by_hand(p, m, std::vector<double>(4, pb.actions[k]));
        const double f = -((x == DI || x == DS ? p.k_D : 0.0) + (x == DI || x == UI ? p.k_I : 0.0));
        double L = f;
        for (int y = 0; y < 4; ++y) L += Q(x, y) * u[y];
        if (-L > best) best = -L, arg = k;
      }
      const auto H = hamiltonian_finite(pb, x, m, u);
      CHECK(H.action == arg);
      CHECK(H.value == doctest::Approx(best).epsilon(1e-14));
    }
  }
}

TEST_CASE("cybersecurity: rate matrix structure") {
  const auto p = cyber_mfg_params();
  const auto pb = cybersecurity_model(p);
  std::mt19937 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = random_simplex(rng, 4);
    const std::vector<double> a{double(trial % 2), double((trial / 2) % 2), double((trial / 4) % 2), 1.0};
    const auto L = pb.rate_matrix(m, a);
    CHECK((L - cyber_rates_by_hand(p, m, a)).cwiseAbs().maxCoeff() < 1e-15);
    for (int x = 0; x < 4; ++x) CHECK(std::abs(L.row(x).sum()) < 1e-12);
  }
  const std::vector<double> eUS{0, 0, 0, 1}, zero(4, 0.0);
  const auto L = pb.rate_matrix(eUS, zero);
  CHECK(L(DI, UI) == 0.0);
  CHECK(L(UI, DI) == 0.0);
  CHECK(L(DS, US) == 0.0);
  CHECK(L(US, DS) == 0.0);
  CHECK(L(US, UI) == doctest::Approx(p.v_H * p.q_inf_U).epsilon(1e-15));
  CHECK(pb.running_cost(DI, eUS, 0.0) == doctest::Approx(-(p.k_D + p.k_I)));
  auto flipped = p;
  flipped.flip_cost_sign = true;
  CHECK(cybersecurity_model(flipped).running_cost(DI, eUS, 0.0) == doctest::Approx(p.k_D + p.k_I));
}

TEST_CASE("cybersecurity: parameter sets") {
  const auto g = cyber_mfg_params();
  CHECK(g.beta_UU == 0.3);
  CHECK(g.beta_UD == 0.4);
  CHECK(g.beta_DU == 0.3);
  CHECK(g.beta_DD == 0.4);
  CHECK(g.v_H == 0.2);
  CHECK(g.rho == 0.5);
  CHECK(g.q_rec_D == 0.1);
  CHECK(g.q_rec_U == 0.65);
  CHECK(g.q_inf_D == 0.4);
  CHECK(g.q_inf_U == 0.3);
  CHECK(g.k_D == 0.3);
  CHECK(g.k_I == 0.5);
  const auto c = cyber_mfc_params();
  CHECK(c.v_H == 0.6);
  CHECK(c.rho == 0.8);
  CHECK(c.q_rec_D == 0.5);
  CHECK(c.q_rec_U == 0.4);
  CHECK(c.q_inf_D == 0.4);
  CHECK(c.q_inf_U == 0.3);
  CHECK(c.k_D == 0.3);
  CHECK(c.k_I == 0.5);
  auto bad = g;
  bad.rho = -1.0;
  CHECK_THROWS_WITH_AS(cybersecurity_model(bad), doctest::Contains("rho"), PreconditionError);
}

TEST_CASE("finite solver: input validation") {
  auto pb = uncoupled_model();
  FiniteSolveOptions o;
  o.n_time = 10;
  pb.actions.clear();
  CHECK_THROWS_AS(solve_finite_mfg(pb, FiniteMethod::picard, o), PreconditionError);
  pb = uncoupled_model();
  pb.m0 = {0.5, 0.5, 0.5};
  CHECK_THROWS_AS(solve_finite_mfg(pb, FiniteMethod::picard, o), PreconditionError);
  pb.m0 = {0.5, 0.5};
  CHECK_THROWS_AS(solve_finite_mfg(pb, FiniteMethod::picard, o), ShapeError);
  pb = uncoupled_model();
  o.n_time = 0;
  CHECK_THROWS_AS(solve_finite_mfg(pb, FiniteMethod::newton, o), PreconditionError);
  pb.rate = [](int, int, std::span<const double>, double) { return -1.0; };
  o.n_time = 10;
  CHECK_THROWS_AS(solve_finite_mfg(pb, FiniteMethod::picard, o), PreconditionError);
}

TEST_CASE("finite solver: uncoupled model is exact after one Picard pass") {
  const auto pb = uncoupled_model();
  FiniteSolveOptions o;
  o.n_time = 200;
  const auto r = solve_finite_mfg(pb, FiniteMethod::picard, o);
  REQUIRE(r.history.converged);
  CHECK(r.history.records.front().residual < 1e-13);
  CHECK(r.history.records.size() == 2);
  const auto rn = solve_finite_mfg(pb, FiniteMethod::newton, o);
  CHECK(rn.history.converged);
  CHECK((rn.flow.u - r.flow.u).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("finite solver: residual vanishes on the scheme's own output") {
  // Hand-rolled one-step check of the HJB and KFP rows for a single level.
  const auto pb = uncoupled_model();
  FlowPair f;
  f.m.resize(2, 3);
  f.u.resize(2, 3);
  f.m.row(0) << 0.2, 0.5, 0.3;
  f.u.row(1) << 0.0, 0.5, 1.0;
  const double dt = pb.T;
  std::vector<double> m0{0.2, 0.5, 0.3}, u1{0.0, 0.5, 1.0};
  std::vector<double> a(3);
  for (int x = 0; x < 3; ++x) a[x] = pb.actions[hamiltonian_finite(pb, x, m0, u1).action];
  const Eigen::Matrix3d A = Eigen::Matrix3d::Identity() - dt * pb.rate_matrix(m0, a);
  Eigen::Vector3d rhs;
  for (int x = 0; x < 3; ++x) rhs[x] = u1[x] + dt * pb.running_cost(x, m0, a[x]);
  f.u.row(0) = A.lu().solve(rhs).transpose();
  f.m.row(1) = A.transpose().lu().solve(Eigen::Vector3d(0.2, 0.5, 0.3)).transpose();
  const auto r = finite_mfg_residual(pb, f);
  REQUIRE(r.size() == 9);
  for (int i = 0; i < 9; ++i) CHECK(std::abs(r[i]) < 1e-14);
  f.u(1, 2) += 1.0;  // terminal row is u^N - g
  CHECK(std::abs(finite_mfg_residual(pb, f)[5]) == doctest::Approx(1.0));
}

TEST_CASE("cybersecurity: three starts, simplex preserved, Picard and Newton agree") {
  FiniteSolveOptions o;
  o.n_time = 1000;
  for (const auto& m0 : kCyberStarts) {
    const auto pb = cybersecurity_model(cyber_mfg_params(), m0, 10.0);
    const auto rp = solve_finite_mfg(pb, FiniteMethod::picard, o);
    const auto rn = solve_finite_mfg(pb, FiniteMethod::newton, o);
    REQUIRE(rp.history.converged);
    REQUIRE(rn.history.converged);
    CHECK(rp.history.records.back().residual < 10 * o.tol);
    CHECK(rn.history.records.back().residual < 10 * o.tol);
    for (int n = 0; n <= o.n_time; ++n) {
      CHECK(std::abs(rp.flow.m.row(n).sum() - 1.0) < 1e-9);
      CHECK(rp.flow.m.row(n).minCoeff() >= -1e-12);
      CHECK(std::abs(rn.flow.m.row(n).sum() - 1.0) < 1e-9);
    }
    CHECK((rp.flow.m - rn.flow.m).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((rp.flow.u - rn.flow.u).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("finite solver: Newton handles a population-dependent terminal cost") {
  const auto pb = flip_model(2.0, 41, {0.8, 0.2}, 1.0);
  FiniteSolveOptions o;
  o.n_time = 100;
  const auto rp = solve_finite_mfg(pb, FiniteMethod::picard, o, DampingSchedule::constant(0.5));
  const auto rn = solve_finite_mfg(pb, FiniteMethod::newton, o);
  REQUIRE(rp.history.converged);
  REQUIRE(rn.history.converged);
  CHECK((rp.flow.m - rn.flow.m).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("entropy oracle: exact values and sign") {
  for (double mb : {-1.0, -0.3, 0.0, 0.4, 1.0}) CHECK(entropy_z_exact(0.0, mb) == 2.0 * mb);
  for (double t : {0.0, 0.3, 1.0, 2.5}) CHECK(entropy_z_exact(t, 0.0) == 0.0);
  // t = 1, mbar = 1: M^3 + M^2 - M - 1 = (M - 1)(M + 1)^2, so M = 1 and Z = 1.
  CHECK(std::abs(entropy_z_exact(1.0, 1.0) - 1.0) < 1e-10);
  CHECK(std::abs(entropy_z_exact(1.0, -1.0) + 1.0) < 1e-10);
  // As mbar -> 0+ at t = 1 the root tends to the positive root of M^2 + M - 1.
  const double M0 = 0.5 * (std::sqrt(5.0) - 1.0);
  CHECK(std::abs(entropy_z_exact(1.0, 1e-15) - 2.0 * M0 / (M0 + 1.0)) < 1e-10);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> ut(0.0, 1.0), um(-1.0, 1.0);
  for (int k = 0; k < 500; ++k) {
    const double t = ut(rng), mb = um(rng);
    const double Z = entropy_z_exact(t, mb);
    CHECK(std::signbit(Z) == std::signbit(mb));
    CHECK(entropy_z_exact(t, -mb) == -Z);
    // Invert Z = 2M / (t|M| + 1) and plug the root back into the cubic.
    const double M = Z / (2.0 - t * std::abs(Z));
    CHECK(std::abs(cubic(t, M) - mb) < 1e-10);
  }
  CHECK_THROWS_AS(entropy_z_exact(-0.1, 0.5), PreconditionError);
  CHECK_THROWS_AS(entropy_z_exact(0.5, 1.5), PreconditionError);
}

TEST_CASE("simplex grid: size, lookup and projection") {
  const SimplexGrid g(4, 30);
  CHECK(g.size() == 4960);
  for (int i = 0; i < g.size(); i += 37) {
    const auto& p = g.point(i);
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-14);
    CHECK(g.project(p) == i);
  }
  std::mt19937 rng(5);
  for (int k = 0; k < 200; ++k) {
    const auto m = random_simplex(rng, 4);
    const auto& p = g.point(g.project(m));
    for (int x = 0; x < 4; ++x) CHECK(std::abs(p[x] - m[x]) <= 1.0 / 29 + 1e-14);
  }
  const SimplexGrid two(2, 2);
  const std::vector<double> half{0.5, 0.5};
  CHECK(two.point(two.project(half))[0] == 1.0);
  const SimplexGrid three(3, 2);
  const std::vector<double> third{1.0 / 3, 1.0 / 3, 1.0 / 3};
  CHECK(three.point(three.project(third))[0] == 1.0);
  CHECK_THROWS_AS(SimplexGrid(4, 1), PreconditionError);
  const std::vector<int> bad{1, 1, 1, 1};
  CHECK_THROWS_AS((void)g.index_of(bad), PreconditionError);
}

TEST_CASE("mfc lift: transitions and costs") {
  auto still = uncoupled_model();
  still.rate = [](int, int, std::span<const double>, double) { return 0.0; };
  auto mdp = mfc_lift(still, 0.25);
  CHECK(mdp.joint_actions.size() == 27);
  const std::vector<double> m{0.2, 0.5, 0.3};
  for (int j = 0; j < 27; ++j) CHECK(mdp.phi(m, j) == m);
  CHECK(mdp.gamma == 1.0);

  const auto cyber = cyber_mfc_lift();
  CHECK(cyber.gamma == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(cyber.joint_actions.size() == 16);
  const auto pb = cybersecurity_model(cyber_mfc_params());
  std::mt19937 rng(2);
  for (int k = 0; k < 50; ++k) {
    const auto mm = random_simplex(rng, 4);
    const int j = k % 16;
    const auto next = cyber.phi(mm, j);
    CHECK(std::abs(std::accumulate(next.begin(), next.end(), 0.0) - 1.0) < 1e-14);
    for (double v : next) CHECK(v >= 0.0);
    double c = 0.0;
    for (int x = 0; x < 4; ++x) c += pb.running_cost(x, mm, cyber.joint_actions[j][x]) * mm[x];
    CHECK(cyber.cost(mm, j) == doctest::Approx(c * 0.1).epsilon(1e-14));
  }
  CHECK_THROWS_AS(mfc_lift(pb, -0.1), PreconditionError);
  CHECK_THROWS_AS(mfc_lift(pb, 5.0), PreconditionError);
  CHECK_THROWS_AS(mfc_lift(pb, 0.1, 8), PreconditionError);
  CHECK_THROWS_AS(discount_rate_for(0.0, 0.1), PreconditionError);
}

TEST_CASE("q-learning: trivial costs and discounts") {
  const SimplexGrid g(4, 8);
  auto mdp = cyber_mfc_lift();
  auto zero_cost = mdp;
  zero_cost.cost = [](std::span<const double>, int) { return 0.0; };
  const auto r0 = q_learning_mfc(zero_cost, g);
  CHECK(r0.converged);
  for (double v : r0.q.values()) CHECK(v == 0.0);

  auto myopic = mdp;
  myopic.gamma = 0.0;
  const auto r1 = q_learning_mfc(myopic, g);
  for (int i = 0; i < g.size(); ++i)
    for (int a = 0; a < 16; ++a) CHECK(r1.q(i, a) == mdp.cost(g.point(i), a));
}

TEST_CASE("q-learning: contraction, Bellman residual, thread independence") {
  const SimplexGrid g(4, 30);
  const auto mdp = cyber_mfc_lift();
  const auto r = q_learning_mfc(mdp, g, {.max_sweeps = 2000, .tol = 1e-10, .threads = 1});
  REQUIRE(r.converged);
  for (std::size_t k = 1; k < r.sup_change.size(); ++k)
    if (r.sup_change[k - 1] > 1e-14) CHECK(r.sup_change[k] <= (0.5 + 1e-9) * r.sup_change[k - 1]);
  CHECK(r.bellman_residual.back() < 10 * 1e-10);
  const auto rt = q_learning_mfc(mdp, g, {.max_sweeps = 2000, .tol = 1e-10, .threads = 4});
  CHECK(rt.q.values() == r.q.values());
}

TEST_CASE("greedy rollout: degenerate models") {
  const SimplexGrid g(3, 6);
  auto still = uncoupled_model();
  still.rate = [](int, int, std::span<const double>, double) { return 0.0; };
  still.beta = 1.0;
  const auto mdp = mfc_lift(still, 0.1);
  const auto q = q_learning_mfc(mdp, g).q;
  const std::vector<double> m{0.2, 0.5, 0.3};
  const auto ro = greedy_rollout(mdp, q, g, m, 20);
  CHECK(ro.flow.size() == 21);
  for (const auto& mm : ro.flow) CHECK(mm == m);

  auto free = mdp;
  free.cost = [](std::span<const double>, int) { return 0.0; };
  CHECK(greedy_rollout(free, q_learning_mfc(free, g).q, g, m, 20).value == 0.0);
  CHECK_THROWS_AS(greedy_rollout(mdp, q, g, m, -1), PreconditionError);
}

TEST_CASE("greedy rollout tracks min Q, closer on the finer simplex") {
  const auto mdp = cyber_mfc_lift();
  double worst_coarse = 0.0, worst_fine = 0.0;
  for (int n_axis : {10, 30}) {
    const SimplexGrid g(4, n_axis);
    const auto q = q_learning_mfc(mdp, g).q;
    for (const auto& m0 : kCyberStarts) {
      const double rollout = greedy_rollout(mdp, q, g, m0, 60).value;
      const double qmin = q.min_value(g.project(m0));
      const double rel = std::abs(rollout - qmin) / std::abs(qmin);
      (n_axis == 10 ? worst_coarse : worst_fine) = std::max(n_axis == 10 ? worst_coarse : worst_fine, rel);
      if (n_axis == 30) CHECK(rel < 0.05);
    }
  }
  CHECK(worst_fine < worst_coarse);
}
