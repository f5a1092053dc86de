#include "mfgnum/monotone.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <cstdio>
#include <string>

#include <Eigen/SparseLU>

namespace mfgnum::monotone {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Partials {
  std::vector<double> H, a, b, a1, a2, b1, b2;  // a = dH/dp1, b = dH/dp2; a1 = d2H/dp1^2, a2 = b1 = d2H/dp1dp2, b2
};

double second_raw(const fdm::XPP& exact, const fdm::XPP& first, double x, double p1, double p2, int which) {
  if (exact) return exact(x, p1, p2);
  const double e = 1e-6 * (1.0 + std::abs(which == 1 ? p1 : p2));
  if (which == 1) return (first(x, p1 + e, p2) - first(x, p1 - e, p2)) / (2.0 * e);
  return (first(x, p1, p2 + e) - first(x, p1, p2 - e)) / (2.0 * e);
}

// On a kink (p exactly zero) the one-sided second derivatives are averaged; the uniform initial state sits
// there at every node and the inactive branch alone gives no descent.
double second(const fdm::XPP& exact, const fdm::XPP& first, double x, double p1, double p2, int which) {
  const double p = which == 1 ? p1 : p2;
  if (p != 0.0) return second_raw(exact, first, x, p1, p2, which);
  constexpr double t = 1e-12;
  if (which == 1)
    return 0.5 * (second_raw(exact, first, x, t, p2, 1) + second_raw(exact, first, x, -t, p2, 1));
  return 0.5 * (second_raw(exact, first, x, p1, t, 2) + second_raw(exact, first, x, p1, -t, 2));
}

Partials partials(const ErgodicScenario& sc, const std::vector<double>& U, bool with_second) {
  const auto& g = sc.grid;
  const auto grad = nabla_h(U, g.h, true);
  const int N = g.n_space;
  Partials P;
  P.H.resize(N);
  P.a.resize(N);
  P.b.resize(N);
  if (with_second) P.a1.resize(N), P.a2.resize(N), P.b1.resize(N), P.b2.resize(N);
  for (int i = 0; i < N; ++i) {
    const double x = g.x(i), p1 = grad[i].p1, p2 = grad[i].p2;
    P.H[i] = sc.ham.eval(x, p1, p2);
    P.a[i] = sc.ham.d_p1(x, p1, p2);
    P.b[i] = sc.ham.d_p2(x, p1, p2);
    if (with_second) {
      P.a1[i] = second(sc.ham.d_p1p1, sc.ham.d_p1, x, p1, p2, 1);
      P.a2[i] = second(sc.ham.d_p1p2, sc.ham.d_p1, x, p1, p2, 2);
      P.b1[i] = P.a2[i];
      P.b2[i] = second(sc.ham.d_p2p2, sc.ham.d_p2, x, p1, p2, 2);
    }
  }
  return P;
}

double sup(const std::vector<double>& v) { return sup_norm(v); }

double euclid(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void check_sizes(const ErgodicScenario& sc, const std::vector<double>& U, const std::vector<double>& M) {
  const auto n = static_cast<std::size_t>(sc.grid.n_space);
  if (U.size() != n || M.size() != n)
    throw ShapeError("U and M must have " + std::to_string(n) + " entries");
}

double l2(const std::vector<double>& a, const std::vector<double>& b, double h) { return l2_distance(a, b, h); }

}  // namespace

void ErgodicScenario::validate() const {
  if (!grid.periodic()) throw PreconditionError("grid must be a torus");
  if (grid.n_space < 3) throw PreconditionError("grid.n_space must be at least 3");
  if (!(nu >= 0.0)) throw PreconditionError("nu must be nonnegative");
  if (!ham.eval || !ham.d_p1 || !ham.d_p2) throw PreconditionError("ham must provide eval, d_p1 and d_p2");
}

double psi(const ErgodicScenario& sc, const std::vector<double>& U, const std::vector<double>& M) {
  check_sizes(sc, U, M);
  const auto& g = sc.grid;
  const auto lap = laplacian_h(U, g.h, true);
  const auto P = partials(sc, U, false);
  double s = 0.0;
  for (int i = 0; i < g.n_space; ++i) s += sc.nu * lap[i] - P.H[i] + std::log(M[i]);
  return -g.h * s;
}

std::vector<double> flow_rhs(const ErgodicScenario& sc, const std::vector<double>& U, const std::vector<double>& M) {
  check_sizes(sc, U, M);
  const auto& g = sc.grid;
  const int N = g.n_space;
  const auto lapU = laplacian_h(U, g.h, true), lapM = laplacian_h(M, g.h, true);
  const auto T = fdm::transport_coeffs(sc.ham, U, M, g);
  const auto P = partials(sc, U, false);
  const double lam = psi(sc, U, M);
  std::vector<double> r(2 * N);
  for (int i = 0; i < N; ++i) {
    r[i] = sc.nu * lapM[i] + T[i];
    r[N + i] = -(lam + sc.nu * lapU[i] - P.H[i] + std::log(M[i]));
  }
  return r;
}

std::vector<double> step_residual(const ErgodicScenario& sc, const ErgodicState& from, const std::vector<double>& U,
                                  const std::vector<double>& M, double dtau) {
  check_sizes(sc, from.U, from.M);
  auto r = flow_rhs(sc, U, M);
  const int N = sc.grid.n_space;
  for (int i = 0; i < N; ++i) {
    r[i] = (U[i] - from.U[i]) / dtau - r[i];
    r[N + i] = (M[i] - from.M[i]) / dtau - r[N + i];
  }
  return r;
}

namespace {

// Jacobian of the step residual without the psi term, plus the gradient of psi.
Eigen::SparseMatrix<double> linearize(const ErgodicScenario& sc, const std::vector<double>& U,
                                      const std::vector<double>& M, double dtau, Eigen::VectorXd& grad_psi) {
  const auto& g = sc.grid;
  const int N = g.n_space;
  const double h = g.h, nu = sc.nu, lap = nu / (h * h);
  auto w = [&](int i) { return g.wrap(i); };
  const auto P = partials(sc, U, true);
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(N) * 20);
  // d a_k / dU and d b_k / dU on the stencil k-1, k, k+1.
  auto add_da = [&](int row, int k, double c) {
    t.emplace_back(row, w(k + 1), c * P.a1[k] / h);
    t.emplace_back(row, w(k), c * (-P.a1[k] + P.a2[k]) / h);
    t.emplace_back(row, w(k - 1), -c * P.a2[k] / h);
  };
  auto add_db = [&](int row, int k, double c) {
    t.emplace_back(row, w(k + 1), c * P.b1[k] / h);
    t.emplace_back(row, w(k), c * (-P.b1[k] + P.b2[k]) / h);
    t.emplace_back(row, w(k - 1), -c * P.b2[k] / h);
  };
  grad_psi = Eigen::VectorXd::Zero(2 * N);
  for (int i = 0; i < N; ++i) {
    const int im = w(i - 1), ip = w(i + 1);
    // Rows of the U block: (U - U^n)/dtau - nu Delta M - T(U, M).
    t.emplace_back(i, i, 1.0 / dtau);
    add_da(i, i, -M[i] / h);
    add_da(i, im, M[im] / h);
    add_db(i, ip, -M[ip] / h);
    add_db(i, i, M[i] / h);
    t.emplace_back(i, N + i, 2.0 * lap - (P.a[i] - P.b[i]) / h);
    t.emplace_back(i, N + im, -lap + P.a[im] / h);
    t.emplace_back(i, N + ip, -lap - P.b[ip] / h);
    // Rows of the M block without psi: (M - M^n)/dtau + nu Delta U - H0 + log M.
    t.emplace_back(N + i, ip, lap - P.a[i] / h);
    t.emplace_back(N + i, i, -2.0 * lap + (P.a[i] - P.b[i]) / h);
    t.emplace_back(N + i, im, lap + P.b[i] / h);
    t.emplace_back(N + i, N + i, 1.0 / dtau + 1.0 / M[i]);
    grad_psi[ip] += P.a[i];
    grad_psi[i] += -P.a[i] + P.b[i];
    grad_psi[im] += -P.b[i];
    grad_psi[N + i] = -h / M[i];
  }
  Eigen::SparseMatrix<double> S(2 * N, 2 * N);
  S.setFromTriplets(t.begin(), t.end());
  S.makeCompressed();
  return S;
}

}  // namespace

Eigen::MatrixXd step_jacobian(const ErgodicScenario& sc, const std::vector<double>& U, const std::vector<double>& M,
                              double dtau) {
  check_sizes(sc, U, M);
  Eigen::VectorXd grad_psi;
  Eigen::MatrixXd J = linearize(sc, U, M, dtau, grad_psi);
  const int N = sc.grid.n_space;
  J.bottomRows(N).rowwise() += grad_psi.transpose();
  return J;
}

namespace {

struct NewtonRun {
  bool converged = false;
  int iterations = 0, halvings = 0;
  double residual = 0.0;
  std::string failure;
};

// Damped Newton for the step from `state` of size dtau, started at (U, M) and updated in place.
NewtonRun newton(const ErgodicScenario& sc, const ErgodicState& state, std::vector<double>& U,
                 std::vector<double>& M, double dtau, const NewtonOptions& opt) {
  const int N = sc.grid.n_space;
  NewtonRun run;
  // Convergence is measured on the increment form X - X^n - dtau rhs(X), i.e. dtau times the residual.
  auto F = step_residual(sc, state, U, M, dtau);
  double norm = dtau * sup(F), merit = euclid(F);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  Eigen::VectorXd e = Eigen::VectorXd::Zero(2 * N);
  e.tail(N).setOnes();
  while (norm >= opt.tol) {
    if (run.iterations >= opt.max_iter) {
      run.failure = "no convergence in " + std::to_string(opt.max_iter) + " iterations";
      run.residual = norm;
      return run;
    }
    ++run.iterations;
    // Unknowns (U, log M): the M columns of the Jacobian are scaled by M, which keeps M positive and follows the
    // log coupling when the step drives M towards zero.
    Eigen::VectorXd grad_psi;
    Eigen::SparseMatrix<double> S = linearize(sc, U, M, dtau, grad_psi);
    Eigen::VectorXd scale = Eigen::VectorXd::Ones(2 * N);
    for (int i = 0; i < N; ++i) scale[N + i] = M[i];
    S = S * scale.asDiagonal();
    grad_psi = grad_psi.cwiseProduct(scale);
    if (run.iterations == 1) lu.analyzePattern(S);
    lu.factorize(S);
    if (lu.info() != Eigen::Success) {
      run.failure = "singular Newton matrix";
      run.residual = norm;
      return run;
    }
    // psi adds the same row vector to every M row: J = S + e grad_psi^T, solved by Sherman-Morrison.
    const Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(F.data(), 2 * N);
    const Eigen::VectorXd y = lu.solve(rhs), z = lu.solve(e);
    const Eigen::VectorXd step = y - z * (grad_psi.dot(y) / (1.0 + grad_psi.dot(z)));

    double theta = 1.0;
    for (int halving = 0;; ++halving) {
      if (halving > opt.max_halvings) {
        run.failure = "damping exhausted after " + std::to_string(opt.max_halvings) + " halvings";
        run.residual = norm;
        return run;
      }
      std::vector<double> Ut(N), Mt(N);
      bool positive = true;
      for (int i = 0; i < N; ++i) {
        Ut[i] = U[i] + theta * step[i];
        Mt[i] = M[i] * std::exp(theta * step[N + i]);
        positive = positive && Mt[i] > 0.0 && std::isfinite(Mt[i]);
      }
      if (positive) {
        auto Ft = step_residual(sc, state, Ut, Mt, dtau);
        const double nt = dtau * sup(Ft), mt = euclid(Ft);
        if (mt < merit || nt < opt.tol) {
          U = std::move(Ut);
          M = std::move(Mt);
          F = std::move(Ft);
          norm = nt;
          merit = mt;
          break;
        }
      }
      theta *= 0.5;
      ++run.halvings;
    }
  }
  run.converged = true;
  run.residual = norm;
  return run;
}

// Solves the step of size dtau; when Newton from the previous state fails, the solution for dtau / 2 is used as
// the starting point, recursively up to `depth` times.
bool solve_step(const ErgodicScenario& sc, const ErgodicState& state, std::vector<double>& U, std::vector<double>& M,
                double dtau, const NewtonOptions& opt, int depth, StepReport& rep, std::string& failure) {
  std::vector<double> U0 = U, M0 = M;
  auto run = newton(sc, state, U, M, dtau, opt);
  rep.newton_iterations += run.iterations;
  rep.halvings += run.halvings;
  rep.residual = run.residual;
  if (run.converged) return true;
  failure = run.failure;
  if (depth == 0) return false;
  U = std::move(U0);
  M = std::move(M0);
  if (!solve_step(sc, state, U, M, 0.5 * dtau, opt, depth - 1, rep, failure)) return false;
  run = newton(sc, state, U, M, dtau, opt);
  rep.newton_iterations += run.iterations;
  rep.halvings += run.halvings;
  rep.residual = run.residual;
  if (!run.converged) failure = run.failure;
  return run.converged;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

}  // namespace

StepReport flow_step_report(const ErgodicScenario& sc, const ErgodicState& state, double dtau,
                            const NewtonOptions& opt) {
  sc.validate();
  check_sizes(sc, state.U, state.M);
  if (!(dtau > 0.0)) throw PreconditionError("dtau must be positive");
  if (*std::min_element(state.M.begin(), state.M.end()) <= 0.0)
    throw PreconditionError("state.M must be strictly positive");
  if (opt.max_continuation < 0) throw PreconditionError("max_continuation must be nonnegative");

  StepReport rep;
  std::vector<double> U = state.U, M = state.M;
  std::string failure;
  if (!solve_step(sc, state, U, M, dtau, opt, opt.max_continuation, rep, failure))
    throw SolverError("flow step: " + failure + " (residual " + sci(rep.residual) + ")");
  rep.state.lambda = psi(sc, U, M);
  rep.state.U = std::move(U);
  rep.state.M = std::move(M);
  return rep;
}

ErgodicState flow_step(const ErgodicScenario& sc, const ErgodicState& state, double dtau, const NewtonOptions& opt) {
  return flow_step_report(sc, state, dtau, opt).state;
}

FlowResult run_flow(const ErgodicScenario& sc, int n_steps, double dtau, std::optional<ErgodicState> initial,
                    const NewtonOptions& opt) {
  sc.validate();
  if (n_steps < 0) throw PreconditionError("n_steps must be nonnegative");
  const auto& g = sc.grid;
  const int N = g.n_space;
  ErgodicState s = initial ? *initial : ErgodicState{std::vector<double>(N, 0.0), std::vector<double>(N, 1.0), 0.0};
  check_sizes(sc, s.U, s.M);
  std::optional<ExactSolution> ex;
  if (sc.exact) ex = sc.exact(g);

  FlowResult out;
  auto& H = out.history;
  for (int n = 0; n < n_steps; ++n) {
    auto rep = flow_step_report(sc, s, dtau, opt);
    const double du = l2(rep.state.U, s.U, g.h), dm = l2(rep.state.M, s.M, g.h);
    H.delta_u.push_back(du);
    H.delta_m.push_back(dm);
    H.delta_tot.push_back(std::hypot(du, dm));
    H.min_m.push_back(*std::min_element(rep.state.M.begin(), rep.state.M.end()));
    H.newton_iterations.push_back(rep.newton_iterations);
    if (ex) {
      const double eu = l2(rep.state.U, ex->U, g.h), em = l2(rep.state.M, ex->M, g.h);
      H.err_u.push_back(eu);
      H.err_m.push_back(em);
      H.err_tot.push_back(std::hypot(eu, em));
    }
    s = std::move(rep.state);
  }
  if (n_steps == 0) s.lambda = psi(sc, s.U, s.M);
  const double mean = std::accumulate(s.U.begin(), s.U.end(), 0.0) / N;
  for (double& u : s.U) u -= mean;
  out.state = std::move(s);
  return out;
}

ExactSolution testcase1_exact(double c, const DiscreteGrid1D& grid) {
  auto weight = [c](double x) {
    const double b = c * kTwoPi * std::cos(kTwoPi * x);
    return std::exp(std::sin(kTwoPi * x) - 0.5 * b * b);
  };
  const int fine = 10 * grid.n_space;
  double Z = 0.0;
  for (int k = 0; k < fine; ++k) Z += weight(static_cast<double>(k) / fine);
  Z /= fine;
  ExactSolution ex;
  ex.U.resize(grid.n_space);
  ex.M.resize(grid.n_space);
  for (int i = 0; i < grid.n_space; ++i) {
    ex.U[i] = -c * std::sin(kTwoPi * grid.x(i));
    ex.M[i] = weight(grid.x(i)) / Z;
  }
  ex.normalizer = Z;
  ex.lambda = std::log(Z);
  return ex;
}

ExactSolution testcase2_exact(double kappa, const DiscreteGrid1D& grid) {
  if (!(kappa > 0.0)) throw PreconditionError("kappa must be positive");
  ExactSolution ex;
  ex.U.resize(grid.n_space);
  ex.M.resize(grid.n_space);
  double Z = 0.0;
  for (int i = 0; i < grid.n_space; ++i) {
    ex.U[i] = kappa * std::sin(kTwoPi * grid.x(i));
    ex.M[i] = std::exp(-2.0 * ex.U[i]);
    Z += grid.h * ex.M[i];
  }
  for (double& m : ex.M) m /= Z;
  ex.normalizer = Z;
  ex.lambda = std::log(Z);
  return ex;
}

namespace {

fdm::DiscreteHamiltonian with_potential(fdm::DiscreteHamiltonian base, std::function<double(double)> V) {
  auto H = base;
  H.eval = [base, V](double x, double p1, double p2) { return base.eval(x, p1, p2) + V(x); };
  return H;
}

}  // namespace

ErgodicScenario testcase1(double c, int n_space, int n_time, double horizon) {
  if (c < 0.0 || c > 1.0) throw PreconditionError("c must lie in [0, 1]");
  ErgodicScenario sc;
  sc.grid = DiscreteGrid1D::torus(n_space, n_time, horizon);
  sc.nu = 0.0;
  auto b = [c](double x) { return c * kTwoPi * std::cos(kTwoPi * x); };
  sc.ham = with_potential(fdm::with_drift(fdm::quadratic_discrete_hamiltonian(), b),
                          [](double x) { return std::sin(kTwoPi * x); });
  sc.exact = [c](const DiscreteGrid1D& g) { return testcase1_exact(c, g); };
  return sc;
}

ErgodicScenario testcase2(double kappa, int n_space, int n_time, double horizon) {
  if (!(kappa > 0.0)) throw PreconditionError("kappa must be positive");
  ErgodicScenario sc;
  sc.grid = DiscreteGrid1D::torus(n_space, n_time, horizon);
  sc.nu = 0.5;
  const double pi2 = std::numbers::pi * std::numbers::pi;
  sc.ham = with_potential(fdm::quadratic_discrete_hamiltonian(), [kappa, pi2](double x) {
    const double s = std::sin(kTwoPi * x), co = std::cos(kTwoPi * x);
    return 2.0 * pi2 * (-kappa * s - kappa * kappa * co * co) - 2.0 * kappa * s;
  });
  sc.exact = [kappa](const DiscreteGrid1D& g) { return testcase2_exact(kappa, g); };
  return sc;
}

}  // namespace mfgnum::monotone
