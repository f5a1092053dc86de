#include "mfgnum/fdm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include <Eigen/SparseLU>

#include "mfgnum/linalg.hpp"

namespace mfgnum::fdm {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Second {
  double h11, h12, h22;
};

Second second_derivatives(const DiscreteHamiltonian& ham, double x, double p1, double p2) {
  if (ham.d_p1p1 && ham.d_p1p2 && ham.d_p2p2)
    return {ham.d_p1p1(x, p1, p2), ham.d_p1p2(x, p1, p2), ham.d_p2p2(x, p1, p2)};
  const double e = 1e-6;
  return {(ham.d_p1(x, p1 + e, p2) - ham.d_p1(x, p1 - e, p2)) / (2 * e),
          (ham.d_p1(x, p1, p2 + e) - ham.d_p1(x, p1, p2 - e)) / (2 * e),
          (ham.d_p2(x, p1, p2 + e) - ham.d_p2(x, p1, p2 - e)) / (2 * e)};
}

double df0(const SeparableMFGProblem& pb, double x, double m) {
  if (pb.df0_dm) return pb.df0_dm(x, m);
  const double e = 1e-7 * std::max(1.0, std::abs(m));
  return (pb.f0(x, m + e) - pb.f0(x, m - e)) / (2 * e);
}

double dg(const SeparableMFGProblem& pb, double x, double m) {
  if (pb.dg_dm) return pb.dg_dm(x, m);
  const double e = 1e-7 * std::max(1.0, std::abs(m));
  return (pb.g(x, m + e) - pb.g(x, m - e)) / (2 * e);
}

/// Per-node partial derivatives (a_i, b_i) = dH/dp1, dH/dp2 at grad U.
struct Coeffs {
  std::vector<double> a, b;
};

Coeffs partials(const DiscreteHamiltonian& ham, std::span<const double> U, const DiscreteGrid1D& g) {
  const auto grad = nabla_h(U, g.h);
  Coeffs c{std::vector<double>(U.size()), std::vector<double>(U.size())};
  for (std::size_t i = 0; i < U.size(); ++i) {
    const double x = g.x(static_cast<int>(i));
    c.a[i] = ham.d_p1(x, grad[i].p1, grad[i].p2);
    c.b[i] = ham.d_p2(x, grad[i].p1, grad[i].p2);
  }
  return c;
}

void check_level(std::span<const double> v, const DiscreteGrid1D& g) {
  if (static_cast<int>(v.size()) != g.n_space)
    throw ShapeError("level has " + std::to_string(v.size()) + " entries, expected " + std::to_string(g.n_space));
}

void check_fields(const SeparableMFGProblem& pb, const Field& U, const Field& M) {
  const auto& g = pb.grid;
  for (const Field* f : {&U, &M})
    if (f->size() != g.n_space || f->levels() != g.n_time + 1) throw ShapeError("field shape does not match grid");
}

/// HJB rows n = 0..N_T-1 without the terminal check.
std::vector<double> hjb_rows(const SeparableMFGProblem& pb, const DiscreteHamiltonian& ham, const Field& U,
                             const Field& M) {
  const auto& g = pb.grid;
  const int N = g.n_space;
  std::vector<double> out(static_cast<std::size_t>(g.n_time) * N);
  for (int n = 0; n < g.n_time; ++n) {
    const auto u = U.level(n);
    const auto un = U.level(n + 1);
    const auto lap = laplacian_h(u, g.h);
    const auto grad = nabla_h(u, g.h);
    for (int i = 0; i < N; ++i) {
      const double x = g.x(i);
      out[static_cast<std::size_t>(n) * N + i] = -(un[i] - u[i]) / g.dt - pb.nu * lap[i] +
                                                  ham.eval(x, grad[i].p1, grad[i].p2) - pb.f0(x, M(n + 1, i));
    }
  }
  return out;
}

std::vector<double> kfp_rows(const SeparableMFGProblem& pb, const DiscreteHamiltonian& ham, const Field& U,
                             const Field& M) {
  const auto& g = pb.grid;
  const int N = g.n_space;
  std::vector<double> out(static_cast<std::size_t>(g.n_time) * N);
  for (int n = 0; n < g.n_time; ++n) {
    const auto m = M.level(n);
    const auto mn = M.level(n + 1);
    const auto lap = laplacian_h(mn, g.h);
    const auto T = transport_coeffs(ham, U.level(n), mn, g);
    for (int i = 0; i < N; ++i)
      out[static_cast<std::size_t>(n) * N + i] = (mn[i] - m[i]) / g.dt - pb.nu * lap[i] - T[i];
  }
  return out;
}

/// Implicit HJB level: find V with (V - U^{n+1})/dt - nu Lap V + H(grad V) = f0(M^{n+1}).
std::vector<double> solve_hjb_level(const SeparableMFGProblem& pb, const DiscreteHamiltonian& ham,
                                    std::span<const double> next, std::span<const double> f, int level,
                                    int outer) {
  const auto& g = pb.grid;
  const int N = g.n_space;
  const double h = g.h, dt = g.dt, nu = pb.nu;
  std::vector<double> V(next.begin(), next.end());
  auto residual = [&](const std::vector<double>& v) {
    const auto lap = laplacian_h(v, h);
    const auto grad = nabla_h(v, h);
    std::vector<double> r(N);
    for (int i = 0; i < N; ++i)
      r[i] = (v[i] - next[i]) / dt - nu * lap[i] + ham.eval(g.x(i), grad[i].p1, grad[i].p2) - f[i];
    return r;
  };
  auto r = residual(V);
  double rn = sup_norm(r);
  std::vector<double> lo(N), di(N), up(N), rhs(N);
  for (int it = 0; it < 60; ++it) {
    if (rn < 1e-11) return V;
    const auto c = partials(ham, V, g);
    for (int i = 0; i < N; ++i) {
      di[i] = 1.0 / dt + 2.0 * nu / (h * h) + (c.b[i] - c.a[i]) / h;
      lo[i] = -nu / (h * h) - c.b[i] / h;
      up[i] = -nu / (h * h) + c.a[i] / h;
      rhs[i] = -r[i];
    }
    const auto step = solve_cyclic_tridiagonal(lo, di, up, rhs);
    if (sup_norm(step) < 1e-15 * (1.0 + sup_norm(V))) return V;
    double lambda = 1.0;
    bool accepted = false;
    for (int half = 0; half < 30; ++half, lambda *= 0.5) {
      std::vector<double> trial(N);
      for (int i = 0; i < N; ++i) trial[i] = V[i] + lambda * step[i];
      auto rt = residual(trial);
      const double rtn = sup_norm(rt);
      if (std::isfinite(rtn) && rtn < rn) {
        V = std::move(trial);
        r = std::move(rt);
        rn = rtn;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  if (rn < 1e-9) return V;
  std::ostringstream os;
  os << "inner Newton did not converge at time level " << level << " in outer iteration " << outer
     << " (residual " << rn << ")";
  throw SolverError(os.str());
}

/// Implicit KFP level: (I/dt - nu Lap - T(U^n, .)) M^{n+1} = M^n / dt.
std::vector<double> solve_kfp_level(const SeparableMFGProblem& pb, const DiscreteHamiltonian& ham,
                                    std::span<const double> U_level, std::span<const double> prev) {
  const auto& g = pb.grid;
  const int N = g.n_space;
  const double h = g.h, dt = g.dt, nu = pb.nu;
  const auto c = partials(ham, U_level, g);
  std::vector<double> lo(N), di(N), up(N), rhs(N);
  for (int i = 0; i < N; ++i) {
    const int im = g.wrap(i - 1), ip = g.wrap(i + 1);
    di[i] = 1.0 / dt + 2.0 * nu / (h * h) - (c.a[i] - c.b[i]) / h;
    lo[i] = -nu / (h * h) + c.a[im] / h;
    up[i] = -nu / (h * h) - c.b[ip] / h;
    rhs[i] = prev[i] / dt;
  }
  return solve_cyclic_tridiagonal(lo, di, up, rhs);
}

Field hjb_sweep(const SeparableMFGProblem& pb, const DiscreteHamiltonian& ham, const Field& M, int outer) {
  const auto& g = pb.grid;
  Field U(g);
  for (int i = 0; i < g.n_space; ++i) U(g.n_time, i) = pb.g(g.x(i), M(g.n_time, i));
  std::vector<double> f(g.n_space);
  for (int n = g.n_time - 1; n >= 0; --n) {
    for (int i = 0; i < g.n_space; ++i) f[i] = pb.f0(g.x(i), M(n + 1, i));
    U.set_level(n, solve_hjb_level(pb, ham, U.level(n + 1), f, n, outer));
  }
  return U;
}

Field kfp_sweep(const SeparableMFGProblem& pb, const DiscreteHamiltonian& ham, const Field& U,
                const std::vector<double>& m0) {
  const auto& g = pb.grid;
  Field M(g);
  M.set_level(0, m0);
  for (int n = 0; n < g.n_time; ++n) M.set_level(n + 1, solve_kfp_level(pb, ham, U.level(n), M.level(n)));
  return M;
}

}  // namespace

void SeparableMFGProblem::validate() const {
  if (!(nu >= 0.0)) throw PreconditionError("nu must be nonnegative");
  if (!H0) throw PreconditionError("H0 is not set");
  if (!f0) throw PreconditionError("f0 is not set");
  if (!g) throw PreconditionError("g is not set");
  if (!m0) throw PreconditionError("m0 is not set");
  if (!grid.periodic()) throw PreconditionError("grid must be a torus");
  if (grid.n_space < 3) throw PreconditionError("grid.n_space must be at least 3");
}

DiscreteHamiltonian quadratic_discrete_hamiltonian() {
  DiscreteHamiltonian H;
  H.eval = [](double, double p1, double p2) {
    const double a = std::min(p1, 0.0), b = std::max(p2, 0.0);
    return 0.5 * (a * a + b * b);
  };
  H.d_p1 = [](double, double p1, double) { return std::min(p1, 0.0); };
  H.d_p2 = [](double, double, double p2) { return std::max(p2, 0.0); };
  H.d_p1p1 = [](double, double p1, double) { return p1 < 0.0 ? 1.0 : 0.0; };
  H.d_p1p2 = [](double, double, double) { return 0.0; };
  H.d_p2p2 = [](double, double, double p2) { return p2 > 0.0 ? 1.0 : 0.0; };
  return H;
}

DiscreteHamiltonian with_drift(DiscreteHamiltonian base, std::function<double(double)> b) {
  DiscreteHamiltonian H = base;
  H.eval = [base, b](double x, double p1, double p2) {
    const double bx = b(x);
    return base.eval(x, p1, p2) + (bx > 0.0 ? bx * p2 : bx * p1);
  };
  H.d_p1 = [base, b](double x, double p1, double p2) {
    const double bx = b(x);
    return base.d_p1(x, p1, p2) + (bx > 0.0 ? 0.0 : bx);
  };
  H.d_p2 = [base, b](double x, double p1, double p2) {
    const double bx = b(x);
    return base.d_p2(x, p1, p2) + (bx > 0.0 ? bx : 0.0);
  };
  return H;
}

std::vector<double> initial_density(const SeparableMFGProblem& problem) {
  static constexpr double nodes[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                      0.9061798459386640};
  static constexpr double weights[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                        0.4786286704993665, 0.2369268850561891};
  const auto& g = problem.grid;
  std::vector<double> m(g.n_space);
  for (int i = 0; i < g.n_space; ++i) {
    double s = 0.0;
    for (int q = 0; q < 5; ++q) s += weights[q] * problem.m0(g.x(i) + 0.5 * g.h * nodes[q]);
    m[i] = 0.5 * s;  // average over the cell = integral / h
    if (m[i] < 0.0) throw PreconditionError("m0 must be nonnegative");
  }
  const double mass = level_mass(m, g.h);
  if (std::abs(mass - 1.0) > 1e-8)
    throw PreconditionError("m0 must integrate to 1 (cell-averaged mass " + std::to_string(mass) + ")");
  return m;
}

std::vector<double> transport_coeffs(const DiscreteHamiltonian& ham, std::span<const double> U_level,
                                     std::span<const double> M_level, const DiscreteGrid1D& grid) {
  check_level(U_level, grid);
  check_level(M_level, grid);
  const auto c = partials(ham, U_level, grid);
  const int N = grid.n_space;
  std::vector<double> T(N);
  for (int i = 0; i < N; ++i) {
    const int im = grid.wrap(i - 1), ip = grid.wrap(i + 1);
    T[i] = (M_level[i] * c.a[i] - M_level[im] * c.a[im] + M_level[ip] * c.b[ip] - M_level[i] * c.b[i]) / grid.h;
  }
  return T;
}

std::vector<double> discrete_hjb_residual(const SeparableMFGProblem& problem, const DiscreteHamiltonian& ham,
                                          const Field& U, const Field& M) {
  check_fields(problem, U, M);
  const auto& g = problem.grid;
  for (int i = 0; i < g.n_space; ++i) {
    const double want = problem.g(g.x(i), M(g.n_time, i));
    if (std::abs(U(g.n_time, i) - want) > 1e-10 * (1.0 + std::abs(want)))
      throw PreconditionError("U violates the terminal condition at i = " + std::to_string(i));
  }
  return hjb_rows(problem, ham, U, M);
}

std::vector<double> discrete_kfp_residual(const SeparableMFGProblem& problem, const DiscreteHamiltonian& ham,
                                          const Field& U, const Field& M) {
  check_fields(problem, U, M);
  const auto m0 = initial_density(problem);
  for (int i = 0; i < problem.grid.n_space; ++i)
    if (std::abs(M(0, i) - m0[i]) > 1e-10 * (1.0 + std::abs(m0[i])))
      throw PreconditionError("M violates the initial condition at i = " + std::to_string(i));
  return kfp_rows(problem, ham, U, M);
}

FDMSolution fdm_picard(const SeparableMFGProblem& problem, const DiscreteHamiltonian& ham,
                       const DampingSchedule& damping, int max_iter, double tol) {
  problem.validate();
  const auto& g = problem.grid;
  const auto m0 = initial_density(problem);
  const double w = g.h * g.dt;

  Field Mt(g);
  for (int n = 0; n <= g.n_time; ++n) Mt.set_level(n, m0);
  FDMSolution sol{Field(g), Mt, {}};
  for (int k = 0; k < max_iter; ++k) {
    Field U = hjb_sweep(problem, ham, Mt, k);
    Field M = kfp_sweep(problem, ham, U, m0);
    IterationRecord rec;
    rec.k = k;
    rec.delta_a = l2_distance(U.data(), sol.U.data(), w);
    rec.delta_b = l2_distance(M.data(), sol.M.data(), w);
    rec.residual = newton_residual(problem, ham, U, M).lpNorm<Eigen::Infinity>();
    const double d = damping(k);
    for (std::size_t j = 0; j < Mt.data().size(); ++j) Mt.data()[j] = d * Mt.data()[j] + (1.0 - d) * M.data()[j];
    sol.U = std::move(U);
    sol.M = std::move(M);
    sol.history.records.push_back(rec);
    const double worst = std::max(rec.delta_a, rec.delta_b);
    if (!std::isfinite(worst) || worst > kDivergenceThreshold) {
      sol.history.diverged = true;
      break;
    }
    if (rec.residual < tol || (k > 0 && worst < tol)) {
      sol.history.converged = true;
      break;
    }
  }
  return sol;
}

Eigen::VectorXd stack(const Field& U, const Field& M) {
  const auto nu = static_cast<Eigen::Index>(U.data().size());
  Eigen::VectorXd x(nu + static_cast<Eigen::Index>(M.data().size()));
  for (Eigen::Index j = 0; j < nu; ++j) x[j] = U.data()[j];
  for (std::size_t j = 0; j < M.data().size(); ++j) x[nu + static_cast<Eigen::Index>(j)] = M.data()[j];
  return x;
}

void unstack(const Eigen::VectorXd& x, Field& U, Field& M) {
  const auto nu = U.data().size();
  if (static_cast<std::size_t>(x.size()) != nu + M.data().size()) throw ShapeError("stacked vector size mismatch");
  for (std::size_t j = 0; j < nu; ++j) U.data()[j] = x[static_cast<Eigen::Index>(j)];
  for (std::size_t j = 0; j < M.data().size(); ++j) M.data()[j] = x[static_cast<Eigen::Index>(nu + j)];
}

Eigen::VectorXd newton_residual(const SeparableMFGProblem& problem, const DiscreteHamiltonian& ham, const Field& U,
                                const Field& M) {
  check_fields(problem, U, M);
  const auto& g = problem.grid;
  const int N = g.n_space, NT = g.n_time;
  const Eigen::Index L = static_cast<Eigen::Index>(NT + 1) * N;
  Eigen::VectorXd phi(2 * L);
  const auto hjb = hjb_rows(problem, ham, U, M);
  const auto kfp = kfp_rows(problem, ham, U, M);
  const auto m0 = initial_density(problem);
  for (std::size_t j = 0; j < hjb.size(); ++j) phi[static_cast<Eigen::Index>(j)] = hjb[j];
  for (int i = 0; i < N; ++i) {
    phi[static_cast<Eigen::Index>(NT) * N + i] = U(NT, i) - problem.g(g.x(i), M(NT, i));
    phi[L + i] = M(0, i) - m0[i];
  }
  for (std::size_t j = 0; j < kfp.size(); ++j) phi[L + N + static_cast<Eigen::Index>(j)] = kfp[j];
  return phi;
}

Eigen::SparseMatrix<double> newton_jacobian(const SeparableMFGProblem& problem, const DiscreteHamiltonian& ham,
                                            const Field& U, const Field& M) {
  check_fields(problem, U, M);
  const auto& g = problem.grid;
  const int N = g.n_space, NT = g.n_time;
  const double h = g.h, dt = g.dt, nu = problem.nu;
  const int L = (NT + 1) * N;
  auto iu = [&](int n, int i) { return n * N + g.wrap(i); };
  auto im = [&](int n, int i) { return L + n * N + g.wrap(i); };

  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(NT) * N * 22 + 4 * N);
  for (int n = 0; n < NT; ++n) {
    const auto u = U.level(n);
    const auto grad = nabla_h(u, h);
    const auto c = partials(ham, u, g);
    std::vector<Second> s(N);
    for (int j = 0; j < N; ++j) s[j] = second_derivatives(ham, g.x(j), grad[j].p1, grad[j].p2);

    for (int i = 0; i < N; ++i) {
      const int r = iu(n, i);
      t.emplace_back(r, iu(n, i), 1.0 / dt + 2.0 * nu / (h * h) + (c.b[i] - c.a[i]) / h);
      t.emplace_back(r, iu(n, i + 1), -nu / (h * h) + c.a[i] / h);
      t.emplace_back(r, iu(n, i - 1), -nu / (h * h) - c.b[i] / h);
      t.emplace_back(r, iu(n + 1, i), -1.0 / dt);
      t.emplace_back(r, im(n + 1, i), -df0(problem, g.x(i), M(n + 1, i)));
    }

    const auto mn = M.level(n + 1);
    for (int i = 0; i < N; ++i) {
      const int r = im(n + 1, i);
      const int ip = g.wrap(i + 1), imm = g.wrap(i - 1);
      t.emplace_back(r, im(n + 1, i), 1.0 / dt + 2.0 * nu / (h * h) - (c.a[i] - c.b[i]) / h);
      t.emplace_back(r, im(n + 1, i - 1), -nu / (h * h) + c.a[imm] / h);
      t.emplace_back(r, im(n + 1, i + 1), -nu / (h * h) - c.b[ip] / h);
      t.emplace_back(r, im(n, i), -1.0 / dt);
      // -T_i depends on U through a_j, b_j at j = i-1, i, i+1.
      struct Term {
        int j;
        double ca, cb;
      };
      const Term terms[3] = {{i, mn[i], -mn[i]}, {i - 1, -mn[imm], 0.0}, {i + 1, 0.0, mn[ip]}};
      for (const auto& term : terms) {
        const int j = g.wrap(term.j);
        const auto& sj = s[j];
        const double f = -1.0 / (h * h);
        // d a_j / d(U_{j+1}, U_j, U_{j-1}) = (h11, h12 - h11, -h12)/h, same for b with (h12, h22).
        t.emplace_back(r, iu(n, term.j + 1), f * (term.ca * sj.h11 + term.cb * sj.h12));
        t.emplace_back(r, iu(n, term.j), f * (term.ca * (sj.h12 - sj.h11) + term.cb * (sj.h22 - sj.h12)));
        t.emplace_back(r, iu(n, term.j - 1), f * (-term.ca * sj.h12 - term.cb * sj.h22));
      }
    }
  }
  for (int i = 0; i < N; ++i) {
    t.emplace_back(iu(NT, i), iu(NT, i), 1.0);
    t.emplace_back(iu(NT, i), im(NT, i), -dg(problem, g.x(i), M(NT, i)));
    t.emplace_back(im(0, i), im(0, i), 1.0);
  }
  Eigen::SparseMatrix<double> J(2 * L, 2 * L);
  J.setFromTriplets(t.begin(), t.end());
  return J;
}

FDMSolution fdm_newton(const SeparableMFGProblem& problem, const DiscreteHamiltonian& ham, int max_iter,
                       double tol, const std::optional<InitialGuess>& initial) {
  problem.validate();
  const auto& g = problem.grid;
  FDMSolution sol;
  if (initial) {
    sol.U = initial->U;
    sol.M = initial->M;
    check_fields(problem, sol.U, sol.M);
  } else {
    sol.U = Field(g);
    sol.M = Field(g, 1.0);
    for (int n = 0; n <= g.n_time; ++n)
      for (int i = 0; i < g.n_space; ++i) sol.U(n, i) = problem.g(g.x(i), 1.0);
  }
  const double w = g.h * g.dt;
  Eigen::VectorXd phi = newton_residual(problem, ham, sol.U, sol.M);
  double rn = phi.lpNorm<Eigen::Infinity>();
  if (rn < tol) {
    sol.history.converged = true;
    return sol;
  }
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  for (int k = 0; k < max_iter; ++k) {
    const auto J = newton_jacobian(problem, ham, sol.U, sol.M);
    lu.compute(J);
    if (lu.info() != Eigen::Success) throw SolverError("singular Newton Jacobian at iteration " + std::to_string(k));
    const Eigen::VectorXd step = lu.solve(-phi);
    if (lu.info() != Eigen::Success || !step.allFinite())
      throw SolverError("Newton step failed at iteration " + std::to_string(k));
    const Eigen::VectorXd x0 = stack(sol.U, sol.M);
    double lambda = 1.0;
    Field U = sol.U, M = sol.M;
    Eigen::VectorXd trial_phi;
    double trial_rn = 0.0;
    for (int half = 0; half < 20; ++half, lambda *= 0.5) {
      unstack(x0 + lambda * step, U, M);
      trial_phi = newton_residual(problem, ham, U, M);
      trial_rn = trial_phi.lpNorm<Eigen::Infinity>();
      if (std::isfinite(trial_rn) && trial_rn < rn) break;
    }
    if (!std::isfinite(trial_rn)) throw SolverError("non-finite Newton iterate at iteration " + std::to_string(k));
    IterationRecord rec;
    rec.k = k;
    rec.delta_a = lambda * step.lpNorm<Eigen::Infinity>();
    rec.delta_b = lambda * std::sqrt(w) * step.tail(step.size() / 2).norm();
    rec.residual = trial_rn;
    sol.history.records.push_back(rec);
    sol.U = std::move(U);
    sol.M = std::move(M);
    phi = std::move(trial_phi);
    rn = trial_rn;
    if (rn < tol) {
      sol.history.converged = true;
      break;
    }
  }
  return sol;
}

FDMSolution continuation_in_nu(const SeparableMFGProblem& problem, const DiscreteHamiltonian& ham,
                               std::span<const double> nu_schedule, int max_iter, double tol) {
  if (nu_schedule.empty()) throw PreconditionError("nu_schedule must not be empty");
  for (std::size_t j = 1; j < nu_schedule.size(); ++j)
    if (!(nu_schedule[j] < nu_schedule[j - 1])) throw PreconditionError("nu_schedule must be strictly decreasing");
  if (std::abs(nu_schedule.back() - problem.nu) > 1e-14)
    throw PreconditionError("nu_schedule must end at problem.nu");

  FDMSolution sol;
  IterationHistory all;
  std::optional<InitialGuess> guess;
  for (double nu : nu_schedule) {
    auto stage = problem;
    stage.nu = nu;
    try {
      sol = fdm_newton(stage, ham, max_iter, tol, guess);
    } catch (const SolverError& e) {
      throw SolverError(std::string(e.what()) + " (continuation at nu = " + std::to_string(nu) + ")");
    }
    if (!sol.history.converged)
      throw SolverError("Newton did not converge in continuation at nu = " + std::to_string(nu));
    for (auto rec : sol.history.records) {
      rec.k = all.iterations();
      all.records.push_back(rec);
    }
    guess = InitialGuess{sol.U, sol.M};
  }
  all.converged = true;
  sol.history = std::move(all);
  return sol;
}

LasryLionsReport lasry_lions_diagnostic(const SeparableMFGProblem& problem, int sample_count, double m_lo,
                                        double m_hi, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, 1.0), um(m_lo, m_hi), up(-5.0, 5.0);
  LasryLionsReport rep;
  rep.samples = sample_count;
  for (int s = 0; s < sample_count; ++s) {
    const double x = ux(rng), m = um(rng), p = up(rng), q = up(rng);
    if (df0(problem, x, m) >= -1e-12)
      ++rep.monotone_pass;
    else
      ++rep.monotone_fail;
    const double mid = problem.H0(x, 0.5 * (p + q));
    if (mid <= 0.5 * (problem.H0(x, p) + problem.H0(x, q)) + 1e-12)
      ++rep.convex_pass;
    else
      ++rep.convex_fail;
  }
  return rep;
}

SeparableMFGProblem smooth_scenario(int n_space, int n_time, double nu, double coupling) {
  SeparableMFGProblem pb;
  pb.nu = nu;
  pb.H0 = [](double, double p) { return 0.5 * p * p; };
  pb.f0 = [coupling](double, double m) { return coupling * m; };
  pb.df0_dm = [coupling](double, double) { return coupling; };
  pb.g = [](double x, double) { return 0.3 * std::cos(kTwoPi * x); };
  pb.dg_dm = [](double, double) { return 0.0; };
  pb.m0 = [](double x) { return 1.0 + 0.5 * std::sin(kTwoPi * x); };
  pb.grid = DiscreteGrid1D::torus(n_space, n_time, 1.0);
  return pb;
}

SeparableMFGProblem congestion_lite_scenario(int n_space, int n_time, double nu) {
  auto pb = smooth_scenario(n_space, n_time, nu, 0.5);
  pb.g = [](double x, double) { return std::cos(kTwoPi * x); };
  return pb;
}

}  // namespace mfgnum::fdm
