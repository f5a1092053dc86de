#include "mfgnum/variational.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

#include <Eigen/SparseCholesky>

namespace mfgnum::variational {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double deriv2(const XM& d2, const XM& d1, double x, double m) {
  if (d2) return d2(x, m);
  const double e = 1e-6 * std::max(1.0, std::abs(m));
  const double lo = std::max(m - e, 0.0);
  return (d1(x, m + e) - d1(x, lo)) / (m + e - lo);
}

/// Derivative of F + [last] G/dt and its derivative.
struct Potential {
  const VariationalProblem& pb;
  double x;
  bool last;
  [[nodiscard]] double value(double m) const { return pb.F(x, m) + (last ? pb.G(x, m) / pb.grid.dt : 0.0); }
  [[nodiscard]] double d1(double m) const { return pb.dF(x, m) + (last ? pb.dG(x, m) / pb.grid.dt : 0.0); }
  [[nodiscard]] double d2(double m) const {
    return deriv2(pb.d2F, pb.dF, x, m) + (last ? deriv2(pb.d2G, pb.dG, x, m) / pb.grid.dt : 0.0);
  }
};

/// Root of an increasing function on [lo, hi] with f(lo) < 0 <= f(hi): Newton inside a shrinking bracket.
template <class Fn, class Df>
double increasing_root(Fn f, Df df, double lo, double hi, double start) {
  double m = std::clamp(start, lo, hi);
  for (int it = 0; it < 200; ++it) {
    const double v = f(m);
    if (v == 0.0) return m;
    if (v < 0.0)
      lo = m;
    else
      hi = m;
    if (hi - lo <= 1e-15 * std::max(1.0, hi)) return 0.5 * (lo + hi);
    const double d = df(m);
    double next = (d > 0.0 && std::isfinite(d)) ? m - v / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - m) <= 1e-15 * std::max(1.0, std::abs(m))) return next;
    m = next;
  }
  return m;
}

std::pair<double, double> project_minus_k(double w1, double w2) { return {std::max(w1, 0.0), std::min(w2, 0.0)}; }

int cells_m(const DiscreteGrid1D& g) { return (g.n_time + 1) * g.n_space; }
int cells_w(const DiscreteGrid1D& g) { return g.n_time * g.n_space; }

/// Applies the cell prox to every (M^{n+1}, W^n) pair in a flat vector.
Eigen::VectorXd prox_flat(const VariationalProblem& pb, const Eigen::VectorXd& x, double tau) {
  const auto& g = pb.grid;
  const int N = g.n_space, NT = g.n_time, cm = cells_m(g), cw = cells_w(g);
  Eigen::VectorXd out = x;
  for (int n = 0; n < NT; ++n)
    for (int i = 0; i < N; ++i) {
      const int jm = (n + 1) * N + i, jw = n * N + i;
      const auto c = prox_cell(pb, g.x(i), n + 1 == NT, {x[jm], x[cm + jw], x[cm + cw + jw]}, tau);
      out[jm] = c.m;
      out[cm + jw] = c.w1;
      out[cm + cw + jw] = c.w2;
    }
  return out;
}

/// Sum of cell conjugates at s; the free initial slice must carry zero slope.
double conjugate_flat(const VariationalProblem& pb, const Eigen::VectorXd& s) {
  const auto& g = pb.grid;
  const int N = g.n_space, NT = g.n_time, cm = cells_m(g), cw = cells_w(g);
  double total = 0.0;
  for (int i = 0; i < N; ++i)
    if (std::abs(s[i]) > 1e-9 * (1.0 + 1.0 / g.dt)) return kInf;
  for (int n = 0; n < NT; ++n)
    for (int i = 0; i < N; ++i) {
      const int jm = (n + 1) * N + i, jw = n * N + i;
      total += conjugate_cell(pb, g.x(i), n + 1 == NT, {s[jm], s[cm + jw], s[cm + cw + jw]});
    }
  return total;
}

Eigen::VectorXd initial_primal(const VariationalProblem& pb) {
  PrimalPoint p(pb.grid);
  for (int n = 0; n <= pb.grid.n_time; ++n) p.M.set_level(n, pb.m0bar);
  return flatten(p);
}

DualPoint dual_from_zeta(const VariationalProblem& pb, const Eigen::VectorXd& zeta) {
  const auto& g = pb.grid;
  DualPoint d;
  d.U.resize(cells_w(g));
  for (int j = 0; j < cells_w(g); ++j) d.U[j] = -zeta[j];
  d.lambda0.resize(g.n_space);
  for (int i = 0; i < g.n_space; ++i) d.lambda0[i] = d.U[i] / g.dt;
  return d;
}

}  // namespace

double hstar_quadratic(double gamma1, double gamma2) {
  if (gamma1 > 0.0 || gamma2 < 0.0) return kInf;
  return 0.5 * (gamma1 * gamma1 + gamma2 * gamma2);
}

void VariationalProblem::validate() const {
  if (!grid.periodic()) throw PreconditionError("grid must be a torus");
  if (grid.n_space < 3) throw PreconditionError("grid.n_space must be at least 3");
  if (!(nu >= 0.0)) throw PreconditionError("nu must be nonnegative");
  if (!F || !dF) throw PreconditionError("F and dF must be set");
  if (!G || !dG) throw PreconditionError("G and dG must be set");
  if (static_cast<int>(m0bar.size()) != grid.n_space) throw PreconditionError("m0bar must have n_space entries");
}

PrimalPoint::PrimalPoint(const DiscreteGrid1D& g, double m_fill)
    : M(g, m_fill), W1(static_cast<std::size_t>(g.n_time) * g.n_space, 0.0), W2(W1.size(), 0.0) {}

double primal_energy(const VariationalProblem& problem, const PrimalPoint& point) {
  const auto& g = problem.grid;
  const int N = g.n_space, NT = g.n_time;
  double total = 0.0;
  for (int n = 1; n <= NT; ++n)
    for (int i = 0; i < N; ++i) {
      const double m = point.M(n, i);
      const double w1 = point.W1[(n - 1) * N + i], w2 = point.W2[(n - 1) * N + i];
      double lt;
      if (m > 0.0)
        lt = m * hstar_quadratic(-w1 / m, -w2 / m);
      else if (m == 0.0 && w1 == 0.0 && w2 == 0.0)
        lt = 0.0;
      else
        return kInf;
      if (!std::isfinite(lt)) return kInf;
      total += lt + problem.F(g.x(i), m);
      if (n == NT) total += problem.G(g.x(i), m) / g.dt;
    }
  return total;
}

ConstraintValue constraint_apply(const VariationalProblem& problem, const PrimalPoint& point) {
  const auto& g = problem.grid;
  const int N = g.n_space, NT = g.n_time;
  if (point.M.levels() != NT + 1 || point.M.size() != N || static_cast<int>(point.W1.size()) != NT * N ||
      static_cast<int>(point.W2.size()) != NT * N)
    throw ShapeError("primal point does not match the grid");
  ConstraintValue out;
  out.Lambda.resize(static_cast<std::size_t>(NT) * N);
  for (int n = 0; n < NT; ++n) {
    const auto lap = laplacian_h(point.M.level(n + 1), g.h);
    for (int i = 0; i < N; ++i) {
      const int ip = g.wrap(i + 1), im = g.wrap(i - 1);
      const double am = (point.M(n + 1, i) - point.M(n, i)) / g.dt - problem.nu * lap[i];
      const double bw = (point.W2[n * N + ip] - point.W2[n * N + i]) / g.h +
                        (point.W1[n * N + i] - point.W1[n * N + im]) / g.h;
      out.Lambda[n * N + i] = am + bw;
    }
  }
  const auto m0 = point.M.level(0);
  out.M0.assign(m0.begin(), m0.end());
  return out;
}

PrimalPoint constraint_adjoint(const VariationalProblem& problem, const DualPoint& dual) {
  const auto& g = problem.grid;
  const int N = g.n_space, NT = g.n_time;
  if (static_cast<int>(dual.U.size()) != NT * N || static_cast<int>(dual.lambda0.size()) != N)
    throw ShapeError("dual point does not match the grid");
  const double h = g.h, dt = g.dt, nu = problem.nu;
  PrimalPoint out(g);
  auto U = [&](int n, int i) { return dual.U[n * N + g.wrap(i)]; };
  for (int i = 0; i < N; ++i) out.M(0, i) = dual.lambda0[i] - U(0, i) / dt;
  for (int n = 1; n <= NT; ++n)
    for (int i = 0; i < N; ++i) {
      // M^n enters row n-1 through (I/dt - nu Lap) and row n through -I/dt
      double v = U(n - 1, i) / dt - nu * (U(n - 1, i + 1) - 2.0 * U(n - 1, i) + U(n - 1, i - 1)) / (h * h);
      if (n < NT) v -= U(n, i) / dt;
      out.M(n, i) = v;
    }
  for (int n = 0; n < NT; ++n)
    for (int i = 0; i < N; ++i) {
      out.W1[n * N + i] = (U(n, i) - U(n, i + 1)) / h;
      out.W2[n * N + i] = (U(n, i - 1) - U(n, i)) / h;
    }
  return out;
}

Eigen::VectorXd flatten(const PrimalPoint& p) {
  const auto& m = p.M.data();
  Eigen::VectorXd x(static_cast<Eigen::Index>(m.size() + p.W1.size() + p.W2.size()));
  Eigen::Index k = 0;
  for (double v : m) x[k++] = v;
  for (double v : p.W1) x[k++] = v;
  for (double v : p.W2) x[k++] = v;
  return x;
}

PrimalPoint unflatten(const VariationalProblem& problem, const Eigen::VectorXd& x) {
  PrimalPoint p(problem.grid);
  const int cm = cells_m(problem.grid), cw = cells_w(problem.grid);
  if (x.size() != cm + 2 * cw) throw ShapeError("flat primal vector has the wrong length");
  for (int j = 0; j < cm; ++j) p.M.data()[j] = x[j];
  for (int j = 0; j < cw; ++j) {
    p.W1[j] = x[cm + j];
    p.W2[j] = x[cm + cw + j];
  }
  return p;
}

Eigen::SparseMatrix<double> constraint_matrix(const VariationalProblem& problem) {
  const auto& g = problem.grid;
  const int N = g.n_space, NT = g.n_time, cm = cells_m(g), cw = cells_w(g);
  const double h = g.h, dt = g.dt, nu = problem.nu;
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(cw) * 8 + N);
  for (int n = 0; n < NT; ++n)
    for (int i = 0; i < N; ++i) {
      const int r = n * N + i;
      const int ip = g.wrap(i + 1), im = g.wrap(i - 1);
      t.emplace_back(r, (n + 1) * N + i, 1.0 / dt + 2.0 * nu / (h * h));
      t.emplace_back(r, (n + 1) * N + ip, -nu / (h * h));
      t.emplace_back(r, (n + 1) * N + im, -nu / (h * h));
      t.emplace_back(r, n * N + i, -1.0 / dt);
      t.emplace_back(r, cm + cw + n * N + ip, 1.0 / h);
      t.emplace_back(r, cm + cw + n * N + i, -1.0 / h);
      t.emplace_back(r, cm + n * N + i, 1.0 / h);
      t.emplace_back(r, cm + n * N + im, -1.0 / h);
    }
  for (int i = 0; i < N; ++i) t.emplace_back(cw + i, i, 1.0);
  Eigen::SparseMatrix<double> S(cw + N, cm + 2 * cw);
  S.setFromTriplets(t.begin(), t.end());
  return S;
}

Eigen::VectorXd constraint_rhs(const VariationalProblem& problem) {
  const int cw = cells_w(problem.grid), N = problem.grid.n_space;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(cw + N);
  for (int i = 0; i < N; ++i) b[cw + i] = problem.m0bar[i];
  return b;
}

double feasibility_residual(const VariationalProblem& problem, const PrimalPoint& point) {
  const auto c = constraint_apply(problem, point);
  double s = 0.0;
  for (double v : c.Lambda) s += v * v;
  for (int i = 0; i < problem.grid.n_space; ++i) s += std::pow(c.M0[i] - problem.m0bar[i], 2);
  return std::sqrt(problem.grid.h * problem.grid.dt * s);
}

CellValue prox_cell(const VariationalProblem& problem, double x, bool last_level, CellValue in, double tau) {
  if (!(tau > 0.0)) throw PreconditionError("tau must be positive");
  const Potential pot{problem, x, last_level};
  const auto [p1, p2] = project_minus_k(in.w1, in.w2);
  const double a = p1 * p1 + p2 * p2;
  // reduced optimality condition in m after eliminating w
  auto f = [&](double m) { return -a * tau / (2.0 * (m + tau) * (m + tau)) + tau * pot.d1(m) + (m - in.m); };
  auto df = [&](double m) { return a * tau / std::pow(m + tau, 3) + tau * pot.d2(m) + 1.0; };
  const double f0 = f(0.0);
  if (std::isfinite(f0) && f0 >= 0.0) return {0.0, 0.0, 0.0};
  double hi = std::max(in.m, 0.0) + 1.0;
  for (int k = 0; f(hi) < 0.0; ++k) {
    hi *= 2.0;
    if (k > 200 || !std::isfinite(hi)) {
      std::ostringstream os;
      os << "prox root bracket failed at x = " << x << ", m = " << in.m;
      throw SolverError(os.str());
    }
  }
  const double m = increasing_root(f, df, 0.0, hi, std::max(in.m, 0.0));
  const double s = m / (m + tau);
  return {m, s * p1, s * p2};
}

double conjugate_cell(const VariationalProblem& problem, double x, bool last_level, CellValue s) {
  const Potential pot{problem, x, last_level};
  const auto [p1, p2] = project_minus_k(s.w1, s.w2);
  const double y = s.m + 0.5 * (p1 * p1 + p2 * p2);
  const double d0 = pot.d1(0.0);
  if (std::isfinite(d0) && d0 >= y) return -pot.value(0.0);
  double hi = 1.0;
  for (int k = 0; pot.d1(hi) < y; ++k) {
    hi *= 2.0;
    if (k > 60) return kInf;
  }
  const double m = increasing_root([&](double v) { return pot.d1(v) - y; }, [&](double v) { return pot.d2(v); },
                                   0.0, hi, 0.5 * hi);
  return m * y - pot.value(m);
}

PrimalPoint prox_primal(const VariationalProblem& problem, const PrimalPoint& point, double tau) {
  if (!(tau > 0.0)) throw PreconditionError("tau must be positive");
  return unflatten(problem, prox_flat(problem, flatten(point), tau));
}

PrimalPoint prox_conjugate(const VariationalProblem& problem, const PrimalPoint& y, double r) {
  if (!(r > 0.0)) throw PreconditionError("r must be positive");
  const Eigen::VectorXd v = flatten(y);
  return unflatten(problem, v - prox_flat(problem, r * v, r) / r);
}

double dual_objective(const VariationalProblem& problem, const DualPoint& dual) {
  const Eigen::VectorXd s = flatten(constraint_adjoint(problem, dual));
  double lin = 0.0;
  for (int i = 0; i < problem.grid.n_space; ++i) lin += dual.lambda0[i] * problem.m0bar[i];
  return -conjugate_flat(problem, s) + lin;
}

double operator_norm_estimate(const VariationalProblem& problem, CPScaling scaling, unsigned seed, int max_iter,
                              double rel_tol) {
  const auto S = constraint_matrix(problem);
  const Eigen::SparseMatrix<double> St = S.transpose();
  std::optional<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> gram;
  if (scaling == CPScaling::whitened) gram.emplace(S * St);
  // Gram operator of the (possibly whitened) constraint, acting on the row space
  auto apply = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    if (!gram) return S * (St * v);
    return S * (St * gram->solve(v));
  };
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::VectorXd v(S.rows());
  for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = nd(rng);
  v.normalize();
  double lam = 0.0;
  for (int k = 0; k < max_iter; ++k) {
    const Eigen::VectorXd w = apply(v);
    const double next = v.dot(w);
    v = w / w.norm();
    if (k > 0 && std::abs(next - lam) <= rel_tol * next) {
      lam = next;
      break;
    }
    lam = next;
  }
  return std::sqrt(lam);
}

VariationalResult admm_solve(const VariationalProblem& problem, double r, int max_iter, double tol,
                             const PrimalObserver& observer) {
  problem.validate();
  if (!(r > 0.0)) throw PreconditionError("r must be positive");
  const auto& g = problem.grid;
  const double wgt = std::sqrt(g.h * g.dt);
  const Eigen::SparseMatrix<double> S = constraint_matrix(problem);
  const Eigen::SparseMatrix<double> St = S.transpose();
  const Eigen::VectorXd b = constraint_rhs(problem);
  const Eigen::SparseMatrix<double> K = r * (S * St);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(K);
  if (ldlt.info() != Eigen::Success) throw SolverError("factorization of Sigma Sigma^T failed");

  Eigen::VectorXd lambda = initial_primal(problem);
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(lambda.size());
  Eigen::VectorXd zeta = Eigen::VectorXd::Zero(S.rows());
  VariationalResult res;
  double best = kInf;
  int since_best = 0;
  for (int k = 0; k < max_iter; ++k) {
    const Eigen::VectorXd zeta_old = zeta;
    zeta = ldlt.solve(S * lambda - b - r * (S * nu));
    const Eigen::VectorXd st_zeta = St * zeta;
    const Eigen::VectorXd y = lambda / r - st_zeta;
    const Eigen::VectorXd p = prox_flat(problem, r * y, r);
    nu = y - p / r;
    // lambda - r (nu + Sigma^* zeta) equals p exactly; taking p avoids round-off outside the cone
    lambda = p;
    if (observer) observer(k, unflatten(problem, lambda));

    IterationRecord rec;
    rec.k = k;
    rec.delta_a = wgt * (S * lambda - b).norm();
    rec.delta_b = wgt * r * (St * (zeta - zeta_old)).norm();
    rec.residual = primal_energy(problem, unflatten(problem, lambda));
    res.history.records.push_back(rec);
    const double worst = std::max(rec.delta_a, rec.delta_b);
    if (!std::isfinite(worst) || worst > kDivergenceThreshold) {
      res.history.diverged = true;
      res.message = "residuals diverged";
      break;
    }
    if (worst < tol) {
      res.history.converged = true;
      break;
    }
    if (worst < best * (1.0 - 1e-3)) {
      best = worst;
      since_best = 0;
    } else if (++since_best >= 50) {
      res.stagnated = true;
      res.message = "residuals plateaued above tolerance for 50 iterations";
      break;
    }
  }
  res.primal = unflatten(problem, lambda);
  res.dual = dual_from_zeta(problem, zeta);
  return res;
}

VariationalResult chambolle_pock_solve(const VariationalProblem& problem, double gamma, double tau, int max_iter,
                                       double tol, CPScaling scaling) {
  problem.validate();
  const double norm = operator_norm_estimate(problem, scaling);
  if (gamma <= 0.0 || tau <= 0.0) gamma = tau = 0.95 / norm;
  if (gamma * tau * norm * norm >= 1.0)
    throw PreconditionError("step sizes violate gamma * tau * ||Xi||^2 < 1");
  const auto& g = problem.grid;
  const double wgt = std::sqrt(g.h * g.dt);
  const Eigen::SparseMatrix<double> S = constraint_matrix(problem);
  const Eigen::SparseMatrix<double> St = S.transpose();
  std::optional<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> gram;
  if (scaling == CPScaling::whitened) {
    gram.emplace(S * St);
    if (gram->info() != Eigen::Success) throw SolverError("factorization of Sigma Sigma^T failed");
  }
  const Eigen::VectorXd b = constraint_rhs(problem);

  Eigen::VectorXd xi = initial_primal(problem);
  Eigen::VectorXd xi_bar = xi;
  Eigen::VectorXd zeta = Eigen::VectorXd::Zero(S.rows());
  VariationalResult res;
  for (int k = 0; k < max_iter; ++k) {
    // in whitened coordinates the dual step is the plain shift; mapped back it reads as below
    const Eigen::VectorXd gap = S * xi_bar - b;
    zeta += gamma * (gram ? Eigen::VectorXd(gram->solve(gap)) : gap);
    const Eigen::VectorXd next = prox_flat(problem, xi - tau * (St * zeta), tau);
    xi_bar = 2.0 * next - xi;
    IterationRecord rec;
    rec.k = k;
    rec.delta_a = wgt * (S * next - b).norm();
    rec.delta_b = wgt * (next - xi).norm() / tau;
    xi = next;
    if (k % 50 == 0) rec.residual = primal_energy(problem, unflatten(problem, xi));
    res.history.records.push_back(rec);
    const double worst = std::max(rec.delta_a, rec.delta_b);
    if (!std::isfinite(worst) || worst > kDivergenceThreshold) {
      res.history.diverged = true;
      res.message = "residuals diverged";
      break;
    }
    if (worst < tol) {
      res.history.converged = true;
      res.history.records.back().residual = primal_energy(problem, unflatten(problem, xi));
      break;
    }
  }
  res.primal = unflatten(problem, xi);
  res.dual = dual_from_zeta(problem, zeta);
  return res;
}

PrimalPoint project_feasible(const VariationalProblem& problem, const PrimalPoint& point) {
  const Eigen::SparseMatrix<double> S = constraint_matrix(problem);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> gram(S * S.transpose());
  if (gram.info() != Eigen::Success) throw SolverError("factorization of Sigma Sigma^T failed");
  const Eigen::VectorXd x = flatten(point);
  const Eigen::VectorXd corr = gram.solve(S * x - constraint_rhs(problem));
  return unflatten(problem, x - S.transpose() * corr);
}

PrimalPoint primal_from_fdm(const VariationalProblem& problem, const Field& U, const Field& M) {
  const auto& g = problem.grid;
  const int N = g.n_space;
  const auto H = fdm::quadratic_discrete_hamiltonian();
  PrimalPoint p(g);
  p.M = M;
  for (int n = 0; n < g.n_time; ++n) {
    const auto grad = nabla_h(U.level(n), g.h);
    for (int i = 0; i < N; ++i) {
      p.W1[n * N + i] = -M(n + 1, i) * H.d_p1(g.x(i), grad[i].p1, grad[i].p2);
      p.W2[n * N + i] = -M(n + 1, i) * H.d_p2(g.x(i), grad[i].p1, grad[i].p2);
    }
  }
  return p;
}

DualPoint dual_from_fdm(const VariationalProblem& problem, const Field& U) {
  const auto& g = problem.grid;
  DualPoint d;
  d.U.assign(U.data().begin(), U.data().begin() + static_cast<std::ptrdiff_t>(g.n_time) * g.n_space);
  d.lambda0.resize(g.n_space);
  for (int i = 0; i < g.n_space; ++i) d.lambda0[i] = U(0, i) / g.dt;
  return d;
}

VariationalProblem smooth_coincidence_scenario(int n_space, int n_time, double nu) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  VariationalProblem pb;
  pb.grid = DiscreteGrid1D::torus(n_space, n_time, 1.0);
  pb.nu = nu;
  pb.F = [](double, double m) { return 0.05 * m * m; };
  pb.dF = [](double, double m) { return 0.1 * m; };
  pb.d2F = [](double, double) { return 0.1; };
  pb.G = [](double x, double m) { return 0.3 * std::cos(two_pi * x) * m; };
  pb.dG = [](double x, double) { return 0.3 * std::cos(two_pi * x); };
  pb.d2G = [](double, double) { return 0.0; };
  pb.m0bar = fdm::initial_density(fdm::smooth_scenario(n_space, n_time, nu));
  return pb;
}

VariationalProblem resting_scenario(int n_space, int n_time, double nu) {
  VariationalProblem pb;
  pb.grid = DiscreteGrid1D::torus(n_space, n_time, 1.0);
  pb.nu = nu;
  pb.F = pb.G = pb.dF = pb.dG = pb.d2F = pb.d2G = [](double, double) { return 0.0; };
  pb.m0bar.assign(n_space, 1.0);
  return pb;
}

}  // namespace mfgnum::variational
