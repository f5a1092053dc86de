#include "mfgnum/lq.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SparseLU>

#include "mfgnum/grid.hpp"

namespace mfgnum::lq {

namespace {

void require_nonnegative(double v, const char* name) {
  if (!(v >= 0.0)) throw PreconditionError(std::string("lq parameter ") + name + " must be nonnegative");
}

// Coefficients of the adjoint equation -(R^{n+1}-R^n)/dt = a_n R^n + c_n Z^{n+1}.
struct AdjointCoeffs {
  double a;
  double c;
};

AdjointCoeffs adjoint_coeffs(const LQParams& p, double Pn, Regime regime) {
  if (regime == Regime::mfg) return {p.A - p.k() * Pn, Pn * p.Abar - p.Qbar * p.S};
  return {p.A + p.Abar - p.k() * Pn, 2.0 * Pn * p.Abar - 2.0 * p.Qbar * p.S + p.Qbar * p.S * p.S};
}

// R^N = tie * Z^N.
double terminal_tie(const LQParams& p, Regime regime) {
  if (regime == Regime::mfg) return -p.Qbar_T * p.S_T;
  return p.Qbar_T * (p.S_T * p.S_T - 2.0 * p.S_T);
}

double forward_coeff(const LQParams& p, double Pn) { return p.A + p.Abar - p.k() * Pn; }

double trapezoid(std::span<const double> f, double dt) {
  double s = 0.0;
  for (std::size_t n = 0; n + 1 < f.size(); ++n) s += 0.5 * dt * (f[n] + f[n + 1]);
  return s;
}

bool finite_all(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void LQParams::validate() const {
  if (!(C > 0.0)) throw PreconditionError("lq parameter C must be positive");
  if (!(x0_std > 0.0)) throw PreconditionError("lq parameter x0_std must be positive");
  if (!(T > 0.0)) throw PreconditionError("lq parameter T must be positive");
  require_nonnegative(Q, "Q");
  require_nonnegative(Qbar, "Qbar");
  require_nonnegative(Q_T, "Q_T");
  require_nonnegative(Qbar_T, "Qbar_T");
  require_nonnegative(sigma, "sigma");
}

LQParams test_case(int id, double swept) {
  LQParams p;
  switch (id) {
    case 1:
      break;
    case 2:
      p.Qbar_T = 2.45;
      break;
    case 3:
      p.Qbar = 0.0;
      p.Qbar_T = 0.0;
      p.Abar = swept;
      break;
    case 4:
      p.Qbar = 0.0;
      p.Qbar_T = swept;
      break;
    case 5:
      p.Qbar = 0.0;
      p.Qbar_T = 1.0;
      p.Q_T = swept;
      break;
    default:
      throw PreconditionError("lq test case id must be in 1..5");
  }
  return p;
}

SweepKind sweep_kind(int test_case_id) {
  switch (test_case_id) {
    case 3: return SweepKind::Abar;
    case 4: return SweepKind::Qbar_T;
    case 5: return SweepKind::Q_T;
    default: return SweepKind::none;
  }
}

LQParams with_swept(LQParams p, SweepKind kind, double value) {
  switch (kind) {
    case SweepKind::Abar: p.Abar = value; break;
    case SweepKind::Qbar_T: p.Qbar_T = value; break;
    case SweepKind::Q_T: p.Q_T = value; break;
    case SweepKind::none: break;
  }
  return p;
}

std::vector<double> solve_riccati(const LQParams& p, int n_time) {
  if (n_time < 1) throw PreconditionError("n_time must be at least 1");
  const double dt = p.T / n_time;
  std::vector<double> P(n_time + 1);
  P[n_time] = p.Q_T + p.Qbar_T;
  for (int n = n_time - 1; n >= 0; --n) {
    const double next = P[n + 1];
    P[n] = (next + dt * (-p.k() * next * next + p.Q + p.Qbar)) / (1.0 - 2.0 * p.A * dt);
    if (!std::isfinite(P[n])) throw SolverError("Riccati solution became non-finite at level " + std::to_string(n));
  }
  return P;
}

std::vector<double> lq_forward_backward_residual(const LQParams& p, std::span<const double> P,
                                                 std::span<const double> Z, std::span<const double> R,
                                                 Regime regime) {
  if (Z.size() != P.size() || R.size() != P.size() || P.size() < 2)
    throw ShapeError("Z, R and P must share length N_T+1 >= 2");
  const int N = static_cast<int>(P.size()) - 1;
  const double dt = p.T / N;
  const double k = p.k();
  std::vector<double> F(2 * (N + 1));
  F[0] = Z[0] - p.x0_mean;
  for (int n = 0; n < N; ++n) F[n + 1] = (Z[n + 1] - Z[n]) / dt - forward_coeff(p, P[n]) * Z[n + 1] + k * R[n];
  for (int n = 0; n < N; ++n) {
    const auto [a, c] = adjoint_coeffs(p, P[n], regime);
    F[N + 1 + n] = -(R[n + 1] - R[n]) / dt - a * R[n] - c * Z[n + 1];
  }
  F[2 * N + 1] = R[N] - terminal_tie(p, regime) * Z[N];
  return F;
}

LinearSystem assemble_lq_system(const LQParams& p, std::span<const double> P, Regime regime) {
  const int N = static_cast<int>(P.size()) - 1;
  if (N < 1) throw ShapeError("P must have at least two levels");
  const double dt = p.T / N;
  const double k = p.k();
  const int dim = 2 * (N + 1);
  const int r0 = N + 1;  // offset of the R block in the unknown vector
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(6 * (N + 1));
  LinearSystem sys;
  sys.b = Eigen::VectorXd::Zero(dim);

  t.emplace_back(0, 0, 1.0);
  sys.b(0) = p.x0_mean;
  for (int n = 0; n < N; ++n) {
    const int row = n + 1;
    t.emplace_back(row, n + 1, 1.0 / dt - forward_coeff(p, P[n]));
    t.emplace_back(row, n, -1.0 / dt);
    t.emplace_back(row, r0 + n, k);
  }
  for (int n = 0; n < N; ++n) {
    const int row = r0 + n;
    const auto [a, c] = adjoint_coeffs(p, P[n], regime);
    t.emplace_back(row, r0 + n + 1, -1.0 / dt);
    t.emplace_back(row, r0 + n, 1.0 / dt - a);
    t.emplace_back(row, n + 1, -c);
  }
  t.emplace_back(dim - 1, r0 + N, 1.0);
  t.emplace_back(dim - 1, N, -terminal_tie(p, regime));
  sys.M.resize(dim, dim);
  sys.M.setFromTriplets(t.begin(), t.end());
  return sys;
}

std::vector<double> s_path(const LQParams& p, std::span<const double> P, std::span<const double> Z,
                           std::span<const double> R) {
  const int N = static_cast<int>(P.size()) - 1;
  const double dt = p.T / N;
  std::vector<double> g(N + 1);
  for (int n = 0; n <= N; ++n) {
    g[n] = p.nu() * P[n] - 0.5 * p.k() * R[n] * R[n] + R[n] * p.Abar * Z[n] + 0.5 * p.S * p.S * p.Qbar * Z[n] * Z[n];
  }
  std::vector<double> S(N + 1);
  S[N] = 0.5 * p.Qbar_T * p.S_T * p.S_T * Z[N] * Z[N];
  for (int n = N - 1; n >= 0; --n) S[n] = S[n + 1] + 0.5 * dt * (g[n] + g[n + 1]);
  return S;
}

LQTrajectory solve_lq_direct(const LQParams& p, int n_time, Regime regime, DirectMethod method) {
  p.validate();
  LQTrajectory tr;
  tr.P = solve_riccati(p, n_time);
  const auto sys = assemble_lq_system(p, tr.P, regime);
  Eigen::VectorXd x;
  if (method == DirectMethod::dense) {
    x = Eigen::PartialPivLU<Eigen::MatrixXd>(Eigen::MatrixXd(sys.M)).solve(sys.b);
  } else {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(sys.M);
    if (lu.info() != Eigen::Success) throw SolverError("sparse LU failed in solve_lq_direct");
    x = lu.solve(sys.b);
  }
  if (!x.allFinite()) throw SolverError("direct LQ solve produced non-finite values");
  tr.Z.assign(x.data(), x.data() + n_time + 1);
  tr.R.assign(x.data() + n_time + 1, x.data() + 2 * (n_time + 1));
  tr.S = s_path(p, tr.P, tr.Z, tr.R);
  return tr;
}

LQSolveResult picard_lq(const LQParams& p, const DampingSchedule& damping, const LQIterationOptions& opt) {
  p.validate();
  const int N = opt.n_time;
  const double dt = p.T / N;
  const auto P = solve_riccati(p, N);

  std::vector<double> z_tilde = opt.z_init.empty() ? std::vector<double>(N + 1, p.x0_mean) : opt.z_init;
  if (static_cast<int>(z_tilde.size()) != N + 1) throw ShapeError("z_init must have N_T+1 entries");
  std::vector<double> z = z_tilde;
  std::vector<double> r(N + 1, 0.0);

  // The sweeps of backward_r and forward_z with their per-step coefficients hoisted out of the loop.
  std::vector<double> r_gain(N), r_src(N), z_gain(N);
  for (int n = 0; n < N; ++n) {
    const auto [a, c] = adjoint_coeffs(p, P[n], Regime::mfg);
    r_gain[n] = 1.0 / (1.0 - dt * a);
    r_src[n] = dt * c;
    z_gain[n] = 1.0 / (1.0 - dt * forward_coeff(p, P[n]));
  }
  const double tie = terminal_tie(p, Regime::mfg), dtk = dt * p.k();
  std::vector<double> r_next(N + 1), z_next(N + 1);

  LQSolveResult out;
  for (int k = 0; k < opt.max_iter; ++k) {
    r_next[N] = tie * z_tilde[N];
    for (int n = N - 1; n >= 0; --n) r_next[n] = (r_next[n + 1] + r_src[n] * z_tilde[n + 1]) * r_gain[n];
    z_next[0] = p.x0_mean;
    for (int n = 0; n < N; ++n) z_next[n + 1] = (z_next[n] - dtk * r_next[n]) * z_gain[n];
    IterationRecord rec;
    rec.k = k + 1;
    rec.delta_a = l2_distance(z_next, z, dt);
    rec.delta_b = l2_distance(r_next, r, dt);
    out.history.records.push_back(rec);
    std::swap(z, z_next);
    std::swap(r, r_next);

    const double d = damping(k);
    for (int n = 0; n <= N; ++n) z_tilde[n] = d * z_tilde[n] + (1.0 - d) * z[n];

    if (!std::isfinite(rec.delta_a) || !std::isfinite(rec.delta_b) || rec.delta_a > kDivergenceThreshold ||
        rec.delta_b > kDivergenceThreshold) {
      out.history.diverged = true;
      break;
    }
    if (rec.delta_a < opt.tol && rec.delta_b < opt.tol) {
      out.history.converged = true;
      break;
    }
  }
  out.traj.P = P;
  out.traj.Z = z;
  out.traj.R = r;
  if (finite_all(z) && finite_all(r)) out.traj.S = s_path(p, P, z, r);
  return out;
}

LQSolveResult fictitious_play_lq(const LQParams& p, const LQIterationOptions& opt) {
  return picard_lq(p, DampingSchedule::fictitious(), opt);
}

LQSolveResult newton_lq(const LQParams& p, const LQIterationOptions& opt) {
  p.validate();
  const int N = opt.n_time;
  const double dt = p.T / N;
  const auto P = solve_riccati(p, N);
  std::vector<double> Z = opt.z_init.empty() ? std::vector<double>(N + 1, p.x0_mean) : opt.z_init;
  std::vector<double> R(N + 1, 0.0);

  // The residual is affine, so its differential is the assembled matrix at every iterate.
  const auto sys = assemble_lq_system(p, P, Regime::mfg);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(Eigen::MatrixXd(sys.M));

  LQSolveResult out;
  auto F = lq_forward_backward_residual(p, P, Z, R);
  for (int k = 0; k < opt.max_iter; ++k) {
    if (sup_norm(F) < opt.tol) {
      out.history.converged = true;
      break;
    }
    const Eigen::VectorXd step = lu.solve(-Eigen::Map<const Eigen::VectorXd>(F.data(), F.size()));
    if (!step.allFinite()) throw SolverError("singular Newton system in newton_lq");
    std::vector<double> dz(step.data(), step.data() + N + 1);
    std::vector<double> dr(step.data() + N + 1, step.data() + 2 * (N + 1));
    for (int n = 0; n <= N; ++n) {
      Z[n] += dz[n];
      R[n] += dr[n];
    }
    F = lq_forward_backward_residual(p, P, Z, R);
    IterationRecord rec;
    rec.k = k + 1;
    rec.delta_a = l2_norm(dz, dt);
    rec.delta_b = l2_norm(dr, dt);
    rec.residual = sup_norm(F);
    out.history.records.push_back(rec);
    if (rec.residual < opt.tol) {
      out.history.converged = true;
      break;
    }
  }
  out.traj.P = P;
  out.traj.Z = Z;
  out.traj.R = R;
  out.traj.S = s_path(p, P, Z, R);
  return out;
}

LQCosts lq_costs_and_poa(const LQParams& p, int n_time) {
  LQCosts c;
  const auto method = n_time > 400 ? DirectMethod::sparse : DirectMethod::dense;
  c.mfg = solve_lq_direct(p, n_time, Regime::mfg, method);
  c.mfc = solve_lq_direct(p, n_time, Regime::mfc, method);
  const double m2 = p.x0_std * p.x0_std + p.x0_mean * p.x0_mean;
  const int N = n_time;
  const double dt = p.T / N;

  c.J_mfg = 0.5 * c.mfg.P[0] * m2 + c.mfg.R[0] * p.x0_mean + c.mfg.S[0];

  const auto& z = c.mfc.Z;
  const auto& r = c.mfc.R;
  const auto& P = c.mfc.P;
  std::vector<double> integrand(N + 1);
  for (int n = 0; n <= N; ++n)
    integrand[n] = (P[n] * z[n] + r[n]) * p.Abar * z[n] - (1.0 - p.S) * p.Qbar * p.S * z[n] * z[n];
  c.J_mfc = 0.5 * P[0] * m2 + r[0] * p.x0_mean + c.mfc.S[0] + (1.0 - p.S_T) * p.Qbar_T * p.S_T * z[N] * z[N] -
            trapezoid(integrand, dt);

  if (!(c.J_mfc > 0.0)) throw SolverError("J_mfc is not positive; the price of anarchy is undefined");
  c.poa = c.J_mfg / c.J_mfc;
  return c;
}

}  // namespace mfgnum::lq
