#include "mfgnum/finite_state.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <thread>

#include <Eigen/SparseLU>

#include "mfgnum/grid.hpp"

namespace mfgnum::finite {

namespace {

std::span<const double> row_of(const Eigen::MatrixXd& A, int n, std::vector<double>& buf) {
  buf.resize(A.cols());
  for (int j = 0; j < A.cols(); ++j) buf[j] = A(n, j);
  return buf;
}

std::vector<double> action_values(const FiniteMFG& pb, const std::vector<int>& idx) {
  std::vector<double> a(idx.size());
  for (std::size_t x = 0; x < idx.size(); ++x) a[x] = pb.actions[idx[x]];
  return a;
}

std::vector<int> policy_at(const FiniteMFG& pb, std::span<const double> m, std::span<const double> u_next) {
  std::vector<int> pol(pb.n_states);
  for (int x = 0; x < pb.n_states; ++x) pol[x] = hamiltonian_finite(pb, x, m, u_next).action;
  return pol;
}

double time_l2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double dt) {
  return std::sqrt(dt * (a - b).squaredNorm());
}

bool finite_matrix(const Eigen::MatrixXd& a) { return a.allFinite(); }

struct Sweep {
  Eigen::MatrixXd u;
  std::vector<std::vector<int>> policy;
};

// Backward HJB pass against a frozen density path.
Sweep backward(const FiniteMFG& pb, const Eigen::MatrixXd& m, double dt) {
  const int N = static_cast<int>(m.rows()) - 1, d = pb.n_states;
  Sweep s;
  s.u.resize(N + 1, d);
  s.policy.assign(N, {});
  std::vector<double> mb, ub;
  for (int x = 0; x < d; ++x) s.u(N, x) = pb.terminal(x, row_of(m, N, mb));
  for (int n = N - 1; n >= 0; --n) {
    const auto mn = row_of(m, n, mb);
    const auto un = row_of(s.u, n + 1, ub);
    s.policy[n] = policy_at(pb, mn, un);
    const auto a = action_values(pb, s.policy[n]);
    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(d, d) - dt * pb.rate_matrix(mn, a);
    Eigen::VectorXd rhs(d);
    for (int x = 0; x < d; ++x) rhs[x] = un[x] + dt * pb.running_cost(x, mn, a[x]);
    s.u.row(n) = A.partialPivLu().solve(rhs).transpose();
  }
  return s;
}

// Forward KFP pass under a fixed policy; the rates see the density being computed.
Eigen::MatrixXd forward(const FiniteMFG& pb, const std::vector<std::vector<int>>& policy, double dt) {
  const int N = static_cast<int>(policy.size()), d = pb.n_states;
  Eigen::MatrixXd m(N + 1, d);
  for (int x = 0; x < d; ++x) m(0, x) = pb.m0[x];
  std::vector<double> mb;
  for (int n = 0; n < N; ++n) {
    const auto mn = row_of(m, n, mb);
    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(d, d) - dt * pb.rate_matrix(mn, action_values(pb, policy[n]));
    const Eigen::VectorXd cur = m.row(n).transpose();
    m.row(n + 1) = A.transpose().partialPivLu().solve(cur).transpose();
  }
  return m;
}

FiniteSolveResult picard(const FiniteMFG& pb, const FiniteSolveOptions& opt, const DampingSchedule& damping) {
  const int N = opt.n_time, d = pb.n_states;
  const double dt = pb.T / N;
  Eigen::MatrixXd m_tilde(N + 1, d);
  for (int n = 0; n <= N; ++n)
    for (int x = 0; x < d; ++x) m_tilde(n, x) = pb.m0[x];
  Eigen::MatrixXd m = m_tilde, u = Eigen::MatrixXd::Zero(N + 1, d);

  FiniteSolveResult out;
  for (int k = 0; k < opt.max_iter; ++k) {
    auto sw = backward(pb, m_tilde, dt);
    auto m_next = forward(pb, sw.policy, dt);
    IterationRecord rec;
    rec.k = k + 1;
    rec.delta_a = time_l2(sw.u, u, dt);
    rec.delta_b = time_l2(m_next, m, dt);
    u = std::move(sw.u);
    m = std::move(m_next);
    out.flow.policy = std::move(sw.policy);
    const double w = damping(k);
    m_tilde = w * m_tilde + (1.0 - w) * m;
    if (!finite_matrix(u) || !finite_matrix(m) || rec.delta_a > kDivergenceThreshold ||
        rec.delta_b > kDivergenceThreshold) {
      out.history.records.push_back(rec);
      out.history.diverged = true;
      break;
    }
    out.flow.m = m;
    out.flow.u = u;
    rec.residual = sup_norm(finite_mfg_residual(pb, out.flow));
    out.history.records.push_back(rec);
    if (rec.delta_a < opt.tol && rec.delta_b < opt.tol) {
      out.history.converged = true;
      break;
    }
  }
  out.flow.m = m;
  out.flow.u = u;
  return out;
}

// Central differences in m of the rates, costs and terminal costs; exact up to round-off for affine dependence.
constexpr double kFdStep = 1e-6;

FiniteSolveResult newton(const FiniteMFG& pb, const FiniteSolveOptions& opt) {
  const int N = opt.n_time, d = pb.n_states;
  const double dt = pb.T / N;
  const int nu = (N + 1) * d, nm = N * d, n_unknowns = nu + nm;

  FlowPair flow;
  flow.m.resize(N + 1, d);
  for (int n = 0; n <= N; ++n)
    for (int x = 0; x < d; ++x) flow.m(n, x) = pb.m0[x];
  {
    auto sw = backward(pb, flow.m, dt);
    flow.u = std::move(sw.u);
  }
  auto u_col = [d](int n, int x) { return n * d + x; };
  auto m_col = [nu, d](int n, int x) { return nu + (n - 1) * d + x; };  // n >= 1

  FiniteSolveResult out;
  auto F = finite_mfg_residual(pb, flow);
  double norm = sup_norm(F);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  std::vector<double> mb, ub, mp;
  for (int k = 0; k < opt.max_iter && norm >= opt.tol; ++k) {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(N) * d * d * 6 + d * d);
    for (int n = 0; n < N; ++n) {
      const auto mn = row_of(flow.m, n, mb);
      const auto un1 = row_of(flow.u, n + 1, ub);
      const auto a = action_values(pb, policy_at(pb, mn, un1));
      const Eigen::MatrixXd L = pb.rate_matrix(mn, a);
      const int hjb = n * d, kfp = nu + n * d;
      for (int x = 0; x < d; ++x) {
        t.emplace_back(hjb + x, u_col(n + 1, x), -1.0);
        for (int y = 0; y < d; ++y) {
          const double A_xy = (x == y ? 1.0 : 0.0) - dt * L(x, y);
          if (A_xy != 0.0) t.emplace_back(hjb + x, u_col(n, y), A_xy);
        }
      }
      // KFP row x: sum_y (I - dt L)(y, x) m^{n+1}(y) - m^n(x).
      for (int x = 0; x < d; ++x)
        for (int y = 0; y < d; ++y) {
          const double A_yx = (x == y ? 1.0 : 0.0) - dt * L(y, x);
          if (A_yx != 0.0) t.emplace_back(kfp + x, m_col(n + 1, y), A_yx);
        }
      if (n >= 1) {
        const Eigen::VectorXd un = flow.u.row(n).transpose(), m1 = flow.m.row(n + 1).transpose();
        mp.assign(mn.begin(), mn.end());
        for (int j = 0; j < d; ++j) {
          mp[j] = mn[j] + kFdStep;
          const Eigen::MatrixXd Lp = pb.rate_matrix(mp, a);
          std::vector<double> fp(d);
          for (int x = 0; x < d; ++x) fp[x] = pb.running_cost(x, mp, a[x]);
          mp[j] = mn[j] - kFdStep;
          const Eigen::MatrixXd Lm = pb.rate_matrix(mp, a);
          std::vector<double> fm(d);
          for (int x = 0; x < d; ++x) fm[x] = pb.running_cost(x, mp, a[x]);
          mp[j] = mn[j];
          const Eigen::MatrixXd dL = (Lp - Lm) / (2.0 * kFdStep);
          const Eigen::VectorXd hjb_j = dL * un, kfp_j = dL.transpose() * m1;
          for (int x = 0; x < d; ++x) {
            const double df = (fp[x] - fm[x]) / (2.0 * kFdStep);
            t.emplace_back(hjb + x, m_col(n, j), -dt * (hjb_j[x] + df));
            t.emplace_back(kfp + x, m_col(n, j), (x == j ? -1.0 : 0.0) - dt * kfp_j[x]);
          }
        }
      }
    }
    // Terminal rows u^N - g(m^N).
    const int term = N * d;
    const auto mN = row_of(flow.m, N, mb);
    mp.assign(mN.begin(), mN.end());
    for (int x = 0; x < d; ++x) t.emplace_back(term + x, u_col(N, x), 1.0);
    for (int j = 0; j < d; ++j) {
      mp[j] = mN[j] + kFdStep;
      std::vector<double> gp(d), gm(d);
      for (int x = 0; x < d; ++x) gp[x] = pb.terminal(x, mp);
      mp[j] = mN[j] - kFdStep;
      for (int x = 0; x < d; ++x) gm[x] = pb.terminal(x, mp);
      mp[j] = mN[j];
      for (int x = 0; x < d; ++x) {
        const double dg = (gp[x] - gm[x]) / (2.0 * kFdStep);
        if (dg != 0.0) t.emplace_back(term + x, m_col(N, j), -dg);
      }
    }
    Eigen::SparseMatrix<double> J(n_unknowns, n_unknowns);
    J.setFromTriplets(t.begin(), t.end());
    J.makeCompressed();
    if (k == 0) lu.analyzePattern(J);
    lu.factorize(J);
    if (lu.info() != Eigen::Success) throw SolverError("solve_finite_mfg: singular Newton matrix");
    const Eigen::VectorXd step = lu.solve(-Eigen::Map<const Eigen::VectorXd>(F.data(), n_unknowns));
    if (!step.allFinite()) throw SolverError("solve_finite_mfg: singular Newton matrix");

    // The residual jumps where the policy switches. Halve until it decreases; if no fraction gains 1%, take the full
    // step, which is one round of policy iteration.
    auto apply = [&](double th) {
      FlowPair tr = flow;
      for (int n = 0; n <= N; ++n)
        for (int x = 0; x < d; ++x) {
          tr.u(n, x) += th * step[u_col(n, x)];
          if (n >= 1) tr.m(n, x) += th * step[m_col(n, x)];
        }
      return tr;
    };
    double theta = 1.0;
    FlowPair trial;
    std::vector<double> Ft;
    double nt = norm;
    for (int h = 0; h < 40; ++h, theta *= 0.5) {
      trial = apply(theta);
      Ft = finite_mfg_residual(pb, trial);
      nt = sup_norm(Ft);
      if (nt < norm) break;
    }
    if (!(nt < 0.99 * norm) && theta < 1.0) {
      theta = 1.0;
      trial = apply(theta);
      Ft = finite_mfg_residual(pb, trial);
      nt = sup_norm(Ft);
      if (!std::isfinite(nt) || nt > kDivergenceThreshold) {
        out.history.diverged = true;
        break;
      }
    }
    IterationRecord rec;
    rec.k = k + 1;
    rec.delta_a = theta * std::sqrt(dt) * step.head(nu).norm();
    rec.delta_b = theta * std::sqrt(dt) * step.tail(nm).norm();
    rec.residual = nt;
    out.history.records.push_back(rec);
    flow = std::move(trial);
    F = std::move(Ft);
    norm = nt;
  }
  out.history.converged = norm < opt.tol;
  flow.policy.assign(N, {});
  for (int n = 0; n < N; ++n) flow.policy[n] = policy_at(pb, row_of(flow.m, n, mb), row_of(flow.u, n + 1, ub));
  out.flow = std::move(flow);
  return out;
}

template <class F>
void parallel_for(int n, int threads, F&& body) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    body(0, n);
    return;
  }
  std::vector<std::jthread> pool;
  const int chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int lo = t * chunk, hi = std::min(n, lo + chunk);
    if (lo < hi) pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
}

}  // namespace

void FiniteMFG::validate() const {
  if (n_states < 1) throw PreconditionError("n_states must be positive");
  if (actions.empty()) throw PreconditionError("actions must not be empty");
  if (!rate) throw PreconditionError("rate must be set");
  if (!running_cost) throw PreconditionError("running_cost must be set");
  if (!(T > 0.0)) throw PreconditionError("T must be positive");
  if (!(beta >= 0.0)) throw PreconditionError("beta must be nonnegative");
  if (static_cast<int>(m0.size()) != n_states) throw ShapeError("m0 must have n_states entries");
  double s = 0.0;
  for (double v : m0) {
    if (!(v >= 0.0)) throw PreconditionError("m0 must be nonnegative");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-12) throw PreconditionError("m0 must sum to 1");
  if (!state_names.empty() && static_cast<int>(state_names.size()) != n_states)
    throw ShapeError("state_names must be empty or have n_states entries");
}

Eigen::MatrixXd FiniteMFG::rate_matrix(std::span<const double> m, std::span<const double> a) const {
  if (static_cast<int>(m.size()) != n_states || static_cast<int>(a.size()) != n_states)
    throw ShapeError("rate_matrix needs n_states densities and actions");
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n_states, n_states);
  for (int x = 0; x < n_states; ++x) {
    double s = 0.0;
    for (int y = 0; y < n_states; ++y) {
      if (y == x) continue;
      const double r = rate(x, y, m, a[x]);
      if (r < 0.0) throw PreconditionError("negative jump rate from state " + std::to_string(x));
      L(x, y) = r;
      s += r;
    }
    L(x, x) = -s;
  }
  return L;
}

double FiniteMFG::terminal(int x, std::span<const double> m) const { return terminal_cost ? terminal_cost(x, m) : 0.0; }

HamiltonianValue hamiltonian_finite(const FiniteMFG& pb, int x, std::span<const double> m,
                                    std::span<const double> h) {
  if (pb.actions.empty()) throw PreconditionError("actions must not be empty");
  if (static_cast<int>(h.size()) != pb.n_states || static_cast<int>(m.size()) != pb.n_states)
    throw ShapeError("hamiltonian_finite needs n_states entries in m and h");
  HamiltonianValue best{-std::numeric_limits<double>::infinity(), 0};
  for (int k = 0; k < static_cast<int>(pb.actions.size()); ++k) {
    const double a = pb.actions[k];
    double L = pb.running_cost(x, m, a);
    for (int y = 0; y < pb.n_states; ++y)
      if (y != x) L += pb.rate(x, y, m, a) * (h[y] - h[x]);
    if (-L > best.value) best = {-L, k};
  }
  return best;
}

std::vector<double> finite_mfg_residual(const FiniteMFG& pb, const FlowPair& flow) {
  const int d = pb.n_states, N = static_cast<int>(flow.m.rows()) - 1;
  if (N < 1 || flow.m.cols() != d || flow.u.rows() != N + 1 || flow.u.cols() != d)
    throw ShapeError("flow must hold (N_T + 1) x n_states arrays");
  const double dt = pb.T / N;
  std::vector<double> r(static_cast<std::size_t>(2 * N + 1) * d);
  std::vector<double> mb, ub;
  for (int n = 0; n < N; ++n) {
    const auto mn = row_of(flow.m, n, mb);
    const auto un1 = row_of(flow.u, n + 1, ub);
    const auto a = action_values(pb, policy_at(pb, mn, un1));
    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(d, d) - dt * pb.rate_matrix(mn, a);
    const Eigen::VectorXd hjb = A * flow.u.row(n).transpose();
    const Eigen::VectorXd kfp = A.transpose() * flow.m.row(n + 1).transpose();
    for (int x = 0; x < d; ++x) {
      r[n * d + x] = hjb[x] - un1[x] - dt * pb.running_cost(x, mn, a[x]);
      r[(N + 1 + n) * d + x] = kfp[x] - flow.m(n, x);
    }
  }
  const auto mN = row_of(flow.m, N, mb);
  for (int x = 0; x < d; ++x) r[N * d + x] = flow.u(N, x) - pb.terminal(x, mN);
  return r;
}

FiniteSolveResult solve_finite_mfg(const FiniteMFG& problem, FiniteMethod method, const FiniteSolveOptions& opt,
                                   const DampingSchedule& damping) {
  problem.validate();
  if (opt.n_time < 1) throw PreconditionError("n_time must be positive");
  if (opt.max_iter < 1) throw PreconditionError("max_iter must be positive");
  if (!(opt.tol > 0.0)) throw PreconditionError("tol must be positive");
  return method == FiniteMethod::picard ? picard(problem, opt, damping) : newton(problem, opt);
}

void CyberParams::validate() const {
  const std::pair<const char*, double> fields[] = {
      {"beta_UU", beta_UU}, {"beta_UD", beta_UD}, {"beta_DU", beta_DU}, {"beta_DD", beta_DD},
      {"v_H", v_H},         {"rho", rho},         {"q_rec_D", q_rec_D}, {"q_rec_U", q_rec_U},
      {"q_inf_D", q_inf_D}, {"q_inf_U", q_inf_U}, {"k_D", k_D},         {"k_I", k_I}};
  for (const auto& [name, v] : fields)
    if (!(v >= 0.0)) throw PreconditionError(std::string(name) + " must be nonnegative");
}

CyberParams cyber_mfg_params() { return {}; }

CyberParams cyber_mfc_params() {
  CyberParams p;
  p.v_H = 0.6;
  p.rho = 0.8;
  p.q_rec_D = 0.5;
  p.q_rec_U = 0.4;
  p.q_inf_D = 0.4;
  p.q_inf_U = 0.3;
  return p;
}

FiniteMFG cybersecurity_model(const CyberParams& p, std::vector<double> m0, double T) {
  p.validate();
  constexpr int DI = 0, DS = 1, UI = 2, US = 3;
  FiniteMFG pb;
  pb.n_states = 4;
  pb.actions = {0.0, 1.0};
  pb.state_names = {"DI", "DS", "UI", "US"};
  pb.T = T;
  pb.m0 = std::move(m0);
  pb.rate = [p](int x, int y, std::span<const double> m, double a) {
    switch (x) {
      case DI: return y == DS ? p.q_rec_D : y == UI ? p.rho * a : 0.0;
      case DS: return y == DI ? p.v_H * p.q_inf_D + p.beta_DD * m[DI] + p.beta_UD * m[UI] : y == US ? p.rho * a : 0.0;
      case UI: return y == DI ? p.rho * a : y == US ? p.q_rec_U : 0.0;
      default: return y == DS ? p.rho * a : y == UI ? p.v_H * p.q_inf_U + p.beta_UU * m[UI] + p.beta_DU * m[DI] : 0.0;
    }
  };
  const double sign = p.flip_cost_sign ? 1.0 : -1.0;
  pb.running_cost = [p, sign](int x, std::span<const double>, double) {
    const double defended = (x == DI || x == DS) ? p.k_D : 0.0;
    const double infected = (x == DI || x == UI) ? p.k_I : 0.0;
    return sign * (defended + infected);
  };
  pb.validate();
  return pb;
}

FiniteMFG flip_model(double a_max, int n_actions, std::vector<double> m0, double T) {
  if (!(a_max > 0.0)) throw PreconditionError("a_max must be positive");
  if (n_actions < 2) throw PreconditionError("n_actions must be at least 2");
  FiniteMFG pb;
  pb.n_states = 2;
  pb.state_names = {"-1", "+1"};
  for (int k = 0; k < n_actions; ++k) pb.actions.push_back(a_max * k / (n_actions - 1));
  pb.rate = [](int, int, std::span<const double>, double a) { return a; };
  pb.running_cost = [](int, std::span<const double>, double a) { return 0.5 * a * a; };
  pb.terminal_cost = [](int x, std::span<const double> m) { return -(x == 0 ? -1.0 : 1.0) * (m[1] - m[0]); };
  pb.T = T;
  pb.m0 = std::move(m0);
  pb.validate();
  return pb;
}

double entropy_z_exact(double t, double mbar) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw PreconditionError("t must be finite and nonnegative");
  if (!(std::abs(mbar) <= 1.0)) throw PreconditionError("mbar must lie in [-1, 1]");
  if (mbar == 0.0) return 0.0;
  if (t == 0.0) return 2.0 * mbar;
  const double a = std::abs(mbar);
  // On M > 0 the cubic reads q(M) = t^2 M^3 + t(2 - t) M^2 + (1 - 2t) M - |mbar|; odd symmetry gives the other sign.
  auto q = [t, a](double M) { return ((t * t * M + t * (2.0 - t)) * M + (1.0 - 2.0 * t)) * M - a; };
  double lo = 0.0;
  if (t > 0.0) {
    // q is increasing to the right of the largest critical point.
    const double A = 3.0 * t * t, B = 2.0 * t * (2.0 - t), C = 1.0 - 2.0 * t;
    const double disc = B * B - 4.0 * A * C;
    if (disc > 0.0) lo = std::max(0.0, (-B + std::sqrt(disc)) / (2.0 * A));
  }
  double hi = std::max(1.0, 2.0 * lo);
  for (int k = 0; q(hi) <= 0.0; ++k) {
    if (k > 200) throw SolverError("entropy_z_exact: root not bracketed");
    hi *= 2.0;
  }
  if (q(lo) > 0.0) throw SolverError("entropy_z_exact: root not bracketed");
  for (int k = 0; k < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++k) {
    const double mid = 0.5 * (lo + hi);
    (q(mid) > 0.0 ? hi : lo) = mid;
  }
  const double M = std::copysign(0.5 * (lo + hi), mbar);
  return 2.0 * M / (t * std::abs(M) + 1.0);
}

SimplexGrid::SimplexGrid(int n_states, int n_per_axis) : d_(n_states), n_axis_(n_per_axis) {
  if (n_states < 1) throw PreconditionError("n_states must be positive");
  if (n_per_axis < 2) throw PreconditionError("n_per_axis must be at least 2");
  const int K = n_per_axis - 1;
  double codes = std::pow(static_cast<double>(K + 1), d_ - 1);
  if (codes > 5e7) throw PreconditionError("simplex grid too large");
  lookup_.assign(static_cast<std::size_t>(codes), -1);
  std::vector<int> c(d_, 0);
  // Enumerate compositions of K into d parts, last coordinate taking the remainder.
  std::function<void(int, int)> rec = [&](int i, int left) {
    if (i == d_ - 1) {
      c[i] = left;
      std::vector<double> p(d_);
      for (int j = 0; j < d_; ++j) p[j] = static_cast<double>(c[j]) / K;
      std::size_t code = 0;
      for (int j = 0; j < d_ - 1; ++j) code = code * (K + 1) + c[j];
      lookup_[code] = static_cast<int>(points_.size());
      points_.push_back(std::move(p));
      return;
    }
    for (int v = 0; v <= left; ++v) {
      c[i] = v;
      rec(i + 1, left - v);
    }
  };
  rec(0, K);
}

int SimplexGrid::index_of(std::span<const int> counts) const {
  const int K = n_axis_ - 1;
  if (static_cast<int>(counts.size()) != d_) throw ShapeError("counts must have n_states entries");
  int s = 0;
  std::size_t code = 0;
  for (int j = 0; j < d_; ++j) {
    if (counts[j] < 0 || counts[j] > K) throw PreconditionError("count out of range");
    s += counts[j];
    if (j < d_ - 1) code = code * (K + 1) + counts[j];
  }
  if (s != K) throw PreconditionError("counts must sum to n_per_axis - 1");
  return lookup_[code];
}

int SimplexGrid::project(std::span<const double> m) const {
  if (static_cast<int>(m.size()) != d_) throw ShapeError("m must have n_states entries");
  const int K = n_axis_ - 1;
  std::vector<double> s(d_);
  std::vector<int> c(d_);
  int total = 0;
  for (int j = 0; j < d_; ++j) {
    s[j] = std::max(0.0, m[j]) * K;
    c[j] = static_cast<int>(std::lround(s[j]));
    total += c[j];
  }
  while (total != K) {
    int pick = -1;
    for (int j = 0; j < d_; ++j) {
      if (total < K) {
        if (pick < 0 || s[j] - c[j] > s[pick] - c[pick]) pick = j;
      } else if (c[j] > 0 && (pick < 0 || s[j] - c[j] <= s[pick] - c[pick])) {
        pick = j;
      }
    }
    c[pick] += total < K ? 1 : -1;
    total += total < K ? 1 : -1;
  }
  return index_of(c);
}

double discount_rate_for(double gamma, double dt) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw PreconditionError("gamma must lie in (0, 1]");
  if (!(dt > 0.0)) throw PreconditionError("dt must be positive");
  return -std::log(gamma) / dt;
}

LiftedMDP mfc_lift(const FiniteMFG& pb, double dt, int max_joint_actions) {
  pb.validate();
  if (!(dt > 0.0)) throw PreconditionError("dt must be positive");
  const int d = pb.n_states, na = static_cast<int>(pb.actions.size());
  if (d * std::log(static_cast<double>(na)) > std::log(static_cast<double>(max_joint_actions)) + 1e-12)
    throw PreconditionError("joint action set |A|^d exceeds max_joint_actions");
  LiftedMDP mdp;
  mdp.n_states = d;
  mdp.dt = dt;
  mdp.gamma = std::exp(-pb.beta * dt);
  int total = 1;
  for (int x = 0; x < d; ++x) total *= na;
  for (int j = 0; j < total; ++j) {
    std::vector<double> prof(d);
    int code = j;
    for (int x = d - 1; x >= 0; --x) {
      prof[x] = pb.actions[code % na];
      code /= na;
    }
    mdp.joint_actions.push_back(std::move(prof));
  }
  auto acts = std::make_shared<std::vector<std::vector<double>>>(mdp.joint_actions);
  mdp.phi = [pb, dt, acts](std::span<const double> m, int joint) {
    const auto L = pb.rate_matrix(m, (*acts)[joint]);
    std::vector<double> next(m.begin(), m.end());
    for (int x = 0; x < pb.n_states; ++x) {
      if (1.0 + dt * L(x, x) < 0.0) throw PreconditionError("dt too large: negative transition probability");
      for (int y = 0; y < pb.n_states; ++y) next[y] += dt * m[x] * L(x, y);
    }
    return next;
  };
  mdp.cost = [pb, dt, acts](std::span<const double> m, int joint) {
    const auto& a = (*acts)[joint];
    double s = 0.0;
    for (int x = 0; x < pb.n_states; ++x) s += pb.running_cost(x, m, a[x]) * m[x];
    return s * dt;
  };
  // Refuse up front when some vertex or the initial distribution already gives a negative probability.
  std::vector<std::vector<double>> probes{pb.m0};
  for (int x = 0; x < d; ++x) {
    std::vector<double> e(d, 0.0);
    e[x] = 1.0;
    probes.push_back(std::move(e));
  }
  for (const auto& m : probes)
    for (int j = 0; j < total; ++j) mdp.phi(m, j);
  return mdp;
}

double QTable::min_value(int i) const { return (*this)(i, argmin(i)); }

int QTable::argmin(int i) const {
  int best = 0;
  for (int a = 1; a < n_actions_; ++a)
    if ((*this)(i, a) < (*this)(i, best)) best = a;
  return best;
}

QLearningResult q_learning_mfc(const LiftedMDP& mdp, const SimplexGrid& grid, const QLearningOptions& opt) {
  if (grid.size() == 0) throw PreconditionError("simplex grid is empty");
  if (grid.n_states() != mdp.n_states) throw ShapeError("simplex grid and model disagree on n_states");
  if (opt.max_sweeps < 1) throw PreconditionError("max_sweeps must be positive");
  if (!(opt.tol > 0.0)) throw PreconditionError("tol must be positive");
  const int P = grid.size(), A = static_cast<int>(mdp.joint_actions.size());
  // One query per (point, action) is all the sweeps need, since the lifted dynamics are deterministic.
  std::vector<int> next(static_cast<std::size_t>(P) * A);
  std::vector<double> cost(next.size());
  parallel_for(P, opt.threads, [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i)
      for (int a = 0; a < A; ++a) {
        const std::size_t k = static_cast<std::size_t>(i) * A + a;
        cost[k] = mdp.cost(grid.point(i), a);
        next[k] = grid.project(mdp.phi(grid.point(i), a));
      }
  });

  // Sweeps run in increment form: with the greedy actions unchanged at a point, its value moves by exactly the
  // increment of the greedy entry, so dQ^{k+1} = gamma dV^k(next) carries no cancellation error and the measured
  // contraction is that of the Bellman operator rather than of round-off in Q^{k+1} - Q^k.
  QLearningResult out;
  out.q = QTable(P, A, 0.0);
  std::vector<double> dQ(static_cast<std::size_t>(P) * A, 0.0), V(P, 0.0), V_prev(P), dV(P);
  std::vector<int> arg(P, 0), arg_prev(P);
  const int threads = std::max(1, std::min(opt.threads, P));
  const int chunk = (P + threads - 1) / threads;
  auto refresh_values = [&] {
    parallel_for(P, threads, [&](int lo, int hi) {
      for (int i = lo; i < hi; ++i) {
        arg[i] = out.q.argmin(i);
        V[i] = out.q(i, arg[i]);
      }
    });
  };
  for (int k = 0; k < opt.max_sweeps; ++k) {
    if (k > 0)
      for (int i = 0; i < P; ++i)
        dV[i] = arg[i] == arg_prev[i] ? dQ[static_cast<std::size_t>(i) * A + arg[i]] : V[i] - V_prev[i];
    std::vector<double> change(threads, 0.0);
    parallel_for(P, threads, [&](int lo, int hi) {
      double c = 0.0;
      for (int i = lo; i < hi; ++i)
        for (int a = 0; a < A; ++a) {
          const std::size_t idx = static_cast<std::size_t>(i) * A + a;
          dQ[idx] = k == 0 ? cost[idx] + mdp.gamma * V[next[idx]] - out.q(i, a) : mdp.gamma * dV[next[idx]];
          out.q(i, a) += dQ[idx];
          c = std::max(c, std::abs(dQ[idx]));
        }
      change[lo / chunk] = c;
    });
    out.sup_change.push_back(*std::max_element(change.begin(), change.end()));
    V_prev.swap(V);
    arg_prev.swap(arg);
    refresh_values();

    double bell = 0.0;
    for (int i = 0; i < P; ++i)
      for (int a = 0; a < A; ++a) {
        const std::size_t idx = static_cast<std::size_t>(i) * A + a;
        bell = std::max(bell, std::abs(out.q(i, a) - cost[idx] - mdp.gamma * V[next[idx]]));
      }
    out.bellman_residual.push_back(bell);
    if (!std::isfinite(out.sup_change.back())) break;
    if (out.sup_change.back() < opt.tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

Rollout greedy_rollout(const LiftedMDP& mdp, const QTable& q, const SimplexGrid& grid, std::span<const double> m0,
                       int n_steps) {
  if (n_steps < 0) throw PreconditionError("n_steps must be nonnegative");
  if (q.n_points() != grid.size() || q.n_actions() != static_cast<int>(mdp.joint_actions.size()))
    throw ShapeError("Q table does not match the grid and the action set");
  Rollout r;
  r.flow.emplace_back(m0.begin(), m0.end());
  double discount = 1.0;
  for (int n = 0; n < n_steps; ++n) {
    const auto& m = r.flow.back();
    const int a = q.argmin(grid.project(m));
    r.actions.push_back(a);
    r.value += discount * mdp.cost(m, a);
    discount *= mdp.gamma;
    r.flow.push_back(mdp.phi(m, a));
  }
  return r;
}

}  // namespace mfgnum::finite
