#include "mfgnum/semilag.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <string>
#include <thread>

namespace mfgnum::semilag {

namespace {

// Runs body(lo, hi) on [0, n) split into contiguous chunks, one per thread.
template <class Body>
void parallel_chunks(int n, int threads, Body body) {
  threads = std::clamp(threads, 1, std::max(1, n));
  if (threads == 1) {
    body(0, n, 0);
    return;
  }
  std::vector<std::jthread> pool;
  const int chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int lo = t * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi, t] { body(lo, hi, t); });
  }
}

double cubic_bspline(double s) {
  s = std::abs(s);
  if (s >= 2.0) return 0.0;
  if (s >= 1.0) return (2.0 - s) * (2.0 - s) * (2.0 - s) / 6.0;
  return 2.0 / 3.0 - s * s + 0.5 * s * s * s;
}

std::vector<double> level_density(const SLDensityPath& M, int n) {
  const double h = M.grid().h;
  std::vector<double> d(M.level(n).begin(), M.level(n).end());
  for (double& v : d) v /= h;
  return d;
}

std::vector<double> costs(const LevelCost& c, const DiscreteGrid1D& grid, std::span<const double> density) {
  auto v = c(grid, density);
  if (static_cast<int>(v.size()) != grid.n_space)
    throw ShapeError("cost callback returned " + std::to_string(v.size()) + " values for " +
                     std::to_string(grid.n_space) + " nodes");
  return v;
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) { return sup_distance(a, b); }

}  // namespace

void SLProblem::validate() const {
  if (grid.periodic()) throw PreconditionError("grid: semi-Lagrangian problems live on an interval");
  if (grid.n_space < 2) throw PreconditionError("grid.n_space must be at least 2");
  if (!(eps > 0.0)) throw PreconditionError("eps must be positive");
  if (!(a_max > 0.0)) throw PreconditionError("a_max must be positive");
  if (n_actions < 3 || n_actions % 2 == 0) throw PreconditionError("n_actions must be odd and at least 3");
  if (threads < 1) throw PreconditionError("threads must be at least 1");
  if (!f0) throw PreconditionError("f0 is missing");
  if (!g) throw PreconditionError("g is missing");
  if (!m0) throw PreconditionError("m0 is missing");
}

std::vector<double> SLProblem::actions() const {
  std::vector<double> a(n_actions);
  const int half = n_actions / 2;
  for (int k = 0; k < n_actions; ++k) a[k] = a_max * (k - half) / half;
  return a;
}

std::vector<double> sl_initial_mass(const SLProblem& problem) {
  static constexpr double nodes[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                      0.9061798459386640};
  static constexpr double weights[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                        0.4786286704993665, 0.2369268850561891};
  constexpr int sub = 32;
  const auto& g = problem.grid;
  const double hs = g.h / sub;
  std::vector<double> M(g.n_space);
  double total = 0.0;
  for (int i = 0; i < g.n_space; ++i) {
    const double left = g.x(i) - 0.5 * g.h;
    double s = 0.0;
    for (int j = 0; j < sub; ++j) {
      const double c = left + (j + 0.5) * hs;
      for (int q = 0; q < 5; ++q) s += weights[q] * problem.m0(c + 0.5 * hs * nodes[q]);
    }
    M[i] = 0.5 * hs * s;
    if (M[i] < 0.0) throw PreconditionError("m0 must be nonnegative");
    total += M[i];
  }
  if (std::abs(total - 1.0) > 1e-6)
    throw PreconditionError("m0 must have unit mass on the domain (got " + std::to_string(total) + ")");
  // Quadrature of a discontinuous m0 leaves a tiny defect; the scheme needs exact unit mass.
  for (double& v : M) v /= total;
  return M;
}

std::vector<double> bump_kernel(double eps, double h) {
  if (!(eps > 0.0) || !(h > 0.0)) throw PreconditionError("bump_kernel needs eps > 0 and h > 0");
  if (eps < h) std::cerr << "warning: mollifier width " << eps << " is below the mesh size " << h << "\n";
  const int r = static_cast<int>(std::ceil(2.0 * eps / h));
  std::vector<double> k(2 * r + 1);
  double s = 0.0;
  for (int j = -r; j <= r; ++j) s += (k[j + r] = cubic_bspline(j * h / eps) / eps);
  for (double& v : k) v /= s * h;
  return k;
}

std::vector<double> convolve_zero(std::span<const double> v, std::span<const double> kernel, double h) {
  const int n = static_cast<int>(v.size());
  const int r = static_cast<int>(kernel.size()) / 2;
  std::vector<double> out(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = std::max(0, i - r); j <= std::min(n - 1, i + r); ++j) s += kernel[i - j + r] * v[j];
    out[i] = h * s;
  }
  return out;
}

std::vector<double> reconstruct_density(const SLDensityPath& M, double t) {
  const auto& g = M.grid();
  if (t < 0.0 || t > g.horizon) throw PreconditionError("reconstruct_density: t outside [0, T]");
  const int n = std::min(static_cast<int>(std::floor(t / g.dt)), g.n_time - 1);
  const double theta = std::clamp((t - g.t(n)) / g.dt, 0.0, 1.0);
  std::vector<double> d(g.n_space);
  for (int i = 0; i < g.n_space; ++i) d[i] = ((1.0 - theta) * M(n, i) + theta * M(n + 1, i)) / g.h;
  return d;
}

SLValue sl_value_sweep(const SLProblem& problem, const SLDensityPath& density_path) {
  problem.validate();
  const auto& g = problem.grid;
  if (density_path.levels() != g.n_time + 1 || density_path.size() != g.n_space)
    throw ShapeError("density path does not match the grid");
  const auto acts = problem.actions();
  SLValue out{Field(g), Field(g), 0};
  out.U.set_level(g.n_time, costs(problem.g, g, level_density(density_path, g.n_time)));
  std::vector<int> clamped(problem.threads, 0);
  for (int n = g.n_time - 1; n >= 0; --n) {
    const auto f = costs(problem.f0, g, level_density(density_path, n));
    const auto next = out.U.level(n + 1);
    auto U = out.U.level(n);
    auto A = out.argmin.level(n);
    parallel_chunks(g.n_space, problem.threads, [&](int lo, int hi, int t) {
      const int last = g.n_space - 1;
      for (int i = lo; i < hi; ++i) {
        double best = INFINITY, best_a = 0.0;
        bool best_clamped = false;
        for (double a : acts) {
          // Arrival in index units; nodes are uniform so this is hat interpolation inline.
          const double s = i + a * g.dt / g.h;
          double value;
          bool clamped_here = false;
          if (s <= 0.0) {
            value = next[0];
            clamped_here = s < 0.0;
          } else if (s >= last) {
            value = next[last];
            clamped_here = s > last;
          } else {
            const int i0 = std::min(static_cast<int>(s), last - 1);
            const double w = s - i0;
            value = (1.0 - w) * next[i0] + w * next[i0 + 1];
          }
          const double v = value + 0.5 * a * a * g.dt;
          if (v < best) best = v, best_a = a, best_clamped = clamped_here;
        }
        U[i] = best + f[i] * g.dt;
        A[i] = best_a;
        if (best_clamped) ++clamped[t];
      }
    });
  }
  for (int c : clamped) out.clamped_arrivals += c;
  return out;
}

Field mollified_control(const SLProblem& problem, const Field& U) {
  problem.validate();
  const auto& g = problem.grid;
  const auto k = bump_kernel(problem.eps, g.h);
  const int r = static_cast<int>(k.size()) / 2, N = g.n_space;
  Field out(g);
  std::vector<double> smooth(N);
  for (int n = 0; n < U.levels(); ++n) {
    const auto u = U.level(n);
    // Edge values are continued as constants outside the interval.
    for (int i = 0; i < N; ++i) {
      double s = 0.0;
      for (int j = -r; j <= r; ++j) s += k[j + r] * u[std::clamp(i - j, 0, N - 1)];
      smooth[i] = g.h * s;
    }
    auto c = out.level(n);
    for (int i = 0; i < N; ++i) {
      double grad;
      if (i == 0) grad = (smooth[1] - smooth[0]) / g.h;
      else if (i == N - 1) grad = (smooth[N - 1] - smooth[N - 2]) / g.h;
      else grad = (smooth[i + 1] - smooth[i - 1]) / (2.0 * g.h);
      c[i] = std::clamp(-grad, -problem.a_max, problem.a_max);
    }
  }
  return out;
}

MassStep sl_mass_step(const SLProblem& problem, std::span<const double> M_level, std::span<const double> control_level) {
  const auto& g = problem.grid;
  const int N = g.n_space;
  if (static_cast<int>(M_level.size()) != N || static_cast<int>(control_level.size()) != N)
    throw ShapeError("mass step: level sizes do not match the grid");
  const int threads = std::clamp(problem.threads, 1, N);
  std::vector<std::vector<double>> partial(threads, std::vector<double>(N, 0.0));
  std::vector<int> clamped(threads, 0);
  parallel_chunks(N, threads, [&](int lo, int hi, int t) {
    auto& acc = partial[t];
    for (int j = lo; j < hi; ++j) {
      if (M_level[j] == 0.0) continue;
      // Arrival in index units, so a zero control leaves the atom exactly in place.
      const double s = j + control_level[j] * g.dt / g.h;
      if (s <= 0.0 || s >= N - 1) {
        acc[s <= 0.0 ? 0 : N - 1] += M_level[j];
        if (s < 0.0 || s > N - 1) ++clamped[t];
        continue;
      }
      const int i0 = std::min(static_cast<int>(s), N - 2);
      const double w = s - i0;
      acc[i0] += (1.0 - w) * M_level[j];
      acc[i0 + 1] += w * M_level[j];
    }
  });
  MassStep out{std::move(partial[0]), clamped[0]};
  for (int t = 1; t < threads; ++t) {
    for (int i = 0; i < N; ++i) out.M[i] += partial[t][i];
    out.clamped += clamped[t];
  }
  return out;
}

SLDensityPath sl_forward(const SLProblem& problem, const Field& control, int* clamped) {
  const auto& g = problem.grid;
  SLDensityPath M(g);
  M.set_level(0, sl_initial_mass(problem));
  int total = 0;
  for (int n = 0; n < g.n_time; ++n) {
    auto step = sl_mass_step(problem, M.level(n), control.level(n));
    M.set_level(n + 1, step.M);
    total += step.clamped;
  }
  if (clamped) *clamped = total;
  return M;
}

SLSolution sl_fixed_point(const SLProblem& problem, const DampingSchedule& damping, int max_iter, double tol) {
  problem.validate();
  if (max_iter < 1) throw PreconditionError("max_iter must be positive");
  const auto& g = problem.grid;
  SLDensityPath guess(g);
  const auto m0 = sl_initial_mass(problem);
  for (int n = 0; n <= g.n_time; ++n) guess.set_level(n, m0);

  SLSolution sol;
  auto respond = [&](const SLDensityPath& input, SLSolution& into) {
    auto v = sl_value_sweep(problem, input);
    into.U = std::move(v.U);
    into.control = mollified_control(problem, into.U);
    int clamped = 0;
    into.M = sl_forward(problem, into.control, &clamped);
    into.clamped_arrivals = v.clamped_arrivals + clamped;
  };

  for (int k = 0; k < max_iter; ++k) {
    SLSolution next;
    respond(guess, next);
    IterationRecord rec{k, 0.0, 0.0, 0.0};
    if (k > 0) {
      rec.delta_a = sup_diff(next.U.data(), sol.U.data());
      rec.delta_b = sup_diff(next.M.data(), sol.M.data());
    }
    // Fixed-point residual: how far the output moves when fed back unchanged.
    SLSolution probe;
    respond(next.M, probe);
    rec.residual = std::max(sup_diff(probe.U.data(), next.U.data()), sup_diff(probe.M.data(), next.M.data()));
    sol.U = std::move(next.U);
    sol.M = std::move(next.M);
    sol.control = std::move(next.control);
    sol.clamped_arrivals = next.clamped_arrivals;
    sol.history.records.push_back(rec);

    if (!std::isfinite(rec.delta_a) || !std::isfinite(rec.delta_b) || rec.delta_a > kDivergenceThreshold ||
        rec.delta_b > kDivergenceThreshold) {
      sol.history.diverged = true;
      return sol;
    }
    if (rec.residual < tol || (k > 0 && rec.delta_a < tol && rec.delta_b < tol)) {
      sol.history.converged = true;
      return sol;
    }
    const double d = damping(k);
    for (std::size_t q = 0; q < guess.data().size(); ++q)
      guess.data()[q] = d * guess.data()[q] + (1.0 - d) * sol.M.data()[q];
  }
  return sol;
}

std::vector<double> double_mollification(const DiscreteGrid1D& grid, std::span<const double> density, double sigma) {
  const auto k = bump_kernel(sigma * std::sqrt(3.0), grid.h);
  const auto once = convolve_zero(density, k, grid.h);
  return convolve_zero(once, k, grid.h);
}

std::vector<int> density_peaks(std::span<const double> level, double min_prominence) {
  const int n = static_cast<int>(level.size());
  double top = 0.0;
  for (double v : level) top = std::max(top, v);
  std::vector<int> peaks;
  if (!(top > 0.0)) return peaks;
  for (int i = 0; i < n;) {
    int j = i;
    while (j + 1 < n && level[j + 1] == level[i]) ++j;
    const double v = level[i];
    const bool left_lower = i == 0 || level[i - 1] < v;
    const bool right_lower = j == n - 1 || level[j + 1] < v;
    if (left_lower && right_lower && v > 0.0) {
      // Lowest point on each side before reaching higher ground (or the domain edge).
      double lmin = v, rmin = v;
      for (int q = i - 1; q >= 0 && level[q] <= v; --q) lmin = std::min(lmin, level[q]);
      for (int q = j + 1; q < n && level[q] <= v; ++q) rmin = std::min(rmin, level[q]);
      const double prominence = v - std::max(lmin, rmin);
      if (prominence >= min_prominence * v && v >= 0.05 * top) peaks.push_back((i + j) / 2);
    }
    i = j + 1;
  }
  return peaks;
}

SLProblem concentration_scenario(double kappa, int n_space) {
  if (!(kappa >= 0.0)) throw PreconditionError("kappa must be nonnegative");
  constexpr double target = 0.0, sigma_v = 0.25;
  SLProblem p;
  p.grid = DiscreteGrid1D::interval(-2.5, 2.5, n_space, 400, 4.0);
  p.eps = 2.0 * p.grid.h;
  p.f0 = [kappa](const DiscreteGrid1D& g, std::span<const double> m) {
    std::vector<double> c(g.n_space);
    std::vector<double> V = kappa > 0.0 ? double_mollification(g, m, sigma_v) : std::vector<double>(g.n_space, 0.0);
    for (int i = 0; i < g.n_space; ++i) c[i] = (g.x(i) - target) * (g.x(i) - target) + kappa * V[i];
    return c;
  };
  p.g = [](const DiscreteGrid1D& g, std::span<const double>) { return std::vector<double>(g.n_space, 0.0); };
  p.m0 = [](double x) {
    const double a = std::abs(x);
    return (a >= 0.75 && a <= 1.25) ? 1.0 : 0.0;
  };
  return p;
}

}  // namespace mfgnum::semilag
