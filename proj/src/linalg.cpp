#include "mfgnum/linalg.hpp"

#include <cmath>

#include "mfgnum/grid.hpp"

namespace mfgnum {

std::vector<double> solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                                      std::span<const double> upper, std::span<const double> rhs) {
  const std::size_t n = diag.size();
  if (lower.size() != n || upper.size() != n || rhs.size() != n) throw ShapeError("tridiagonal band length mismatch");
  std::vector<double> c(n), d(n), x(n);
  double beta = diag[0];
  if (beta == 0.0) throw SolverError("zero pivot in tridiagonal solve");
  c[0] = upper[0] / beta;
  d[0] = rhs[0] / beta;
  for (std::size_t i = 1; i < n; ++i) {
    beta = diag[i] - lower[i] * c[i - 1];
    if (beta == 0.0 || !std::isfinite(beta)) throw SolverError("zero pivot in tridiagonal solve");
    c[i] = upper[i] / beta;
    d[i] = (rhs[i] - lower[i] * d[i - 1]) / beta;
  }
  x[n - 1] = d[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
  return x;
}

std::vector<double> solve_cyclic_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                                             std::span<const double> upper, std::span<const double> rhs) {
  const std::size_t n = diag.size();
  if (n < 3) throw ShapeError("cyclic tridiagonal solve needs n >= 3");
  if (lower.size() != n || upper.size() != n || rhs.size() != n) throw ShapeError("tridiagonal band length mismatch");
  const double alpha = upper[n - 1];  // entry (n-1, 0)
  const double beta = lower[0];       // entry (0, n-1)
  const double gamma = -diag[0];
  std::vector<double> b(diag.begin(), diag.end());
  b[0] -= gamma;
  b[n - 1] -= alpha * beta / gamma;
  const auto x = solve_tridiagonal(lower, b, upper, rhs);
  std::vector<double> u(n, 0.0);
  u[0] = gamma;
  u[n - 1] = alpha;
  const auto z = solve_tridiagonal(lower, b, upper, u);
  const double fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - fact * z[i];
  return out;
}

}  // namespace mfgnum
