#include "mfgnum/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mfgnum {

namespace {

void require_positive(int value, const char* name) {
  if (value <= 0) throw PreconditionError(std::string(name) + " must be positive");
}

void require_same_length(std::size_t a, std::size_t b) {
  if (a != b) throw ShapeError("length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
}

}  // namespace

DiscreteGrid1D DiscreteGrid1D::torus(int n_space, int n_time, double horizon) {
  require_positive(n_space, "n_space");
  require_positive(n_time, "n_time");
  if (!(horizon > 0.0)) throw PreconditionError("horizon must be positive");
  DiscreteGrid1D g;
  g.n_space = n_space;
  g.n_time = n_time;
  g.horizon = horizon;
  g.kind = DomainKind::torus;
  g.a = 0.0;
  g.b = 1.0;
  g.h = 1.0 / n_space;
  g.dt = horizon / n_time;
  return g;
}

DiscreteGrid1D DiscreteGrid1D::interval(double a, double b, int n_space, int n_time, double horizon) {
  require_positive(n_space, "n_space");
  require_positive(n_time, "n_time");
  if (!(b > a)) throw PreconditionError("interval requires b > a");
  if (!(horizon > 0.0)) throw PreconditionError("horizon must be positive");
  DiscreteGrid1D g;
  g.n_space = n_space;
  g.n_time = n_time;
  g.horizon = horizon;
  g.kind = DomainKind::interval;
  g.a = a;
  g.b = b;
  g.h = (b - a) / n_space;
  g.dt = horizon / n_time;
  return g;
}

double DiscreteGrid1D::x(int i) const {
  if (periodic()) return i * h;
  return a + (i + 0.5) * h;
}

int DiscreteGrid1D::wrap(int i) const {
  if (!periodic()) return i;
  const int r = i % n_space;
  return r < 0 ? r + n_space : r;
}

Field::Field(const DiscreteGrid1D& grid, double fill)
    : grid_(grid), data_(static_cast<std::size_t>(grid.n_time + 1) * grid.n_space, fill) {}

std::span<double> Field::level(int n) {
  return {data_.data() + static_cast<std::size_t>(n) * grid_.n_space, static_cast<std::size_t>(grid_.n_space)};
}

std::span<const double> Field::level(int n) const {
  return {data_.data() + static_cast<std::size_t>(n) * grid_.n_space, static_cast<std::size_t>(grid_.n_space)};
}

void Field::set_level(int n, std::span<const double> values) {
  require_same_length(values.size(), static_cast<std::size_t>(grid_.n_space));
  std::copy(values.begin(), values.end(), level(n).begin());
}

std::size_t Field::index(int n, int i) const {
  return static_cast<std::size_t>(n) * grid_.n_space + grid_.wrap(i);
}

double level_mass(std::span<const double> level, double h) {
  double s = 0.0;
  for (double v : level) s += v;
  return h * s;
}

void validate_density(const DensityField& m, double tol) {
  const double h = m.grid().h;
  for (int n = 0; n < m.levels(); ++n) {
    auto row = m.level(n);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (row[i] < -tol)
        throw PreconditionError("density negative at level " + std::to_string(n) + ", index " + std::to_string(i));
    }
    if (std::abs(level_mass(row, h) - 1.0) > tol)
      throw PreconditionError("density mass off at level " + std::to_string(n));
  }
}

std::vector<double> d_t(std::span<const double> now, std::span<const double> next, double dt) {
  require_same_length(now.size(), next.size());
  std::vector<double> out(now.size());
  for (std::size_t i = 0; i < now.size(); ++i) out[i] = (next[i] - now[i]) / dt;
  return out;
}

std::vector<double> forward_difference(std::span<const double> row, double h, bool periodic) {
  const std::size_t n = row.size();
  if (n == 0) throw ShapeError("empty row");
  std::vector<double> out(n);
  for (std::size_t i = 0; i + 1 < n; ++i) out[i] = (row[i + 1] - row[i]) / h;
  out[n - 1] = periodic ? (row[0] - row[n - 1]) / h : 0.0;
  return out;
}

std::vector<double> laplacian_h(std::span<const double> row, double h, bool periodic) {
  const std::size_t n = row.size();
  if (n < 3) throw ShapeError("laplacian_h needs at least 3 points, got " + std::to_string(n));
  const double inv_h2 = 1.0 / (h * h);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double left;
    double right;
    if (periodic) {
      left = row[(i + n - 1) % n];
      right = row[(i + 1) % n];
    } else {
      left = i == 0 ? row[0] : row[i - 1];
      right = i + 1 == n ? row[n - 1] : row[i + 1];
    }
    out[i] = -(2.0 * row[i] - right - left) * inv_h2;
  }
  return out;
}

std::vector<GradPair> nabla_h(std::span<const double> row, double h, bool periodic) {
  const auto fwd = forward_difference(row, h, periodic);
  const std::size_t n = row.size();
  std::vector<GradPair> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double back;
    if (i > 0) back = fwd[i - 1];
    else back = periodic ? fwd[n - 1] : 0.0;
    out[i] = {fwd[i], back};
  }
  return out;
}

HatStencil hat_stencil(const DiscreteGrid1D& grid, double x) {
  const int n = grid.n_space;
  HatStencil st;
  if (grid.periodic()) {
    double s = x / grid.h;
    double fl = std::floor(s);
    double frac = s - fl;
    const int i0 = grid.wrap(static_cast<int>(fl));
    st.i0 = i0;
    st.i1 = grid.wrap(i0 + 1);
    st.w0 = 1.0 - frac;
    st.w1 = frac;
    return st;
  }
  const double s = (x - grid.x(0)) / grid.h;
  if (s <= 0.0) {
    st.i0 = st.i1 = 0;
    st.clamped = s < 0.0;
    return st;
  }
  if (s >= n - 1) {
    st.i0 = st.i1 = n - 1;
    st.clamped = s > n - 1;
    return st;
  }
  const int i0 = std::min(static_cast<int>(std::floor(s)), n - 2);
  const double frac = s - i0;
  st.i0 = i0;
  st.i1 = i0 + 1;
  st.w0 = 1.0 - frac;
  st.w1 = frac;
  return st;
}

Interpolated hat_interpolate(std::span<const double> values, const DiscreteGrid1D& grid, double x) {
  require_same_length(values.size(), static_cast<std::size_t>(grid.n_space));
  const auto st = hat_stencil(grid, x);
  return {st.w0 * values[st.i0] + st.w1 * values[st.i1], st.clamped};
}

double l2_norm(std::span<const double> v, double weight) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(weight * s);
}

double sup_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

double l2_distance(std::span<const double> a, std::span<const double> b, double weight) {
  require_same_length(a.size(), b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(weight * s);
}

double sup_distance(std::span<const double> a, std::span<const double> b) {
  require_same_length(a.size(), b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
  return s;
}

}  // namespace mfgnum
