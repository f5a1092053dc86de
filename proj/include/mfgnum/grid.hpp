#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfgnum {

/// Thrown when array lengths or shapes do not match an operator's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when an input violates a documented precondition.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a solver cannot produce a usable iterate.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DomainKind { torus, interval };

/**
 * Uniform space-time grid in one dimension.
 *
 * Torus mode covers the unit circle with nodes x_i = i h, h = 1/N_h, and
 * index N_h aliases 0. Interval mode covers [a, b] with N_h cells of width
 * h = (b - a)/N_h and nodes at the cell centres.
 */
struct DiscreteGrid1D {
  int n_space = 0;
  int n_time = 0;
  double horizon = 1.0;
  DomainKind kind = DomainKind::torus;
  double a = 0.0;
  double b = 1.0;
  double h = 0.0;
  double dt = 0.0;

  static DiscreteGrid1D torus(int n_space, int n_time, double horizon);
  static DiscreteGrid1D interval(double a, double b, int n_space, int n_time, double horizon);

  [[nodiscard]] bool periodic() const { return kind == DomainKind::torus; }
  [[nodiscard]] double length() const { return b - a; }
  [[nodiscard]] double x(int i) const;
  [[nodiscard]] double t(int n) const { return n * dt; }
  /// Maps any integer to [0, n_space) in torus mode; identity otherwise.
  [[nodiscard]] int wrap(int i) const;
};

/// Row-major (N_T+1) x N_h array. A time level is one contiguous row.
class Field {
 public:
  Field() = default;
  explicit Field(const DiscreteGrid1D& grid, double fill = 0.0);

  [[nodiscard]] const DiscreteGrid1D& grid() const { return grid_; }
  [[nodiscard]] int levels() const { return grid_.n_time + 1; }
  [[nodiscard]] int size() const { return grid_.n_space; }

  std::span<double> level(int n);
  [[nodiscard]] std::span<const double> level(int n) const;
  void set_level(int n, std::span<const double> values);

  /// Element access with periodic aliasing of the space index in torus mode.
  double& operator()(int n, int i) { return data_[index(n, i)]; }
  double operator()(int n, int i) const { return data_[index(n, i)]; }

  std::vector<double>& data() { return data_; }
  [[nodiscard]] const std::vector<double>& data() const { return data_; }

 private:
  [[nodiscard]] std::size_t index(int n, int i) const;

  DiscreteGrid1D grid_{};
  std::vector<double> data_;
};

/// Same storage as Field; nonnegativity and unit mass are checked on demand.
using DensityField = Field;

/// h * sum_i M_i for one level.
double level_mass(std::span<const double> level, double h);

/// Throws PreconditionError when a level has a negative entry or mass off by more than tol.
void validate_density(const DensityField& m, double tol = 1e-10);

/// (W^{n+1} - W^n)/dt.
std::vector<double> d_t(std::span<const double> now, std::span<const double> next, double dt);

/// Forward difference (W_{i+1} - W_i)/h. The last entry uses a zero-flux ghost when not periodic.
std::vector<double> forward_difference(std::span<const double> row, double h, bool periodic = true);

/// -(2W_i - W_{i+1} - W_{i-1})/h^2. Non-periodic rows mirror the end values (zero flux).
std::vector<double> laplacian_h(std::span<const double> row, double h, bool periodic = true);

struct GradPair {
  double p1 = 0.0;
  double p2 = 0.0;
};

/// ((DW)_i, (DW)_{i-1}): forward and backward differences at each node.
std::vector<GradPair> nabla_h(std::span<const double> row, double h, bool periodic = true);

/// Two-node support of the hat functions at a point, with weights summing to one.
struct HatStencil {
  int i0 = 0;
  int i1 = 0;
  double w0 = 1.0;
  double w1 = 0.0;
  bool clamped = false;
};

HatStencil hat_stencil(const DiscreteGrid1D& grid, double x);

struct Interpolated {
  double value = 0.0;
  bool clamped = false;
};

/// I[W](x) = sum_i W_i beta_i(x).
Interpolated hat_interpolate(std::span<const double> values, const DiscreteGrid1D& grid, double x);

/// sqrt(w * sum v_i^2).
double l2_norm(std::span<const double> v, double weight);
double sup_norm(std::span<const double> v);
double l2_distance(std::span<const double> a, std::span<const double> b, double weight);
double sup_distance(std::span<const double> a, std::span<const double> b);

}  // namespace mfgnum
