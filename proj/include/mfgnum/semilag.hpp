#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mfgnum/grid.hpp"
#include "mfgnum/iteration.hpp"

namespace mfgnum::semilag {

/// Cost at every node given the density (mass per unit length) of one time level.
using LevelCost = std::function<std::vector<double>(const DiscreteGrid1D& grid, std::span<const double> density)>;

/**
 * First-order MFG on an interval with running cost 1/2 |alpha|^2 + f0(x, m) and terminal cost g(x, m).
 * Controls are searched on a uniform grid of n_actions points in [-a_max, a_max].
 */
struct SLProblem {
  DiscreteGrid1D grid;
  LevelCost f0;
  LevelCost g;
  std::function<double(double)> m0;
  double eps = 0.0;
  double a_max = 2.0;
  int n_actions = 81;
  int threads = 1;

  void validate() const;
  [[nodiscard]] std::vector<double> actions() const;
};

/// Levels 0..N_T of node masses; each level sums to 1.
using SLDensityPath = Field;

/// Node masses M^0_i: exact integral of m0 over each cell by composite Gauss-Legendre.
std::vector<double> sl_initial_mass(const SLProblem& problem);

/// Cubic B-spline rho_eps on [-2 eps, 2 eps] (standard deviation eps / sqrt 3) sampled at offsets k h, rescaled so that sum_k rho h = 1.
std::vector<double> bump_kernel(double eps, double h);

/// h sum_j rho(x_i - x_j) v_j with v = 0 outside the domain.
std::vector<double> convolve_zero(std::span<const double> v, std::span<const double> kernel, double h);

/// Density reconstruction at t in [0, T]: time interpolation of M^n / h, constant on each cell.
std::vector<double> reconstruct_density(const SLDensityPath& M, double t);

struct SLValue {
  Field U;
  /// Minimizing action at every node of levels 0..N_T-1 (level N_T is zero).
  Field argmin;
  int clamped_arrivals = 0;
};

/// Backward sweep of U^n_i = min_alpha I[U^{n+1}](x_i + alpha dt) + alpha^2 dt / 2 + f0 dt.
SLValue sl_value_sweep(const SLProblem& problem, const SLDensityPath& density_path);

/// Mollified U levels differentiated by centred differences and negated; clipped to [-a_max, a_max].
Field mollified_control(const SLProblem& problem, const Field& U);

struct MassStep {
  std::vector<double> M;
  int clamped = 0;
};

/// Moves each atom to x_i + alpha_i dt and splits it between the two neighbouring nodes.
MassStep sl_mass_step(const SLProblem& problem, std::span<const double> M_level, std::span<const double> control_level);

/// Forward chain of mass steps from the initial masses.
SLDensityPath sl_forward(const SLProblem& problem, const Field& control, int* clamped = nullptr);

struct SLSolution {
  Field U;
  SLDensityPath M;
  Field control;
  IterationHistory history;
  int clamped_arrivals = 0;
};

/// Damped fixed point between the value sweep and the mass transport, started from m0 at every level.
SLSolution sl_fixed_point(const SLProblem& problem, const DampingSchedule& damping, int max_iter, double tol);

/// V(x, m) = rho_sigma * (rho_sigma * m)(x), rho_sigma the bump kernel with standard deviation sigma.
std::vector<double> double_mollification(const DiscreteGrid1D& grid, std::span<const double> density, double sigma);

/**
 * Indices of the peaks of a level: local maxima (plateaus count once, at their middle) at least 5% of the
 * global maximum whose topographic prominence is at least min_prominence times their height.
 */
std::vector<int> density_peaks(std::span<const double> level, double min_prominence = 0.5);

/// Target tracking with non-local repulsion on [-2.5, 2.5], T = 4, 400 steps, m0 on two blocks.
SLProblem concentration_scenario(double kappa, int n_space = 200);

}  // namespace mfgnum::semilag
