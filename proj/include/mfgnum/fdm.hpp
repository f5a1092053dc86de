#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/SparseCore>

#include "mfgnum/grid.hpp"
#include "mfgnum/iteration.hpp"

namespace mfgnum::fdm {

using XP = std::function<double(double x, double p)>;
using XM = std::function<double(double x, double m)>;
using XPP = std::function<double(double x, double p1, double p2)>;

/**
 * Separable problem on the unit torus:
 *   -u_t - nu u_xx + H0(x, u_x) = f0(x, m),   u(T) = g(x, m(T)),
 *    m_t - nu m_xx - div(m dH0/dp) = 0,       m(0) = m0.
 */
struct SeparableMFGProblem {
  double nu = 0.5;
  XP H0;
  XM f0;
  XM df0_dm;
  XM g;
  XM dg_dm;
  std::function<double(double x)> m0;
  DiscreteGrid1D grid;

  /// Throws PreconditionError naming the missing or invalid field.
  void validate() const;
};

/// Monotone upwind approximation of H0. The second derivatives are used by
/// Newton only; when left empty they are taken by central differences of d_p1, d_p2.
struct DiscreteHamiltonian {
  XPP eval;
  XPP d_p1;
  XPP d_p2;
  XPP d_p1p1;
  XPP d_p1p2;
  XPP d_p2p2;
};

/// 1/2 |P_K(p1, p2)|^2 with K = R_- x R_+.
DiscreteHamiltonian quadratic_discrete_hamiltonian();

/// Adds the upwind discretization of b(x) p: b p2 where b > 0, b p1 otherwise.
DiscreteHamiltonian with_drift(DiscreteHamiltonian base, std::function<double(double)> b);

/// Cell averages of m0 divided by h (five-point Gauss-Legendre per cell).
std::vector<double> initial_density(const SeparableMFGProblem& problem);

/// T_i(U, M) for one time level.
std::vector<double> transport_coeffs(const DiscreteHamiltonian& ham, std::span<const double> U_level,
                                     std::span<const double> M_level, const DiscreteGrid1D& grid);

/// N_T x N_h row-major residuals. Both check the boundary data first.
std::vector<double> discrete_hjb_residual(const SeparableMFGProblem& problem, const DiscreteHamiltonian& ham,
                                          const Field& U, const Field& M);
std::vector<double> discrete_kfp_residual(const SeparableMFGProblem& problem, const DiscreteHamiltonian& ham,
                                          const Field& U, const Field& M);

struct FDMSolution {
  Field U;
  Field M;
  /// Picard: delta_a = ||U^{k+1}-U^k||, delta_b = ||M^{k+1}-M^k|| (space-time L2).
  /// Newton: delta_a = ||step||_inf, delta_b = ||M step|| (L2). residual = ||phi||_inf.
  IterationHistory history;
};

FDMSolution fdm_picard(const SeparableMFGProblem& problem, const DiscreteHamiltonian& ham,
                       const DampingSchedule& damping, int max_iter, double tol);

/// Stacked unknown [U^0..U^{N_T}, M^0..M^{N_T}] and residual
/// phi = [HJB rows n = 0..N_T-1, terminal rows, initial rows, KFP rows n = 0..N_T-1].
/// Row block n of phi_U pairs with U^n and row block n+1 of phi_M with M^{n+1}.
Eigen::VectorXd stack(const Field& U, const Field& M);
void unstack(const Eigen::VectorXd& x, Field& U, Field& M);
Eigen::VectorXd newton_residual(const SeparableMFGProblem& problem, const DiscreteHamiltonian& ham,
                                const Field& U, const Field& M);
Eigen::SparseMatrix<double> newton_jacobian(const SeparableMFGProblem& problem, const DiscreteHamiltonian& ham,
                                            const Field& U, const Field& M);

struct InitialGuess {
  Field U;
  Field M;
};

FDMSolution fdm_newton(const SeparableMFGProblem& problem, const DiscreteHamiltonian& ham, int max_iter,
                       double tol, const std::optional<InitialGuess>& initial = std::nullopt);

/// Newton solves for each nu in the schedule, each started from the previous answer.
FDMSolution continuation_in_nu(const SeparableMFGProblem& problem, const DiscreteHamiltonian& ham,
                               std::span<const double> nu_schedule, int max_iter, double tol);

struct LasryLionsReport {
  int samples = 0;
  int monotone_pass = 0;
  int monotone_fail = 0;
  int convex_pass = 0;
  int convex_fail = 0;
  [[nodiscard]] bool passed() const { return monotone_fail == 0 && convex_fail == 0; }
};

/// Samples x in [0,1), m in [m_lo, m_hi], p in [-5, 5]; checks df0/dm >= 0 and midpoint convexity of H0.
LasryLionsReport lasry_lions_diagnostic(const SeparableMFGProblem& problem, int sample_count, double m_lo = 0.1,
                                        double m_hi = 10.0, unsigned seed = 1);

/// Smooth scenario: H0 = p^2/2, f0 = coupling * m, g = 0.3 cos(2 pi x), m0 = 1 + 0.5 sin(2 pi x), T = 1.
SeparableMFGProblem smooth_scenario(int n_space = 64, int n_time = 64, double nu = 0.5, double coupling = 0.1);

/// Low-viscosity variant with f0 = m/2 and g = cos(2 pi x): undamped Picard
/// settles into a two-cycle while half damping converges.
SeparableMFGProblem congestion_lite_scenario(int n_space = 64, int n_time = 64, double nu = 0.05);

}  // namespace mfgnum::fdm
