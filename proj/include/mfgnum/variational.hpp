#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "mfgnum/fdm.hpp"
#include "mfgnum/grid.hpp"
#include "mfgnum/iteration.hpp"

namespace mfgnum::variational {

using XM = std::function<double(double x, double m)>;

/// Quadratic conjugate: (g1^2 + g2^2)/2 on K = R_- x R_+, +infinity elsewhere.
double hstar_quadratic(double gamma1, double gamma2);

/**
 * Discrete variational problem on the torus with the quadratic Hamiltonian:
 *   min sum_{n>=1,i} [ |W^{n-1}_i|^2 / (2 M^n_i) + F(x_i, M^n_i) ] + (1/dt) sum_i G(x_i, M^{N_T}_i)
 *   s.t. A M + B W = 0, M^0 = m0bar.
 * F and G must be convex in m on [0, inf). Missing second derivatives are taken by differences.
 */
struct VariationalProblem {
  DiscreteGrid1D grid;
  double nu = 0.5;
  XM F, dF, d2F;
  XM G, dG, d2G;
  std::vector<double> m0bar;

  void validate() const;
};

/// M has levels 0..N_T; W1, W2 hold levels 0..N_T-1, row-major.
struct PrimalPoint {
  Field M;
  std::vector<double> W1;
  std::vector<double> W2;

  PrimalPoint() = default;
  explicit PrimalPoint(const DiscreteGrid1D& g, double m_fill = 0.0);
};

/// U holds levels 0..N_T-1; lambda0 multiplies the initial slice.
struct DualPoint {
  std::vector<double> U;
  std::vector<double> lambda0;
};

double primal_energy(const VariationalProblem& problem, const PrimalPoint& point);

struct ConstraintValue {
  std::vector<double> Lambda;  ///< N_T x N_h
  std::vector<double> M0;
};

ConstraintValue constraint_apply(const VariationalProblem& problem, const PrimalPoint& point);
/// The transpose of constraint_apply, written out term by term.
PrimalPoint constraint_adjoint(const VariationalProblem& problem, const DualPoint& dual);

/// Flat layout: xi = [M (levels 0..N_T), W1, W2], rows = [Lambda, M0].
Eigen::VectorXd flatten(const PrimalPoint& p);
PrimalPoint unflatten(const VariationalProblem& problem, const Eigen::VectorXd& x);
Eigen::SparseMatrix<double> constraint_matrix(const VariationalProblem& problem);
/// Right-hand side (0, m0bar) of the constraint.
Eigen::VectorXd constraint_rhs(const VariationalProblem& problem);

/// sqrt(h dt) times the Euclidean norm of Sigma(M, W) - (0, m0bar).
double feasibility_residual(const VariationalProblem& problem, const PrimalPoint& point);

struct CellValue {
  double m = 0.0;
  double w1 = 0.0;
  double w2 = 0.0;
};

/// Prox of tau (L + F [+ G/dt on the last level]) for one cell.
CellValue prox_cell(const VariationalProblem& problem, double x, bool last_level, CellValue in, double tau);
/// Conjugate of the same cell function at (s_m, s_w1, s_w2); may be +infinity.
double conjugate_cell(const VariationalProblem& problem, double x, bool last_level, CellValue s);

/// Cellwise prox of tau * energy. The initial slice is returned unchanged.
PrimalPoint prox_primal(const VariationalProblem& problem, const PrimalPoint& point, double tau);
/// prox of (energy)^* / r through the Moreau decomposition y - prox_{r phi}(r y) / r.
PrimalPoint prox_conjugate(const VariationalProblem& problem, const PrimalPoint& y, double r);

/// -energy^*(-Sigma^* zeta) - <zeta, (0, m0bar)> with zeta = -(U, lambda0).
double dual_objective(const VariationalProblem& problem, const DualPoint& dual);

/**
 * Constraint operator handed to Chambolle-Pock. `raw` uses Sigma itself. `whitened`
 * uses the equivalent constraint (Sigma Sigma^T)^{-1/2} Sigma xi = (Sigma Sigma^T)^{-1/2} b,
 * whose norm is 1; the dual shift then carries one solve with the factored Gram matrix.
 */
enum class CPScaling { whitened, raw };

/// Operator norm of the chosen constraint by power iteration on its Gram matrix.
double operator_norm_estimate(const VariationalProblem& problem, CPScaling scaling = CPScaling::raw,
                              unsigned seed = 1, int max_iter = 20000, double rel_tol = 1e-13);

struct VariationalResult {
  PrimalPoint primal;
  DualPoint dual;
  /// delta_a = feasibility residual, delta_b = dual residual, residual = primal energy.
  IterationHistory history;
  bool stagnated = false;
  std::string message;
};

using PrimalObserver = std::function<void(int k, const PrimalPoint& iterate)>;

/// Augmented-Lagrangian splitting on the dual problem with the multiplier as primal variable.
VariationalResult admm_solve(const VariationalProblem& problem, double r, int max_iter, double tol,
                             const PrimalObserver& observer = {});

/// Orthogonal projection onto the affine set Sigma(M, W) = (0, m0bar).
PrimalPoint project_feasible(const VariationalProblem& problem, const PrimalPoint& point);

/// Primal-dual iteration. Non-positive gamma or tau selects 0.95/||Xi|| for both.
/// Throws PreconditionError when gamma tau ||Xi||^2 >= 1.
VariationalResult chambolle_pock_solve(const VariationalProblem& problem, double gamma, double tau, int max_iter,
                                       double tol, CPScaling scaling = CPScaling::whitened);

/// Flux W^n = -M^{n+1} dH/dp(grad U^n) for a finite-difference solution, and the matching dual point.
PrimalPoint primal_from_fdm(const VariationalProblem& problem, const Field& U, const Field& M);
DualPoint dual_from_fdm(const VariationalProblem& problem, const Field& U);

/// F = 0.05 m^2, G = 0.3 cos(2 pi x) m: the potential form of the smooth finite-difference scenario.
VariationalProblem smooth_coincidence_scenario(int n_space = 64, int n_time = 64, double nu = 0.5);

/// F = G = 0 with a uniform initial density.
VariationalProblem resting_scenario(int n_space = 16, int n_time = 8, double nu = 0.2);

}  // namespace mfgnum::variational
