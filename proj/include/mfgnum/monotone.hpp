#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mfgnum/fdm.hpp"
#include "mfgnum/grid.hpp"

namespace mfgnum::monotone {

/// U, M on the torus nodes; lambda is psi(U, M) at the last step.
struct ErgodicState {
  std::vector<double> U;
  std::vector<double> M;
  double lambda = 0.0;
};

struct ExactSolution {
  std::vector<double> U;
  std::vector<double> M;
  double normalizer = 0.0;  ///< Z = int of the unnormalized density
  double lambda = 0.0;      ///< log Z, the ergodic constant
};

/**
 * Ergodic MFG with logarithmic coupling on the unit torus:
 *   -nu u'' + H0(x, u') - log m = lambda,   -nu m'' - (m dH0/dp)' = 0,   int m = 1.
 * The potential V(x) is folded into the discrete Hamiltonian.
 */
struct ErgodicScenario {
  DiscreteGrid1D grid;  ///< torus; n_time and horizon give the default flow step
  double nu = 0.0;
  fdm::DiscreteHamiltonian ham;
  std::function<ExactSolution(const DiscreteGrid1D&)> exact;

  void validate() const;
};

/// psi(U, M) = -h sum_i [nu (Delta_h U)_i - H0(x_i, grad U_i) + log M_i].
double psi(const ErgodicScenario& scenario, const std::vector<double>& U, const std::vector<double>& M);

/// Right-hand side of the flow at (U, M): [nu Delta M + T(U, M); -(psi + nu Delta U - H0 + log M)], with T the
/// fdm transport term (a discrete div(m dH0/dp)).
std::vector<double> flow_rhs(const ErgodicScenario& scenario, const std::vector<double>& U,
                             const std::vector<double>& M);

/// Residual of one implicit step from `from` to (U, M): (X - X^n)/dtau - rhs(U, M).
std::vector<double> step_residual(const ErgodicScenario& scenario, const ErgodicState& from,
                                  const std::vector<double>& U, const std::vector<double>& M, double dtau);

/// Dense Jacobian of step_residual with respect to (U, M).
Eigen::MatrixXd step_jacobian(const ErgodicScenario& scenario, const std::vector<double>& U,
                              const std::vector<double>& M, double dtau);

struct NewtonOptions {
  int max_iter = 50;
  int max_halvings = 40;
  int max_continuation = 12;  ///< nested dtau halvings used to build a Newton starting point
  double tol = 1e-10;  ///< on dtau times the sup norm of step_residual
};

struct StepReport {
  ErgodicState state;
  int newton_iterations = 0;
  int halvings = 0;
  double residual = 0.0;
};

/// One backward step, solved by damped Newton in (U, log M); if Newton from the previous state stalls, the step for dtau / 2 is
/// solved first and used as the starting point. Throws SolverError when that also fails.
StepReport flow_step_report(const ErgodicScenario& scenario, const ErgodicState& state, double dtau,
                            const NewtonOptions& options = {});
ErgodicState flow_step(const ErgodicScenario& scenario, const ErgodicState& state, double dtau,
                       const NewtonOptions& options = {});

struct FlowHistory {
  std::vector<double> delta_u, delta_m, delta_tot;
  std::vector<double> err_u, err_m, err_tot;  ///< empty without an exact solution
  std::vector<double> min_m;
  std::vector<int> newton_iterations;
};

struct FlowResult {
  ErgodicState state;  ///< U shifted to zero mean
  FlowHistory history;
};

/// Iterates flow_step from `initial` (default U = 0, M = 1); entry n of each history is step n + 1.
FlowResult run_flow(const ErgodicScenario& scenario, int n_steps, double dtau,
                    std::optional<ErgodicState> initial = std::nullopt, const NewtonOptions& options = {});

/// Nodal samples of u* = -c sin(2 pi x), m* = e^{V - b^2/2} / Z, with Z = int e^{V - b^2/2} by the trapezoidal
/// rule on a ten times finer grid.
ExactSolution testcase1_exact(double c, const DiscreteGrid1D& grid);

/// u* = kappa sin(2 pi x), m* = e^{-2u*} normalized to h sum M = 1.
ExactSolution testcase2_exact(double kappa, const DiscreteGrid1D& grid);

/// First order, H0 = p^2/2 + b p + V with b = 2 c pi cos(2 pi x), V = sin(2 pi x).
ErgodicScenario testcase1(double c = 0.1, int n_space = 500, int n_time = 1000, double horizon = 20.0);

/// nu = 0.5, b = 0, V = 2 pi^2 (-kappa sin - kappa^2 cos^2) - 2 kappa sin.
ErgodicScenario testcase2(double kappa = 1.0, int n_space = 200, int n_time = 1000, double horizon = 20.0);

}  // namespace mfgnum::monotone
