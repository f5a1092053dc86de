#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfgnum/iteration.hpp"

namespace mfgnum::finite {

using RateFn = std::function<double(int x, int y, std::span<const double> m, double a)>;
using CostFn = std::function<double(int x, std::span<const double> m, double a)>;
using TerminalFn = std::function<double(int x, std::span<const double> m)>;

/**
 * Continuous-time finite-state model. `rate` gives the off-diagonal jump intensities x -> y; the diagonal is
 * minus the row sum. Every state chooses from the same scalar action set.
 */
struct FiniteMFG {
  int n_states = 0;
  std::vector<double> actions;
  RateFn rate;
  CostFn running_cost;
  TerminalFn terminal_cost;  ///< empty means zero
  double T = 1.0;
  std::vector<double> m0;
  double beta = 0.0;  ///< discount rate of the lifted control problem
  std::vector<std::string> state_names;

  void validate() const;
  /// Rate matrix with row x using action a[x].
  [[nodiscard]] Eigen::MatrixXd rate_matrix(std::span<const double> m, std::span<const double> a) const;
  [[nodiscard]] double terminal(int x, std::span<const double> m) const;
};

struct HamiltonianValue {
  double value = 0.0;  ///< H(x, m, h) = max_a -L(x, m, h, a)
  int action = 0;      ///< index into actions; ties go to the lowest index
};

/// L(x, m, h, a) = sum_y lambda(x, y, m, a) h(y) + f(x, m, a), maximized over the action set.
HamiltonianValue hamiltonian_finite(const FiniteMFG& problem, int x, std::span<const double> m,
                                    std::span<const double> h);

/// Rows are time levels 0..N_T, columns are states.
struct FlowPair {
  Eigen::MatrixXd m;
  Eigen::MatrixXd u;
  std::vector<std::vector<int>> policy;  ///< action index per level 0..N_T-1 and state
};

/**
 * Semi-implicit scheme on N_T steps. The policy on [t_n, t_{n+1}] is the maximizer of H(x, m^n, u^{n+1}), and with
 * Lambda^n its rate matrix,
 *   (I - dt Lambda^n) u^n = u^{n+1} + dt f(., m^n, alpha^n),   u^N = g(., m^N),
 *   (I - dt Lambda^n)^T m^{n+1} = m^n.
 * Residual layout: [HJB rows for n = 0..N-1, terminal rows, KFP rows for n = 0..N-1], each block d entries per level.
 */
std::vector<double> finite_mfg_residual(const FiniteMFG& problem, const FlowPair& flow);

enum class FiniteMethod { picard, newton };

struct FiniteSolveOptions {
  int n_time = 1000;
  int max_iter = 300;
  double tol = 1e-10;
};

struct FiniteSolveResult {
  FlowPair flow;
  /// Picard: delta_a = ||u^{k+1} - u^k||, delta_b = ||m^{k+1} - m^k||; Newton: step norms. Residual sup-norm in both.
  IterationHistory history;
};

FiniteSolveResult solve_finite_mfg(const FiniteMFG& problem, FiniteMethod method, const FiniteSolveOptions& options,
                                   const DampingSchedule& damping = DampingSchedule::constant(0.0));

// Cybersecurity model. States DI, DS, UI, US; action 1 asks to switch the protection level at rate rho.
struct CyberParams {
  double beta_UU = 0.3, beta_UD = 0.4, beta_DU = 0.3, beta_DD = 0.4;
  double v_H = 0.2;
  double rho = 0.5;
  double q_rec_D = 0.1, q_rec_U = 0.65, q_inf_D = 0.4, q_inf_U = 0.3;
  double k_D = 0.3, k_I = 0.5;
  /// The running cost is -[k_D 1_D + k_I 1_I] as written; true turns it into +[...].
  bool flip_cost_sign = false;

  void validate() const;
};

CyberParams cyber_mfg_params();
CyberParams cyber_mfc_params();

enum class CyberState { DI = 0, DS = 1, UI = 2, US = 3 };

FiniteMFG cybersecurity_model(const CyberParams& params, std::vector<double> m0 = {0.25, 0.25, 0.25, 0.25},
                              double T = 10.0);

/// Two states {-1, +1} (indices 0, 1); the action is the flip rate on [0, a_max], f = a^2/2, g = -x mbar.
FiniteMFG flip_model(double a_max, int n_actions, std::vector<double> m0 = {0.5, 0.5}, double T = 1.0);

/// Entropy solution Z(t, mbar) = 2M / (t|M| + 1) with M the root of t^2 M^3 + t(2 - t) M|M| + (1 - 2t) M = mbar
/// carrying the sign of mbar.
double entropy_z_exact(double t, double mbar);

// Lifted control problem on the simplex.

/// Points of the simplex whose coordinates are multiples of 1/(n_per_axis - 1).
class SimplexGrid {
 public:
  SimplexGrid(int n_states, int n_per_axis);

  [[nodiscard]] int n_states() const { return d_; }
  [[nodiscard]] int n_per_axis() const { return n_axis_; }
  [[nodiscard]] int size() const { return static_cast<int>(points_.size()); }
  [[nodiscard]] const std::vector<double>& point(int i) const { return points_[i]; }

  /// Nearest grid multiples, sum repaired by largest remainders (ties to the lower state index).
  [[nodiscard]] int project(std::span<const double> m) const;
  [[nodiscard]] int index_of(std::span<const int> counts) const;

 private:
  int d_, n_axis_;
  std::vector<std::vector<double>> points_;
  std::vector<int> lookup_;  ///< mixed-radix code of the first d - 1 counts -> point index
};

struct LiftedMDP {
  int n_states = 0;
  std::vector<std::vector<double>> joint_actions;  ///< |A|^d action profiles
  double dt = 0.0;
  double gamma = 0.0;
  std::function<std::vector<double>(std::span<const double> m, int joint)> phi;  ///< m^T (I + P dt)
  std::function<double(std::span<const double> m, int joint)> cost;           ///< sum_x f m(x) dt
};

/// Throws PreconditionError if the joint action set exceeds `max_joint_actions`, if dt is not positive, or if some
/// transition probability is negative at m0 or a vertex. phi repeats the probability check at every call.
LiftedMDP mfc_lift(const FiniteMFG& problem, double dt, int max_joint_actions = 4096);

/// beta with exp(-beta dt) = gamma.
double discount_rate_for(double gamma, double dt);

class QTable {
 public:
  QTable() = default;
  QTable(int n_points, int n_actions, double fill = 0.0)
      : n_points_(n_points), n_actions_(n_actions), values_(static_cast<std::size_t>(n_points) * n_actions, fill) {}
  [[nodiscard]] double operator()(int i, int a) const { return values_[static_cast<std::size_t>(i) * n_actions_ + a]; }
  double& operator()(int i, int a) { return values_[static_cast<std::size_t>(i) * n_actions_ + a]; }
  [[nodiscard]] int n_points() const { return n_points_; }
  [[nodiscard]] int n_actions() const { return n_actions_; }
  [[nodiscard]] double min_value(int i) const;
  [[nodiscard]] int argmin(int i) const;  ///< lowest index among ties
  [[nodiscard]] const std::vector<double>& values() const { return values_; }

 private:
  int n_points_ = 0, n_actions_ = 0;
  std::vector<double> values_;
};

struct QLearningOptions {
  int max_sweeps = 2000;
  double tol = 1e-10;
  int threads = 1;
};

struct QLearningResult {
  QTable q;
  std::vector<double> sup_change;        ///< ||Q^{k+1} - Q^k||_inf per sweep
  std::vector<double> bellman_residual;  ///< sup |Q - f - gamma min Q(Pi Phi)| after each sweep
  bool converged = false;
};

/// Synchronous sweeps Q <- f + gamma min_a' Q(Pi Phi(m, a), a') from Q = 0.
QLearningResult q_learning_mfc(const LiftedMDP& mdp, const SimplexGrid& grid, const QLearningOptions& options = {});

struct Rollout {
  std::vector<std::vector<double>> flow;  ///< m_0 .. m_n
  std::vector<int> actions;               ///< greedy joint action at each step
  double value = 0.0;                     ///< sum_n gamma^n cost(m_n, a_n)
};

/// Lifted dynamics under the greedy policy; projection is used only to look up the action.
Rollout greedy_rollout(const LiftedMDP& mdp, const QTable& q, const SimplexGrid& grid, std::span<const double> m0,
                       int n_steps);

}  // namespace mfgnum::finite
