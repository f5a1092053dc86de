#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "mfgnum/iteration.hpp"

namespace mfgnum::lq {

/// Scalar linear-quadratic model: drift Ax + Abar z + B a, running cost
/// (Q x^2 + Qbar (x - S z)^2 + C a^2)/2, terminal cost with Q_T, Qbar_T, S_T.
struct LQParams {
  double A = 1.0;
  double Abar = 1.0;
  double B = 1.0;
  double Q = 1.0;
  double Qbar = 1.0;
  double Q_T = 1.0;
  double Qbar_T = 1.0;
  double S = 1.0;
  double S_T = 1.0;
  double C = 1.0;
  double sigma = 1.0;
  double x0_mean = 1.0;
  double x0_std = 0.2;
  double T = 1.0;

  [[nodiscard]] double nu() const { return 0.5 * sigma * sigma; }
  [[nodiscard]] double k() const { return B * B / C; }
  /// Throws PreconditionError naming the offending field.
  void validate() const;
};

/// Rows 1..5 of the reference parameter table. Cases 3-5 take the swept
/// coefficient (Abar, Qbar_T, Q_T respectively) as an argument.
LQParams test_case(int id, double swept = 1.0);

enum class SweepKind { none, Abar, Qbar_T, Q_T };
SweepKind sweep_kind(int test_case_id);
LQParams with_swept(LQParams p, SweepKind kind, double value);

struct LQTrajectory {
  std::vector<double> Z;
  std::vector<double> P;
  std::vector<double> R;
  std::vector<double> S;
};

/// Backward semi-implicit Euler: the linear term at level n, the quadratic term lagged at n+1.
std::vector<double> solve_riccati(const LQParams& p, int n_time);

/// Which mean-field adjoint equation to use.
enum class Regime { mfg, mfc };

/// Residual of the coupled discrete (Z, R) system, laid out as [F_Z(0..N), F_R(0..N)].
std::vector<double> lq_forward_backward_residual(const LQParams& p, std::span<const double> P,
                                                 std::span<const double> Z, std::span<const double> R,
                                                 Regime regime = Regime::mfg);

/// The affine system M x = b in the unknown x = [Z, R].
struct LinearSystem {
  Eigen::SparseMatrix<double> M;
  Eigen::VectorXd b;
};
LinearSystem assemble_lq_system(const LQParams& p, std::span<const double> P, Regime regime = Regime::mfg);

/// Backward trapezoidal quadrature for s.
std::vector<double> s_path(const LQParams& p, std::span<const double> P, std::span<const double> Z,
                           std::span<const double> R);

enum class DirectMethod { dense, sparse };

/// LU solve of the full forward-backward system; fills all four paths.
/// The sparse path factors the same matrix in compressed storage for long horizons.
LQTrajectory solve_lq_direct(const LQParams& p, int n_time, Regime regime = Regime::mfg,
                             DirectMethod method = DirectMethod::dense);

struct LQSolveResult {
  LQTrajectory traj;
  /// delta_a = ||z^{k+1} - z^k||, delta_b = ||r^{k+1} - r^k|| (time-weighted L2).
  IterationHistory history;
};

struct LQIterationOptions {
  int n_time = 200;
  int max_iter = 200;
  double tol = 1e-10;
  /// Initial guess for z; empty means the constant x0_mean.
  std::vector<double> z_init;
};

/// Alternating backward r / forward z sweeps with damping on z.
LQSolveResult picard_lq(const LQParams& p, const DampingSchedule& damping, const LQIterationOptions& opt);
LQSolveResult fictitious_play_lq(const LQParams& p, const LQIterationOptions& opt);

/// Newton on the stacked residual. History records ||step|| and the residual sup-norm.
LQSolveResult newton_lq(const LQParams& p, const LQIterationOptions& opt);

struct LQCosts {
  double J_mfg = 0.0;
  double J_mfc = 0.0;
  double poa = 1.0;
  LQTrajectory mfg;
  LQTrajectory mfc;
};

/// Both cost formulas and their ratio. The lagged Riccati step is stiff when
/// Q_T + Qbar_T is large, so the default grid is finer than the solver default.
LQCosts lq_costs_and_poa(const LQParams& p, int n_time = 2000);

}  // namespace mfgnum::lq
