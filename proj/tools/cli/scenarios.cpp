#include "scenarios.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <variant>

#include "mfgnum/fdm.hpp"
#include "mfgnum/finite_state.hpp"
#include "mfgnum/grid.hpp"
#include "mfgnum/lq.hpp"
#include "mfgnum/monotone.hpp"
#include "mfgnum/semilag.hpp"
#include "mfgnum/variational.hpp"

namespace mfgnum::cli {

namespace {

namespace fs = std::filesystem;

// Shortest round-trip representation, so that identical runs give identical bytes.
std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

class CsvWriter {
 public:
  using Cell = std::variant<double, long long, std::string>;

  CsvWriter(const fs::path& path, const std::string& schema, const std::vector<std::string>& columns)
      : out_(path), width_(columns.size()) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << "# schema: " << schema << " v1\n";
    for (std::size_t j = 0; j < columns.size(); ++j) out_ << (j ? "," : "") << columns[j];
    out_ << '\n';
  }

  void row(std::initializer_list<Cell> cells) { row(std::vector<Cell>(cells)); }
  void row(const std::vector<Cell>& cells) {
    if (cells.size() != width_) throw std::logic_error("csv row width mismatch");
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (j) out_ << ',';
      std::visit(
          [this](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) out_ << num(v);
            else out_ << v;
          },
          cells[j]);
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
  std::size_t width_;
};

class Artifacts {
 public:
  explicit Artifacts(fs::path dir) : dir_(std::move(dir)) {}

  CsvWriter csv(const std::string& file, const std::string& schema, const std::vector<std::string>& columns) {
    files_.push_back(file);
    return CsvWriter(dir_ / file, schema, columns);
  }
  [[nodiscard]] const std::vector<std::string>& files() const { return files_; }
  Json results = Json::object();

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

// Typed, range-checked access to a validated configuration.
class Params {
 public:
  explicit Params(const Json& j) : j_(j) {}

  [[nodiscard]] int integer(const std::string& key, int lo, int hi = std::numeric_limits<int>::max()) const {
    const long long v = j_.at(key).get<long long>();
    if (v < lo || v > hi)
      throw ConfigError(key + " must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "], got " +
                        std::to_string(v));
    return static_cast<int>(v);
  }
  [[nodiscard]] double real(const std::string& key) const {
    const double v = j_.at(key).get<double>();
    if (!std::isfinite(v)) throw ConfigError(key + " must be finite");
    return v;
  }
  [[nodiscard]] double positive(const std::string& key) const {
    const double v = real(key);
    if (!(v > 0.0)) throw ConfigError(key + " must be positive, got " + num(v));
    return v;
  }
  [[nodiscard]] double nonnegative(const std::string& key) const {
    const double v = real(key);
    if (!(v >= 0.0)) throw ConfigError(key + " must be nonnegative, got " + num(v));
    return v;
  }
  [[nodiscard]] double unit(const std::string& key, bool include_one = false) const {
    const double v = real(key);
    if (!(v >= 0.0 && (include_one ? v <= 1.0 : v < 1.0)))
      throw ConfigError(key + " must lie in [0, 1" + (include_one ? "]" : ")") + ", got " + num(v));
    return v;
  }
  [[nodiscard]] std::string choice(const std::string& key, const std::vector<std::string>& allowed) const {
    const auto v = j_.at(key).get<std::string>();
    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : "|") + a;
      throw ConfigError(key + " must be one of " + list + ", got '" + v + "'");
    }
    return v;
  }
  [[nodiscard]] bool flag(const std::string& key) const { return j_.at(key).get<bool>(); }
  [[nodiscard]] DampingSchedule damping(const std::string& key) const {
    const auto& v = j_.at(key);
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      if (s == "fictitious") return DampingSchedule::fictitious();
      double w = 0.0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), w);
      if (ec != std::errc() || p != s.data() + s.size())
        throw ConfigError(key + " must be 'fictitious' or a number in [0, 1), got '" + s + "'");
      if (!(w >= 0.0 && w < 1.0)) throw ConfigError(key + " must lie in [0, 1), got " + s);
      return DampingSchedule::constant(w);
    }
    return DampingSchedule::constant(unit(key));
  }

 private:
  const Json& j_;
};

struct Verdict {
  bool ok = true;         ///< converged (iterative) or completed (fixed budget)
  bool diverged = false;  ///< divergence flag raised by the solver
  bool iterative = true;
};

Verdict from_history(const IterationHistory& h) { return {h.converged, h.diverged, true}; }

// ---------------------------------------------------------------------------------------------------------------
// LQ

Json lq_defaults(int id) {
  const auto p = lq::test_case(id, id == 3 ? 0.0 : 1.0);
  Json j;
  j["A"] = p.A;
  j["Abar"] = p.Abar;
  j["B"] = p.B;
  j["Q"] = p.Q;
  j["Qbar"] = p.Qbar;
  j["Q_T"] = p.Q_T;
  j["Qbar_T"] = p.Qbar_T;
  j["S"] = p.S;
  j["S_T"] = p.S_T;
  j["C"] = p.C;
  j["sigma"] = p.sigma;
  j["x0_mean"] = p.x0_mean;
  j["x0_std"] = p.x0_std;
  j["T"] = p.T;
  j["method"] = "picard";
  j["damping"] = id == 2 ? 0.1 : 0.0;
  j["n_time"] = 200;
  j["max_iter"] = 200;
  j["tol"] = 1e-10;
  j["cost_n_time"] = 2000;
  if (lq::sweep_kind(id) != lq::SweepKind::none) {
    j["sweep_min"] = 0.0;
    j["sweep_max"] = 20.0;
    j["sweep_points"] = 41;
  }
  return j;
}

Verdict run_lq(int id, const Params& P, Artifacts& out) {
  lq::LQParams p;
  p.A = P.real("A");
  p.Abar = P.real("Abar");
  p.B = P.real("B");
  p.Q = P.real("Q");
  p.Qbar = P.real("Qbar");
  p.Q_T = P.real("Q_T");
  p.Qbar_T = P.real("Qbar_T");
  p.S = P.real("S");
  p.S_T = P.real("S_T");
  p.C = P.real("C");
  p.sigma = P.real("sigma");
  p.x0_mean = P.real("x0_mean");
  p.x0_std = P.real("x0_std");
  p.T = P.real("T");
  p.validate();
  const auto method = P.choice("method", {"picard", "fictitious", "newton", "direct"});
  lq::LQIterationOptions opt;
  opt.n_time = P.integer("n_time", 1);
  opt.max_iter = P.integer("max_iter", 1);
  opt.tol = P.positive("tol");
  const auto damping = DampingSchedule::constant(P.unit("damping"));
  const int cost_n_time = P.integer("cost_n_time", 1);

  const auto direct = lq::solve_lq_direct(p, opt.n_time);
  lq::LQSolveResult res;
  Verdict v{true, false, method != "direct"};
  if (method == "direct") {
    res.traj = direct;
  } else {
    res = method == "picard"       ? lq::picard_lq(p, damping, opt)
          : method == "fictitious" ? lq::fictitious_play_lq(p, opt)
                                   : lq::newton_lq(p, opt);
    v = from_history(res.history);
  }
  const auto& tr = res.traj;
  const auto S = lq::s_path(p, tr.P, tr.Z, tr.R);
  const double dt = p.T / opt.n_time;
  auto traj = out.csv("trajectory.csv", "lq-trajectory", {"n", "t", "Z", "R", "P", "S"});
  for (int n = 0; n <= opt.n_time; ++n) traj.row({(long long)n, n * dt, tr.Z[n], tr.R[n], tr.P[n], S[n]});
  auto hist = out.csv("history.csv", "lq-history", {"k", "delta_z", "delta_r", "residual"});
  for (const auto& r : res.history.records) hist.row({(long long)r.k, r.delta_a, r.delta_b, r.residual});

  out.results["iterations"] = res.history.iterations();
  out.results["converged"] = res.history.converged;
  out.results["diverged"] = res.history.diverged;
  if (!res.history.diverged) {
    out.results["residual_sup"] = sup_norm(lq::lq_forward_backward_residual(p, tr.P, tr.Z, tr.R));
    out.results["sup_distance_to_direct"] =
        std::max(sup_distance(tr.Z, direct.Z), sup_distance(tr.R, direct.R));
  }
  const auto costs = lq::lq_costs_and_poa(p, cost_n_time);
  out.results["J_mfg"] = costs.J_mfg;
  out.results["J_mfc"] = costs.J_mfc;
  out.results["poa"] = costs.poa;

  const auto kind = lq::sweep_kind(id);
  if (kind != lq::SweepKind::none) {
    const double lo = P.real("sweep_min"), hi = P.real("sweep_max");
    const int n = P.integer("sweep_points", 2);
    if (!(hi > lo)) throw ConfigError("sweep_max must exceed sweep_min");
    auto poa = out.csv("poa.csv", "lq-poa", {"value", "J_mfg", "J_mfc", "poa"});
    double min_poa = std::numeric_limits<double>::infinity(), last = 0.0;
    for (int k = 0; k < n; ++k) {
      const double value = lo + (hi - lo) * k / (n - 1);
      const auto c = lq::lq_costs_and_poa(lq::with_swept(p, kind, value), cost_n_time);
      poa.row({value, c.J_mfg, c.J_mfc, c.poa});
      min_poa = std::min(min_poa, c.poa);
      last = c.poa;
    }
    out.results["sweep_min_poa"] = min_poa;
    out.results["sweep_endpoint_poa"] = last;
  }
  return v;
}

// ---------------------------------------------------------------------------------------------------------------
// Finite differences

Json fdm_defaults(bool smooth) {
  Json j;
  j["n_space"] = 64;
  j["n_time"] = 64;
  j["nu"] = smooth ? 0.5 : 0.05;
  if (smooth) j["coupling"] = 0.1;
  j["method"] = smooth ? "newton" : "picard";
  j["damping"] = smooth ? 0.0 : 0.5;
  j["max_iter"] = smooth ? 50 : 200;
  j["tol"] = smooth ? 1e-10 : 1e-8;
  j["diagnostic_samples"] = 1000;
  j["seed"] = 1;
  return j;
}

void write_space_time(Artifacts& out, const std::string& file, const std::string& schema, const DiscreteGrid1D& g,
                      const std::vector<std::string>& names, const std::vector<const Field*>& fields, int levels) {
  std::vector<std::string> cols{"n", "i", "t", "x"};
  cols.insert(cols.end(), names.begin(), names.end());
  auto csv = out.csv(file, schema, cols);
  for (int n = 0; n < levels; ++n)
    for (int i = 0; i < g.n_space; ++i) {
      std::vector<CsvWriter::Cell> row{(long long)n, (long long)i, g.t(n), g.x(i)};
      for (const auto* f : fields) row.emplace_back((*f)(n, i));
      csv.row(row);
    }
}

Verdict run_fdm(bool smooth, const Params& P, Artifacts& out) {
  const int n_space = P.integer("n_space", 3), n_time = P.integer("n_time", 1);
  const double nu = P.nonnegative("nu");
  const auto pb = smooth ? fdm::smooth_scenario(n_space, n_time, nu, P.real("coupling"))
                         : fdm::congestion_lite_scenario(n_space, n_time, nu);
  pb.validate();
  const auto method = P.choice("method", {"picard", "newton"});
  const auto damping = P.damping("damping");
  const int max_iter = P.integer("max_iter", 1);
  const double tol = P.positive("tol");
  const int samples = P.integer("diagnostic_samples", 0);
  const int seed = P.integer("seed", 0);
  const auto H = fdm::quadratic_discrete_hamiltonian();

  const auto sol = method == "newton" ? fdm::fdm_newton(pb, H, max_iter, tol) : fdm::fdm_picard(pb, H, damping, max_iter, tol);
  const auto& g = pb.grid;
  write_space_time(out, "solution.csv", "fdm-solution", g, {"U", "M"}, {&sol.U, &sol.M}, g.n_time + 1);
  auto conv = out.csv("convergence.csv", "fdm-convergence", {"k", "residual_sup", "delta_M_L2"});
  for (const auto& r : sol.history.records) conv.row({(long long)r.k, r.residual, r.delta_b});

  double mass_err = 0.0, min_m = std::numeric_limits<double>::infinity();
  for (int n = 0; n <= g.n_time; ++n) {
    mass_err = std::max(mass_err, std::abs(level_mass(sol.M.level(n), g.h) - 1.0));
    for (double m : sol.M.level(n)) min_m = std::min(min_m, m);
  }
  out.results["iterations"] = sol.history.iterations();
  out.results["converged"] = sol.history.converged;
  out.results["diverged"] = sol.history.diverged;
  if (!sol.history.diverged) {
    out.results["hjb_residual_sup"] = sup_norm(fdm::discrete_hjb_residual(pb, H, sol.U, sol.M));
    out.results["kfp_residual_sup"] = sup_norm(fdm::discrete_kfp_residual(pb, H, sol.U, sol.M));
    out.results["mass_error"] = mass_err;
    out.results["min_M"] = min_m;
  }
  if (samples > 0) {
    const auto ll = fdm::lasry_lions_diagnostic(pb, samples, 0.1, 10.0, static_cast<unsigned>(seed));
    out.results["lasry_lions"] = {{"samples", ll.samples},
                                  {"monotone_pass", ll.monotone_pass},
                                  {"monotone_fail", ll.monotone_fail},
                                  {"convex_pass", ll.convex_pass},
                                  {"convex_fail", ll.convex_fail}};
  }
  return from_history(sol.history);
}

// ---------------------------------------------------------------------------------------------------------------
// Variational

Json var_defaults(bool admm) {
  Json j;
  j["n_space"] = 64;
  j["n_time"] = 64;
  j["nu"] = 0.5;
  if (admm) {
    j["r"] = 1.0;
  } else {
    j["gamma"] = -1.0;
    j["tau"] = -1.0;
    j["scaling"] = "whitened";
  }
  j["max_iter"] = 500;
  j["tol"] = 1e-8;
  return j;
}

Verdict run_var(bool admm, const Params& P, Artifacts& out) {
  const auto pb = variational::smooth_coincidence_scenario(P.integer("n_space", 3), P.integer("n_time", 1),
                                                           P.nonnegative("nu"));
  pb.validate();
  const int max_iter = P.integer("max_iter", 1);
  const double tol = P.positive("tol");
  variational::VariationalResult res;
  if (admm) {
    res = variational::admm_solve(pb, P.positive("r"), max_iter, tol);
  } else {
    const auto scaling = P.choice("scaling", {"whitened", "raw"}) == "raw" ? variational::CPScaling::raw
                                                                            : variational::CPScaling::whitened;
    res = variational::chambolle_pock_solve(pb, P.real("gamma"), P.real("tau"), max_iter, tol, scaling);
  }
  const auto& g = pb.grid;
  const auto& M = res.primal.M;
  write_space_time(out, "M.csv", "var-density", g, {"M"}, {&M}, g.n_time + 1);
  {
    auto csv = out.csv("W.csv", "var-flux", {"n", "i", "t", "x", "W1", "W2"});
    for (int n = 0; n < g.n_time; ++n)
      for (int i = 0; i < g.n_space; ++i) {
        const std::size_t k = static_cast<std::size_t>(n) * g.n_space + i;
        csv.row({(long long)n, (long long)i, g.t(n), g.x(i), res.primal.W1[k], res.primal.W2[k]});
      }
  }
  {
    auto csv = out.csv("U.csv", "var-dual", {"n", "i", "t", "x", "U"});
    for (int n = 0; n < g.n_time; ++n)
      for (int i = 0; i < g.n_space; ++i)
        csv.row({(long long)n, (long long)i, g.t(n), g.x(i), res.dual.U[static_cast<std::size_t>(n) * g.n_space + i]});
  }
  auto hist = out.csv("history.csv", "var-history", {"k", "feasibility", "dual_residual", "energy"});
  for (const auto& r : res.history.records) hist.row({(long long)r.k, r.delta_a, r.delta_b, r.residual});

  const double energy = variational::primal_energy(pb, res.primal);
  const double dual = variational::dual_objective(pb, res.dual);
  out.results["iterations"] = res.history.iterations();
  out.results["converged"] = res.history.converged;
  out.results["stagnated"] = res.stagnated;
  out.results["message"] = res.message;
  out.results["feasibility"] = variational::feasibility_residual(pb, res.primal);
  out.results["primal_energy"] = energy;
  out.results["dual_objective"] = dual;
  out.results["duality_gap"] = energy - dual;
  return from_history(res.history);
}

// ---------------------------------------------------------------------------------------------------------------
// Semi-Lagrangian

Json sl_defaults(double kappa) {
  Json j;
  j["kappa"] = kappa;
  j["n_space"] = 200;
  j["a_max"] = 2.0;
  j["n_actions"] = 81;
  j["eps_over_h"] = 2.0;
  j["damping"] = "fictitious";
  j["max_iter"] = 300;
  j["tol"] = 1e-5;
  j["threads"] = 1;
  return j;
}

Verdict run_sl(const Params& P, Artifacts& out) {
  auto pb = semilag::concentration_scenario(P.nonnegative("kappa"), P.integer("n_space", 4));
  pb.a_max = P.positive("a_max");
  pb.n_actions = P.integer("n_actions", 2);
  pb.eps = P.positive("eps_over_h") * pb.grid.h;
  pb.threads = P.integer("threads", 1, 256);
  pb.validate();
  const auto damping = P.damping("damping");
  const auto sol = semilag::sl_fixed_point(pb, damping, P.integer("max_iter", 1), P.positive("tol"));
  const auto& g = pb.grid;
  {
    auto csv = out.csv("density.csv", "sl-density", {"n", "i", "t", "x", "M", "density"});
    for (int n = 0; n <= g.n_time; ++n)
      for (int i = 0; i < g.n_space; ++i)
        csv.row({(long long)n, (long long)i, g.t(n), g.x(i), sol.M(n, i), sol.M(n, i) / g.h});
  }
  write_space_time(out, "control.csv", "sl-control", g, {"alpha"}, {&sol.control}, g.n_time);
  auto hist = out.csv("history.csv", "sl-history", {"k", "delta_U", "delta_M", "residual"});
  for (const auto& r : sol.history.records) hist.row({(long long)r.k, r.delta_a, r.delta_b, r.residual});

  double drift = 0.0;
  for (int n = 0; n <= g.n_time; ++n) {
    const auto lv = sol.M.level(n);
    drift = std::max(drift, std::abs(std::accumulate(lv.begin(), lv.end(), 0.0) - 1.0));
  }
  const auto last = sol.M.level(g.n_time);
  Json peaks = Json::array();
  for (int i : semilag::density_peaks(last)) peaks.push_back({{"x", g.x(i)}, {"density", last[i] / g.h}});
  out.results["iterations"] = sol.history.iterations();
  out.results["converged"] = sol.history.converged;
  out.results["diverged"] = sol.history.diverged;
  out.results["mass_drift"] = drift;
  out.results["clamped_arrivals"] = sol.clamped_arrivals;
  out.results["final_peaks"] = peaks;
  return from_history(sol.history);
}

// ---------------------------------------------------------------------------------------------------------------
// Monotone flow

Json mono_defaults(bool tc1) {
  Json j;
  if (tc1) j["c"] = 0.1;
  else j["kappa"] = 1.0;
  j["n_space"] = tc1 ? 500 : 200;
  j["n_time"] = 1000;
  j["horizon"] = 20.0;
  j["newton_max_iter"] = 50;
  j["newton_tol"] = 1e-10;
  j["max_continuation"] = 12;
  return j;
}

Verdict run_mono(bool tc1, const Params& P, Artifacts& out) {
  const int n_space = P.integer("n_space", 3), n_time = P.integer("n_time", 1);
  const double horizon = P.positive("horizon");
  const auto sc = tc1 ? monotone::testcase1(P.nonnegative("c"), n_space, n_time, horizon)
                      : monotone::testcase2(P.real("kappa"), n_space, n_time, horizon);
  sc.validate();
  monotone::NewtonOptions opt;
  opt.max_iter = P.integer("newton_max_iter", 1);
  opt.tol = P.positive("newton_tol");
  opt.max_continuation = P.integer("max_continuation", 0, 60);
  const double dtau = horizon / n_time;
  const auto res = monotone::run_flow(sc, n_time, dtau, std::nullopt, opt);
  const auto exact = sc.exact(sc.grid);
  const auto& g = sc.grid;
  {
    auto csv = out.csv("solution.csv", "mono-solution", {"i", "x", "U", "M", "U_exact", "M_exact"});
    for (int i = 0; i < g.n_space; ++i)
      csv.row({(long long)i, g.x(i), res.state.U[i], res.state.M[i], exact.U[i], exact.M[i]});
  }
  const auto& h = res.history;
  auto hist = out.csv("history.csv", "mono-history",
                      {"n", "tau", "delta_u", "delta_m", "delta_tot", "err_u", "err_m", "err_tot", "min_m",
                       "newton_iterations"});
  for (std::size_t n = 0; n < h.delta_u.size(); ++n)
    hist.row({(long long)(n + 1), (n + 1) * dtau, h.delta_u[n], h.delta_m[n], h.delta_tot[n], h.err_u[n], h.err_m[n],
              h.err_tot[n], h.min_m[n], (long long)h.newton_iterations[n]});

  bool tail_monotone = true;
  for (std::size_t n = 11; n < h.delta_tot.size(); ++n)
    if (h.delta_tot[n] > h.delta_tot[n - 1]) tail_monotone = false;
  out.results["steps"] = h.delta_u.size();
  out.results["final_err_tot"] = h.err_tot.back();
  out.results["final_delta_tot"] = h.delta_tot.back();
  out.results["delta_tail_monotone"] = tail_monotone;
  out.results["min_M_over_flow"] = *std::min_element(h.min_m.begin(), h.min_m.end());
  out.results["rhs_sup"] = sup_norm(monotone::flow_rhs(sc, res.state.U, res.state.M));
  out.results["lambda"] = res.state.lambda;
  out.results["lambda_exact"] = exact.lambda;
  out.results["normalizer_exact"] = exact.normalizer;
  return {true, false, false};
}

// ---------------------------------------------------------------------------------------------------------------
// Finite state

const std::vector<std::string> kStates{"DI", "DS", "UI", "US"};

void put_cyber(Json& j, const finite::CyberParams& p) {
  j["beta_UU"] = p.beta_UU;
  j["beta_UD"] = p.beta_UD;
  j["beta_DU"] = p.beta_DU;
  j["beta_DD"] = p.beta_DD;
  j["v_H"] = p.v_H;
  j["rho"] = p.rho;
  j["q_rec_D"] = p.q_rec_D;
  j["q_rec_U"] = p.q_rec_U;
  j["q_inf_D"] = p.q_inf_D;
  j["q_inf_U"] = p.q_inf_U;
  j["k_D"] = p.k_D;
  j["k_I"] = p.k_I;
  j["flip_cost_sign"] = p.flip_cost_sign;
}

finite::CyberParams get_cyber(const Params& P) {
  finite::CyberParams p;
  p.beta_UU = P.nonnegative("beta_UU");
  p.beta_UD = P.nonnegative("beta_UD");
  p.beta_DU = P.nonnegative("beta_DU");
  p.beta_DD = P.nonnegative("beta_DD");
  p.v_H = P.nonnegative("v_H");
  p.rho = P.nonnegative("rho");
  p.q_rec_D = P.nonnegative("q_rec_D");
  p.q_rec_U = P.nonnegative("q_rec_U");
  p.q_inf_D = P.nonnegative("q_inf_D");
  p.q_inf_U = P.nonnegative("q_inf_U");
  p.k_D = P.nonnegative("k_D");
  p.k_I = P.nonnegative("k_I");
  p.flip_cost_sign = P.flag("flip_cost_sign");
  return p;
}

std::vector<double> cyber_start(const std::string& which) {
  if (which == "e1") return {1, 0, 0, 0};
  if (which == "e4") return {0, 0, 0, 1};
  return {0.25, 0.25, 0.25, 0.25};
}

Json cyber_mfg_defaults(const std::string& start) {
  Json j;
  j["m0"] = start;
  put_cyber(j, finite::cyber_mfg_params());
  j["T"] = 10.0;
  j["n_time"] = 1000;
  j["method"] = "picard";
  j["damping"] = 0.0;
  j["max_iter"] = 300;
  j["tol"] = 1e-10;
  return j;
}

Verdict run_cyber_mfg(const Params& P, Artifacts& out) {
  const auto start = P.choice("m0", {"uniform", "e1", "e4"});
  const auto pb = finite::cybersecurity_model(get_cyber(P), cyber_start(start), P.positive("T"));
  finite::FiniteSolveOptions opt;
  opt.n_time = P.integer("n_time", 1);
  opt.max_iter = P.integer("max_iter", 1);
  opt.tol = P.positive("tol");
  const auto method = P.choice("method", {"picard", "newton"}) == "newton" ? finite::FiniteMethod::newton
                                                                           : finite::FiniteMethod::picard;
  const auto res = finite::solve_finite_mfg(pb, method, opt, P.damping("damping"));
  const auto& f = res.flow;
  const double dt = pb.T / opt.n_time;
  std::vector<std::string> cols{"n", "t"};
  for (const auto& s : kStates) cols.push_back("m_" + s);
  for (const auto& s : kStates) cols.push_back("u_" + s);
  for (const auto& s : kStates) cols.push_back("a_" + s);
  auto flow = out.csv("flow.csv", "cyber-flow", cols);
  double simplex = 0.0, min_m = std::numeric_limits<double>::infinity();
  for (int n = 0; n <= opt.n_time; ++n) {
    std::vector<CsvWriter::Cell> row{(long long)n, n * dt};
    for (int x = 0; x < 4; ++x) row.emplace_back(f.m(n, x));
    for (int x = 0; x < 4; ++x) row.emplace_back(f.u(n, x));
    for (int x = 0; x < 4; ++x)
      row.emplace_back(n < opt.n_time && !f.policy.empty() ? pb.actions[f.policy[n][x]] : 0.0);
    flow.row(row);
    simplex = std::max(simplex, std::abs(f.m.row(n).sum() - 1.0));
    min_m = std::min(min_m, f.m.row(n).minCoeff());
  }
  auto hist = out.csv("history.csv", "cyber-history", {"k", "delta_u", "delta_m", "residual"});
  for (const auto& r : res.history.records) hist.row({(long long)r.k, r.delta_a, r.delta_b, r.residual});
  out.results["iterations"] = res.history.iterations();
  out.results["converged"] = res.history.converged;
  out.results["diverged"] = res.history.diverged;
  if (!res.history.diverged) out.results["residual_sup"] = sup_norm(finite::finite_mfg_residual(pb, f));
  out.results["simplex_error"] = simplex;
  out.results["min_m"] = min_m;
  Json final_m = Json::object();
  for (int x = 0; x < 4; ++x) final_m[kStates[x]] = f.m(opt.n_time, x);
  out.results["final_m"] = final_m;
  return from_history(res.history);
}

Json cyber_mfc_defaults() {
  Json j;
  put_cyber(j, finite::cyber_mfc_params());
  j["N_m"] = 30;
  j["gamma"] = 0.5;
  j["dt"] = 0.1;
  j["max_sweeps"] = 2000;
  j["tol"] = 1e-10;
  j["threads"] = 1;
  j["rollout_steps"] = 60;
  return j;
}

Verdict run_cyber_mfc(const Params& P, Artifacts& out) {
  auto pb = finite::cybersecurity_model(get_cyber(P));
  const double dt = P.positive("dt");
  const double gamma = P.real("gamma");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1), got " + num(gamma));
  pb.beta = finite::discount_rate_for(gamma, dt);
  const auto mdp = finite::mfc_lift(pb, dt);
  const finite::SimplexGrid grid(4, P.integer("N_m", 2, 200));
  finite::QLearningOptions opt;
  opt.max_sweeps = P.integer("max_sweeps", 1);
  opt.tol = P.positive("tol");
  opt.threads = P.integer("threads", 1, 256);
  const int steps = P.integer("rollout_steps", 1);
  const auto res = finite::q_learning_mfc(mdp, grid, opt);

  double max_ratio = 0.0;
  {
    auto csv = out.csv("q_diagnostics.csv", "mfc-q-diagnostics", {"k", "sup_change", "bellman_residual", "ratio"});
    for (std::size_t k = 0; k < res.sup_change.size(); ++k) {
      const double ratio = k > 0 && res.sup_change[k - 1] > 0.0 ? res.sup_change[k] / res.sup_change[k - 1] : 0.0;
      if (k > 0) max_ratio = std::max(max_ratio, ratio);
      csv.row({(long long)(k + 1), res.sup_change[k], res.bellman_residual[k], ratio});
    }
  }
  auto profile = [&](int joint) {
    std::vector<CsvWriter::Cell> c;
    for (int x = 0; x < 4; ++x) c.emplace_back(mdp.joint_actions[joint][x]);
    return c;
  };
  {
    std::vector<std::string> cols{"i"};
    for (const auto& s : kStates) cols.push_back("m_" + s);
    cols.insert(cols.end(), {"V", "joint_action", "a_DI", "a_DS", "a_UI", "a_US"});
    auto csv = out.csv("value.csv", "mfc-value", cols);
    for (int i = 0; i < grid.size(); ++i) {
      std::vector<CsvWriter::Cell> row{(long long)i};
      for (double v : grid.point(i)) row.emplace_back(v);
      const int a = res.q.argmin(i);
      row.emplace_back(res.q(i, a));
      row.emplace_back((long long)a);
      for (auto& c : profile(a)) row.push_back(c);
      csv.row(row);
    }
  }
  std::vector<std::string> cols{"start", "n", "t"};
  for (const auto& s : kStates) cols.push_back("m_" + s);
  cols.insert(cols.end(), {"joint_action", "q_min", "value_to_go"});
  auto roll = out.csv("rollout.csv", "mfc-rollout", cols);
  Json starts = Json::object();
  for (const std::string name : {"uniform", "e1", "e4"}) {
    const auto m0 = cyber_start(name);
    const auto ro = finite::greedy_rollout(mdp, res.q, grid, m0, steps);
    // Discounted value from each step onward, accumulated backward.
    std::vector<double> to_go(steps + 1, 0.0);
    for (int n = steps - 1; n >= 0; --n) to_go[n] = mdp.cost(ro.flow[n], ro.actions[n]) + mdp.gamma * to_go[n + 1];
    for (int n = 0; n <= steps; ++n) {
      std::vector<CsvWriter::Cell> row{name, (long long)n, n * dt};
      for (double v : ro.flow[n]) row.emplace_back(v);
      row.emplace_back(n < steps ? (long long)ro.actions[n] : -1LL);
      row.emplace_back(res.q.min_value(grid.project(ro.flow[n])));
      row.emplace_back(to_go[n]);
      roll.row(row);
    }
    const double qmin = res.q.min_value(grid.project(m0));
    starts[name] = {{"rollout_value", ro.value},
                    {"q_min_at_projection", qmin},
                    {"relative_gap", std::abs(ro.value - qmin) / std::abs(qmin)}};
  }
  out.results["grid_points"] = grid.size();
  out.results["joint_actions"] = mdp.joint_actions.size();
  out.results["sweeps"] = res.sup_change.size();
  out.results["converged"] = res.converged;
  out.results["max_contraction_ratio"] = max_ratio;
  out.results["final_bellman_residual"] = res.bellman_residual.back();
  out.results["starts"] = starts;
  return {res.converged, false, true};
}

Json entropy_defaults() {
  Json j;
  j["t_max"] = 1.0;
  j["n_t"] = 51;
  j["n_mbar"] = 81;
  return j;
}

Verdict run_entropy(const Params& P, Artifacts& out) {
  const double t_max = P.positive("t_max");
  const int nt = P.integer("n_t", 2), nm = P.integer("n_mbar", 2);
  auto csv = out.csv("entropy.csv", "entropy-z", {"t", "mbar", "Z"});
  double worst = 0.0;
  for (int a = 0; a < nt; ++a)
    for (int b = 0; b < nm; ++b) {
      const double t = t_max * a / (nt - 1), mb = -1.0 + 2.0 * b / (nm - 1);
      const double Z = finite::entropy_z_exact(t, mb);
      csv.row({t, mb, Z});
      // Root check: M = Z / (2 - t|Z|) solves the cubic.
      const double M = Z / (2.0 - t * std::abs(Z));
      worst = std::max(worst, std::abs(t * t * M * M * M + t * (2.0 - t) * M * std::abs(M) + (1.0 - 2.0 * t) * M - mb));
    }
  out.results["max_root_residual"] = worst;
  return {true, false, false};
}

// ---------------------------------------------------------------------------------------------------------------

struct Scenario {
  std::string name;
  std::string description;
  std::function<Json()> defaults;
  std::function<Verdict(const Params&, Artifacts&)> run;
};

const std::vector<Scenario>& registry() {
  static const std::vector<Scenario> r = [] {
    std::vector<Scenario> s;
    const char* lq_desc[] = {
        "LQ MFG, Test case 1: Picard converges; PoA of the base parameters",
        "LQ MFG, Test case 2 (Qbar_T = 2.45): Picard with damping 0.1",
        "LQ MFG/MFC, Test case 3: PoA sweep over Abar in [0, 20]",
        "LQ MFG/MFC, Test case 4: PoA sweep over Qbar_T in [0, 20]",
        "LQ MFG/MFC, Test case 5: PoA sweep over Q_T in [0, 20]"};
    for (int id = 1; id <= 5; ++id)
      s.push_back({"lq-test" + std::to_string(id), lq_desc[id - 1], [id] { return lq_defaults(id); },
                   [id](const Params& P, Artifacts& a) { return run_lq(id, P, a); }});
    s.push_back({"fdm-smooth", "Finite differences, quadratic H, f0 = 0.1 m, nu = 0.5, 64 x 64, Newton",
                 [] { return fdm_defaults(true); }, [](const Params& P, Artifacts& a) { return run_fdm(true, P, a); }});
    s.push_back({"fdm-congestion-lite", "Finite differences, f0 = m/2, nu = 0.05; damped Picard",
                 [] { return fdm_defaults(false); },
                 [](const Params& P, Artifacts& a) { return run_fdm(false, P, a); }});
    s.push_back({"var-smooth-admm", "Variational form of fdm-smooth solved by ADMM", [] { return var_defaults(true); },
                 [](const Params& P, Artifacts& a) { return run_var(true, P, a); }});
    s.push_back({"var-smooth-cp", "Variational form of fdm-smooth solved by Chambolle-Pock",
                 [] { return var_defaults(false); }, [](const Params& P, Artifacts& a) { return run_var(false, P, a); }});
    for (const char* k : {"0.5", "0.9"}) {
      const double kappa = std::stod(k);
      s.push_back({std::string("sl-concentration-") + k,
                   std::string("Semi-Lagrangian concentration example, kappa = ") + k,
                   [kappa] { return sl_defaults(kappa); }, [](const Params& P, Artifacts& a) { return run_sl(P, a); }});
    }
    s.push_back({"mono-tc1", "Monotone flow, ergodic Test case 1 (c = 0.1, N_h = 500, T = 20)",
                 [] { return mono_defaults(true); }, [](const Params& P, Artifacts& a) { return run_mono(true, P, a); }});
    s.push_back({"mono-tc2", "Monotone flow, ergodic Test case 2 (kappa = 1, nu = 0.5, N_h = 200)",
                 [] { return mono_defaults(false); },
                 [](const Params& P, Artifacts& a) { return run_mono(false, P, a); }});
    for (const auto& [m0, label] : std::vector<std::pair<std::string, std::string>>{
             {"uniform", "uniform start"}, {"e1", "all in DI"}, {"e4", "all in US"}}) {
      s.push_back({"cyber-mfg-m0=" + m0, "Cybersecurity MFG, T = 10, " + label,
                   [m0] { return cyber_mfg_defaults(m0); },
                   [](const Params& P, Artifacts& a) { return run_cyber_mfg(P, a); }});
    }
    s.push_back({"cyber-mfc-q", "Cybersecurity MFC by Q-learning on the simplex (N_m = 30, gamma = 0.5)",
                 cyber_mfc_defaults, run_cyber_mfc});
    s.push_back({"entropy-oracle", "Two-state entropy solution Z(t, mbar) on a grid", entropy_defaults, run_entropy});
    return s;
  }();
  return r;
}

const Scenario& find(const std::string& name) {
  for (const auto& s : registry())
    if (s.name == name) return s;
  throw ConfigError("scenario: unknown name '" + name + "' (see `list`)");
}

Json coerce(const std::string& key, const Json& like, const std::string& text) {
  if (like.is_boolean()) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError(key + " must be true or false, got '" + text + "'");
  }
  if (like.is_number_integer()) {
    long long v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size())
      throw ConfigError(key + " must be an integer, got '" + text + "'");
    return v;
  }
  if (like.is_number()) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size())
      throw ConfigError(key + " must be a number, got '" + text + "'");
    return v;
  }
  return text;
}

Json coerce_json(const std::string& key, const Json& like, const Json& value) {
  if (value.is_string()) return like.is_string() ? value : coerce(key, like, value.get<std::string>());
  if (like.is_string()) {
    if (value.is_number()) return value.dump();
    throw ConfigError(key + " must be a string");
  }
  if (like.is_boolean() != value.is_boolean()) throw ConfigError(key + " has the wrong type");
  if (like.is_number_integer() && !value.is_number_integer()) throw ConfigError(key + " must be an integer");
  if (like.is_number() && !value.is_number()) throw ConfigError(key + " must be a number");
  return value;
}

}  // namespace

std::vector<ScenarioInfo> list_scenarios() {
  std::vector<ScenarioInfo> out;
  for (const auto& s : registry()) out.push_back({s.name, s.description});
  return out;
}

std::string format_listing() {
  std::size_t w = 0;
  for (const auto& s : registry()) w = std::max(w, s.name.size());
  std::ostringstream os;
  for (const auto& s : registry()) os << s.name << std::string(w + 2 - s.name.size(), ' ') << s.description << '\n';
  return os.str();
}

Json default_config(const std::string& scenario) { return find(scenario).defaults(); }

void apply_override(Json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set: expected key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq), value = assignment.substr(eq + 1);
  if (!config.contains(key)) throw ConfigError(key + ": unknown key for this scenario");
  config[key] = coerce(key, config[key], value);
}

void merge_config(Json& config, const Json& overrides) {
  if (!overrides.is_object()) throw ConfigError("config: expected a flat JSON object");
  for (const auto& [key, value] : overrides.items()) {
    if (!config.contains(key)) throw ConfigError(key + ": unknown key for this scenario");
    if (value.is_object() || value.is_array()) throw ConfigError(key + ": nested values are not allowed");
    config[key] = coerce_json(key, config[key], value);
  }
}

RunOutcome run_scenario(const std::string& scenario, const Json& config, const fs::path& out_root) {
  RunOutcome outcome;
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario* sc = nullptr;
  Json manifest;
  try {
    sc = &find(scenario);
  } catch (const ConfigError& e) {
    return {kError, "invalid_config", e.what(), {}};
  }
  outcome.directory = out_root / scenario;
  manifest["manifest"] = "mfgnum-run v1";
  manifest["scenario"] = sc->name;
  manifest["description"] = sc->description;
  manifest["parameters"] = config;
  Artifacts art(outcome.directory);
  try {
    // Reject keys the scenario does not know before touching the filesystem.
    const auto defaults = sc->defaults();
    for (const auto& [key, value] : config.items())
      if (!defaults.contains(key)) throw ConfigError(key + ": unknown key for this scenario");
    for (const auto& [key, value] : defaults.items())
      if (!config.contains(key)) throw ConfigError(key + ": missing");
    fs::create_directories(outcome.directory);
    const Params P(config);
    const Verdict v = sc->run(P, art);
    if (v.diverged) {
      outcome = {kDiverged, "diverged", "solver declared divergence", outcome.directory};
    } else if (!v.ok) {
      outcome = {kDiverged, "not_converged", "iteration budget exhausted before the tolerance", outcome.directory};
    } else {
      outcome.status = v.iterative ? "converged" : "completed";
    }
  } catch (const ConfigError& e) {
    outcome = {kError, "invalid_config", e.what(), outcome.directory};
  } catch (const PreconditionError& e) {
    outcome = {kError, "invalid_config", e.what(), outcome.directory};
  } catch (const ShapeError& e) {
    outcome = {kError, "invalid_config", e.what(), outcome.directory};
  } catch (const SolverError& e) {
    outcome = {kDiverged, "solver_failure", e.what(), outcome.directory};
  } catch (const nlohmann::json::exception& e) {
    outcome = {kError, "invalid_config", e.what(), outcome.directory};
  } catch (const std::exception& e) {
    outcome = {kError, "error", e.what(), outcome.directory};
  }
  if (outcome.status == "invalid_config" && !fs::exists(outcome.directory)) return outcome;
  manifest["status"] = outcome.status;
  manifest["exit_code"] = outcome.exit_code;
  if (!outcome.message.empty()) manifest["message"] = outcome.message;
  manifest["wall_time_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest["results"] = art.results;
  manifest["outputs"] = art.files();
  try {
    std::ofstream(outcome.directory / "manifest.json") << manifest.dump(2) << '\n';
  } catch (const std::exception& e) {
    return {kError, "error", e.what(), outcome.directory};
  }
  return outcome;
}

}  // namespace mfgnum::cli
