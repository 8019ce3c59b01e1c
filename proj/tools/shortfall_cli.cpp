// Command-line surface: validate -> rate curve -> solve -> simulate, plus
// the raw grid solver. JSON for structured results, CSV for curves; both
// deterministic for fixed (files, flags, seed). Exit codes: 0 success,
// 1 validation failure, 2 solver failure, 3 input error.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "shortfall/bellman1d.hpp"
#include "shortfall/conditions.hpp"
#include "shortfall/dual.hpp"
#include "shortfall/gaussian.hpp"
#include "shortfall/simulate.hpp"

using json = nlohmann::ordered_json;
using namespace shortfall;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string digest_hex(const MarketScenario& s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx",
                static_cast<unsigned long long>(scenario_digest(s)));
  return buf;
}

json vec_json(const Vector& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json mat_json(const Matrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

json meta(const Timer& timer) {
  return {{"tool_version", kVersion}, {"wall_time_s", timer.seconds()}};
}

json condition_json(const ConditionReport& rep) {
  return {{"ellipticity_min_eig_c", rep.ellipticity_min_eig_c},
          {"ellipticity_min_eig_ss", rep.ellipticity_min_eig_ss},
          {"n1_min_eig", rep.n1_min_eig},
          {"n2_min_value", rep.n2_min_value},
          {"stability_margin", rep.stability_margin},
          {"passed",
           {{"ellipticity_c", rep.ellipticity_c_passed},
            {"ellipticity_ss", rep.ellipticity_ss_passed},
            {"n1", rep.n1_passed},
            {"n2", rep.n2_passed},
            {"stability", rep.stability_passed}}},
          {"all_passed", rep.all_passed()}};
}

json policy_json(const PortfolioPolicy& pol) {
  json j;
  j["lambda_hat"] = pol.lambda_hat;
  if (pol.form == PortfolioPolicy::Form::linear) {
    j["form"] = "linear";
    j["K"] = mat_json(pol.K);
    j["k0"] = vec_json(pol.k0);
  } else {
    j["form"] = "tabulated";
    j["xs"] = vec_json(pol.xs);
    j["u"] = mat_json(pol.u_table);
  }
  if (std::isfinite(pol.tau)) j["tau"] = pol.tau;
  return j;
}

json truncation_json(const TruncationReport& rep) {
  json arr = json::array();
  for (const auto& e : rep.entries) {
    json je = {{"rho", e.rho},
               {"fit_c1", e.fit_c1},
               {"fit_c2", e.fit_c2},
               {"fit_margin", e.fit_margin},
               {"quad_trend", e.quad_trend},
               {"linear_growth_ok", e.linear_growth_ok},
               {"strong_decay_ok", e.strong_decay_ok}};
    if (std::isfinite(e.leading_max_eig)) je["leading_max_eig"] = e.leading_max_eig;
    arr.push_back(je);
  }
  return arr;
}

void emit_plot_data(const std::string& path, const std::vector<std::string>& header,
                    const std::vector<std::vector<double>>& rows) {
  if (path.empty()) return;
  std::ofstream out(path);
  out << "#";
  for (const auto& h : header) out << " " << h;
  out << "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) out << (i ? " " : "") << fmt17(row[i]);
    out << "\n";
  }
}

int cmd_validate(const std::string& path, double shell_radius, double threshold) {
  Timer timer;
  const MarketScenario s = load_scenario(path, {.allow_degenerate_benchmark = true});
  const ConditionReport rep =
      check_all(s, default_probes(s.l, shell_radius), shell_radius, {threshold});
  json out;
  out["command"] = "validate";
  out["scenario_digest"] = digest_hex(s);
  out["parameters"] = {{"shell_radius", shell_radius}, {"threshold", threshold}};
  out["report"] = condition_json(rep);
  out["meta"] = meta(timer);
  std::cout << out.dump(2) << "\n";
  return rep.all_passed() ? 0 : 1;
}

int cmd_rate(const std::string& path, double lmin, double lmax, int steps, bool use_grid,
             int nodes, double radius, bool cross_check, const std::string& plot) {
  Timer timer;
  const MarketScenario s = load_scenario(path);
  std::vector<double> lams(steps);
  for (int i = 0; i < steps; ++i)
    lams[i] = steps == 1 ? lmin : lmin + (lmax - lmin) * i / (steps - 1);

  std::vector<std::vector<double>> rows;
  std::vector<double> Fs;
  std::printf("lambda,F,Fprime,P_fro,D_maxRe\n");
  for (double lam : lams) {
    double F, Fp, pfro = std::numeric_limits<double>::quiet_NaN(),
                  dmax = std::numeric_limits<double>::quiet_NaN();
    if (use_grid) {
      GridParams gp;
      gp.N = nodes;
      gp.R = radius;
      GridSolution gs = solve_ergodic_hjb(lam, as_parametric(s), gp);
      gs.m = stationary_density(lam, gs, as_parametric(s));
      F = gs.Lambda;
      Fp = grid_rate_derivative(lam, gs, as_parametric(s));
    } else {
      const RiccatiSolution sol = gaussian_rate(lam, as_linear(s));
      F = sol.F;
      Fp = gaussian_rate_derivative(lam, sol, as_linear(s));
      pfro = sol.P.norm();
      dmax = sol.max_re_eig_D;
    }
    Fs.push_back(F);
    rows.push_back({lam, F, Fp, pfro, dmax});
    std::printf("%s,%s,%s,%s,%s\n", fmt17(lam).c_str(), fmt17(F).c_str(), fmt17(Fp).c_str(),
                fmt17(pfro).c_str(), fmt17(dmax).c_str());
  }

  bool convex = true;
  for (size_t i = 0; i + 2 < Fs.size(); ++i)
    if (Fs[i + 2] - 2 * Fs[i + 1] + Fs[i] < -1e-8) convex = false;

  json footer;
  footer["command"] = "rate";
  footer["scenario_digest"] = digest_hex(s);
  footer["parameters"] = {{"lmin", lmin}, {"lmax", lmax}, {"steps", steps}, {"grid", use_grid}};
  footer["convex"] = convex;
  if (cross_check && s.is_affine()) {
    const double lam = lams[lams.size() / 2];
    GridParams gp;
    gp.N = nodes;
    gp.R = radius;
    const double Lg = grid_rate(lam, as_parametric(s), gp);
    const double Fg = gaussian_rate(lam, as_linear(s)).F;
    footer["cross_check"] = {{"lambda", lam},
                             {"grid_Lambda", Lg},
                             {"closed_form_F", Fg},
                             {"abs_error", std::abs(Lg - Fg)}};
  }
  footer["meta"] = meta(timer);
  std::printf("# %s\n", footer.dump().c_str());
  emit_plot_data(plot, {"lambda", "F", "Fprime", "P_fro", "D_maxRe"}, rows);
  return 0;
}

DualSolution solve_with_flags(const MarketScenario& s, double q, bool use_grid, int nodes,
                              double radius) {
  GridParams gp;
  gp.N = nodes;
  gp.R = radius;
  return solve_shortfall(use_grid ? as_parametric(s) : s, q, use_grid, gp);
}

int cmd_solve(const std::string& path, double q, bool use_grid, int nodes, double radius,
              double tau, bool policy_only) {
  Timer timer;
  const MarketScenario s = load_scenario(path, {.allow_degenerate_benchmark = true});

  const BenchmarkFeasibility feas = check_degenerate_benchmark(s, q);
  if (feas.safe_only_optimal) {
    json out;
    out["command"] = policy_only ? "policy" : "solve";
    out["scenario_digest"] = digest_hex(s);
    out["refused"] = true;
    out["reason"] =
        "benchmark is not volatile and inf(r - alpha) >= q: holding the safe security alone "
        "is optimal; no decay rate is computed";
    out["inf_r_minus_alpha"] = feas.inf_r_minus_alpha;
    out["meta"] = meta(timer);
    std::cout << out.dump(2) << "\n";
    return 1;
  }

  // degenerate benchmarks with inf(r - alpha) < q are allowed through:
  // the optimality results persist under part 1 of the nondegeneracy
  // condition in that regime
  DualSolution sol = solve_with_flags(s, q, use_grid, nodes, radius);
  PortfolioPolicy pol = build_policy(sol, use_grid ? as_parametric(s) : s);
  if (std::isfinite(tau) && tau > 0) pol = truncate_policy(pol, tau);

  json out;
  out["command"] = policy_only ? "policy" : "solve";
  out["scenario_digest"] = digest_hex(s);
  out["parameters"] = {{"q", q}, {"grid", use_grid}};
  out["lambda_hat"] = sol.lambda_hat;
  out["J"] = sol.J;
  out["boundary"] = sol.boundary;
  out["saddle_residual"] = sol.saddle_residual;
  out["policy"] = policy_json(pol);
  if (!policy_only) {
    const std::vector<Vector> probes = default_probes(s.l, 5.0);
    out["truncation_report"] = truncation_json(check_truncation_conditions(sol, s, probes));
    out["saddle_check"] = check_saddle(sol, use_grid ? as_parametric(s) : s);
    if (sol.gauss) {
      out["artifacts"] = {{"F", sol.gauss->F},
                          {"P", mat_json(sol.gauss->P)},
                          {"p2", vec_json(sol.gauss->p2)},
                          {"mstar", vec_json(sol.gauss->mstar)},
                          {"Sigma", mat_json(sol.gauss->Sigma)},
                          {"riccati_residual", sol.gauss->riccati_residual},
                          {"D_maxRe", sol.gauss->max_re_eig_D}};
    } else if (sol.grid) {
      out["artifacts"] = {{"Lambda", sol.grid->Lambda},
                          {"residual_inf", sol.grid->residual_inf},
                          {"R", sol.grid->R},
                          {"nodes", static_cast<int>(sol.grid->xs.size())}};
    }
    out["conditions"] = condition_json(check_all(s, default_probes(s.l), 5.0));
  }
  out["meta"] = meta(timer);
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_bellman(const std::string& path, double lambda, double radius, int nodes,
                bool check_boundary, const std::string& plot) {
  Timer timer;
  const MarketScenario s = as_parametric(load_scenario(path));
  GridParams gp;
  gp.N = nodes;
  gp.R = radius;
  GridSolution sol = solve_ergodic_hjb(lambda, s, gp);
  sol.m = stationary_density(lambda, sol, s);

  json header;
  header["command"] = "bellman";
  header["scenario_digest"] = digest_hex(s);
  header["parameters"] = {{"lambda", lambda}, {"radius", sol.R}, {"nodes", nodes}};
  header["Lambda"] = sol.Lambda;
  header["residual_inf"] = sol.residual_inf;
  header["iterations"] = sol.iterations;
  if (check_boundary) {
    GridParams wide = gp;
    wide.R = sol.R * 1.5;
    const double L15 = grid_rate(lambda, s, wide);
    header["boundary_sensitivity"] = {{"Lambda_R", sol.Lambda},
                                      {"Lambda_1p5R", L15},
                                      {"abs_change", std::abs(L15 - sol.Lambda)}};
  }
  header["meta"] = meta(timer);
  std::printf("# %s\n", header.dump().c_str());

  std::printf("x,f,fprime,m\n");
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < sol.xs.size(); ++i) {
    rows.push_back({sol.xs(i), sol.f(i), sol.fprime(i), sol.m(i)});
    std::printf("%s,%s,%s,%s\n", fmt17(sol.xs(i)).c_str(), fmt17(sol.f(i)).c_str(),
                fmt17(sol.fprime(i)).c_str(), fmt17(sol.m(i)).c_str());
  }
  emit_plot_data(plot, {"x", "f", "fprime", "m"}, rows);
  return 0;
}

int cmd_simulate(const std::string& path, double q, const std::vector<double>& horizons,
                 double dt, std::int64_t paths, std::uint64_t seed, bool tilted, double tau,
                 const std::string& policy_name, bool use_grid, int nodes, double radius,
                 const std::string& plot) {
  Timer timer;
  const MarketScenario s = load_scenario(path);

  // the tilt and the optimal policy both come from the dual solution
  std::optional<DualSolution> dual;
  std::optional<DriftTilt> tilt;
  if (tilted || policy_name == "optimal") {
    dual = solve_with_flags(s, q, use_grid, nodes, radius);
    if (tilted) tilt = make_tilt(*dual, use_grid ? as_parametric(s) : s);
  }

  SimConfig cfg;
  cfg.t_list = horizons;
  cfg.dt = dt;
  cfg.n_paths = paths;
  cfg.seed = seed;
  cfg.measure = tilted ? Measure::tilted : Measure::physical;
  cfg.q = q;
  if (policy_name == "optimal") {
    cfg.policy = build_policy(*dual, use_grid ? as_parametric(s) : s);
  } else if (policy_name == "kelly") {
    cfg.policy = kelly_policy(s);
  } else if (policy_name == "none") {
    PortfolioPolicy zero;
    zero.form = PortfolioPolicy::Form::linear;
    zero.K = Matrix::Zero(s.n, s.l);
    zero.k0 = Vector::Zero(s.n);
    cfg.policy = zero;
  } else {
    throw std::invalid_argument("unknown policy: " + policy_name);
  }
  if (std::isfinite(tau) && tau > 0) cfg.policy = truncate_policy(cfg.policy, tau);

  const std::vector<MCEstimate> est = estimate_shortfall(s, cfg, tilt);

  std::printf("t,p_hat,stderr,log_decay,ess\n");
  std::vector<std::vector<double>> rows;
  for (const auto& e : est) {
    rows.push_back({e.t, e.p_hat, e.stderr_, e.log_decay, e.ess});
    std::printf("%s,%s,%s,%s,%s\n", fmt17(e.t).c_str(), fmt17(e.p_hat).c_str(),
                fmt17(e.stderr_).c_str(), fmt17(e.log_decay).c_str(), fmt17(e.ess).c_str());
  }

  json footer;
  footer["command"] = "simulate";
  footer["scenario_digest"] = digest_hex(s);
  footer["parameters"] = {{"q", q},          {"t", horizons}, {"dt", dt},
                          {"paths", paths},  {"seed", seed},  {"tilted", tilted},
                          {"policy", policy_name}, {"grid", use_grid}};
  if (std::isfinite(tau)) footer["parameters"]["tau"] = tau;
  int positive = 0;
  for (const auto& e : est)
    if (e.p_hat > 0) ++positive;
  if (positive >= 3) {
    const DecayRegression reg = estimate_decay_rate(est);
    footer["regression"] = {{"slope", reg.slope},
                            {"intercept", reg.intercept},
                            {"stderr", reg.stderr_},
                            {"points", reg.points}};
  }
  if (dual) {
    footer["dual"] = {{"J", dual->J}, {"lambda_hat", dual->lambda_hat},
                      {"boundary", dual->boundary}};
  }
  footer["meta"] = meta(timer);
  std::printf("# %s\n", footer.dump().c_str());
  emit_plot_data(plot, {"t", "p_hat", "stderr", "log_decay", "ess"}, rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal-decay-rate toolkit for portfolio shortfall probabilities"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  const double inf = std::numeric_limits<double>::infinity();

  // validate
  auto* validate = app.add_subcommand("validate", "check model hypotheses, print the report");
  std::string v_path;
  double v_shell = 5.0, v_threshold = 1e-10;
  validate->add_option("scenario", v_path)->required();
  validate->add_option("--shell-radius", v_shell);
  validate->add_option("--threshold", v_threshold);

  // rate
  auto* rate = app.add_subcommand("rate", "rate function F on a lambda grid (CSV)");
  std::string r_path, r_plot;
  double r_lmin = 0.0, r_lmax = 2.0, r_radius = 0.0;
  int r_steps = 21, r_nodes = 801;
  bool r_grid = false, r_cross = false;
  rate->add_option("scenario", r_path)->required();
  rate->add_option("--lmin", r_lmin);
  rate->add_option("--lmax", r_lmax);
  rate->add_option("--steps", r_steps);
  rate->add_flag("--grid", r_grid, "use the 1-D grid solver instead of the closed form");
  rate->add_option("--nodes", r_nodes);
  rate->add_option("--radius", r_radius);
  rate->add_flag("--cross-check", r_cross, "compare grid and closed form at the middle lambda");
  rate->add_option("--emit-plot-data", r_plot);

  // solve / policy
  std::string s_path;
  double s_q = 0.0, s_radius = 0.0, s_tau = inf;
  int s_nodes = 2001;
  bool s_grid = false;
  auto add_solve_opts = [&](CLI::App* cmd) {
    cmd->add_option("scenario", s_path)->required();
    cmd->add_option("-q,--q", s_q, "shortfall threshold (log-growth per unit time)")->required();
    cmd->add_flag("--grid", s_grid);
    cmd->add_option("--nodes", s_nodes);
    cmd->add_option("--radius", s_radius);
    cmd->add_option("--tau", s_tau, "truncation radius for the reported policy");
  };
  auto* solve = app.add_subcommand("solve", "dual optimization: lambda_hat, J, policy");
  add_solve_opts(solve);
  auto* policy = app.add_subcommand("policy", "policy-only view of solve");
  add_solve_opts(policy);

  // bellman
  auto* bellman = app.add_subcommand("bellman", "grid solution of the ergodic Bellman equation");
  std::string b_path, b_plot;
  double b_lambda = 1.0, b_radius = 0.0;
  int b_nodes = 2001;
  bool b_check = false;
  bellman->add_option("scenario", b_path)->required();
  bellman->add_option("--lambda", b_lambda)->required();
  bellman->add_option("--radius", b_radius);
  bellman->add_option("--nodes", b_nodes);
  bellman->add_flag("--check-boundary", b_check, "re-solve at 1.5 R and report the change");
  bellman->add_option("--emit-plot-data", b_plot);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo shortfall estimates");
  std::string m_path, m_policy = "optimal", m_plot;
  double m_q = 0.0, m_dt = 0.01, m_tau = inf, m_radius = 0.0;
  std::vector<double> m_t = {50, 100, 200, 400};
  std::int64_t m_paths = 200000;
  std::uint64_t m_seed = 42;
  int m_nodes = 2001;
  bool m_tilted = false, m_grid = false;
  simulate->add_option("scenario", m_path)->required();
  simulate->add_option("-q,--q", m_q)->required();
  simulate->add_option("--t", m_t, "horizons")->delimiter(',');
  simulate->add_option("--dt", m_dt);
  simulate->add_option("--paths", m_paths);
  simulate->add_option("--seed", m_seed);
  simulate->add_flag("--tilted", m_tilted, "importance-sample under the optimal drift tilt");
  simulate->add_option("--tau", m_tau, "policy truncation radius");
  simulate->add_option("--policy", m_policy)->check(CLI::IsMember({"kelly", "optimal", "none"}));
  simulate->add_flag("--grid", m_grid);
  simulate->add_option("--nodes", m_nodes);
  simulate->add_option("--radius", m_radius);
  simulate->add_option("--emit-plot-data", m_plot);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  try {
    if (*validate) return cmd_validate(v_path, v_shell, v_threshold);
    if (*rate)
      return cmd_rate(r_path, r_lmin, r_lmax, r_steps, r_grid, r_nodes, r_radius, r_cross,
                      r_plot);
    if (*solve) return cmd_solve(s_path, s_q, s_grid, s_nodes, s_radius, s_tau, false);
    if (*policy) return cmd_solve(s_path, s_q, s_grid, s_nodes, s_radius, s_tau, true);
    if (*bellman) return cmd_bellman(b_path, b_lambda, b_radius, b_nodes, b_check, b_plot);
    if (*simulate)
      return cmd_simulate(m_path, m_q, m_t, m_dt, m_paths, m_seed, m_tilted, m_tau, m_policy,
                          m_grid, m_nodes, m_radius, m_plot);
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 3;
  } catch (const DimensionError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 3;
  } catch (const DefinitenessError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 3;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
