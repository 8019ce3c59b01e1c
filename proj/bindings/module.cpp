#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "shortfall/bellman1d.hpp"
#include "shortfall/conditions.hpp"
#include "shortfall/dual.hpp"
#include "shortfall/gaussian.hpp"
#include "shortfall/hamiltonian.hpp"
#include "shortfall/simulate.hpp"

namespace py = pybind11;
using namespace shortfall;

namespace {

SimConfig make_config(std::vector<double> t_list, double dt, std::int64_t n_paths,
                      std::uint64_t seed, bool tilted, const PortfolioPolicy& policy, double q) {
  SimConfig cfg;
  cfg.t_list = std::move(t_list);
  cfg.dt = dt;
  cfg.n_paths = n_paths;
  cfg.seed = seed;
  cfg.measure = tilted ? Measure::tilted : Measure::physical;
  cfg.policy = policy;
  cfg.q = q;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Shortfall decay-rate toolkit: optimal portfolios against a stochastic "
            "benchmark, closed-form and grid rate functions, importance-sampled "
            "Monte Carlo verification";

  py::register_exception<ParseError>(m, "ParseError");
  py::register_exception<DimensionError>(m, "DimensionError");
  py::register_exception<DefinitenessError>(m, "DefinitenessError");
  py::register_exception<SolverError>(m, "SolverError");

  py::class_<MarketScenario>(m, "MarketScenario")
      .def_readonly("n", &MarketScenario::n)
      .def_readonly("l", &MarketScenario::l)
      .def_readonly("k", &MarketScenario::k)
      .def_readonly("b", &MarketScenario::b)
      .def_readonly("beta", &MarketScenario::beta)
      .def_readonly("sigma", &MarketScenario::sigma)
      .def_readonly("x0", &MarketScenario::x0)
      .def_property_readonly("kind",
                             [](const MarketScenario& s) {
                               return s.kind == ScenarioKind::linear_gaussian
                                          ? "linear_gaussian"
                                          : "parametric_1d";
                             })
      .def("c", &MarketScenario::c)
      .def("is_affine", &MarketScenario::is_affine)
      .def("to_json", &scenario_to_json)
      .def("digest", &scenario_digest);

  py::class_<CoefficientFrame>(m, "CoefficientFrame")
      .def_readonly("x", &CoefficientFrame::x)
      .def_readonly("a", &CoefficientFrame::a)
      .def_readonly("r", &CoefficientFrame::r)
      .def_readonly("alpha", &CoefficientFrame::alpha)
      .def_readonly("theta", &CoefficientFrame::theta)
      .def_readonly("c", &CoefficientFrame::c);

  m.def("load_scenario",
        [](const std::string& path, bool allow_degenerate) {
          return load_scenario(path, {allow_degenerate});
        },
        py::arg("path"), py::arg("allow_degenerate_benchmark") = false);
  m.def("parse_scenario",
        [](const std::string& text, bool allow_degenerate) {
          return parse_scenario(text, {allow_degenerate});
        },
        py::arg("text"), py::arg("allow_degenerate_benchmark") = false);
  m.def("eval_coefficients", &eval_coefficients);
  m.def("as_linear", &as_linear);
  m.def("as_parametric", &as_parametric);

  py::class_<ConditionReport>(m, "ConditionReport")
      .def_readonly("ellipticity_min_eig_c", &ConditionReport::ellipticity_min_eig_c)
      .def_readonly("ellipticity_min_eig_ss", &ConditionReport::ellipticity_min_eig_ss)
      .def_readonly("n1_min_eig", &ConditionReport::n1_min_eig)
      .def_readonly("n2_min_value", &ConditionReport::n2_min_value)
      .def_readonly("stability_margin", &ConditionReport::stability_margin)
      .def_readonly("n1_passed", &ConditionReport::n1_passed)
      .def_readonly("n2_passed", &ConditionReport::n2_passed)
      .def_readonly("stability_passed", &ConditionReport::stability_passed)
      .def("all_passed", &ConditionReport::all_passed);

  m.def("check_conditions",
        [](const MarketScenario& s, double shell_radius) {
          return check_all(s, default_probes(s.l, shell_radius), shell_radius);
        },
        py::arg("scenario"), py::arg("shell_radius") = 5.0);
  m.def("nullspace_projector", &nullspace_projector);
  m.def("unhedgeable_projector", &unhedgeable_projector);

  m.def("log_ratio_drift", &log_ratio_drift);
  m.def("log_ratio_vol", &log_ratio_vol);
  m.def("optimal_portfolio", &optimal_portfolio);
  m.def("optimized_hamiltonian",
        py::overload_cast<double, const Vector&, const CoefficientFrame&>(
            &optimized_hamiltonian));
  m.def("effective_diffusion", &effective_diffusion);

  py::class_<RiccatiSolution>(m, "RiccatiSolution")
      .def_readonly("lam", &RiccatiSolution::lambda)
      .def_readonly("P", &RiccatiSolution::P)
      .def_readonly("p2", &RiccatiSolution::p2)
      .def_readonly("D", &RiccatiSolution::D)
      .def_readonly("F", &RiccatiSolution::F)
      .def_readonly("mstar", &RiccatiSolution::mstar)
      .def_readonly("Sigma", &RiccatiSolution::Sigma)
      .def_readonly("riccati_residual", &RiccatiSolution::riccati_residual)
      .def_readonly("max_re_eig_D", &RiccatiSolution::max_re_eig_D);

  m.def("gaussian_rate", &gaussian_rate);
  m.def("gaussian_rate_derivative", &gaussian_rate_derivative);

  py::class_<GridParams>(m, "GridParams")
      .def(py::init<>())
      .def_readwrite("R", &GridParams::R)
      .def_readwrite("N", &GridParams::N)
      .def_readwrite("tol", &GridParams::tol)
      .def_readwrite("max_iter", &GridParams::max_iter);

  py::class_<GridSolution>(m, "GridSolution")
      .def_readonly("lam", &GridSolution::lambda)
      .def_readonly("R", &GridSolution::R)
      .def_readonly("xs", &GridSolution::xs)
      .def_readonly("f", &GridSolution::f)
      .def_readonly("fprime", &GridSolution::fprime)
      .def_readonly("Lambda", &GridSolution::Lambda)
      .def_readonly("m", &GridSolution::m)
      .def_readonly("residual_inf", &GridSolution::residual_inf)
      .def_readonly("iterations", &GridSolution::iterations);

  m.def("solve_ergodic_hjb",
        [](double lambda, const MarketScenario& s, const GridParams& gp, bool with_density) {
          GridSolution sol = solve_ergodic_hjb(lambda, s, gp);
          if (with_density) sol.m = stationary_density(lambda, sol, s);
          return sol;
        },
        py::arg("lam"), py::arg("scenario"), py::arg("params") = GridParams{},
        py::arg("with_density") = true);
  m.def("grid_rate", &grid_rate);
  m.def("grid_rate_derivative", &grid_rate_derivative);
  m.def("default_radius", &default_radius);

  py::class_<PortfolioPolicy>(m, "PortfolioPolicy")
      .def_readonly("lambda_hat", &PortfolioPolicy::lambda_hat)
      .def_readonly("K", &PortfolioPolicy::K)
      .def_readonly("k0", &PortfolioPolicy::k0)
      .def_readonly("tau", &PortfolioPolicy::tau)
      .def_property_readonly("form",
                             [](const PortfolioPolicy& p) {
                               return p.form == PortfolioPolicy::Form::linear ? "linear"
                                                                              : "tabulated";
                             })
      .def("__call__", &PortfolioPolicy::evaluate);

  py::class_<DualSolution>(m, "DualSolution")
      .def_readonly("q", &DualSolution::q)
      .def_readonly("lambda_hat", &DualSolution::lambda_hat)
      .def_readonly("J", &DualSolution::J)
      .def_readonly("boundary", &DualSolution::boundary)
      .def_readonly("saddle_residual", &DualSolution::saddle_residual)
      .def_readonly("gauss", &DualSolution::gauss)
      .def_readonly("grid", &DualSolution::grid);

  m.def("solve_shortfall", &solve_shortfall, py::arg("scenario"), py::arg("q"),
        py::arg("use_grid") = false, py::arg("grid_params") = GridParams{});
  m.def("shortfall_rate",
        [](double q, const std::function<std::pair<double, double>(double)>& oracle,
           double lmax_init, bool stability_ok) {
          return shortfall_rate(q, oracle, lmax_init, stability_ok);
        },
        py::arg("q"), py::arg("oracle"), py::arg("lmax_init") = 1.0,
        py::arg("stability_ok") = true);
  m.def("build_policy", &build_policy);
  m.def("truncate_policy", &truncate_policy);
  m.def("kelly_policy", &kelly_policy);
  m.def("check_saddle", &check_saddle);

  py::class_<MCEstimate>(m, "MCEstimate")
      .def_readonly("t", &MCEstimate::t)
      .def_readonly("p_hat", &MCEstimate::p_hat)
      .def_readonly("stderr", &MCEstimate::stderr_)
      .def_readonly("log_decay", &MCEstimate::log_decay)
      .def_readonly("ess", &MCEstimate::ess)
      .def_readonly("flagged", &MCEstimate::flagged);

  py::class_<DriftTilt>(m, "DriftTilt").def_readonly("lambda_hat", &DriftTilt::lambda_hat);
  m.def("make_tilt", &make_tilt);

  py::class_<DecayRegression>(m, "DecayRegression")
      .def_readonly("slope", &DecayRegression::slope)
      .def_readonly("intercept", &DecayRegression::intercept)
      .def_readonly("stderr", &DecayRegression::stderr_)
      .def_readonly("points", &DecayRegression::points);

  m.def("estimate_shortfall",
        [](const MarketScenario& s, std::vector<double> t_list, double dt,
           std::int64_t n_paths, std::uint64_t seed, double q, bool tilted,
           const PortfolioPolicy& policy, const std::optional<DriftTilt>& tilt) {
          const SimConfig cfg =
              make_config(std::move(t_list), dt, n_paths, seed, tilted, policy, q);
          return estimate_shortfall(s, cfg, tilt);
        },
        py::arg("scenario"), py::arg("t_list"), py::arg("dt"), py::arg("n_paths"),
        py::arg("seed"), py::arg("q"), py::arg("tilted"), py::arg("policy"),
        py::arg("tilt") = std::nullopt);
  m.def("estimate_decay_rate", &estimate_decay_rate);
  m.def("ergodic_average",
        [](const MarketScenario& s, const DriftTilt& tilt, const Matrix& H, const Vector& g,
           double c, double t_total, double dt, std::uint64_t seed) {
          const QuadraticForm q{H, g, c};
          const ErgodicAverage avg = ergodic_average_diagnostic(s, tilt, q, t_total, dt, seed);
          return std::make_pair(avg.time_average, avg.stderr_);
        },
        py::arg("scenario"), py::arg("tilt"), py::arg("H"), py::arg("g"), py::arg("c"),
        py::arg("t_total"), py::arg("dt"), py::arg("seed"));

  m.attr("__version__") = "0.1.0";
}
