#include "shortfall/scenario.hpp"

#include <Eigen/Eigenvalues>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace shortfall {

using json = nlohmann::ordered_json;

namespace {

Matrix parse_matrix(const json& j, int rows, int cols, const std::string& name) {
  if (!j.is_array()) throw ParseError(name + ": expected a nested array");
  Matrix m(rows, cols);
  if (static_cast<int>(j.size()) != rows)
    throw DimensionError(name + ": expected " + std::to_string(rows) + " rows, got " +
                         std::to_string(j.size()));
  for (int i = 0; i < rows; ++i) {
    const json& row = j[i];
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      throw DimensionError(name + ": row " + std::to_string(i) + " must have " +
                           std::to_string(cols) + " entries");
    for (int jcol = 0; jcol < cols; ++jcol) m(i, jcol) = row[jcol].get<double>();
  }
  return m;
}

Vector parse_vector(const json& j, int size, const std::string& name) {
  if (!j.is_array() || static_cast<int>(j.size()) != size)
    throw DimensionError(name + ": expected " + std::to_string(size) + " entries");
  Vector v(size);
  for (int i = 0; i < size; ++i) v(i) = j[i].get<double>();
  return v;
}

SaturatingCoeff parse_coeff(const json& j, const std::string& name) {
  if (!j.is_array() || j.size() != 4)
    throw ParseError(name + ": expected [c0, c1, c2, c3]");
  SaturatingCoeff c;
  c.c0 = j[0].get<double>();
  c.c1 = j[1].get<double>();
  c.c2 = j[2].get<double>();
  c.c3 = j[3].get<double>();
  return c;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

json vector_to_json(const Vector& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

double min_eigenvalue(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  return es.eigenvalues().minCoeff();
}

}  // namespace

bool MarketScenario::is_affine() const {
  if (kind == ScenarioKind::linear_gaussian) return true;
  for (const auto& f : par.a)
    if (!f.is_affine()) return false;
  return par.r.is_affine() && par.alpha.is_affine() && par.theta.is_affine();
}

void validate_scenario(const MarketScenario& s, LoadOptions opts) {
  if (s.n < 1 || s.l < 1 || s.k < 1)
    throw DimensionError("dims: n, l, k must all be >= 1");
  if (s.b.rows() != s.n || s.b.cols() != s.k)
    throw DimensionError("b must be n x k");
  if (s.beta.size() != s.k) throw DimensionError("beta must have k entries");
  if (s.sigma.rows() != s.l || s.sigma.cols() != s.k)
    throw DimensionError("sigma must be l x k");
  if (s.x0.size() != s.l) throw DimensionError("x0 must have l entries");

  if (s.kind == ScenarioKind::linear_gaussian) {
    const auto& L = s.lin;
    if (L.A1.rows() != s.n || L.A1.cols() != s.l) throw DimensionError("A1 must be n x l");
    if (L.a2.size() != s.n) throw DimensionError("a2 must have n entries");
    if (L.r1.size() != s.l) throw DimensionError("r1 must have l entries");
    if (L.alpha1.size() != s.l) throw DimensionError("alpha1 must have l entries");
    if (L.Theta1.rows() != s.l || L.Theta1.cols() != s.l)
      throw DimensionError("Theta1 must be l x l");
    if (L.theta2.size() != s.l) throw DimensionError("theta2 must have l entries");
  } else {
    if (s.l != 1) throw DimensionError("parametric_1d requires l = 1");
    if (static_cast<int>(s.par.a.size()) != s.n)
      throw DimensionError("parametric a must have one coefficient family per asset");
    for (const auto& f : s.par.a)
      if (!std::isfinite(f.c0) || !std::isfinite(f.c1) || !std::isfinite(f.c2) ||
          !std::isfinite(f.c3))
        throw ParseError("parametric coefficients must be finite");
  }

  const double eig_c = min_eigenvalue(s.b * s.b.transpose());
  if (eig_c <= 0.0)
    throw DefinitenessError("b b^T is not positive definite (min eigenvalue " +
                            std::to_string(eig_c) + ")");
  const double eig_ss = min_eigenvalue(s.sigma * s.sigma.transpose());
  if (eig_ss <= 0.0)
    throw DefinitenessError("sigma sigma^T is not positive definite (min eigenvalue " +
                            std::to_string(eig_ss) + ")");
  if (!opts.allow_degenerate_benchmark && s.beta.squaredNorm() == 0.0)
    throw DefinitenessError("benchmark is not volatile (|beta| = 0)");
}

MarketScenario parse_scenario(const std::string& text, LoadOptions opts) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ParseError(std::string("scenario parse failure: ") + e.what());
  }

  MarketScenario s;
  try {
    const json& dims = j.at("dims");
    s.n = dims.at("n").get<int>();
    s.l = dims.at("l").get<int>();
    s.k = dims.at("k").get<int>();
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "linear_gaussian")
      s.kind = ScenarioKind::linear_gaussian;
    else if (kind == "parametric_1d")
      s.kind = ScenarioKind::parametric_1d;
    else
      throw ParseError("unknown scenario kind: " + kind);

    if (s.n < 1 || s.l < 1 || s.k < 1) throw DimensionError("dims: n, l, k must all be >= 1");

    if (s.kind == ScenarioKind::linear_gaussian) {
      const json& lin = j.at("linear");
      s.lin.A1 = parse_matrix(lin.at("A1"), s.n, s.l, "A1");
      s.lin.a2 = parse_vector(lin.at("a2"), s.n, "a2");
      s.lin.r1 = parse_vector(lin.at("r1"), s.l, "r1");
      s.lin.r2 = lin.at("r2").get<double>();
      s.lin.alpha1 = parse_vector(lin.at("alpha1"), s.l, "alpha1");
      s.lin.alpha2 = lin.at("alpha2").get<double>();
      s.lin.Theta1 = parse_matrix(lin.at("Theta1"), s.l, s.l, "Theta1");
      s.lin.theta2 = parse_vector(lin.at("theta2"), s.l, "theta2");
      s.b = parse_matrix(lin.at("b"), s.n, s.k, "b");
      s.beta = parse_vector(lin.at("beta"), s.k, "beta");
      s.sigma = parse_matrix(lin.at("sigma"), s.l, s.k, "sigma");
    } else {
      if (s.l != 1) throw DimensionError("parametric_1d requires l = 1");
      const json& par = j.at("parametric_1d");
      const json& ja = par.at("a");
      if (!ja.is_array()) throw ParseError("parametric a: expected an array of families");
      // either one family (n = 1 shorthand) or one per asset
      if (!ja.empty() && ja[0].is_array()) {
        for (const auto& f : ja) s.par.a.push_back(parse_coeff(f, "a"));
      } else {
        s.par.a.push_back(parse_coeff(ja, "a"));
      }
      s.par.r = parse_coeff(par.at("r"), "r");
      s.par.alpha = parse_coeff(par.at("alpha"), "alpha");
      s.par.theta = parse_coeff(par.at("theta"), "theta");
      s.b = parse_matrix(par.at("b"), s.n, s.k, "b");
      s.beta = parse_vector(par.at("beta"), s.k, "beta");
      s.sigma = parse_matrix(par.at("sigma"), s.l, s.k, "sigma");
    }
    s.x0 = parse_vector(j.at("x0"), s.l, "x0");
  } catch (const json::exception& e) {
    throw ParseError(std::string("scenario schema error: ") + e.what());
  }

  validate_scenario(s, opts);
  return s;
}

MarketScenario load_scenario(const std::filesystem::path& path, LoadOptions opts) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), opts);
}

std::string scenario_to_json(const MarketScenario& s) {
  json j;
  j["dims"] = {{"n", s.n}, {"l", s.l}, {"k", s.k}};
  j["kind"] = s.kind == ScenarioKind::linear_gaussian ? "linear_gaussian" : "parametric_1d";
  if (s.kind == ScenarioKind::linear_gaussian) {
    json lin;
    lin["A1"] = matrix_to_json(s.lin.A1);
    lin["a2"] = vector_to_json(s.lin.a2);
    lin["r1"] = vector_to_json(s.lin.r1);
    lin["r2"] = s.lin.r2;
    lin["alpha1"] = vector_to_json(s.lin.alpha1);
    lin["alpha2"] = s.lin.alpha2;
    lin["Theta1"] = matrix_to_json(s.lin.Theta1);
    lin["theta2"] = vector_to_json(s.lin.theta2);
    lin["b"] = matrix_to_json(s.b);
    lin["beta"] = vector_to_json(s.beta);
    lin["sigma"] = matrix_to_json(s.sigma);
    j["linear"] = lin;
  } else {
    json par;
    json fams = json::array();
    for (const auto& f : s.par.a) fams.push_back({f.c0, f.c1, f.c2, f.c3});
    par["a"] = fams;
    par["r"] = {s.par.r.c0, s.par.r.c1, s.par.r.c2, s.par.r.c3};
    par["alpha"] = {s.par.alpha.c0, s.par.alpha.c1, s.par.alpha.c2, s.par.alpha.c3};
    par["theta"] = {s.par.theta.c0, s.par.theta.c1, s.par.theta.c2, s.par.theta.c3};
    par["b"] = matrix_to_json(s.b);
    par["beta"] = vector_to_json(s.beta);
    par["sigma"] = matrix_to_json(s.sigma);
    j["parametric_1d"] = par;
  }
  j["x0"] = vector_to_json(s.x0);
  return j.dump(2);
}

void save_scenario(const MarketScenario& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write scenario file: " + path.string());
  out << scenario_to_json(s) << "\n";
}

CoefficientFrame eval_coefficients(const MarketScenario& s, const Vector& x) {
  if (x.size() != s.l) throw DimensionError("factor point has wrong dimension");
  if (!x.allFinite()) throw std::invalid_argument("factor point must be finite");

  CoefficientFrame f;
  f.x = x;
  if (s.kind == ScenarioKind::linear_gaussian) {
    f.a = s.lin.A1 * x + s.lin.a2;
    f.r = s.lin.r1.dot(x) + s.lin.r2;
    f.alpha = s.lin.alpha1.dot(x) + s.lin.alpha2;
    f.theta = s.lin.Theta1 * x + s.lin.theta2;
  } else {
    const double xv = x(0);
    f.a.resize(s.n);
    for (int i = 0; i < s.n; ++i) f.a(i) = s.par.a[i](xv);
    f.r = s.par.r(xv);
    f.alpha = s.par.alpha(xv);
    f.theta = Vector::Constant(1, s.par.theta(xv));
  }
  f.b = s.b;
  f.beta = s.beta;
  f.sigma = s.sigma;
  f.c = s.b * s.b.transpose();
  return f;
}

MarketScenario as_linear(const MarketScenario& s) {
  if (s.kind == ScenarioKind::linear_gaussian) return s;
  if (!s.is_affine())
    throw std::invalid_argument("scenario has saturating coefficients; no linear form exists");
  MarketScenario out = s;
  out.kind = ScenarioKind::linear_gaussian;
  out.lin.A1.resize(s.n, 1);
  out.lin.a2.resize(s.n);
  for (int i = 0; i < s.n; ++i) {
    out.lin.A1(i, 0) = s.par.a[i].c1;
    out.lin.a2(i) = s.par.a[i].c0;
  }
  out.lin.r1 = Vector::Constant(1, s.par.r.c1);
  out.lin.r2 = s.par.r.c0;
  out.lin.alpha1 = Vector::Constant(1, s.par.alpha.c1);
  out.lin.alpha2 = s.par.alpha.c0;
  out.lin.Theta1 = Matrix::Constant(1, 1, s.par.theta.c1);
  out.lin.theta2 = Vector::Constant(1, s.par.theta.c0);
  out.par = {};
  return out;
}

MarketScenario as_parametric(const MarketScenario& s) {
  if (s.kind == ScenarioKind::parametric_1d) return s;
  if (s.l != 1) throw std::invalid_argument("only scalar-factor scenarios have a parametric form");
  MarketScenario out = s;
  out.kind = ScenarioKind::parametric_1d;
  out.par.a.clear();
  for (int i = 0; i < s.n; ++i)
    out.par.a.push_back({s.lin.a2(i), s.lin.A1(i, 0), 0.0, 0.0});
  out.par.r = {s.lin.r2, s.lin.r1(0), 0.0, 0.0};
  out.par.alpha = {s.lin.alpha2, s.lin.alpha1(0), 0.0, 0.0};
  out.par.theta = {s.lin.theta2(0), s.lin.Theta1(0, 0), 0.0, 0.0};
  out.lin = {};
  return out;
}

std::uint64_t scenario_digest(const MarketScenario& s) {
  const std::string canon = scenario_to_json(s);
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace shortfall
