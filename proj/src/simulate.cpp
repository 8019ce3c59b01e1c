#include "shortfall/simulate.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <thread>

#include "shortfall/rng.hpp"

namespace shortfall {

namespace {

constexpr double kExplosionBound = 1e6;

// Flat, allocation-free mirrors of the scenario, policies and tilt for the
// inner Euler loop. All loops below run over n, l, k <= a dozen entries.
struct CompiledModel {
  int n = 0, l = 0, k = 0;
  bool linear = true;
  // linear coefficients
  std::vector<double> A1, theta1;           // n*l / l*l row-major
  std::vector<double> a2, r1, alpha1, theta2;
  double r2 = 0, alpha2 = 0;
  // parametric coefficients (l = 1)
  std::vector<SaturatingCoeff> pa;
  SaturatingCoeff pr, palpha, ptheta;
  // constant volatilities
  std::vector<double> b, sigma;             // n*k / l*k row-major
  std::vector<double> beta;                 // k
  std::vector<double> c;                    // n*n row-major
  double half_beta2 = 0;

  void eval(const double* x, double* a, double& r, double& alpha, double* theta) const {
    if (linear) {
      for (int i = 0; i < n; ++i) {
        double acc = a2[i];
        for (int j = 0; j < l; ++j) acc += A1[i * l + j] * x[j];
        a[i] = acc;
      }
      r = r2;
      alpha = alpha2;
      for (int j = 0; j < l; ++j) {
        r += r1[j] * x[j];
        alpha += alpha1[j] * x[j];
      }
      for (int i = 0; i < l; ++i) {
        double acc = theta2[i];
        for (int j = 0; j < l; ++j) acc += theta1[i * l + j] * x[j];
        theta[i] = acc;
      }
    } else {
      for (int i = 0; i < n; ++i) a[i] = pa[i](x[0]);
      r = pr(x[0]);
      alpha = palpha(x[0]);
      theta[0] = ptheta(x[0]);
    }
  }
};

CompiledModel compile_model(const MarketScenario& s) {
  CompiledModel m;
  m.n = s.n;
  m.l = s.l;
  m.k = s.k;
  m.linear = s.kind == ScenarioKind::linear_gaussian;
  auto flat = [](const Matrix& mat) {
    std::vector<double> out(mat.size());
    for (int i = 0; i < mat.rows(); ++i)
      for (int j = 0; j < mat.cols(); ++j) out[i * mat.cols() + j] = mat(i, j);
    return out;
  };
  if (m.linear) {
    m.A1 = flat(s.lin.A1);
    m.a2.assign(s.lin.a2.data(), s.lin.a2.data() + s.n);
    m.r1.assign(s.lin.r1.data(), s.lin.r1.data() + s.l);
    m.alpha1.assign(s.lin.alpha1.data(), s.lin.alpha1.data() + s.l);
    m.r2 = s.lin.r2;
    m.alpha2 = s.lin.alpha2;
    m.theta1 = flat(s.lin.Theta1);
    m.theta2.assign(s.lin.theta2.data(), s.lin.theta2.data() + s.l);
  } else {
    m.pa = s.par.a;
    m.pr = s.par.r;
    m.palpha = s.par.alpha;
    m.ptheta = s.par.theta;
  }
  m.b = flat(s.b);
  m.sigma = flat(s.sigma);
  m.beta.assign(s.beta.data(), s.beta.data() + s.k);
  m.c = flat(s.b * s.b.transpose());
  m.half_beta2 = 0.5 * s.beta.squaredNorm();
  return m;
}

struct CompiledPolicy {
  bool linear = true;
  double tau = std::numeric_limits<double>::infinity();
  std::vector<double> K;   // n*l row-major
  std::vector<double> k0;  // n
  // tabulated (l = 1)
  double xlo = 0, inv_h = 0;
  int nodes = 0;
  std::vector<double> table;  // node-major: table[node * n + i]

  void eval(const double* x, int n, int l, double* u) const {
    double norm2 = 0;
    for (int j = 0; j < l; ++j) norm2 += x[j] * x[j];
    if (norm2 > tau * tau) {
      std::fill(u, u + n, 0.0);
      return;
    }
    if (linear) {
      for (int i = 0; i < n; ++i) {
        double acc = k0[i];
        for (int j = 0; j < l; ++j) acc += K[i * l + j] * x[j];
        u[i] = acc;
      }
    } else {
      double pos = (x[0] - xlo) * inv_h;
      int idx = static_cast<int>(std::floor(pos));
      idx = std::max(0, std::min(nodes - 2, idx));
      const double t = pos - idx;
      const double* lo = table.data() + idx * n;
      const double* hi = lo + n;
      for (int i = 0; i < n; ++i) u[i] = lo[i] * (1.0 - t) + hi[i] * t;
    }
  }
};

CompiledPolicy compile_policy(const PortfolioPolicy& p, int n) {
  CompiledPolicy cp;
  cp.tau = p.tau;
  if (p.form == PortfolioPolicy::Form::linear) {
    cp.linear = true;
    cp.K.resize(p.K.size());
    for (int i = 0; i < p.K.rows(); ++i)
      for (int j = 0; j < p.K.cols(); ++j) cp.K[i * p.K.cols() + j] = p.K(i, j);
    cp.k0.assign(p.k0.data(), p.k0.data() + p.k0.size());
  } else {
    cp.linear = false;
    cp.nodes = static_cast<int>(p.xs.size());
    cp.xlo = p.xs(0);
    cp.inv_h = 1.0 / (p.xs(1) - p.xs(0));
    cp.table.resize(static_cast<size_t>(cp.nodes) * n);
    for (int j = 0; j < cp.nodes; ++j)
      for (int i = 0; i < n; ++i) cp.table[static_cast<size_t>(j) * n + i] = p.u_table(i, j);
  }
  return cp;
}

struct CompiledTilt {
  double lambda = 0;
  CompiledPolicy u_hat;
  bool linear_grad = true;
  std::vector<double> P;   // l*l row-major
  std::vector<double> p2;  // l
  double xlo = 0, inv_h = 0;
  int nodes = 0;
  std::vector<double> fprime;

  void grad_f(const double* x, int l, double* gf) const {
    if (linear_grad) {
      for (int i = 0; i < l; ++i) {
        double acc = p2[i];
        for (int j = 0; j < l; ++j) acc += P[i * l + j] * x[j];
        gf[i] = acc;
      }
    } else {
      double pos = (x[0] - xlo) * inv_h;
      int idx = static_cast<int>(std::floor(pos));
      idx = std::max(0, std::min(nodes - 2, idx));
      const double t = pos - idx;
      gf[0] = fprime[idx] * (1.0 - t) + fprime[idx + 1] * t;
    }
  }
};

CompiledTilt compile_tilt(const DriftTilt& tilt, int n) {
  CompiledTilt ct;
  ct.lambda = tilt.lambda_hat;
  ct.u_hat = compile_policy(tilt.u_hat, n);
  ct.linear_grad = tilt.linear_grad;
  if (tilt.linear_grad) {
    ct.P.resize(tilt.P.size());
    for (int i = 0; i < tilt.P.rows(); ++i)
      for (int j = 0; j < tilt.P.cols(); ++j) ct.P[i * tilt.P.cols() + j] = tilt.P(i, j);
    ct.p2.assign(tilt.p2.data(), tilt.p2.data() + tilt.p2.size());
  } else {
    ct.nodes = static_cast<int>(tilt.xs.size());
    ct.xlo = tilt.xs(0);
    ct.inv_h = 1.0 / (tilt.xs(1) - tilt.xs(0));
    ct.fprime.assign(tilt.fprime.data(), tilt.fprime.data() + tilt.fprime.size());
  }
  return ct;
}

void validate_config(const SimConfig& cfg) {
  if (cfg.t_list.empty()) throw std::invalid_argument("t_list must be nonempty");
  if (!std::is_sorted(cfg.t_list.begin(), cfg.t_list.end()) ||
      cfg.t_list.front() <= 0)
    throw std::invalid_argument("t_list must be positive and increasing");
  if (!(cfg.dt > 0)) throw std::invalid_argument("dt must be positive");
  if (cfg.dt > cfg.t_list.front() / 100.0)
    throw std::invalid_argument("dt too coarse: need dt <= min(t)/100");
  if (cfg.n_paths < 100) throw std::invalid_argument("n_paths must be at least 100");
}

}  // namespace

int worker_count() {
  if (const char* env = std::getenv("SHORTFALL_LD_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

Vector DriftTilt::grad_f(const Vector& x) const {
  if (linear_grad) return P * x + p2;
  const int N = static_cast<int>(xs.size());
  const double h = xs(1) - xs(0);
  int i = static_cast<int>(std::floor((x(0) - xs(0)) / h));
  i = std::max(0, std::min(N - 2, i));
  const double t = (x(0) - xs(i)) / h;
  return Vector::Constant(1, fprime(i) * (1.0 - t) + fprime(i + 1) * t);
}

DriftTilt make_tilt(const DualSolution& sol, const MarketScenario& s) {
  DriftTilt tilt;
  tilt.lambda_hat = sol.lambda_hat;
  tilt.u_hat = build_policy(sol, s);
  if (sol.gauss) {
    tilt.linear_grad = true;
    tilt.P = sol.gauss->P;
    tilt.p2 = sol.gauss->p2;
  } else if (sol.grid) {
    tilt.linear_grad = false;
    tilt.xs = sol.grid->xs;
    tilt.fprime = sol.grid->fprime;
  } else {
    throw std::invalid_argument("dual solution carries no artifacts");
  }
  return tilt;
}

PathOutputs simulate_ensemble(const MarketScenario& s, const SimConfig& cfg,
                              const std::optional<DriftTilt>& tilt,
                              const std::vector<PortfolioPolicy>& policies) {
  validate_config(cfg);
  if (policies.empty()) throw std::invalid_argument("need at least one policy");
  const bool tilted = cfg.measure == Measure::tilted;
  if (tilted && !tilt) throw std::invalid_argument("tilted run requires a DriftTilt");

  const CompiledModel model = compile_model(s);
  std::vector<CompiledPolicy> cpols;
  for (const auto& p : policies) cpols.push_back(compile_policy(p, s.n));
  CompiledTilt ctilt;
  if (tilted) ctilt = compile_tilt(*tilt, s.n);

  const int n = s.n, l = s.l, k = s.k;
  const double dt = cfg.dt, sqrt_dt = std::sqrt(dt);
  const int np = static_cast<int>(cpols.size());
  const int nh = static_cast<int>(cfg.t_list.size());
  const std::int64_t paths = cfg.n_paths;

  std::vector<std::int64_t> horizon_steps(nh);
  for (int h = 0; h < nh; ++h)
    horizon_steps[h] = std::llround(cfg.t_list[h] / dt);

  PathOutputs out;
  out.t = cfg.t_list;
  out.L.assign(np, std::vector<std::vector<double>>(nh, std::vector<double>(paths, 0.0)));
  if (tilted) out.log_weight.assign(nh, std::vector<double>(paths, 0.0));
  out.x_final.assign(static_cast<size_t>(paths) * l, 0.0);
  out.flagged.assign(paths, 0);

  // scalar fast path: one asset, one factor, affine model, linear
  // policies and tilt; this is the shape of the long benchmark runs
  bool scalar_path = n == 1 && l == 1 && k <= 16 && model.linear;
  for (const auto& cp : cpols) scalar_path = scalar_path && cp.linear;
  if (tilted) scalar_path = scalar_path && ctilt.linear_grad && ctilt.u_hat.linear;

  auto run_block_scalar = [&](std::int64_t begin, std::int64_t end) {
    const double A1 = model.A1[0], a2 = model.a2[0];
    const double r1 = model.r1[0], r2 = model.r2;
    const double al1 = model.alpha1[0], al2 = model.alpha2;
    const double th1 = model.theta1[0], th2 = model.theta2[0];
    const double cc = model.c[0], hb2 = model.half_beta2;
    const double x0 = s.x0(0);
    const double lamT = tilted ? ctilt.lambda : 0.0;
    const double Pg = tilted ? ctilt.P[0] : 0.0;
    const double p2g = tilted ? ctilt.p2[0] : 0.0;
    const double Kh = tilted ? ctilt.u_hat.K[0] : 0.0;
    const double k0h = tilted ? ctilt.u_hat.k0[0] : 0.0;
    const double tauh = tilted ? ctilt.u_hat.tau : 0.0;
    double Kp[16], k0p[16], taup[16];
    for (int p = 0; p < np; ++p) {
      Kp[p] = cpols[p].K[0];
      k0p[p] = cpols[p].k0[0];
      taup[p] = cpols[p].tau;
    }
    const double* bv = model.b.data();
    const double* sv = model.sigma.data();
    const double* bev = model.beta.data();

    double d[16], w[16], Lacc[16];
    for (std::int64_t path = begin; path < end; ++path) {
      NormalStream rng(cfg.seed, static_cast<std::uint64_t>(path));
      double x = x0;
      for (int p = 0; p < np; ++p) Lacc[p] = 0.0;
      double logw = 0.0;
      bool flagged = false;

      std::int64_t step = 0;
      for (int h = 0; h < nh; ++h) {
        const std::int64_t target = horizon_steps[h];
        for (; step < target && !flagged; ++step) {
          const double a = A1 * x + a2;
          const double r = r1 * x + r2;
          const double excess = a - r;
          const double base = r - (al1 * x + al2) + hb2;
          const double theta = th1 * x + th2;

          double ddw = 0, dd = 0, bw = 0, betaw = 0, sw = 0;
          if (tilted) {
            const double uhv = (std::abs(x) > tauh) ? 0.0 : Kh * x + k0h;
            const double gf = Pg * x + p2g;
            for (int j = 0; j < k; ++j) {
              const double dW = rng.next() * sqrt_dt;
              const double dj = -lamT * (bv[j] * uhv - bev[j]) + sv[j] * gf;
              d[j] = dj;
              ddw += dj * dW;
              dd += dj * dj;
              const double wj = dW + dj * dt;
              w[j] = wj;
              bw += bv[j] * wj;
              betaw += bev[j] * wj;
              sw += sv[j] * wj;
            }
            logw -= ddw + 0.5 * dd * dt;
          } else {
            for (int j = 0; j < k; ++j) {
              const double wj = rng.next() * sqrt_dt;
              bw += bv[j] * wj;
              betaw += bev[j] * wj;
              sw += sv[j] * wj;
            }
          }

          for (int p = 0; p < np; ++p) {
            const double up = (std::abs(x) > taup[p]) ? 0.0 : Kp[p] * x + k0p[p];
            const double M = up * excess - 0.5 * cc * up * up + base;
            Lacc[p] += M * dt + up * bw - betaw;
          }

          x += theta * dt + sw;
          if (!(std::abs(x) < kExplosionBound)) flagged = true;
        }

        const double t = cfg.t_list[h];
        for (int p = 0; p < np; ++p) out.L[p][h][path] = Lacc[p] / t;
        if (tilted) out.log_weight[h][path] = logw;
      }
      out.x_final[static_cast<size_t>(path)] = x;
      out.flagged[path] = flagged ? 1 : 0;
    }
  };

  auto run_block = [&](std::int64_t begin, std::int64_t end) {
    if (scalar_path && np <= 16) {
      run_block_scalar(begin, end);
      return;
    }
    // per-worker scratch, reused across paths
    std::vector<double> x(l), xn(l), theta(l), gf(l), a(n);
    std::vector<double> u(n), uh(n), Nh(k), d(k), w(k), bw(n), Lacc(np);

    for (std::int64_t path = begin; path < end; ++path) {
      NormalStream rng(cfg.seed, static_cast<std::uint64_t>(path));
      for (int j = 0; j < l; ++j) x[j] = s.x0(j);
      std::fill(Lacc.begin(), Lacc.end(), 0.0);
      double logw = 0.0;
      bool flagged = false;

      std::int64_t step = 0;
      for (int h = 0; h < nh; ++h) {
        const std::int64_t target = horizon_steps[h];
        for (; step < target && !flagged; ++step) {
          double r, alpha;
          model.eval(x.data(), a.data(), r, alpha, theta.data());

          if (tilted) {
            ctilt.u_hat.eval(x.data(), n, l, uh.data());
            for (int j = 0; j < k; ++j) {
              double acc = -model.beta[j];
              for (int i = 0; i < n; ++i) acc += model.b[i * k + j] * uh[i];
              Nh[j] = acc;
            }
            ctilt.grad_f(x.data(), l, gf.data());
            for (int j = 0; j < k; ++j) {
              double acc = -ctilt.lambda * Nh[j];
              for (int i = 0; i < l; ++i) acc += model.sigma[i * k + j] * gf[i];
              d[j] = acc;
            }
          }

          // draw the increments and project them once; every policy then
          // needs only the n-dimensional contraction u . (b w) - beta . w
          double ddw = 0, dd = 0, betaw = 0;
          for (int j = 0; j < k; ++j) {
            const double dW = rng.next() * sqrt_dt;
            double wj = dW;
            if (tilted) {
              ddw += d[j] * dW;
              dd += d[j] * d[j];
              wj += d[j] * dt;
            }
            w[j] = wj;
            betaw += model.beta[j] * wj;
          }
          if (tilted) logw -= ddw + 0.5 * dd * dt;
          for (int i = 0; i < n; ++i) {
            double acc = 0;
            for (int j = 0; j < k; ++j) acc += model.b[i * k + j] * w[j];
            bw[i] = acc;
          }

          for (int p = 0; p < np; ++p) {
            cpols[p].eval(x.data(), n, l, u.data());
            double drift = r - alpha + model.half_beta2;
            double proj = -betaw;
            for (int i = 0; i < n; ++i) {
              drift += u[i] * (a[i] - r);
              double cu = 0;
              for (int j = 0; j < n; ++j) cu += model.c[i * n + j] * u[j];
              drift -= 0.5 * u[i] * cu;
              proj += u[i] * bw[i];
            }
            Lacc[p] += drift * dt + proj;
          }

          double norm2 = 0;
          for (int i = 0; i < l; ++i) {
            double diff = theta[i] * dt;
            for (int j = 0; j < k; ++j) diff += model.sigma[i * k + j] * w[j];
            xn[i] = x[i] + diff;
            norm2 += xn[i] * xn[i];
          }
          std::swap(x, xn);
          if (!(norm2 < kExplosionBound * kExplosionBound)) flagged = true;
        }

        const double t = cfg.t_list[h];
        for (int p = 0; p < np; ++p) out.L[p][h][path] = Lacc[p] / t;
        if (tilted) out.log_weight[h][path] = logw;
      }
      for (int j = 0; j < l; ++j) out.x_final[static_cast<size_t>(path) * l + j] = x[j];
      out.flagged[path] = flagged ? 1 : 0;
    }
  };

  const int workers = std::min<std::int64_t>(worker_count(), paths);
  if (workers <= 1) {
    run_block(0, paths);
  } else {
    std::vector<std::thread> pool;
    const std::int64_t chunk = (paths + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const std::int64_t begin = w * chunk;
      const std::int64_t end = std::min<std::int64_t>(paths, begin + chunk);
      if (begin < end) pool.emplace_back(run_block, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  out.flagged_count = 0;
  for (auto f : out.flagged) out.flagged_count += f;
  if (out.flagged_count * 1000 > paths)
    throw SolverError("more than 0.1% of paths exploded (|X| > 1e6); reduce dt or check the "
                      "stability condition");
  return out;
}

PathOutputs simulate_paths(const MarketScenario& s, const SimConfig& cfg,
                           const std::optional<DriftTilt>& tilt) {
  return simulate_ensemble(s, cfg, tilt, {cfg.policy});
}

std::vector<MCEstimate> estimates_from(const PathOutputs& out, int policy_index, double q,
                                       Measure measure) {
  const int nh = static_cast<int>(out.t.size());
  const std::int64_t paths = static_cast<std::int64_t>(out.flagged.size());
  std::vector<MCEstimate> est(nh);
  for (int h = 0; h < nh; ++h) {
    MCEstimate& e = est[h];
    e.t = out.t[h];
    e.flagged = out.flagged_count;
    const auto& L = out.L[policy_index][h];
    std::int64_t used = 0;
    if (measure == Measure::physical) {
      std::int64_t hits = 0;
      for (std::int64_t i = 0; i < paths; ++i) {
        if (out.flagged[i]) continue;
        ++used;
        if (L[i] <= q) ++hits;
      }
      e.p_hat = used ? static_cast<double>(hits) / used : 0.0;
      e.stderr_ = used ? std::sqrt(e.p_hat * (1.0 - e.p_hat) / used) : 0.0;
      e.ess = static_cast<double>(used);
    } else {
      // mean and variance of w * indicator, accumulated in path order
      double sum = 0, sumsq = 0, wsum = 0, wsumsq = 0;
      for (std::int64_t i = 0; i < paths; ++i) {
        if (out.flagged[i]) continue;
        ++used;
        const double w = std::exp(out.log_weight[h][i]);
        wsum += w;
        wsumsq += w * w;
        const double v = L[i] <= q ? w : 0.0;
        sum += v;
        sumsq += v * v;
      }
      e.p_hat = used ? sum / used : 0.0;
      const double var = used > 1 ? (sumsq - sum * sum / used) / (used - 1) : 0.0;
      e.stderr_ = used ? std::sqrt(std::max(var, 0.0) / used) : 0.0;
      e.ess = wsumsq > 0 ? wsum * wsum / wsumsq : 0.0;
    }
    e.log_decay = e.p_hat > 0 ? -std::log(e.p_hat) / e.t
                              : std::numeric_limits<double>::quiet_NaN();
  }
  return est;
}

std::vector<MCEstimate> estimate_shortfall(const MarketScenario& s, const SimConfig& cfg,
                                           const std::optional<DriftTilt>& tilt) {
  const PathOutputs out = simulate_paths(s, cfg, tilt);
  return estimates_from(out, 0, cfg.q, cfg.measure);
}

DecayRegression estimate_decay_rate(const std::vector<MCEstimate>& estimates) {
  std::vector<double> t, y, w;
  for (const auto& e : estimates) {
    if (!(e.p_hat > 0)) continue;
    t.push_back(e.t);
    y.push_back(-std::log(e.p_hat));
    const double rel = e.p_hat > 0 ? e.stderr_ / e.p_hat : 0.0;  // var of log p
    w.push_back(1.0 / std::max(rel * rel, 1e-30));
  }
  if (t.size() < 3)
    throw std::invalid_argument("decay regression needs at least 3 horizons with p_hat > 0");

  double sw = 0, st = 0, sy = 0, stt = 0, sty = 0;
  for (size_t i = 0; i < t.size(); ++i) {
    sw += w[i];
    st += w[i] * t[i];
    sy += w[i] * y[i];
    stt += w[i] * t[i] * t[i];
    sty += w[i] * t[i] * y[i];
  }
  const double det = sw * stt - st * st;
  DecayRegression reg;
  reg.points = static_cast<int>(t.size());
  reg.slope = (sw * sty - st * sy) / det;
  reg.intercept = (stt * sy - st * sty) / det;
  reg.stderr_ = std::sqrt(sw / det);
  return reg;
}

ErgodicAverage ergodic_average_diagnostic(const MarketScenario& s, const DriftTilt& tilt,
                                          const QuadraticForm& g, double t_total, double dt,
                                          std::uint64_t seed) {
  if (!(dt > 0) || !(t_total > 10 * dt))
    throw std::invalid_argument("need t_total much larger than dt");
  const CompiledModel model = compile_model(s);
  const CompiledTilt ctilt = compile_tilt(tilt, s.n);
  const int n = s.n, l = s.l, k = s.k;
  const double sqrt_dt = std::sqrt(dt);
  const std::int64_t steps = std::llround(t_total / dt);

  NormalStream rng(seed, 0);
  std::vector<double> x(l), theta(l), gf(l), a(n), uh(n), Nh(k), d(k), dW(k);
  for (int j = 0; j < l; ++j) x[j] = s.x0(j);

  constexpr int kBatches = 32;
  std::vector<double> batch_sum(kBatches, 0.0);
  std::vector<std::int64_t> batch_cnt(kBatches, 0);
  const std::int64_t per_batch = (steps + kBatches - 1) / kBatches;

  Vector xv(l);
  for (std::int64_t stepi = 0; stepi < steps; ++stepi) {
    for (int j = 0; j < l; ++j) xv(j) = x[j];
    const int bi = static_cast<int>(stepi / per_batch);
    batch_sum[bi] += g.eval(xv);
    batch_cnt[bi] += 1;

    double r, alpha;
    model.eval(x.data(), a.data(), r, alpha, theta.data());
    ctilt.u_hat.eval(x.data(), n, l, uh.data());
    for (int j = 0; j < k; ++j) {
      double acc = -model.beta[j];
      for (int i = 0; i < n; ++i) acc += model.b[i * k + j] * uh[i];
      Nh[j] = acc;
    }
    ctilt.grad_f(x.data(), l, gf.data());
    for (int j = 0; j < k; ++j) {
      double acc = -ctilt.lambda * Nh[j];
      for (int i = 0; i < l; ++i) acc += model.sigma[i * k + j] * gf[i];
      d[j] = acc;
    }
    for (int j = 0; j < k; ++j) dW[j] = rng.next() * sqrt_dt;
    for (int i = 0; i < l; ++i) {
      double diff = theta[i] * dt;
      for (int j = 0; j < k; ++j)
        diff += model.sigma[i * k + j] * (dW[j] + d[j] * dt);
      x[i] += diff;
    }
  }

  ErgodicAverage out;
  std::vector<double> means;
  double total = 0;
  std::int64_t cnt = 0;
  for (int bi = 0; bi < kBatches; ++bi) {
    if (batch_cnt[bi] == 0) continue;
    means.push_back(batch_sum[bi] / batch_cnt[bi]);
    total += batch_sum[bi];
    cnt += batch_cnt[bi];
  }
  out.time_average = total / cnt;
  double var = 0;
  for (double mval : means) var += (mval - out.time_average) * (mval - out.time_average);
  var /= std::max<size_t>(1, means.size() - 1);
  out.stderr_ = std::sqrt(var / means.size());
  return out;
}

}  // namespace shortfall
