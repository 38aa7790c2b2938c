#include "whirlpool/jko.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "whirlpool/errors.hpp"

namespace whirlpool {

namespace {

// Value, gradient and Hessian of a function of two variables (a, b).
struct Jet2 {
  double v, da, db, haa, hab, hbb;
};

Jet2 var_a(double a) { return {a, 1, 0, 0, 0, 0}; }
Jet2 var_b(double b) { return {b, 0, 1, 0, 0, 0}; }

Jet2 operator+(const Jet2& x, const Jet2& y) {
  return {x.v + y.v, x.da + y.da, x.db + y.db, x.haa + y.haa, x.hab + y.hab, x.hbb + y.hbb};
}
Jet2 operator-(const Jet2& x, const Jet2& y) {
  return {x.v - y.v, x.da - y.da, x.db - y.db, x.haa - y.haa, x.hab - y.hab, x.hbb - y.hbb};
}
Jet2 operator*(const Jet2& x, const Jet2& y) {
  return {x.v * y.v,
          x.da * y.v + x.v * y.da,
          x.db * y.v + x.v * y.db,
          x.haa * y.v + 2 * x.da * y.da + x.v * y.haa,
          x.hab * y.v + x.da * y.db + x.db * y.da + x.v * y.hab,
          x.hbb * y.v + 2 * x.db * y.db + x.v * y.hbb};
}
Jet2 operator*(double c, const Jet2& x) { return {c * x.v, c * x.da, c * x.db, c * x.haa, c * x.hab, c * x.hbb}; }
Jet2 reciprocal(const Jet2& x) {
  const double r = 1.0 / x.v;
  const double r2 = r * r;
  const double r3 = r2 * r;
  return {r,
          -x.da * r2,
          -x.db * r2,
          -x.haa * r2 + 2 * x.da * x.da * r3,
          -x.hab * r2 + 2 * x.da * x.db * r3,
          -x.hbb * r2 + 2 * x.db * x.db * r3};
}

// Dirichlet contribution of neighbouring gaps a, b: with gap densities
// za = ds/a, zb = ds/b it is (za - zb)^2 (za + zb) / (4 ds).
Jet2 pair_term(double a, double b, double ds) {
  const Jet2 za = ds * reciprocal(var_a(a));
  const Jet2 zb = ds * reciprocal(var_b(b));
  const Jet2 diff = za - zb;
  return (0.25 / ds) * (diff * diff * (za + zb));
}

double pair_value(double a, double b, double ds) {
  const double za = ds / a, zb = ds / b;
  const double diff = za - zb;
  return diff * diff * (za + zb) / (4.0 * ds);
}

// Jump from an outer gap density z = ds/g to vacuum: z^3 / (4 ds).
double edge_value(double g, double ds) {
  const double z = ds / g;
  return z * z * z / (4.0 * ds);
}

struct GapModel {
  double ds;
  double chi;
  double m;

  // Entropy contribution of one gap (added with a minus sign to the energy).
  double entropy(double g) const {
    if (m == 1.0) return chi * ds * std::log(ds / g);
    return chi / (m - 1.0) * std::pow(ds, m) * std::pow(g, 1.0 - m);
  }
  double entropy_d1(double g) const {
    if (m == 1.0) return -chi * ds / g;
    return -chi * std::pow(ds, m) * std::pow(g, -m);
  }
  double entropy_d2(double g) const {
    if (m == 1.0) return chi * ds / (g * g);
    return chi * m * std::pow(ds, m) * std::pow(g, -m - 1.0);
  }
};

void gaps_of(std::span<const double> q, std::vector<double>& g) {
  g.resize(q.size() - 1);
  for (std::size_t i = 0; i + 1 < q.size(); ++i) {
    g[i] = q[i + 1] - q[i];
    if (!(g[i] > 0.0)) {
      throw Error(ErrorCode::CollapsedGap, "gap " + std::to_string(i) + " is not positive");
    }
  }
}

DiscreteEnergyParts energy_of_gaps(std::span<const double> g, const GapModel& gm) {
  const std::size_t ng = g.size();
  double dir = edge_value(g[0], gm.ds) + edge_value(g[ng - 1], gm.ds);
  double ent = 0.0;
  for (std::size_t i = 0; i + 1 < ng; ++i) dir += pair_value(g[i], g[i + 1], gm.ds);
  for (std::size_t i = 0; i < ng; ++i) ent += gm.entropy(g[i]);
  return {dir, ent, dir - ent};
}

// Gradient (and optionally the tridiagonal Hessian) of the energy in gap coordinates.
void energy_derivatives(std::span<const double> g, const GapModel& gm, std::vector<double>& grad,
                        std::vector<double>* hdiag, std::vector<double>* hoff) {
  const std::size_t ng = g.size();
  const double ds = gm.ds;
  grad.assign(ng, 0.0);
  if (hdiag) hdiag->assign(ng, 0.0);
  if (hoff) hoff->assign(ng > 0 ? ng - 1 : 0, 0.0);
  // edge_value = ds^2 / (4 g^3)
  auto edge = [&](std::size_t i) {
    const double gi = g[i];
    const double g2 = gi * gi;
    grad[i] += -0.75 * ds * ds / (g2 * g2);
    if (hdiag) (*hdiag)[i] += 3.0 * ds * ds / (g2 * g2 * gi);
  };
  edge(0);
  edge(ng - 1);
  for (std::size_t i = 0; i + 1 < ng; ++i) {
    const Jet2 t = pair_term(g[i], g[i + 1], ds);
    grad[i] += t.da;
    grad[i + 1] += t.db;
    if (hdiag) {
      (*hdiag)[i] += t.haa;
      (*hdiag)[i + 1] += t.hbb;
      (*hoff)[i] += t.hab;
    }
  }
  for (std::size_t i = 0; i < ng; ++i) {
    grad[i] -= gm.entropy_d1(g[i]);
    if (hdiag) (*hdiag)[i] -= gm.entropy_d2(g[i]);
  }
}

// dF/dq from dF/dg with g_i = q_{i+1} - q_i.
void gap_to_position_gradient(std::span<const double> gg, std::span<double> out) {
  const std::size_t n = gg.size() + 1;
  for (std::size_t k = 0; k < n; ++k) {
    double v = 0.0;
    if (k > 0) v += gg[k - 1];
    if (k + 1 < n) v -= gg[k];
    out[k] = v;
  }
}

GapModel model_for(const ModelParams& p, std::size_t n) { return {1.0 / static_cast<double>(n), p.chi, p.m}; }

// Symmetric pentadiagonal Cholesky solve of (A + shift I) x = b. Returns false
// if the shifted matrix is not positive definite.
bool banded_solve(const std::vector<double>& d0, const std::vector<double>& d1, const std::vector<double>& d2,
                  double shift, std::span<const double> b, std::vector<double>& x) {
  const std::size_t n = d0.size();
  std::vector<double> l0(n), l1(n, 0.0), l2(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = d0[i] + shift;
    if (i >= 1) s -= l1[i - 1] * l1[i - 1];
    if (i >= 2) s -= l2[i - 2] * l2[i - 2];
    if (!(s > 0.0) || !std::isfinite(s)) return false;
    l0[i] = std::sqrt(s);
    if (i + 1 < n) {
      double a = d1[i];
      if (i >= 1) a -= l2[i - 1] * l1[i - 1];
      l1[i] = a / l0[i];
    }
    if (i + 2 < n) l2[i] = d2[i] / l0[i];
  }
  x.assign(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i];
    if (i >= 1) s -= l1[i - 1] * x[i - 1];
    if (i >= 2) s -= l2[i - 2] * x[i - 2];
    x[i] = s / l0[i];
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = x[i];
    if (i + 1 < n) s -= l1[i] * x[i + 1];
    if (i + 2 < n) s -= l2[i] * x[i + 2];
    x[i] = s / l0[i];
  }
  return true;
}

double w2_sq(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

class InnerProblem {
 public:
  InnerProblem(std::span<const double> prev, const ModelParams& p, double tau)
      : prev_(prev), gm_(model_for(p, prev.size())), tau_(tau), n_(prev.size()) {}

  double value(std::span<const double> q) {
    gaps_of(q, g_);
    return w2_sq(q, prev_) / (2.0 * tau_) + energy_of_gaps(g_, gm_).total;
  }

  // Gradient in q; fills the pentadiagonal Hessian bands when requested.
  void gradient(std::span<const double> q, std::vector<double>& grad, bool with_hessian) {
    gaps_of(q, g_);
    energy_derivatives(g_, gm_, gg_, with_hessian ? &hd_ : nullptr, with_hessian ? &ho_ : nullptr);
    grad.resize(n_);
    gap_to_position_gradient(gg_, grad);
    const double w = 1.0 / (static_cast<double>(n_) * tau_);
    for (std::size_t k = 0; k < n_; ++k) grad[k] += w * (q[k] - prev_[k]);
    if (!with_hessian) return;
    d0_.assign(n_, w);
    d1_.assign(n_, 0.0);
    d2_.assign(n_, 0.0);
    const std::size_t ng = n_ - 1;
    auto H = [&](std::size_t i, std::size_t j) -> double {
      if (i >= ng || j >= ng) return 0.0;
      if (i == j) return hd_[i];
      return ho_[std::min(i, j)];
    };
    for (std::size_t k = 0; k < n_; ++k) {
      double diag = 0.0;
      if (k >= 1) diag += H(k - 1, k - 1);
      if (k < ng) diag += H(k, k);
      if (k >= 1 && k < ng) diag -= 2.0 * H(k - 1, k);
      d0_[k] += diag;
      if (k + 1 < n_) {
        double off = -H(k, k);
        if (k >= 1) off += H(k - 1, k);
        if (k + 1 < ng) off += H(k, k + 1);
        d1_[k] = off;
      }
      if (k + 2 < n_) d2_[k] = -H(k, k + 1);
    }
  }

  // Newton direction with an increasing diagonal shift until positive definite.
  bool newton_direction(std::span<const double> grad, std::vector<double>& dir) {
    std::vector<double> rhs(grad.size());
    for (std::size_t k = 0; k < grad.size(); ++k) rhs[k] = -grad[k];
    double scale = 0.0;
    for (double v : d0_) scale = std::max(scale, std::abs(v));
    double shift = 0.0;
    for (int attempt = 0; attempt < 40; ++attempt) {
      if (banded_solve(d0_, d1_, d2_, shift, rhs, dir)) return true;
      shift = shift == 0.0 ? 1e-10 * scale : shift * 10.0;
    }
    return false;
  }

  const std::vector<double>& gaps() const { return g_; }

 private:
  std::span<const double> prev_;
  GapModel gm_;
  double tau_;
  std::size_t n_;
  std::vector<double> g_, gg_, hd_, ho_, d0_, d1_, d2_;
};

// Gradient in u = (q0, log g_0, ..., log g_{n-2}).
void position_to_log_gap_gradient(std::span<const double> grad_q, std::span<const double> g,
                                  std::vector<double>& out) {
  const std::size_t n = grad_q.size();
  out.resize(n);
  double tail = 0.0;
  for (std::size_t k = n; k-- > 1;) {
    tail += grad_q[k];
    out[k] = g[k - 1] * tail;
  }
  out[0] = tail + grad_q[0];
}

void positions_from(double q0, std::span<const double> g, std::vector<double>& q) {
  q.resize(g.size() + 1);
  q[0] = q0;
  for (std::size_t i = 0; i < g.size(); ++i) q[i + 1] = q[i] + g[i];
}

double sup_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

}  // namespace

void JkoConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw Error(ErrorCode::InvalidArgument, "tau must be positive");
  if (n_particles < 8) throw Error(ErrorCode::InvalidArgument, "n_particles must be at least 8");
  if (opt_tol && !(*opt_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "opt_tol must be positive");
  if (max_iters < 1) throw Error(ErrorCode::InvalidArgument, "max_iters must be at least 1");
  if (!(ls_shrink > 0.0 && ls_shrink < 1.0)) throw Error(ErrorCode::InvalidArgument, "ls_shrink must lie in (0, 1)");
  if (!(ls_c1 > 0.0 && ls_c1 < 1.0)) throw Error(ErrorCode::InvalidArgument, "ls_c1 must lie in (0, 1)");
  if (chi_c && !(*chi_c > 0.0)) throw Error(ErrorCode::InvalidArgument, "chi_c must be positive");
}

double wasserstein2_1d(const QuantileVector& a, const QuantileVector& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::SizeMismatch, "quantile vectors have " + std::to_string(a.size()) + " and " +
                                             std::to_string(b.size()) + " particles");
  }
  return std::sqrt(w2_sq(a.positions(), b.positions()));
}

DiscreteEnergyParts discrete_energy_parts(std::span<const double> q, const ModelParams& p) {
  if (q.size() < 2) throw Error(ErrorCode::InvalidArgument, "discrete energy needs at least 2 particles");
  std::vector<double> g;
  gaps_of(q, g);
  return energy_of_gaps(g, model_for(p, q.size()));
}

double discrete_energy(const QuantileVector& q, const ModelParams& p) {
  return discrete_energy_parts(q.positions(), p).total;
}

std::vector<double> discrete_energy_gradient(std::span<const double> q, const ModelParams& p) {
  std::vector<double> g, gg;
  gaps_of(q, g);
  energy_derivatives(g, model_for(p, q.size()), gg, nullptr, nullptr);
  std::vector<double> out(q.size());
  gap_to_position_gradient(gg, out);
  return out;
}

double jko_objective(std::span<const double> q, std::span<const double> prev, const ModelParams& p, double tau) {
  if (q.size() != prev.size()) throw Error(ErrorCode::SizeMismatch, "objective needs equal particle counts");
  InnerProblem ip(prev, p, tau);
  return ip.value(q);
}

std::vector<double> jko_objective_gradient(std::span<const double> q, std::span<const double> prev,
                                           const ModelParams& p, double tau) {
  if (q.size() != prev.size()) throw Error(ErrorCode::SizeMismatch, "objective needs equal particle counts");
  InnerProblem ip(prev, p, tau);
  std::vector<double> grad;
  ip.gradient(q, grad, false);
  return grad;
}

void check_jko_regime(const ModelParams& p, const JkoConfig& cfg) {
  const double mc = critical_exponent(p.d);
  const bool critical = std::abs(p.m - mc) <= 1e-12 * mc;
  if (!critical && p.m < mc) return;
  if (critical && !cfg.chi_c && !cfg.allow_unbounded) {
    throw Error(ErrorCode::UnboundedRegime, "m = m_c needs a critical mass estimate to classify the regime");
  }
  if (cfg.allow_unbounded) return;
  const RegimeClass r = classify_regime(p, cfg.chi_c.value_or(1.0));
  if (critical && r == RegimeClass::CriticalExponentSubcriticalMass) return;
  throw Error(ErrorCode::UnboundedRegime,
              std::string("regime ") + std::string(to_string(r)) + " has no guaranteed minimiser");
}

JkoState jko_step(const QuantileVector& prev, const ModelParams& p, const JkoConfig& cfg) {
  cfg.validate();
  p.validate();
  if (p.d != 1) throw Error(ErrorCode::InvalidArgument, "the JKO stepper runs in 1D (d = 1)");
  check_jko_regime(p, cfg);
  const std::size_t n = prev.size();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "jko_step needs at least 2 particles");
  const std::size_t max_iters = cfg.allow_unbounded ? std::min<std::size_t>(cfg.max_iters, 50) : cfg.max_iters;

  InnerProblem ip(prev.positions(), p, cfg.tau);
  std::vector<double> q(prev.data());
  double f = ip.value(q);
  const double f_initial = f;
  const double tol = cfg.opt_tol.value_or(1e-8 * std::max(1.0, std::abs(discrete_energy(prev, p))));

  std::vector<double> grad, grad_u, dir, du, g_trial, q_trial;
  std::size_t it = 0;
  const double eps = std::numeric_limits<double>::epsilon();
  for (; it < max_iters; ++it) {
    const bool newton = cfg.direction == JkoDirection::Newton;
    ip.gradient(q, grad, newton);
    const std::vector<double> g = ip.gaps();
    position_to_log_gap_gradient(grad, g, grad_u);
    if (sup_norm(grad_u) < tol) break;

    du.resize(n);
    bool have_dir = false;
    if (newton && ip.newton_direction(grad, dir)) {
      du[0] = dir[0];
      for (std::size_t i = 0; i + 1 < n; ++i) du[i + 1] = (dir[i + 1] - dir[i]) / g[i];
      have_dir = true;
    }
    double slope = 0.0;
    if (have_dir) {
      for (std::size_t k = 0; k < n; ++k) slope += grad_u[k] * du[k];
    }
    if (!have_dir || !(slope < 0.0)) {
      for (std::size_t k = 0; k < n; ++k) du[k] = -grad_u[k];
      slope = 0.0;
      for (std::size_t k = 0; k < n; ++k) slope += grad_u[k] * du[k];
    }
    if (-slope <= 4.0 * eps * (1.0 + std::abs(f))) break;

    double s = 1.0;
    if (!have_dir) s = 1.0 / std::max(1.0, sup_norm(du));
    bool accepted = false;
    g_trial.resize(n - 1);
    for (int tries = 0; tries < 200; ++tries) {
      bool finite = true;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        g_trial[i] = g[i] * std::exp(s * du[i + 1]);
        if (!(g_trial[i] > 0.0) || !std::isfinite(g_trial[i])) finite = false;
      }
      if (finite) {
        positions_from(q[0] + s * du[0], g_trial, q_trial);
        double f_trial = std::numeric_limits<double>::infinity();
        try {
          f_trial = ip.value(q_trial);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::CollapsedGap) throw;
        }
        if (std::isfinite(f_trial) && f_trial <= f + cfg.ls_c1 * s * slope) {
          q.swap(q_trial);
          f = f_trial;
          accepted = true;
          break;
        }
      }
      s *= cfg.ls_shrink;
      if (s * sup_norm(du) < eps) break;
    }
    if (!accepted) {
      throw Error(ErrorCode::LineSearchFailure,
                  "no Armijo step at iteration " + std::to_string(it) + " (gradient norm " +
                      std::to_string(sup_norm(grad_u)) + ")");
    }
  }

  if (f > f_initial + 1e-12 * std::max(1.0, std::abs(f_initial))) {
    throw Error(ErrorCode::NonMonotone, "inner objective increased");
  }
  QuantileVector out(std::move(q));
  const double energy = discrete_energy(out, p);
  const double w2 = wasserstein2_1d(out, prev);
  return {std::move(out), energy, w2, it, f};
}

QuantileVector initial_quantiles(const DensityField& f0, std::size_t n_particles) {
  const Grid1D& grid = f0.grid();
  const std::size_t want = 8 * n_particles;
  if (grid.n_cells() >= want) return to_quantiles(f0, n_particles);
  const std::size_t factor = (want + grid.n_cells() - 1) / grid.n_cells();
  const Grid1D fine(grid.x_min(), grid.x_max(), grid.n_cells() * factor, grid.boundary());
  return to_quantiles(remap_scaled(f0, fine, 1.0), n_particles);
}

RunReport jko_run(const DensityField& f0, const ModelParams& p, const JkoConfig& cfg, std::size_t n_steps,
                  TimeSeriesSink& sink, std::vector<JkoRecord>* records) {
  cfg.validate();
  p.validate();
  check_jko_regime(p, cfg);
  const auto start = std::chrono::steady_clock::now();
  const Grid1D& grid = f0.grid();

  QuantileVector q = initial_quantiles(f0, cfg.n_particles);
  JkoConfig step_cfg = cfg;
  const double F0 = discrete_energy(q, p);
  if (!step_cfg.opt_tol) step_cfg.opt_tol = 1e-8 * std::max(1.0, std::abs(F0));

  auto particle_m2 = [](const QuantileVector& v) {
    double s = 0.0;
    for (double x : v.positions()) s += x * x;
    return s / static_cast<double>(v.size());
  };
  auto emit = [&](const QuantileVector& v, double t, double energy_total) {
    const DensityField rho = from_quantiles(v, grid);
    const DiscreteEnergyParts parts = discrete_energy_parts(v.positions(), p);
    Sample s;
    s.t = t;
    s.dt = cfg.tau;
    s.energy_total = energy_total;
    s.energy_dirichlet = parts.dirichlet;
    s.energy_entropy = parts.entropy_term;
    s.m2 = particle_m2(v);
    s.lm_norm = lm_norm(grid, rho.values(), p.m);
    s.linf_norm = rho.max();
    s.min_rho = rho.min();
    s.mass = rho.mass();
    sink.emit(s);
  };

  if (records) records->push_back({0, 0.0, F0, 0.0, 0.0, particle_m2(q), 0});
  emit(q, 0.0, F0);

  RunReport report;
  double cumulative = 0.0;
  double F_prev = F0;
  std::size_t k = 0;
  for (; k < n_steps; ++k) {
    JkoState st = jko_step(q, p, step_cfg);
    cumulative += st.w2_to_prev * st.w2_to_prev / (2.0 * cfg.tau);
    if (st.energy > F_prev + 1e-12 * std::max(1.0, std::abs(F_prev))) {
      throw Error(ErrorCode::NonMonotone, "outer energy increased at step " + std::to_string(k + 1));
    }
    if (cumulative > F0 - st.energy + 1e-9) {
      throw Error(ErrorCode::NonMonotone, "cumulative W2 bound violated at step " + std::to_string(k + 1));
    }
    F_prev = st.energy;
    q = std::move(st.quantiles);
    const double t = static_cast<double>(k + 1) * cfg.tau;
    if (records) records->push_back({k + 1, t, st.energy, st.w2_to_prev, cumulative, particle_m2(q), st.inner_iters});
    emit(q, t, st.energy);
  }

  report.n_steps = k;
  report.final_time = static_cast<double>(k) * cfg.tau;
  report.final_energy = F_prev;
  DensityField fin = from_quantiles(q, grid);
  sink.snapshot(report.final_time, fin, nullptr);
  report.final_rho = std::move(fin);
  sink.flush();
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace whirlpool
