#include "whirlpool/energy.hpp"

#include <algorithm>
#include <cmath>

#include "profile_search.hpp"
#include "whirlpool/errors.hpp"
#include "whirlpool/parallel.hpp"

namespace whirlpool {

namespace {

// x^p with a multiplication path for small integer p.
inline double power(double x, double p) {
  if (p == 1.0) return x;
  if (p == 2.0) return x * x;
  if (p == 3.0) return x * x * x;
  if (p == 4.0) {
    const double x2 = x * x;
    return x2 * x2;
  }
  if (p == 0.0) return 1.0;
  return std::pow(x, p);
}

}  // namespace

void ModelParams::validate() const {
  if (!(m >= 1.0) || !std::isfinite(m)) throw Error(ErrorCode::InvalidArgument, "m must be >= 1");
  if (!(chi > 0.0) || !std::isfinite(chi)) throw Error(ErrorCode::InvalidArgument, "chi must be > 0");
  if (d < 1) throw Error(ErrorCode::InvalidArgument, "d must be >= 1");
}

std::string_view to_string(RegimeClass r) {
  switch (r) {
    case RegimeClass::SubcriticalExponent: return "SubcriticalExponent";
    case RegimeClass::CriticalExponentSubcriticalMass: return "CriticalExponentSubcriticalMass";
    case RegimeClass::CriticalExponentCriticalMass: return "CriticalExponentCriticalMass";
    case RegimeClass::CriticalExponentSupercriticalMass: return "CriticalExponentSupercriticalMass";
    case RegimeClass::SupercriticalExponent: return "SupercriticalExponent";
  }
  return "Unknown";
}

double lm_norm(const Grid1D& grid, std::span<const double> f, double m) {
  double s = 0.0;
  for (double v : f) s += power(v, m);
  return grid.spacing() * s;
}

double entropy_em(const Grid1D& grid, std::span<const double> f, double m) {
  if (m == 1.0) {
    double s = 0.0;
    for (double v : f) {
      if (v > 0.0) s += v * std::log(v);
    }
    return grid.spacing() * s;
  }
  return lm_norm(grid, f, m) / (m - 1.0);
}

double entropy_em(const DensityField& f, double m) { return entropy_em(f.grid(), f.values(), m); }

EnergyBreakdown free_energy(const Grid1D& grid, std::span<const double> f, const ModelParams& p) {
  EnergyBreakdown e;
  e.h1_seminorm_sq = gradient_inner_product(grid, f, f);
  e.dirichlet = 0.5 * e.h1_seminorm_sq;
  e.lm_norm = lm_norm(grid, f, p.m);
  const double em = p.m == 1.0 ? entropy_em(grid, f, 1.0) : e.lm_norm / (p.m - 1.0);
  e.entropy_term = p.chi * em;
  e.total = e.dirichlet - e.entropy_term;
  return e;
}

EnergyBreakdown free_energy(const DensityField& f, const ModelParams& p) {
  return free_energy(f.grid(), f.values(), p);
}

double critical_exponent(int d) {
  if (d < 1) throw Error(ErrorCode::InvalidArgument, "d must be >= 1");
  return 2.0 + 2.0 / static_cast<double>(d);
}

double gn_quotient(const DensityField& f, int d) {
  const double grad = gradient_sq_integral(f);
  if (grad < 1e-14) throw Error(ErrorCode::DegenerateGradient, "gradient integral below 1e-14");
  const double mc = critical_exponent(d);
  const double mass = f.mass();
  return lm_norm(f.grid(), f.values(), mc) / (grad * std::pow(mass, 2.0 / static_cast<double>(d)));
}

GnSearchResult estimate_gn_constant_search(int d, const Grid1D& grid, std::size_t n_restarts,
                                           const GnSearchOptions& opts) {
  if (d != 1) throw Error(ErrorCode::InvalidArgument, "the GN search runs on 1D grids only (d = 1)");
  const double mc = critical_exponent(d);
  const double h = grid.spacing();
  // Minimise -Q on unit-mass profiles, where Q = N / D.
  detail::ProfileObjective objective = [&grid, mc, h](std::span<const double> f, std::span<double> grad) {
    const std::size_t n = f.size();
    double N = 0.0;
    for (double v : f) N += std::pow(v, mc);
    N *= h;
    const double D = gradient_inner_product(grid, f, f);
    if (!(D > 0.0)) return std::numeric_limits<double>::infinity();
    std::vector<double> lap(n);
    laplacian_into(grid, f, lap);
    const double Q = N / D;
    for (std::size_t j = 0; j < n; ++j) {
      const double dN = h * mc * std::pow(f[j], mc - 1.0);
      const double dD = -2.0 * h * lap[j];
      grad[j] = -Q * (dN / N - dD / D);
    }
    return -Q;
  };
  detail::ProfileSearchOptions so;
  so.n_modes = opts.n_modes;
  const double mid = 0.5 * (grid.x_min() + grid.x_max());
  so.window_lo = mid - 0.5 * opts.window_fraction * grid.length();
  so.window_hi = mid + 0.5 * opts.window_fraction * grid.length();
  so.max_iters = opts.max_iters;
  so.seed = opts.seed;
  so.threads = opts.threads == 0 ? default_thread_count() : opts.threads;
  auto res = detail::minimize_profile(grid, objective, n_restarts, so);
  if (res.restarts_improved == 0) throw Error(ErrorCode::NoAscent, "no restart of the GN search ascended");
  DensityField profile = DensityField::normalized(grid, std::move(res.profile));
  const double q = gn_quotient(profile, d);
  return {q, std::move(profile), res.restarts_improved};
}

double estimate_gn_constant(int d, const Grid1D& grid, std::size_t n_restarts) {
  return estimate_gn_constant_search(d, grid, n_restarts).c_gn;
}

double critical_mass(int d, double c_gn) {
  if (!(c_gn > 0.0)) throw Error(ErrorCode::InvalidArgument, "c_gn must be positive");
  return (critical_exponent(d) - 1.0) / (2.0 * c_gn);
}

RegimeClass classify_regime(const ModelParams& p, double chi_c) {
  if (!(chi_c > 0.0)) throw Error(ErrorCode::InvalidArgument, "chi_c must be positive");
  const double mc = critical_exponent(p.d);
  if (std::abs(p.m - mc) <= 1e-12 * mc) {
    if (std::abs(p.chi - chi_c) <= 1e-9 * chi_c) return RegimeClass::CriticalExponentCriticalMass;
    return p.chi < chi_c ? RegimeClass::CriticalExponentSubcriticalMass
                         : RegimeClass::CriticalExponentSupercriticalMass;
  }
  return p.m < mc ? RegimeClass::SubcriticalExponent : RegimeClass::SupercriticalExponent;
}

void add_entropy_potential(std::span<const double> f, double m, double coeff, std::span<double> out) {
  if (m == 1.0) {
    for (std::size_t j = 0; j < f.size(); ++j) out[j] += coeff * (1.0 + std::log(std::max(f[j], kVacuumFloor)));
    return;
  }
  const double c = coeff * m / (m - 1.0);
  const double p = m - 1.0;
  for (std::size_t j = 0; j < f.size(); ++j) out[j] += c * power(std::max(f[j], kVacuumFloor), p);
}

void variation_into(const Grid1D& grid, std::span<const double> f, const ModelParams& p,
                    std::span<double> out) {
  laplacian_into(grid, f, out);
  add_entropy_potential(f, p.m, p.chi, out);
}

std::vector<double> variation(const DensityField& f, const ModelParams& p) {
  std::vector<double> xi(f.size());
  variation_into(f.grid(), f.values(), p, xi);
  return xi;
}

}  // namespace whirlpool
