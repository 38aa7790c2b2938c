#include "whirlpool/diagnostics.hpp"

#include <cmath>
#include <limits>

#include "profile_search.hpp"
#include "whirlpool/errors.hpp"
#include "whirlpool/parallel.hpp"

namespace whirlpool {

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::Completed: return "Completed";
    case Termination::BlowUpDetected: return "BlowUpDetected";
    case Termination::NonFinite: return "NonFinite";
  }
  return "Unknown";
}

std::string_view to_string(CertificateKind k) {
  switch (k) {
    case CertificateKind::DtCollapse: return "DtCollapse";
    case CertificateKind::NormOverflow: return "NormOverflow";
    case CertificateKind::SecondMomentForecast: return "SecondMomentForecast";
  }
  return "Unknown";
}

SelfSimilarExponents self_similar_exponents(int d) {
  if (d < 1) throw Error(ErrorCode::InvalidArgument, "d must be >= 1");
  const double b = 1.0 / static_cast<double>(d + 4);
  return {b * static_cast<double>(d), b, d};
}

DensityField rescale_self_similar(const DensityField& f, double t, int d, const Grid1D& reference) {
  if (d != 1) throw Error(ErrorCode::InvalidArgument, "self-similar rescaling on grids needs d = 1");
  if (!(t > kSelfSimilarTimeFloor)) throw Error(ErrorCode::InvalidArgument, "t must exceed 1e-8");
  const auto ex = self_similar_exponents(d);
  return remap_scaled(f, reference, std::pow(t, ex.b));
}

DensityField rescale_self_similar(const DensityField& f, double t, int d) {
  return rescale_self_similar(f, t, d, f.grid());
}

double second_moment_rate(const DensityField& f, const ModelParams& p) {
  if (!(p.m > 1.0)) throw Error(ErrorCode::InvalidArgument, "second_moment_rate requires m > 1");
  const double mc = critical_exponent(p.d);
  const double k = 2.0 * (p.d + 2);
  const EnergyBreakdown e = free_energy(f, p);
  if (std::abs(p.m - mc) <= 1e-12 * mc) return k * e.total;
  return k * (e.total - p.chi * (1.0 / (mc - 1.0) - 1.0 / (p.m - 1.0)) * e.lm_norm);
}

std::optional<BlowUpCertificate> forecast_blowup(const DensityField& f, const ModelParams& p,
                                                 std::optional<double> chi_c, double t_now) {
  const double mc = critical_exponent(p.d);
  const bool critical = std::abs(p.m - mc) <= 1e-12 * mc;
  if (p.m < mc && !critical) return std::nullopt;
  const double F = free_energy(f, p).total;
  if (!(F < 0.0)) return std::nullopt;
  if (critical) {
    if (!chi_c || !(p.chi > *chi_c)) return std::nullopt;
    return BlowUpCertificate{CertificateKind::SecondMomentForecast, t_now,
                             std::numeric_limits<double>::infinity(), true};
  }
  const double bound = moment2(f) / (2.0 * (p.d + 2) * std::abs(F));
  return BlowUpCertificate{CertificateKind::SecondMomentForecast, t_now, bound, false};
}

double h2_monitor(std::span<const DensityField> series, double dt) {
  if (series.size() < 2) throw Error(ErrorCode::InvalidArgument, "h2_monitor needs at least 2 snapshots");
  std::vector<double> lap;
  double total = 0.0;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const DensityField& f = series[k];
    lap.resize(f.size());
    laplacian_into(f.grid(), f.values(), lap);
    double s = 0.0;
    for (double v : lap) s += v * v;
    s *= f.grid().spacing();
    const double w = (k == 0 || k + 1 == series.size()) ? 0.5 : 1.0;
    total += w * s;
  }
  return total * dt;
}

double fokker_planck_energy(const DensityField& f, int d, double chi) {
  const ModelParams p{critical_exponent(d), chi, d};
  const double b = self_similar_exponents(d).b;
  return free_energy(f, p).total + 0.5 * b * moment2(f);
}

FokkerPlanckMinimum minimize_fokker_planck_energy(const Grid1D& grid, int d, double chi,
                                                  std::size_t n_restarts, const GnSearchOptions& opts) {
  if (d != 1) throw Error(ErrorCode::InvalidArgument, "the profile search runs on 1D grids only (d = 1)");
  const double mc = critical_exponent(d);
  const double b = self_similar_exponents(d).b;
  const double h = grid.spacing();
  detail::ProfileObjective objective = [&grid, mc, b, h, chi](std::span<const double> f,
                                                              std::span<double> grad) {
    const std::size_t n = f.size();
    std::vector<double> lap(n);
    laplacian_into(grid, f, lap);
    double value = 0.5 * gradient_inner_product(grid, f, f);
    double ent = 0.0, mom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double x = grid.center(j);
      ent += std::pow(f[j], mc);
      mom += x * x * f[j];
      grad[j] = -h * lap[j] - h * chi * mc / (mc - 1.0) * std::pow(f[j], mc - 1.0) + 0.5 * b * h * x * x;
    }
    value += -chi / (mc - 1.0) * h * ent + 0.5 * b * h * mom;
    return value;
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
  if (res.restarts_improved == 0) throw Error(ErrorCode::NoAscent, "no restart of the profile search descended");
  DensityField profile = DensityField::normalized(grid, std::move(res.profile));
  const double value = fokker_planck_energy(profile, d, chi);
  return {value, std::move(profile)};
}

}  // namespace whirlpool
