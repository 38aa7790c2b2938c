#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "whirlpool/grid.hpp"

namespace whirlpool {

/// One-species model: diffusion exponent m, aggregation strength chi, and the
/// dimension d that enters the analytic formulas.
struct ModelParams {
  double m = 2.0;
  double chi = 1.0;
  int d = 1;

  /// Throws InvalidArgument unless m >= 1, chi > 0, d >= 1.
  void validate() const;
};

struct EnergyBreakdown {
  double dirichlet = 0.0;     // gradient part (weighted for two species)
  double entropy_term = 0.0;  // subtracted entropy part
  double cross = 0.0;         // two-species coupling part; zero for one species
  double total = 0.0;         // dirichlet - entropy_term + cross
  double lm_norm = 0.0;       // h * sum rho^m
  double h1_seminorm_sq = 0.0;
};

enum class RegimeClass {
  SubcriticalExponent,
  CriticalExponentSubcriticalMass,
  CriticalExponentCriticalMass,
  CriticalExponentSupercriticalMass,
  SupercriticalExponent,
};

std::string_view to_string(RegimeClass r);

/// Vacuum floor used inside rho^(m-1) and log(rho) when evaluating the variation.
inline constexpr double kVacuumFloor = 1e-12;

/// (1/(m-1)) * integral rho^m for m > 1, integral rho log rho for m = 1, with 0 log 0 = 0.
double entropy_em(const DensityField& f, double m);
double entropy_em(const Grid1D& grid, std::span<const double> f, double m);

/// h * sum f^m.
double lm_norm(const Grid1D& grid, std::span<const double> f, double m);

EnergyBreakdown free_energy(const DensityField& f, const ModelParams& p);
EnergyBreakdown free_energy(const Grid1D& grid, std::span<const double> f, const ModelParams& p);

double critical_exponent(int d);

/// ||f||_{m_c}^{m_c} / (||grad f||^2 * ||f||_1^{2/d}). Throws DegenerateGradient
/// when the gradient integral is below 1e-14.
double gn_quotient(const DensityField& f, int d);

struct GnSearchOptions {
  std::size_t n_modes = 12;         // sine modes of the square-root profile
  double window_fraction = 0.6;     // central share of the box used as support
  std::size_t max_iters = 3000;
  std::uint64_t seed = 20240611;
  unsigned threads = 0;             // 0: default_thread_count()
};

struct GnSearchResult {
  double c_gn;
  DensityField profile;
  std::size_t restarts_ascended;
};

/// Maximises gn_quotient over unit-mass profiles f = g^2 on a central window of
/// `grid`, best of n_restarts seeded random starts. Restart i always uses the
/// same seed, so the result is nondecreasing in n_restarts. Requires d = 1.
GnSearchResult estimate_gn_constant_search(int d, const Grid1D& grid, std::size_t n_restarts,
                                           const GnSearchOptions& opts = {});
double estimate_gn_constant(int d, const Grid1D& grid, std::size_t n_restarts);

/// (m_c - 1) / (2 c_gn).
double critical_mass(int d, double c_gn);

RegimeClass classify_regime(const ModelParams& p, double chi_c);

/// Cellwise xi = -dF/drho, so that the flow reads d_t rho = -div(rho grad xi).
std::vector<double> variation(const DensityField& f, const ModelParams& p);

/// Allocation-free form; `out` receives xi. Uses `out` itself as scratch.
void variation_into(const Grid1D& grid, std::span<const double> f, const ModelParams& p,
                    std::span<double> out);

/// Adds the local part chi * d/drho E_m (with the vacuum floor) to `out`.
void add_entropy_potential(std::span<const double> f, double m, double coeff, std::span<double> out);

}  // namespace whirlpool
