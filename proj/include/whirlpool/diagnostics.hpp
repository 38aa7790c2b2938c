#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "whirlpool/energy.hpp"
#include "whirlpool/grid.hpp"
#include "whirlpool/report.hpp"

namespace whirlpool {

/// Exponents of rho(x, t) = t^-a u(x t^-b).
struct SelfSimilarExponents {
  double a;
  double b;
  int d;
};

SelfSimilarExponents self_similar_exponents(int d);

inline constexpr double kSelfSimilarTimeFloor = 1e-8;

/// u(z) = t^a rho(z t^b), resampled onto `reference`. Requires d = 1 and t > 1e-8.
DensityField rescale_self_similar(const DensityField& f, double t, int d, const Grid1D& reference);
DensityField rescale_self_similar(const DensityField& f, double t, int d);

/// Right-hand side of the virial identity for dm2/dt. Requires m > 1.
double second_moment_rate(const DensityField& f, const ModelParams& p);

/// Certificate when the virial identity forces breakdown: m > m_c with F < 0
/// gives an upper bound on t* (relative to t_now); m = m_c, chi > chi_c, F < 0
/// gives an infinite bound with lmc_norm_flag set. chi_c is needed only at m = m_c.
std::optional<BlowUpCertificate> forecast_blowup(const DensityField& f, const ModelParams& p,
                                                 std::optional<double> chi_c = std::nullopt,
                                                 double t_now = 0.0);

/// Trapezoid-in-time integral of ||Delta_h rho||_2^2 over equally spaced snapshots.
double h2_monitor(std::span<const DensityField> series, double dt);

/// F_{m_c}[f] + (b/2) m2(f), b = 1/(d+4).
double fokker_planck_energy(const DensityField& f, int d, double chi);

struct FokkerPlanckMinimum {
  double value;
  DensityField profile;
};

/// Descent on fokker_planck_energy over unit-mass profiles f = g^2 (same
/// parametrisation as the GN search). Requires d = 1.
FokkerPlanckMinimum minimize_fokker_planck_energy(const Grid1D& grid, int d, double chi,
                                                  std::size_t n_restarts, const GnSearchOptions& opts = {});

}  // namespace whirlpool
