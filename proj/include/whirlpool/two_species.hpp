#pragma once

#include <utility>
#include <vector>

#include "whirlpool/energy.hpp"
#include "whirlpool/fv_solver.hpp"
#include "whirlpool/grid.hpp"
#include "whirlpool/report.hpp"

namespace whirlpool {

/// Coefficients of the coupled system. The gradient matrix [[kappa, alpha], [alpha, 1]]
/// must be positive definite.
struct TwoSpeciesParams {
  double kappa = 1.0;
  double alpha = 0.0;
  double beta = 1.0;
  double omega = 0.0;
  double m1 = 2.0;
  double m2 = 2.0;

  /// Throws PositiveDefinitenessViolated when kappa <= 0 or kappa - alpha^2 <= 0,
  /// InvalidArgument when an exponent leaves [1, 4).
  void validate() const;
};

struct SpeciesPair {
  DensityField rho;
  DensityField eta;

  /// Throws SizeMismatch unless both fields live on the same grid.
  SpeciesPair(DensityField rho_, DensityField eta_);
};

/// dirichlet: kappa/2 |grad rho|^2 + 1/2 |grad eta|^2; entropy_term:
/// (beta/m1) E_m1[rho] + (1/m2) E_m2[eta]; cross: alpha <grad rho, grad eta> - omega int rho eta.
/// lm_norm and h1_seminorm_sq refer to rho.
EnergyBreakdown two_species_energy(const SpeciesPair& s, const TwoSpeciesParams& p);

std::pair<std::vector<double>, std::vector<double>> two_species_rhs(const SpeciesPair& s,
                                                                    const TwoSpeciesParams& p);

/// h * sum min(rho, eta).
double segregation_index(const SpeciesPair& s);

/// Young-inequality lower bound of the quadratic (m1 = m2 = 2) energy with
/// weight eps on the alpha term:
/// (kappa - |alpha| eps)/2 |grad rho|^2 + (1 - |alpha|/eps)/2 |grad eta|^2
///   - (beta + |omega|)/2 |rho|^2 - (1 + |omega|)/2 |eta|^2.
double two_species_quadratic_lower_bound(const SpeciesPair& s, const TwoSpeciesParams& p, double eps);

/// Samples carry the eta extras; min_rho is the minimum over both species.
RunReport two_species_run(const SpeciesPair& s0, const TwoSpeciesParams& p, const FvConfig& cfg,
                          TimeSeriesSink& sink);

}  // namespace whirlpool
