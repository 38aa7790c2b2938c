#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "whirlpool/energy.hpp"
#include "whirlpool/grid.hpp"
#include "whirlpool/report.hpp"

namespace whirlpool {

enum class JkoDirection {
  Newton,    // banded second-order model, shifted until positive definite
  Gradient,  // steepest descent in (q0, log gaps)
};

struct JkoConfig {
  double tau = 1e-4;
  std::size_t n_particles = 256;
  /// Stop when the sup norm of the gradient in (q0, log gaps) falls below this.
  /// Unset: 1e-8 * max(1, |F(rho_0)|).
  std::optional<double> opt_tol;
  std::size_t max_iters = 500;
  double ls_shrink = 0.5;
  double ls_c1 = 1e-4;
  JkoDirection direction = JkoDirection::Newton;
  /// Critical mass estimate; needed to classify m = m_c.
  std::optional<double> chi_c;
  /// Permit regimes where the energy is unbounded below; caps inner iterations at 50.
  bool allow_unbounded = false;

  void validate() const;
};

struct JkoState {
  QuantileVector quantiles;
  double energy;
  double w2_to_prev;
  std::size_t inner_iters;
  double objective;
};

struct JkoRecord {
  std::size_t step;
  double t;
  double energy;
  double w2_to_prev;
  double cumulative_w2_over_2tau;
  double m2;
  std::size_t inner_iters;
};

struct DiscreteEnergyParts {
  double dirichlet;
  double entropy_term;
  double total;
};

double wasserstein2_1d(const QuantileVector& a, const QuantileVector& b);

/// Lagrangian energy of particles carrying mass 1/n each, with gap densities
/// (1/n)/g_i. Outer gaps also pay the jump to vacuum. Throws CollapsedGap.
DiscreteEnergyParts discrete_energy_parts(std::span<const double> q, const ModelParams& p);
double discrete_energy(const QuantileVector& q, const ModelParams& p);

/// Gradient of discrete_energy with respect to the positions.
std::vector<double> discrete_energy_gradient(std::span<const double> q, const ModelParams& p);

/// W2^2(q, prev) / (2 tau) + discrete_energy(q).
double jko_objective(std::span<const double> q, std::span<const double> prev, const ModelParams& p, double tau);
std::vector<double> jko_objective_gradient(std::span<const double> q, std::span<const double> prev,
                                           const ModelParams& p, double tau);

/// Throws UnboundedRegime when the regime has no guaranteed minimiser and
/// allow_unbounded is off.
void check_jko_regime(const ModelParams& p, const JkoConfig& cfg);

JkoState jko_step(const QuantileVector& prev, const ModelParams& p, const JkoConfig& cfg);

/// Quantiles of f0, taken from a piecewise-linear refinement when the grid has
/// fewer than 8 cells per particle (cell steps otherwise show up as spurious
/// Dirichlet energy in the gap densities).
QuantileVector initial_quantiles(const DensityField& f0, std::size_t n_particles);

RunReport jko_run(const DensityField& f0, const ModelParams& p, const JkoConfig& cfg, std::size_t n_steps,
                  TimeSeriesSink& sink, std::vector<JkoRecord>* records = nullptr);

}  // namespace whirlpool
