#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "whirlpool/energy.hpp"
#include "whirlpool/grid.hpp"
#include "whirlpool/report.hpp"

namespace whirlpool {

struct FvConfig {
  double cfl_safety = 0.5;
  double dt_max = 1e-3;
  double dt_min = 1e-14;
  double t_end = 1.0;
  double positivity_floor = 1e-13;
  std::size_t output_stride = 100;
  /// Blow-up flag on the absolute sup norm.
  double overflow_threshold = 1e6;
  /// Blow-up flag when one cell holds more than this share of the mass (h * max rho).
  double concentration_threshold = 0.5;
  /// Times at which the sink receives a snapshot; steps are shortened to hit them.
  std::vector<double> snapshot_times;
  /// Critical mass estimate, used only for the blow-up forecast at m = m_c.
  std::optional<double> chi_c;

  void validate() const;
};

struct StepResult {
  DensityField field;
  double dt_used;
  double max_velocity;
  EnergyBreakdown energy;
};

/// Upwind finite-volume divergence -div(rho v) with v = d/dx xi on faces; returns max |v|.
double upwind_divergence(const Grid1D& grid, std::span<const double> rho, std::span<const double> xi,
                         std::span<double> out);

/// Time derivative of rho for the one-species flow; returns max face speed.
double fv_rhs_into(const Grid1D& grid, std::span<const double> rho, const ModelParams& p,
                   std::span<double> xi_scratch, std::span<double> out);
std::vector<double> fv_rhs(const DensityField& f, const ModelParams& p);

/// Explicit time-step bound from the velocity CFL condition and the fourth-order stiffness;
/// dt_max when every face velocity vanishes.
double stable_dt(const Grid1D& grid, double max_velocity, double rho_max, const FvConfig& cfg);

/// One SSP-RK2 step, never longer than dt_cap. Throws DtUnderflow or NonFinite.
StepResult step(const DensityField& f, const ModelParams& p, const FvConfig& cfg,
                double dt_cap = std::numeric_limits<double>::infinity());

Sample make_sample(const DensityField& f, const ModelParams& p, double t, double dt);

RunReport run(const DensityField& f0, const ModelParams& p, const FvConfig& cfg, TimeSeriesSink& sink);

}  // namespace whirlpool
