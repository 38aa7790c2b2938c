#include "whirlpool/fv_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "rk2.hpp"
#include "whirlpool/diagnostics.hpp"
#include "whirlpool/errors.hpp"

namespace whirlpool {

void FvConfig::validate() const {
  if (!(cfl_safety > 0.0 && cfl_safety <= 1.0)) throw Error(ErrorCode::InvalidArgument, "cfl_safety must lie in (0, 1]");
  if (!(dt_max > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt_max must be positive");
  if (!(dt_min >= 0.0 && dt_min < dt_max)) throw Error(ErrorCode::InvalidArgument, "dt_min must satisfy 0 <= dt_min < dt_max");
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw Error(ErrorCode::InvalidArgument, "t_end must be positive");
  if (!(positivity_floor >= 0.0)) throw Error(ErrorCode::InvalidArgument, "positivity_floor must be >= 0");
  if (output_stride < 1) throw Error(ErrorCode::InvalidArgument, "output_stride must be >= 1");
  if (!(overflow_threshold > 0.0)) throw Error(ErrorCode::InvalidArgument, "overflow_threshold must be positive");
  if (!(concentration_threshold > 0.0)) throw Error(ErrorCode::InvalidArgument, "concentration_threshold must be positive");
  for (double t : snapshot_times) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw Error(ErrorCode::InvalidArgument, "snapshot times must be >= 0");
  }
}

double upwind_divergence(const Grid1D& grid, std::span<const double> rho, std::span<const double> xi,
                         std::span<double> out) {
  const std::size_t n = grid.n_cells();
  const double inv_h = 1.0 / grid.spacing();
  const bool periodic = grid.boundary() == Boundary::Periodic;
  double max_v = 0.0;
  // Flux through the left face of cell 0.
  double left_flux = 0.0;
  if (periodic) {
    const double v = (xi[0] - xi[n - 1]) * inv_h;
    left_flux = rho[n - 1] * std::max(v, 0.0) + rho[0] * std::min(v, 0.0);
    max_v = std::abs(v);
  }
  const double first_flux = left_flux;
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const double v = (xi[j + 1] - xi[j]) * inv_h;
    const double flux = rho[j] * std::max(v, 0.0) + rho[j + 1] * std::min(v, 0.0);
    max_v = std::max(max_v, std::abs(v));
    out[j] = -(flux - left_flux) * inv_h;
    left_flux = flux;
  }
  out[n - 1] = -((periodic ? first_flux : 0.0) - left_flux) * inv_h;
  return max_v;
}

double fv_rhs_into(const Grid1D& grid, std::span<const double> rho, const ModelParams& p,
                   std::span<double> xi_scratch, std::span<double> out) {
  variation_into(grid, rho, p, xi_scratch);
  return upwind_divergence(grid, rho, xi_scratch, out);
}

std::vector<double> fv_rhs(const DensityField& f, const ModelParams& p) {
  std::vector<double> xi(f.size()), out(f.size());
  fv_rhs_into(f.grid(), f.values(), p, xi, out);
  return out;
}

double stable_dt(const Grid1D& grid, double max_velocity, double rho_max, const FvConfig& cfg) {
  // All face velocities zero: the state is an exact steady state.
  if (max_velocity == 0.0) return cfg.dt_max;
  const double h = grid.spacing();
  double bound = h / max_velocity;
  if (rho_max > 0.0) {
    const double h2 = h * h;
    bound = std::min(bound, h2 * h2 / (8.0 * rho_max));
  }
  return std::min(cfg.dt_max, cfg.cfl_safety * bound);
}

namespace {

struct OneSpeciesRhs {
  const Grid1D& grid;
  const ModelParams& p;
  std::vector<double>& xi;
  double operator()(std::span<const double> rho, std::span<double> out) const {
    return fv_rhs_into(grid, rho, p, xi, out);
  }
};

}  // namespace

StepResult step(const DensityField& f, const ModelParams& p, const FvConfig& cfg, double dt_cap) {
  std::vector<double> state = f.data();
  std::vector<double> xi(f.size());
  detail::RkWorkspace ws;
  const auto out = detail::ssp_rk2_step(state, 1, f.grid(), OneSpeciesRhs{f.grid(), p, xi}, cfg, 1.0, dt_cap, ws);
  DensityField next(f.grid(), std::move(state));
  EnergyBreakdown e = free_energy(next, p);
  return {std::move(next), out.dt, out.max_velocity, e};
}

Sample make_sample(const DensityField& f, const ModelParams& p, double t, double dt) {
  const EnergyBreakdown e = free_energy(f, p);
  Sample s;
  s.t = t;
  s.dt = dt;
  s.energy_total = e.total;
  s.energy_dirichlet = e.dirichlet;
  s.energy_entropy = e.entropy_term;
  s.m2 = moment2(f);
  s.lm_norm = e.lm_norm;
  s.linf_norm = f.max();
  s.min_rho = f.min();
  s.mass = f.mass();
  return s;
}

RunReport run(const DensityField& f0, const ModelParams& p, const FvConfig& cfg, TimeSeriesSink& sink) {
  p.validate();
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const Grid1D& grid = f0.grid();
  const std::size_t n = grid.n_cells();
  const double h = grid.spacing();

  std::vector<double> snaps;
  for (double ts : cfg.snapshot_times) {
    if (ts <= cfg.t_end) snaps.push_back(ts);
  }
  std::sort(snaps.begin(), snaps.end());
  snaps.erase(std::unique(snaps.begin(), snaps.end()), snaps.end());
  std::size_t next_snap = 0;
  double last_snap_t = -1.0;

  RunReport report;
  std::vector<double> state = f0.data();
  std::vector<double> xi(n);
  detail::RkWorkspace ws;
  double t = 0.0;
  double last_dt = 0.0;
  std::size_t k = 0;
  bool contaminated = false;

  auto current = [&] { return DensityField(grid, state); };
  auto check_boundary = [&] {
    if (!contaminated && grid.boundary() == Boundary::NoFlux && std::max(state[0], state[n - 1]) > 1e-10) {
      contaminated = true;
      report.warnings.push_back("BoundaryContamination: boundary density exceeded 1e-10 at t = " +
                                std::to_string(t));
    }
  };
  auto emit = [&] {
    sink.emit(make_sample(current(), p, t, last_dt));
    check_boundary();
  };
  auto flag_blowup = [&](CertificateKind kind, double evidence) {
    report.termination = Termination::BlowUpDetected;
    report.certificates.push_back({kind, t, evidence, false});
    if (auto fc = forecast_blowup(f0, p, cfg.chi_c, 0.0)) report.certificates.push_back(*fc);
  };

  while (next_snap < snaps.size() && snaps[next_snap] <= 0.0) {
    sink.snapshot(0.0, f0, nullptr);
    last_snap_t = 0.0;
    ++next_snap;
  }
  emit();

  const double time_eps = 1e-12 * std::max(1.0, cfg.t_end);
  const std::vector<double> initial_sums = detail::block_sums(state, 1);
  try {
    while (cfg.t_end - t > time_eps) {
      const double target = next_snap < snaps.size() ? snaps[next_snap] : cfg.t_end;
      const double cap = target - t;
      const auto out =
          detail::ssp_rk2_step(state, 1, grid, OneSpeciesRhs{grid, p, xi}, cfg, 1.0, cap, ws);
      detail::restore_block_sums(state, initial_sums);
      last_dt = out.dt;
      t = (out.dt == cap || target - (t + out.dt) <= time_eps) ? target : t + out.dt;
      ++k;
      if (k % cfg.output_stride == 0) emit();
      while (next_snap < snaps.size() && snaps[next_snap] <= t + time_eps) {
        sink.snapshot(snaps[next_snap], current(), nullptr);
        last_snap_t = t;
        ++next_snap;
      }
      const double rho_max = *std::max_element(state.begin(), state.end());
      if (rho_max > cfg.overflow_threshold) {
        flag_blowup(CertificateKind::NormOverflow, rho_max);
        break;
      }
      if (h * rho_max > cfg.concentration_threshold) {
        flag_blowup(CertificateKind::NormOverflow, rho_max);
        break;
      }
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::DtUnderflow) {
      flag_blowup(CertificateKind::DtCollapse, last_dt);
    } else if (e.code() == ErrorCode::NonFinite) {
      report.termination = Termination::NonFinite;
      report.failure_message = e.what();
    } else {
      throw;
    }
  }

  check_boundary();
  report.n_steps = k;
  report.final_time = t;
  if (report.termination != Termination::NonFinite) {
    DensityField fin = current();
    report.final_energy = free_energy(fin, p).total;
    if (last_snap_t != t) sink.snapshot(t, fin, nullptr);
    report.final_rho = std::move(fin);
  }
  sink.flush();
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace whirlpool
