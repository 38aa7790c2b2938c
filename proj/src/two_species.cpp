#include "whirlpool/two_species.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "rk2.hpp"
#include "whirlpool/errors.hpp"

namespace whirlpool {

void TwoSpeciesParams::validate() const {
  for (double v : {kappa, alpha, beta, omega, m1, m2}) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "two-species parameters must be finite");
  }
  if (!(kappa > 0.0)) throw Error(ErrorCode::PositiveDefinitenessViolated, "kappa <= 0");
  if (!(kappa - alpha * alpha > 0.0)) throw Error(ErrorCode::PositiveDefinitenessViolated, "kappa - alpha^2 <= 0");
  const double mc = critical_exponent(1);
  if (!(m1 >= 1.0 && m1 < mc)) throw Error(ErrorCode::InvalidArgument, "m1 must lie in [1, 4)");
  if (!(m2 >= 1.0 && m2 < mc)) throw Error(ErrorCode::InvalidArgument, "m2 must lie in [1, 4)");
}

SpeciesPair::SpeciesPair(DensityField rho_, DensityField eta_) : rho(std::move(rho_)), eta(std::move(eta_)) {
  if (!(rho.grid() == eta.grid())) throw Error(ErrorCode::SizeMismatch, "species live on different grids");
}

namespace {

EnergyBreakdown energy_of(const Grid1D& grid, std::span<const double> rho, std::span<const double> eta,
                          const TwoSpeciesParams& p) {
  EnergyBreakdown e;
  const double grr = gradient_inner_product(grid, rho, rho);
  const double gee = gradient_inner_product(grid, eta, eta);
  const double gre = gradient_inner_product(grid, rho, eta);
  double overlap = 0.0;
  for (std::size_t j = 0; j < rho.size(); ++j) overlap += rho[j] * eta[j];
  overlap *= grid.spacing();
  e.h1_seminorm_sq = grr;
  e.lm_norm = lm_norm(grid, rho, p.m1);
  e.dirichlet = 0.5 * p.kappa * grr + 0.5 * gee;
  e.entropy_term = p.beta / p.m1 * entropy_em(grid, rho, p.m1) + 1.0 / p.m2 * entropy_em(grid, eta, p.m2);
  e.cross = p.alpha * gre - p.omega * overlap;
  e.total = e.dirichlet - e.entropy_term + e.cross;
  return e;
}

struct TwoSpeciesRhs {
  const Grid1D& grid;
  const TwoSpeciesParams& p;
  std::vector<double>& lap_rho;
  std::vector<double>& lap_eta;
  std::vector<double>& xi;

  double operator()(std::span<const double> state, std::span<double> out) const {
    const std::size_t n = grid.n_cells();
    const auto rho = state.subspan(0, n);
    const auto eta = state.subspan(n, n);
    laplacian_into(grid, rho, lap_rho);
    laplacian_into(grid, eta, lap_eta);

    for (std::size_t j = 0; j < n; ++j) xi[j] = p.kappa * lap_rho[j] + p.alpha * lap_eta[j];
    add_entropy_potential(rho, p.m1, p.beta / p.m1, xi);
    for (std::size_t j = 0; j < n; ++j) xi[j] += p.omega * eta[j];
    const double v1 = upwind_divergence(grid, rho, xi, out.subspan(0, n));

    for (std::size_t j = 0; j < n; ++j) xi[j] = p.alpha * lap_rho[j] + lap_eta[j];
    for (std::size_t j = 0; j < n; ++j) xi[j] += p.omega * rho[j];
    add_entropy_potential(eta, p.m2, 1.0 / p.m2, xi);
    const double v2 = upwind_divergence(grid, eta, xi, out.subspan(n, n));
    return std::max(v1, v2);
  }
};

// Largest eigenvalue of the gradient matrix; scales the fourth-order stiffness.
double gradient_matrix_norm(const TwoSpeciesParams& p) {
  const double tr = p.kappa + 1.0;
  const double det = p.kappa - p.alpha * p.alpha;
  return 0.5 * (tr + std::sqrt(std::max(tr * tr - 4.0 * det, 0.0)));
}

}  // namespace

EnergyBreakdown two_species_energy(const SpeciesPair& s, const TwoSpeciesParams& p) {
  return energy_of(s.rho.grid(), s.rho.values(), s.eta.values(), p);
}

std::pair<std::vector<double>, std::vector<double>> two_species_rhs(const SpeciesPair& s,
                                                                    const TwoSpeciesParams& p) {
  const Grid1D& grid = s.rho.grid();
  const std::size_t n = grid.n_cells();
  std::vector<double> state(s.rho.data());
  state.insert(state.end(), s.eta.data().begin(), s.eta.data().end());
  std::vector<double> lr(n), le(n), xi(n), out(2 * n);
  TwoSpeciesRhs{grid, p, lr, le, xi}(state, out);
  return {std::vector<double>(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(n)),
          std::vector<double>(out.begin() + static_cast<std::ptrdiff_t>(n), out.end())};
}

double segregation_index(const SpeciesPair& s) {
  double acc = 0.0;
  for (std::size_t j = 0; j < s.rho.size(); ++j) acc += std::min(s.rho[j], s.eta[j]);
  return s.rho.grid().spacing() * acc;
}

double two_species_quadratic_lower_bound(const SpeciesPair& s, const TwoSpeciesParams& p, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "eps must be positive");
  const Grid1D& grid = s.rho.grid();
  const double grr = gradient_inner_product(grid, s.rho.values(), s.rho.values());
  const double gee = gradient_inner_product(grid, s.eta.values(), s.eta.values());
  const double rr = lm_norm(grid, s.rho.values(), 2.0);
  const double ee = lm_norm(grid, s.eta.values(), 2.0);
  const double a = std::abs(p.alpha);
  const double w = std::abs(p.omega);
  return 0.5 * (p.kappa - a * eps) * grr + 0.5 * (1.0 - a / eps) * gee - 0.5 * (p.beta + w) * rr -
         0.5 * (1.0 + w) * ee;
}

RunReport two_species_run(const SpeciesPair& s0, const TwoSpeciesParams& p, const FvConfig& cfg,
                          TimeSeriesSink& sink) {
  p.validate();
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const Grid1D& grid = s0.rho.grid();
  const std::size_t n = grid.n_cells();
  const double h = grid.spacing();
  const double stiffness = gradient_matrix_norm(p);

  std::vector<double> snaps;
  for (double ts : cfg.snapshot_times) {
    if (ts <= cfg.t_end) snaps.push_back(ts);
  }
  std::sort(snaps.begin(), snaps.end());
  snaps.erase(std::unique(snaps.begin(), snaps.end()), snaps.end());
  std::size_t next_snap = 0;
  double last_snap_t = -1.0;

  RunReport report;
  std::vector<double> state(s0.rho.data());
  state.insert(state.end(), s0.eta.data().begin(), s0.eta.data().end());
  std::vector<double> lr(n), le(n), xi(n);
  const TwoSpeciesRhs rhs{grid, p, lr, le, xi};
  detail::RkWorkspace ws;
  double t = 0.0;
  double last_dt = 0.0;
  std::size_t k = 0;
  bool contaminated = false;

  auto current = [&] {
    return SpeciesPair(DensityField(grid, std::vector<double>(state.begin(), state.begin() + static_cast<std::ptrdiff_t>(n))),
                       DensityField(grid, std::vector<double>(state.begin() + static_cast<std::ptrdiff_t>(n), state.end())));
  };
  auto emit = [&] {
    const SpeciesPair s = current();
    const EnergyBreakdown e = two_species_energy(s, p);
    Sample smp;
    smp.t = t;
    smp.dt = last_dt;
    smp.energy_total = e.total;
    smp.energy_dirichlet = e.dirichlet;
    smp.energy_entropy = e.entropy_term;
    smp.m2 = moment2(s.rho);
    smp.lm_norm = e.lm_norm;
    smp.linf_norm = s.rho.max();
    smp.min_rho = std::min(s.rho.min(), s.eta.min());
    smp.mass = s.rho.mass();
    smp.eta = Sample::Eta{s.eta.mass(), moment2(s.eta), segregation_index(s), e.cross};
    sink.emit(smp);
    if (!contaminated && grid.boundary() == Boundary::NoFlux &&
        std::max({state[0], state[n - 1], state[n], state[2 * n - 1]}) > 1e-10) {
      contaminated = true;
      report.warnings.push_back("BoundaryContamination: boundary density exceeded 1e-10 at t = " +
                                std::to_string(t));
    }
  };
  auto flag_blowup = [&](CertificateKind kind, double evidence) {
    report.termination = Termination::BlowUpDetected;
    report.certificates.push_back({kind, t, evidence, false});
  };

  while (next_snap < snaps.size() && snaps[next_snap] <= 0.0) {
    sink.snapshot(0.0, s0.rho, &s0.eta);
    last_snap_t = 0.0;
    ++next_snap;
  }
  emit();

  const double time_eps = 1e-12 * std::max(1.0, cfg.t_end);
  const std::vector<double> initial_sums = detail::block_sums(state, 2);
  try {
    while (cfg.t_end - t > time_eps) {
      const double target = next_snap < snaps.size() ? snaps[next_snap] : cfg.t_end;
      const double cap = target - t;
      const auto out = detail::ssp_rk2_step(state, 2, grid, rhs, cfg, stiffness, cap, ws);
      detail::restore_block_sums(state, initial_sums);
      last_dt = out.dt;
      t = (out.dt == cap || target - (t + out.dt) <= time_eps) ? target : t + out.dt;
      ++k;
      if (k % cfg.output_stride == 0) emit();
      while (next_snap < snaps.size() && snaps[next_snap] <= t + time_eps) {
        const SpeciesPair s = current();
        sink.snapshot(snaps[next_snap], s.rho, &s.eta);
        last_snap_t = t;
        ++next_snap;
      }
      const double peak = *std::max_element(state.begin(), state.end());
      if (peak > cfg.overflow_threshold || h * peak > cfg.concentration_threshold) {
        flag_blowup(CertificateKind::NormOverflow, peak);
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

  report.n_steps = k;
  report.final_time = t;
  if (report.termination != Termination::NonFinite) {
    SpeciesPair fin = current();
    report.final_energy = two_species_energy(fin, p).total;
    if (last_snap_t != t) sink.snapshot(t, fin.rho, &fin.eta);
    report.final_rho = fin.rho;
    report.final_eta = fin.eta;
  }
  sink.flush();
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace whirlpool
