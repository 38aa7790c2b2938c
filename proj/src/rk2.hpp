#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "whirlpool/errors.hpp"
#include "whirlpool/fv_solver.hpp"

namespace whirlpool::detail {

struct RkWorkspace {
  std::vector<double> k1, k2, s1, s2, masses;
};

struct RkOutcome {
  double dt;
  double max_velocity;
};

// SSP-RK2 on `state`, which holds n_fields consecutive blocks of grid.n_cells()
// values. rhs(state, out) writes the time derivative and returns the max face
// speed. Negative overshoot halves dt (up to 30 times); clipped states are
// rescaled block by block to their previous mass.
template <typename Rhs>
RkOutcome ssp_rk2_step(std::vector<double>& state, std::size_t n_fields, const Grid1D& grid, Rhs&& rhs,
                       const FvConfig& cfg, double stiffness, double dt_cap, RkWorkspace& ws) {
  const std::size_t size = state.size();
  const std::size_t n = grid.n_cells();
  ws.k1.resize(size);
  ws.k2.resize(size);
  ws.s1.resize(size);
  ws.s2.resize(size);
  ws.masses.resize(n_fields);

  for (std::size_t b = 0; b < n_fields; ++b) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += state[b * n + j];
    ws.masses[b] = s;
  }

  const double max_v = rhs(std::span<const double>(state), std::span<double>(ws.k1));
  for (double v : ws.k1) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "non-finite time derivative");
  }
  const double rho_max = *std::max_element(state.begin(), state.end());
  double dt = std::min(stable_dt(grid, max_v, rho_max * stiffness, cfg), dt_cap);
  const double floor = -cfg.positivity_floor;

  for (int halvings = 0;; ++halvings) {
    if (dt < cfg.dt_min || halvings > 30) {
      throw Error(ErrorCode::DtUnderflow, "time step " + std::to_string(dt) + " below dt_min");
    }
    bool ok = true;
    for (std::size_t i = 0; i < size; ++i) {
      ws.s1[i] = state[i] + dt * ws.k1[i];
      if (!(ws.s1[i] >= floor)) ok = false;
    }
    if (ok) {
      rhs(std::span<const double>(ws.s1), std::span<double>(ws.k2));
      for (std::size_t i = 0; i < size; ++i) {
        ws.s2[i] = 0.5 * state[i] + 0.5 * (ws.s1[i] + dt * ws.k2[i]);
        if (!std::isfinite(ws.s2[i])) throw Error(ErrorCode::NonFinite, "non-finite density after step");
        if (!(ws.s2[i] >= floor)) ok = false;
      }
    } else {
      for (double v : ws.s1) {
        if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "non-finite density after stage");
      }
    }
    if (ok) break;
    dt *= 0.5;
  }

  for (std::size_t b = 0; b < n_fields; ++b) {
    bool clipped = false;
    for (std::size_t j = 0; j < n; ++j) {
      double& v = ws.s2[b * n + j];
      if (v < 0.0) {
        v = 0.0;
        clipped = true;
      }
    }
    if (clipped) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += ws.s2[b * n + j];
      const double scale = ws.masses[b] / s;
      for (std::size_t j = 0; j < n; ++j) ws.s2[b * n + j] *= scale;
    }
  }
  state.swap(ws.s2);
  return {dt, max_v};
}

inline std::vector<double> block_sums(const std::vector<double>& state, std::size_t n_fields) {
  const std::size_t n = state.size() / n_fields;
  std::vector<double> out(n_fields, 0.0);
  for (std::size_t b = 0; b < n_fields; ++b) {
    for (std::size_t j = 0; j < n; ++j) out[b] += state[b * n + j];
  }
  return out;
}

// Long runs accumulate roundoff in the cell sums; once a block drifts from its
// initial sum by more than 1e-14 relative, it is rescaled back.
inline void restore_block_sums(std::vector<double>& state, const std::vector<double>& initial) {
  const std::size_t n = state.size() / initial.size();
  const auto now = block_sums(state, initial.size());
  for (std::size_t b = 0; b < initial.size(); ++b) {
    if (std::abs(now[b] - initial[b]) <= 1e-14 * initial[b]) continue;
    const double scale = initial[b] / now[b];
    for (std::size_t j = 0; j < n; ++j) state[b * n + j] *= scale;
  }
}

}  // namespace whirlpool::detail
