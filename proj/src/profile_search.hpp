#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "whirlpool/grid.hpp"

namespace whirlpool::detail {

// Objective on a unit-mass profile f: returns J(f) and writes dJ/df_j into grad.
using ProfileObjective = std::function<double(std::span<const double> f, std::span<double> grad)>;

struct ProfileSearchOptions {
  std::size_t n_modes = 12;
  double window_lo = 0.0;
  double window_hi = 1.0;
  std::size_t max_iters = 3000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct ProfileSearchResult {
  double value;
  std::vector<double> profile;
  std::size_t restarts_improved;
};

// Minimises J over profiles f = g^2 / (h sum g^2) with g a sine series on the
// window, by projected gradient descent on the unit sphere of coefficients.
ProfileSearchResult minimize_profile(const Grid1D& grid, const ProfileObjective& objective,
                                     std::size_t n_restarts, const ProfileSearchOptions& opts);

}  // namespace whirlpool::detail
