#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "whirlpool/grid.hpp"
#include "whirlpool/io.hpp"

namespace testing {

inline std::filesystem::path preset_dir() { return WHIRLPOOL_PRESET_DIR; }

/// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const std::filesystem::path p = std::filesystem::path(WHIRLPOOL_TEST_TMP) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// GN cache shared by the tests; computed once per build tree.
inline std::filesystem::path gn_cache_path() {
  const std::filesystem::path p = std::filesystem::path(WHIRLPOOL_TEST_TMP) / "gn_cache.json";
  if (!std::filesystem::exists(p)) whirlpool::write_gn_cache(p, whirlpool::compute_gn_cache(1, 400, 4));
  return p;
}

inline double cos2_bump(double x, double center, double width) {
  const double y = x - center;
  if (std::abs(y) >= 0.5 * width) return 0.0;
  const double c = std::cos(M_PI * y / width);
  return c * c;
}

inline whirlpool::DensityField bump_field(const whirlpool::Grid1D& g, double center, double width) {
  return whirlpool::DensityField::from_function(g, [&](double x) { return cos2_bump(x, center, width); });
}

/// Strictly positive smooth random field: 1 + sum of a few random cosines, scaled down.
inline whirlpool::DensityField random_positive_field(const whirlpool::Grid1D& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double a1 = 0.3 * u(rng), a2 = 0.2 * u(rng), a3 = 0.1 * u(rng), ph = u(rng);
  const double L = g.length();
  return whirlpool::DensityField::from_function(g, [&](double x) {
    const double s = (x - g.x_min()) / L;
    return 1.0 + a1 * std::cos(2 * M_PI * s + ph) + a2 * std::cos(4 * M_PI * s) + a3 * std::sin(6 * M_PI * s + 2 * ph);
  });
}

/// Random field that vanishes near both ends of the grid.
inline whirlpool::DensityField random_compact_field(const whirlpool::Grid1D& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double c = g.x_min() + g.length() * (0.4 + 0.2 * u(rng));
  const double w = g.length() * (0.1 + 0.3 * u(rng));
  std::vector<double> v(g.n_cells());
  for (std::size_t j = 0; j < v.size(); ++j) {
    const double b = cos2_bump(g.center(j), c, w);
    v[j] = b > 0.0 ? b * (0.5 + u(rng)) : 0.0;
  }
  return whirlpool::DensityField::normalized(g, std::move(v));
}

}  // namespace testing
