#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace whirlpool {

enum class Boundary { Periodic, NoFlux };

/// Uniform cell-centred mesh on [x_min, x_max].
class Grid1D {
 public:
  Grid1D(double x_min, double x_max, std::size_t n_cells, Boundary boundary = Boundary::NoFlux);

  double x_min() const noexcept { return x_min_; }
  double x_max() const noexcept { return x_max_; }
  std::size_t n_cells() const noexcept { return n_cells_; }
  Boundary boundary() const noexcept { return boundary_; }
  double spacing() const noexcept { return h_; }
  double length() const noexcept { return x_max_ - x_min_; }

  double center(std::size_t j) const noexcept { return x_min_ + (static_cast<double>(j) + 0.5) * h_; }
  /// Left face of cell j; face(n_cells) is x_max.
  double face(std::size_t j) const noexcept { return x_min_ + static_cast<double>(j) * h_; }

  std::vector<double> centers() const;

  bool operator==(const Grid1D&) const = default;

 private:
  double x_min_;
  double x_max_;
  std::size_t n_cells_;
  Boundary boundary_;
  double h_;
};

/// Nonnegative cell averages of a density on a Grid1D.
class DensityField {
 public:
  /// Validates length, finiteness and nonnegativity; does not rescale.
  DensityField(Grid1D grid, std::vector<double> values);

  /// Rescales `values` to unit mass. Throws ZeroMass when the mass is below 1e-14.
  static DensityField normalized(Grid1D grid, std::vector<double> values);

  /// Samples `profile` at cell centres and normalises.
  template <typename F>
  static DensityField from_function(const Grid1D& grid, F&& profile) {
    std::vector<double> v(grid.n_cells());
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = profile(grid.center(j));
    return normalized(grid, std::move(v));
  }

  const Grid1D& grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  const std::vector<double>& data() const noexcept { return values_; }
  double operator[](std::size_t j) const noexcept { return values_[j]; }
  std::size_t size() const noexcept { return values_.size(); }

  double mass() const noexcept;
  double max() const noexcept;
  double min() const noexcept;

 private:
  Grid1D grid_;
  std::vector<double> values_;
};

/// Particle positions at the quantile levels (i + 1/2) / n of a probability density.
class QuantileVector {
 public:
  /// Throws InvalidArgument unless positions are finite and strictly increasing.
  explicit QuantileVector(std::vector<double> positions);

  std::size_t size() const noexcept { return positions_.size(); }
  std::span<const double> positions() const noexcept { return positions_; }
  const std::vector<double>& data() const noexcept { return positions_; }
  double operator[](std::size_t i) const noexcept { return positions_[i]; }

 private:
  std::vector<double> positions_;
};

// Raw-array kernels shared by the solvers. `out` must have grid.n_cells() entries.
void laplacian_into(const Grid1D& grid, std::span<const double> f, std::span<double> out);
double gradient_inner_product(const Grid1D& grid, std::span<const double> a, std::span<const double> b);

/// Central three-point Laplacian with periodic wrap or mirrored ghost cells.
std::vector<double> laplacian(const DensityField& f);

/// Discrete ∫|∇f|² summed over faces; no-flux boundary faces contribute zero.
double gradient_sq_integral(const DensityField& f);

double moment2(const DensityField& f);
double first_moment(const DensityField& f);
double l1_distance(const DensityField& a, const DensityField& b);

QuantileVector to_quantiles(const DensityField& f, std::size_t n_particles);
DensityField from_quantiles(const QuantileVector& q, const Grid1D& grid);

/// Conservative remap of x -> f(scale * x) * scale onto `target`, i.e. target
/// cell [a, b] receives the mass of f on [scale*a, scale*b]. Uses a
/// positivity-limited piecewise-linear reconstruction of f. Throws OutOfDomain
/// when mass of f lies outside the mapped target box.
DensityField remap_scaled(const DensityField& f, const Grid1D& target, double scale);

/// Mass-preserving dilation rho_lambda(x) = lambda * rho(lambda * x).
DensityField dilate(const DensityField& f, double lambda);

}  // namespace whirlpool
