#include "whirlpool/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "whirlpool/errors.hpp"

namespace whirlpool {

Grid1D::Grid1D(double x_min, double x_max, std::size_t n_cells, Boundary boundary)
    : x_min_(x_min), x_max_(x_max), n_cells_(n_cells), boundary_(boundary), h_(0.0) {
  if (!(std::isfinite(x_min) && std::isfinite(x_max)) || !(x_max > x_min)) {
    throw Error(ErrorCode::InvalidArgument, "grid requires x_max > x_min");
  }
  if (n_cells < 2) throw Error(ErrorCode::InvalidArgument, "grid requires at least 2 cells");
  h_ = (x_max - x_min) / static_cast<double>(n_cells);
}

std::vector<double> Grid1D::centers() const {
  std::vector<double> x(n_cells_);
  for (std::size_t j = 0; j < n_cells_; ++j) x[j] = center(j);
  return x;
}

DensityField::DensityField(Grid1D grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.n_cells()) {
    throw Error(ErrorCode::SizeMismatch, "field has " + std::to_string(values_.size()) +
                                             " values for " + std::to_string(grid_.n_cells()) + " cells");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "density value is not finite");
    if (v < 0.0) throw Error(ErrorCode::InvalidArgument, "density value is negative");
  }
}

DensityField DensityField::normalized(Grid1D grid, std::vector<double> values) {
  DensityField f(grid, std::move(values));
  const double m = f.mass();
  if (m < 1e-14) throw Error(ErrorCode::ZeroMass, "cannot normalise a field with mass < 1e-14");
  for (double& v : f.values_) v /= m;
  return f;
}

double DensityField::mass() const noexcept {
  return grid_.spacing() * std::accumulate(values_.begin(), values_.end(), 0.0);
}

double DensityField::max() const noexcept { return *std::max_element(values_.begin(), values_.end()); }
double DensityField::min() const noexcept { return *std::min_element(values_.begin(), values_.end()); }

QuantileVector::QuantileVector(std::vector<double> positions) : positions_(std::move(positions)) {
  if (positions_.empty()) throw Error(ErrorCode::InvalidArgument, "empty quantile vector");
  for (std::size_t i = 0; i < positions_.size(); ++i) {
    if (!std::isfinite(positions_[i])) throw Error(ErrorCode::NonFinite, "quantile position is not finite");
    if (i > 0 && !(positions_[i] > positions_[i - 1])) {
      throw Error(ErrorCode::InvalidArgument,
                  "quantile positions must be strictly increasing (index " + std::to_string(i) + ")");
    }
  }
}

void laplacian_into(const Grid1D& grid, std::span<const double> f, std::span<double> out) {
  const std::size_t n = grid.n_cells();
  const double inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
  for (std::size_t j = 1; j + 1 < n; ++j) out[j] = (f[j - 1] - 2.0 * f[j] + f[j + 1]) * inv_h2;
  if (grid.boundary() == Boundary::Periodic) {
    out[0] = (f[n - 1] - 2.0 * f[0] + f[1]) * inv_h2;
    out[n - 1] = (f[n - 2] - 2.0 * f[n - 1] + f[0]) * inv_h2;
  } else {
    out[0] = (f[1] - f[0]) * inv_h2;
    out[n - 1] = (f[n - 2] - f[n - 1]) * inv_h2;
  }
}

double gradient_inner_product(const Grid1D& grid, std::span<const double> a, std::span<const double> b) {
  const std::size_t n = grid.n_cells();
  double sum = 0.0;
  for (std::size_t j = 0; j + 1 < n; ++j) sum += (a[j + 1] - a[j]) * (b[j + 1] - b[j]);
  if (grid.boundary() == Boundary::Periodic) sum += (a[0] - a[n - 1]) * (b[0] - b[n - 1]);
  return sum / grid.spacing();
}

std::vector<double> laplacian(const DensityField& f) {
  std::vector<double> out(f.size());
  laplacian_into(f.grid(), f.values(), out);
  return out;
}

double gradient_sq_integral(const DensityField& f) {
  return gradient_inner_product(f.grid(), f.values(), f.values());
}

double moment2(const DensityField& f) {
  const Grid1D& g = f.grid();
  double sum = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) {
    const double x = g.center(j);
    sum += x * x * f[j];
  }
  return g.spacing() * sum;
}

double first_moment(const DensityField& f) {
  const Grid1D& g = f.grid();
  double sum = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) sum += g.center(j) * f[j];
  return g.spacing() * sum;
}

double l1_distance(const DensityField& a, const DensityField& b) {
  if (!(a.grid() == b.grid())) throw Error(ErrorCode::SizeMismatch, "l1_distance needs identical grids");
  double sum = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) sum += std::abs(a[j] - b[j]);
  return a.grid().spacing() * sum;
}

QuantileVector to_quantiles(const DensityField& f, std::size_t n_particles) {
  if (n_particles < 2) throw Error(ErrorCode::InvalidArgument, "to_quantiles needs at least 2 particles");
  const Grid1D& g = f.grid();
  const std::size_t n = g.n_cells();
  const double h = g.spacing();

  std::vector<double> cum(n + 1, 0.0);
  for (std::size_t j = 0; j < n; ++j) cum[j + 1] = cum[j] + h * f[j];
  const double total = cum[n];
  if (total < 1e-14) throw Error(ErrorCode::ZeroMass, "to_quantiles on a field with mass < 1e-14");

  std::vector<double> q(n_particles);
  std::size_t j = 0;
  for (std::size_t i = 0; i < n_particles; ++i) {
    const double s = total * (static_cast<double>(i) + 0.5) / static_cast<double>(n_particles);
    while (j + 1 < n && cum[j + 1] < s) ++j;
    if (s == cum[j + 1]) {
      // Flat CDF segment over vacuum cells: take its midpoint.
      std::size_t k = j + 1;
      while (k < n && f[k] == 0.0) ++k;
      q[i] = 0.5 * (g.face(j + 1) + g.face(k));
    } else {
      q[i] = g.face(j) + (s - cum[j]) / f[j];
    }
  }
  return QuantileVector(std::move(q));
}

namespace {

// Adds `density` on [a, b] to the cell averages in `out`.
void deposit(const Grid1D& g, double a, double b, double density, std::vector<double>& out) {
  a = std::max(a, g.x_min());
  b = std::min(b, g.x_max());
  if (!(b > a)) return;
  const double h = g.spacing();
  const std::size_t n = g.n_cells();
  std::size_t j = std::min(static_cast<std::size_t>((a - g.x_min()) / h), n - 1);
  for (; j < n; ++j) {
    const double lo = std::max(a, g.face(j));
    const double hi = std::min(b, g.face(j + 1));
    if (hi > lo) out[j] += density * (hi - lo) / h;
    if (g.face(j + 1) >= b) break;
  }
}

// Cumulative mass of a positivity-limited piecewise-linear reconstruction.
class LinearReconstruction {
 public:
  explicit LinearReconstruction(const DensityField& f) : grid_(f.grid()), f_(f.data()) {
    const std::size_t n = grid_.n_cells();
    const double h = grid_.spacing();
    slope_.resize(n);
    cum_.assign(n + 1, 0.0);
    const bool periodic = grid_.boundary() == Boundary::Periodic;
    for (std::size_t j = 0; j < n; ++j) {
      const double left = j > 0 ? f_[j - 1] : (periodic ? f_[n - 1] : f_[0]);
      const double right = j + 1 < n ? f_[j + 1] : (periodic ? f_[0] : f_[n - 1]);
      const double bound = 2.0 * f_[j] / h;
      slope_[j] = std::clamp((right - left) / (2.0 * h), -bound, bound);
      cum_[j + 1] = cum_[j] + h * f_[j];
    }
  }

  double total() const { return cum_.back(); }

  double cdf(double x) const {
    if (x <= grid_.x_min()) return 0.0;
    if (x >= grid_.x_max()) return cum_.back();
    const double h = grid_.spacing();
    const std::size_t j =
        std::min(static_cast<std::size_t>((x - grid_.x_min()) / h), grid_.n_cells() - 1);
    const double u = x - grid_.face(j);
    return cum_[j] + f_[j] * u + 0.5 * slope_[j] * (u * u - h * u);
  }

 private:
  const Grid1D& grid_;
  const std::vector<double>& f_;
  std::vector<double> slope_;
  std::vector<double> cum_;
};

}  // namespace

DensityField from_quantiles(const QuantileVector& q, const Grid1D& grid) {
  const std::size_t np = q.size();
  if (np < 2) throw Error(ErrorCode::InvalidArgument, "from_quantiles needs at least 2 particles");
  if (q[0] < grid.x_min() || q[np - 1] > grid.x_max()) {
    throw Error(ErrorCode::OutOfDomain, "particle positions fall outside the grid");
  }
  const double cell_mass = 1.0 / static_cast<double>(np);
  std::vector<double> out(grid.n_cells(), 0.0);
  for (std::size_t i = 0; i + 1 < np; ++i) {
    const double gap = q[i + 1] - q[i];
    deposit(grid, q[i], q[i + 1], cell_mass / gap, out);
  }
  // Half a particle's mass lies beyond each end; extend the end gaps' density by half a gap.
  const double g0 = q[1] - q[0];
  const double gl = q[np - 1] - q[np - 2];
  deposit(grid, q[0] - 0.5 * g0, q[0], cell_mass / g0, out);
  deposit(grid, q[np - 1], q[np - 1] + 0.5 * gl, cell_mass / gl, out);
  return DensityField::normalized(grid, std::move(out));
}

DensityField remap_scaled(const DensityField& f, const Grid1D& target, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw Error(ErrorCode::InvalidArgument, "remap scale must be positive and finite");
  }
  const LinearReconstruction rec(f);
  const double total = rec.total();
  const double outside = rec.cdf(scale * target.x_min()) + (total - rec.cdf(scale * target.x_max()));
  if (outside > 1e-12 * total) {
    throw Error(ErrorCode::OutOfDomain,
                "rescaled support escapes the target grid (lost mass " + std::to_string(outside) + ")");
  }
  const std::size_t n = target.n_cells();
  std::vector<double> out(n);
  double lower = rec.cdf(scale * target.face(0));
  for (std::size_t j = 0; j < n; ++j) {
    const double upper = rec.cdf(scale * target.face(j + 1));
    out[j] = std::max(upper - lower, 0.0) / target.spacing();
    lower = upper;
  }
  return DensityField::normalized(target, std::move(out));
}

DensityField dilate(const DensityField& f, double lambda) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "dilation factor must be positive");
  return remap_scaled(f, f.grid(), lambda);
}

}  // namespace whirlpool
