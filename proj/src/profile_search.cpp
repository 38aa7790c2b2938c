#include "profile_search.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "whirlpool/errors.hpp"
#include "whirlpool/parallel.hpp"

namespace whirlpool::detail {

namespace {

class SineProfile {
 public:
  SineProfile(const Grid1D& grid, const ProfileSearchOptions& opts)
      : grid_(grid), n_modes_(opts.n_modes), first_(grid.n_cells()), last_(0) {
    const std::size_t n = grid.n_cells();
    const double width = opts.window_hi - opts.window_lo;
    for (std::size_t j = 0; j < n; ++j) {
      const double x = grid.center(j);
      if (x > opts.window_lo && x < opts.window_hi) {
        first_ = std::min(first_, j);
        last_ = j + 1;
      }
    }
    if (last_ <= first_ + 2) throw Error(ErrorCode::InvalidArgument, "profile window covers fewer than 3 cells");
    const std::size_t w = last_ - first_;
    basis_.resize(n_modes_ * w);
    for (std::size_t k = 0; k < n_modes_; ++k) {
      for (std::size_t i = 0; i < w; ++i) {
        const double x = grid.center(first_ + i);
        basis_[k * w + i] =
            std::sin(static_cast<double>(k + 1) * std::numbers::pi * (x - opts.window_lo) / width);
      }
    }
    g_.resize(n);
    f_.resize(n);
    df_.resize(n);
  }

  // Objective value at coefficients c; gradient with respect to c in gc.
  double evaluate(const ProfileObjective& obj, std::span<const double> c, std::span<double> gc) {
    const std::size_t w = last_ - first_;
    const double h = grid_.spacing();
    std::fill(g_.begin(), g_.end(), 0.0);
    for (std::size_t k = 0; k < n_modes_; ++k) {
      const double ck = c[k];
      for (std::size_t i = 0; i < w; ++i) g_[first_ + i] += ck * basis_[k * w + i];
    }
    double mass = 0.0;
    for (double v : g_) mass += v * v;
    mass *= h;
    if (!(mass > 0.0)) return std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < g_.size(); ++j) f_[j] = g_[j] * g_[j] / mass;
    std::fill(df_.begin(), df_.end(), 0.0);
    const double value = obj(f_, df_);
    double proj = 0.0;
    for (std::size_t j = 0; j < f_.size(); ++j) proj += df_[j] * f_[j];
    proj *= h;
    for (std::size_t k = 0; k < n_modes_; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < w; ++i) {
        const std::size_t j = first_ + i;
        s += basis_[k * w + i] * (2.0 * g_[j] / mass) * (df_[j] - proj);
      }
      gc[k] = s;
    }
    return value;
  }

  const std::vector<double>& profile() const { return f_; }

 private:
  const Grid1D& grid_;
  std::size_t n_modes_;
  std::size_t first_;
  std::size_t last_;
  std::vector<double> basis_;
  std::vector<double> g_;
  std::vector<double> f_;
  std::vector<double> df_;
};

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void normalize(std::vector<double>& c) {
  const double n = std::sqrt(dot(c, c));
  for (double& v : c) v /= n;
}

ProfileSearchResult single_restart(const Grid1D& grid, const ProfileObjective& obj,
                                   const ProfileSearchOptions& opts, std::uint64_t seed) {
  SineProfile sp(grid, opts);
  const std::size_t K = opts.n_modes;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> c(K), gc(K), c_new(K), gc_new(K);
  for (std::size_t k = 0; k < K; ++k) c[k] = normal(rng) / static_cast<double>((k + 1) * (k + 1));
  normalize(c);

  double J = sp.evaluate(obj, c, gc);
  std::vector<double> best_profile = sp.profile();
  bool improved = false;
  double alpha = 0.0;

  for (std::size_t it = 0; it < opts.max_iters; ++it) {
    const double cg = dot(c, gc);
    for (std::size_t k = 0; k < K; ++k) gc[k] -= cg * c[k];
    const double gnorm2 = dot(gc, gc);
    if (std::sqrt(gnorm2) <= 1e-11 * std::max(1.0, std::abs(J))) break;
    if (!(alpha > 0.0)) alpha = 0.1 / std::sqrt(gnorm2);

    bool accepted = false;
    double J_new = J;
    for (int shrink = 0; shrink < 60; ++shrink) {
      for (std::size_t k = 0; k < K; ++k) c_new[k] = c[k] - alpha * gc[k];
      normalize(c_new);
      J_new = sp.evaluate(obj, c_new, gc_new);
      if (std::isfinite(J_new) && J_new <= J - 1e-4 * alpha * gnorm2) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
    improved = true;

    double ss = 0.0, sy = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double s = c_new[k] - c[k];
      ss += s * s;
      sy += s * (gc_new[k] - gc[k]);
    }
    const double rel_change = std::abs(J - J_new) / std::max(1.0, std::abs(J));
    c.swap(c_new);
    gc.swap(gc_new);
    J = J_new;
    best_profile = sp.profile();
    alpha = std::abs(sy) > 0.0 ? ss / std::abs(sy) : 2.0 * alpha;
    if (rel_change < 1e-16) break;
  }
  return {J, std::move(best_profile), improved ? 1u : 0u};
}

}  // namespace

ProfileSearchResult minimize_profile(const Grid1D& grid, const ProfileObjective& objective,
                                     std::size_t n_restarts, const ProfileSearchOptions& opts) {
  if (n_restarts < 1) throw Error(ErrorCode::InvalidArgument, "n_restarts must be at least 1");
  if (opts.n_modes < 1) throw Error(ErrorCode::InvalidArgument, "n_modes must be at least 1");
  std::vector<ProfileSearchResult> results(n_restarts);
  parallel_for(n_restarts, opts.threads, [&](std::size_t i) {
    results[i] = single_restart(grid, objective, opts, opts.seed + 7919u * i);
  });
  ProfileSearchResult best = results[0];
  std::size_t improved = 0;
  for (const auto& r : results) {
    improved += r.restarts_improved;
    if (r.value < best.value) best = r;
  }
  best.restarts_improved = improved;
  return best;
}

}  // namespace whirlpool::detail
