#pragma once

// Travel-time distributions discretized on a uniform time grid.
//
// Bin k covers [k*dt, (k+1)*dt). Cumulative arrays are indexed the same way:
// cdf[k] is read as the arrival probability at time k*dt, i.e. mass inside a
// bin is treated as arriving at the bin's left edge. Convolution therefore
// adds bin indices and a path of s steps is optimistic by at most s bins.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "stochroute/errors.hpp"

namespace stochroute {

using Rng = std::mt19937_64;

inline constexpr double kNormalizationTolerance = 1e-9;

class TimeGrid {
 public:
  TimeGrid(double bin_width, std::size_t bin_count)
      : bin_width_(bin_width), bin_count_(bin_count) {
    if (!(bin_width > 0.0) || !std::isfinite(bin_width))
      throw ParameterError("time grid bin width must be positive");
    if (bin_count == 0) throw ParameterError("time grid needs at least one bin");
  }

  /// Grid whose last bin starts at `horizon`, with at least `min_bins` bins.
  static TimeGrid covering(double horizon, std::size_t min_bins = 1000) {
    if (!(horizon > 0.0)) throw ParameterError("grid horizon must be positive");
    if (min_bins < 2) min_bins = 2;
    return TimeGrid(horizon / static_cast<double>(min_bins - 1), min_bins);
  }

  double bin_width() const noexcept { return bin_width_; }
  std::size_t bin_count() const noexcept { return bin_count_; }
  /// Time at which the grid's probability mass is cut off into overflow.
  double horizon() const noexcept { return bin_width_ * static_cast<double>(bin_count_); }
  double time_of(std::size_t bin) const noexcept { return bin_width_ * static_cast<double>(bin); }

  /// Last bin whose left edge is <= t, clamped to the grid. Negative t maps to 0.
  std::size_t bin_at(double t) const noexcept {
    if (!(t > 0.0)) return 0;
    const double k = std::floor(t / bin_width_ + 1e-9);
    if (k >= static_cast<double>(bin_count_ - 1)) return bin_count_ - 1;
    return static_cast<std::size_t>(k);
  }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  double bin_width_;
  std::size_t bin_count_;
};

struct LogNormalParams {
  double mu = 0.0;
  double sigma = 1.0;

  LogNormalParams() = default;
  LogNormalParams(double mu_, double sigma_) : mu(mu_), sigma(sigma_) {
    if (!(sigma_ > 0.0) || !std::isfinite(sigma_) || !std::isfinite(mu_))
      throw ParameterError("log-normal sigma must be positive and finite");
  }

  double mean() const noexcept { return std::exp(mu + 0.5 * sigma * sigma); }
  friend bool operator==(const LogNormalParams&, const LogNormalParams&) = default;
};

inline double lognormal_cdf(const LogNormalParams& p, double t) {
  if (!(t > 0.0)) return 0.0;
  return 0.5 * std::erfc(-(std::log(t) - p.mu) / (p.sigma * std::sqrt(2.0)));
}

/// Probability mass on a TimeGrid plus the mass lying beyond its horizon.
/// Immutable once constructed.
class DiscreteDistribution {
 public:
  DiscreteDistribution(TimeGrid grid, std::vector<double> mass, double overflow_mass)
      : grid_(grid), mass_(std::move(mass)), overflow_(overflow_mass) {
    if (mass_.size() != grid_.bin_count())
      throw GridError("mass vector length " + std::to_string(mass_.size()) +
                      " does not match grid of " + std::to_string(grid_.bin_count()) +
                      " bins");
    double total = overflow_;
    for (double m : mass_) {
      if (!(m >= 0.0) || !std::isfinite(m)) throw ParameterError("negative or non-finite mass");
      total += m;
    }
    if (!(overflow_ >= 0.0)) throw ParameterError("negative overflow mass");
    if (std::abs(total - 1.0) > kNormalizationTolerance)
      throw ParameterError("distribution is not normalized (total " + std::to_string(total) + ")");
    cdf_.resize(mass_.size());
    std::partial_sum(mass_.begin(), mass_.end(), cdf_.begin());
  }

  /// All mass in a single bin.
  static DiscreteDistribution point_mass(TimeGrid grid, std::size_t bin) {
    if (bin >= grid.bin_count()) throw ParameterError("point mass outside grid");
    std::vector<double> m(grid.bin_count(), 0.0);
    m[bin] = 1.0;
    return {grid, std::move(m), 0.0};
  }

  /// Builds from in-grid masses; whatever is missing from 1 becomes overflow.
  static DiscreteDistribution with_overflow_remainder(TimeGrid grid, std::vector<double> mass) {
    double s = 0.0;
    for (double m : mass) s += m;
    const double overflow = std::max(0.0, 1.0 - s);
    return {grid, std::move(mass), overflow};
  }

  const TimeGrid& grid() const noexcept { return grid_; }
  std::span<const double> mass() const noexcept { return mass_; }
  double overflow_mass() const noexcept { return overflow_; }
  /// Cumulative mass, cdf()[k] = sum of mass[0..k].
  std::span<const double> cdf() const noexcept { return cdf_; }

  double total_mass() const noexcept {
    double s = overflow_;
    for (double m : mass_) s += m;
    return s;
  }

 private:
  TimeGrid grid_;
  std::vector<double> mass_;
  double overflow_;
  std::vector<double> cdf_;
};

namespace detail {

inline void require_same_grid(const TimeGrid& a, const TimeGrid& b) {
  if (!(a == b)) throw GridError("distributions live on different time grids");
}

}  // namespace detail

/// out[k] = sum_{l<=k} pmf[l] * values[k-l] for k < out.size().
///
/// Works for pmf*pmf (truncated convolution) and pmf*cdf (arrival-probability
/// propagation). Each out[k] is accumulated in increasing l, so results do not
/// depend on the input sizes beyond out.size().
inline void causal_convolve(std::span<const double> pmf, std::span<const double> values,
                            std::span<double> out) {
  const std::size_t n = out.size();
  std::fill(out.begin(), out.end(), 0.0);
  const std::size_t vn = std::min(n, values.size());
  std::size_t first = 0;
  while (first < vn && values[first] == 0.0) ++first;
  if (first == vn) return;
  const std::size_t lmax = std::min(pmf.size(), n - first);
  const double* v = values.data();
  double* o = out.data();
  for (std::size_t l = 0; l < lmax; ++l) {
    const double pl = pmf[l];
    if (pl == 0.0) continue;
    const std::size_t kend = std::min(n - l, vn);
    double* ol = o + l;
    for (std::size_t k = first; k < kend; ++k) ol[k] += pl * v[k];
  }
}

inline DiscreteDistribution discretize_lognormal(const LogNormalParams& params,
                                                 const TimeGrid& grid) {
  if (!(params.sigma > 0.0)) throw ParameterError("log-normal sigma must be positive");
  const std::size_t n = grid.bin_count();
  std::vector<double> mass(n);
  double lower = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double upper = lognormal_cdf(params, grid.time_of(k + 1));
    mass[k] = std::max(0.0, upper - lower);
    lower = upper;
  }
  double in_grid = 0.0;
  for (double m : mass) in_grid += m;
  return {grid, std::move(mass), std::max(0.0, 1.0 - in_grid)};
}

inline DiscreteDistribution convolve(const DiscreteDistribution& a, const DiscreteDistribution& b) {
  detail::require_same_grid(a.grid(), b.grid());
  std::vector<double> out(a.grid().bin_count());
  causal_convolve(a.mass(), b.mass(), out);
  return DiscreteDistribution::with_overflow_remainder(a.grid(), std::move(out));
}

/// Lazily built self-convolution powers p, p*p, p*p*p, ...
///
/// Querying k = 1..K costs K-1 convolutions in total. Thread-safe.
class ConvolutionPowers {
 public:
  explicit ConvolutionPowers(DiscreteDistribution base)
      : powers_{std::make_shared<const DiscreteDistribution>(std::move(base))} {}

  const DiscreteDistribution& base() const noexcept { return *powers_.front(); }

  std::shared_ptr<const DiscreteDistribution> power(std::size_t k) const {
    if (k == 0) throw ParameterError("convolution power needs k >= 1");
    std::lock_guard lock(mutex_);
    while (powers_.size() < k)
      powers_.push_back(
          std::make_shared<const DiscreteDistribution>(convolve(*powers_.back(), *powers_.front())));
    return powers_[k - 1];
  }

  std::size_t cached() const {
    std::lock_guard lock(mutex_);
    return powers_.size();
  }

 private:
  mutable std::mutex mutex_;
  mutable std::vector<std::shared_ptr<const DiscreteDistribution>> powers_;
};

inline DiscreteDistribution convolve_power(const DiscreteDistribution& p, std::size_t k) {
  if (k == 0) throw ParameterError("convolution power needs k >= 1");
  ConvolutionPowers powers(p);
  return *powers.power(k);
}

inline DiscreteDistribution mixture(std::span<const DiscreteDistribution> components,
                                    std::span<const double> weights) {
  if (components.empty()) throw ParameterError("mixture of zero components");
  if (components.size() != weights.size())
    throw ParameterError("mixture needs one weight per component");
  double wsum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ParameterError("mixture weights must be non-negative");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-9) throw ParameterError("mixture weights must sum to 1");
  const TimeGrid& grid = components.front().grid();
  std::vector<double> mass(grid.bin_count(), 0.0);
  double overflow = 0.0;
  for (std::size_t i = 0; i < components.size(); ++i) {
    detail::require_same_grid(grid, components[i].grid());
    const double w = weights[i];
    auto m = components[i].mass();
    for (std::size_t k = 0; k < mass.size(); ++k) mass[k] += w * m[k];
    overflow += w * components[i].overflow_mass();
  }
  // Rounding in the weights can leave the total a few ulps off 1.
  double total = overflow;
  for (double x : mass) total += x;
  if (total > 0.0 && std::abs(total - 1.0) > 1e-13) {
    for (double& x : mass) x /= total;
    overflow /= total;
  }
  return {grid, std::move(mass), overflow};
}

/// Equal-weight mixture.
inline DiscreteDistribution mixture(std::span<const DiscreteDistribution> components) {
  if (components.empty()) throw ParameterError("mixture of zero components");
  std::vector<double> w(components.size(), 1.0 / static_cast<double>(components.size()));
  return mixture(components, w);
}

inline std::vector<double> cdf(const DiscreteDistribution& p) {
  return {p.cdf().begin(), p.cdf().end()};
}

/// Draw from a continuous log-normal: exp(mu + sigma * Z).
inline double sample(const LogNormalParams& p, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  return std::exp(p.mu + p.sigma * normal(rng));
}

/// Inverse-CDF draw: pick a bin, then a uniform position inside it.
/// Draws landing in the overflow return +infinity.
inline double sample(const DiscreteDistribution& p, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  const double offset = unit(rng);
  auto c = p.cdf();
  auto it = std::upper_bound(c.begin(), c.end(), u);
  if (it == c.end()) return std::numeric_limits<double>::infinity();
  const auto bin = static_cast<std::size_t>(it - c.begin());
  return p.grid().time_of(bin) + offset * p.grid().bin_width();
}

/// First bin whose cumulative value reaches `theta` (>=), if any.
inline std::optional<std::size_t> first_passage_bin(std::span<const double> cdf_values,
                                                    double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw ParameterError("threshold must lie in (0, 1]");
  for (std::size_t k = 0; k < cdf_values.size(); ++k)
    if (cdf_values[k] >= theta) return k;
  return std::nullopt;
}

inline std::optional<double> first_passage_time(std::span<const double> cdf_values, double theta,
                                                const TimeGrid& grid) {
  auto bin = first_passage_bin(cdf_values, theta);
  if (!bin) return std::nullopt;
  return grid.time_of(*bin);
}

}  // namespace stochroute
