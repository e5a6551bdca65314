#pragma once

// Distance-based estimates of arrival CDFs for nodes the traveler has not
// explored.
//
// A pair (to, from) at metric distance d is assumed to be k = ceil(h(d) / lambda)
// typical steps apart, each step weighted by the characteristic PMF pbar, so the
// estimate is the CDF of the k-fold self-convolution of pbar (1 when to == from).
// lambda and pbar come either from every edge (global) or only from the
// out-edges of visited nodes (local).

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "stochroute/distributions.hpp"
#include "stochroute/errors.hpp"
#include "stochroute/known_subgraph.hpp"
#include "stochroute/spatial_graph.hpp"
#include "stochroute/stats.hpp"

namespace stochroute {

/// Network distance predicted from metric distance, g ~ intercept + slope * d.
struct DistanceModel {
  double intercept = 0.0;
  double slope = 1.0;
  Metric metric = Metric::euclidean;

  static DistanceModel identity(Metric m = Metric::euclidean) { return {0.0, 1.0, m}; }
  double operator()(double d) const noexcept { return intercept + slope * d; }
};

enum class EstimationMode { global, local };

inline std::string_view to_string(EstimationMode m) {
  return m == EstimationMode::global ? "GE" : "LE";
}

class EstimationContext {
 public:
  EstimationContext(double lambda, DiscreteDistribution step_pmf, DistanceModel model,
                    EstimationMode mode)
      : lambda_(lambda),
        model_(model),
        mode_(mode),
        powers_(std::make_shared<ConvolutionPowers>(std::move(step_pmf))) {
    if (!(lambda > 0.0)) throw EstimationError("characteristic edge length must be positive");
  }

  double lambda() const noexcept { return lambda_; }
  const DiscreteDistribution& step_pmf() const noexcept { return powers_->base(); }
  const DistanceModel& model() const noexcept { return model_; }
  EstimationMode mode() const noexcept { return mode_; }
  const TimeGrid& grid() const noexcept { return powers_->base().grid(); }

  /// pbar convolved with itself k times (cached).
  std::shared_ptr<const DiscreteDistribution> step_power(std::size_t k) const {
    return powers_->power(k);
  }
  std::size_t cached_powers() const { return powers_->cached(); }

 private:
  double lambda_;
  DistanceModel model_;
  EstimationMode mode_;
  std::shared_ptr<ConvolutionPowers> powers_;
};

/// ceil(h(d) / lambda), at least 1: distinct nodes are always one edge apart or more.
inline std::size_t expected_steps(const EstimationContext& ctx, double d) {
  if (!(d >= 0.0)) throw ParameterError("distance must be non-negative");
  const double ratio = ctx.model()(d) / ctx.lambda();
  const double k = std::ceil(ratio - 1e-9);
  return k < 1.0 ? 1 : static_cast<std::size_t>(k);
}

/// Estimated probability of reaching `to` from `from` within each grid time.
inline std::vector<double> estimate_cdf(const EstimationContext& ctx, NodeId to, NodeId from,
                                        const SpatialNetwork& net) {
  net.check(to);
  net.check(from);
  if (to == from) return std::vector<double>(ctx.grid().bin_count(), 1.0);
  const double d = metric_distance(net, to, from, ctx.model().metric);
  auto p = ctx.step_power(expected_steps(ctx, d));
  return {p->cdf().begin(), p->cdf().end()};
}

namespace detail {

template <typename Pmfs>
inline EstimationContext context_from_edges(const SpatialNetwork& net,
                                            std::span<const EdgeId> edges,
                                            const Pmfs& edge_pmfs,
                                            const DistanceModel& model, EstimationMode mode) {
  if (edges.empty()) throw EstimationError("no edges to estimate from");
  double total = 0.0;
  std::vector<DiscreteDistribution> parts;
  parts.reserve(edges.size());
  for (EdgeId e : edges) {
    total += net.edge(e).length;
    parts.push_back(edge_pmfs[e]);
  }
  const double lambda = total / static_cast<double>(edges.size());
  return {lambda, mixture(parts), model, mode};
}

}  // namespace detail

/// lambda = mean length of all edges, pbar = equal-weight mixture of all edge PMFs.
template <typename Pmfs>
inline EstimationContext build_context_global(const SpatialNetwork& net,
                                              const Pmfs& edge_pmfs,
                                              const DistanceModel& model) {
  if (net.edge_count() == 0) throw ParameterError("network has no edges");
  if (edge_pmfs.size() != net.edge_count()) throw ParameterError("need one PMF per edge");
  std::vector<EdgeId> all(net.edge_count());
  for (std::size_t e = 0; e < all.size(); ++e) all[e] = static_cast<EdgeId>(e);
  return detail::context_from_edges(net, all, edge_pmfs, model, EstimationMode::global);
}

inline EstimationContext build_context_global(const SpatialNetwork& net, const TimeGrid& grid,
                                              const DistanceModel& model) {
  const auto pmfs = discretize_edges(net, grid);
  return build_context_global(net, pmfs, model);
}

/// Same as global, restricted to out-edges of visited nodes.
template <typename Pmfs>
inline EstimationContext build_context_local(const KnownSubgraph& known, const SpatialNetwork& net,
                                             const Pmfs& edge_pmfs,
                                             const DistanceModel& model) {
  if (edge_pmfs.size() != net.edge_count()) throw ParameterError("need one PMF per edge");
  const auto sample = known.visited_out_edges(net);
  if (sample.empty()) throw EstimationError("visited nodes have no outgoing edges");
  return detail::context_from_edges(net, sample, edge_pmfs, model, EstimationMode::local);
}

inline EstimationContext build_context_local(const KnownSubgraph& known, const SpatialNetwork& net,
                                             const TimeGrid& grid, const DistanceModel& model) {
  const auto pmfs = discretize_edges(net, grid);
  return build_context_local(known, net, pmfs, model);
}

// ---------------------------------------------------------------------------
// Fitting h from data.

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const noexcept { return lo <= x && x <= hi; }
};

struct DistancePairs {
  std::vector<double> metric;   ///< d_ij
  std::vector<double> network;  ///< g_ij
  std::size_t excluded = 0;     ///< pairs with no path
};

/// All unordered pairs i < j with g measured from i to j.
inline DistancePairs collect_distance_pairs(const SpatialNetwork& net, Metric metric) {
  DistancePairs out;
  const std::size_t n = net.node_count();
  for (NodeId i = 0; i < n; ++i) {
    const auto g = network_distance(net, i);
    for (NodeId j = i + 1; j < n; ++j) {
      if (!std::isfinite(g[j])) {
        ++out.excluded;
        continue;
      }
      out.metric.push_back(metric_distance(net, i, j, metric));
      out.network.push_back(g[j]);
    }
  }
  return out;
}

struct DistanceFit {
  DistanceModel model;
  double pearson_rho = 0.0;
  Interval intercept_ci;
  Interval slope_ci;
  double intercept_se = 0.0;  ///< bootstrap standard deviation
  double slope_se = 0.0;
  std::size_t pairs_used = 0;
  std::size_t pairs_excluded = 0;
};

namespace detail {

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.size() == 1) return sorted.front();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

/// Least-squares line with percentile bootstrap intervals (pairs resampled
/// with replacement).
inline DistanceFit fit_distance_pairs(std::span<const double> d, std::span<const double> g,
                                      Metric metric, int bootstrap_samples, Rng& rng,
                                      double confidence = 0.95) {
  if (d.size() != g.size()) throw ParameterError("distance samples must be paired");
  if (d.size() < 3) throw FitError("need at least three finite distance pairs");
  if (bootstrap_samples < 1) throw ParameterError("bootstrap_samples must be >= 1");
  DistanceFit out;
  const auto line = fit_line(d, g);
  out.model = {line.intercept, line.slope, metric};
  out.pearson_rho = pearson(d, g);
  out.pairs_used = d.size();

  std::vector<double> intercepts, slopes;
  intercepts.reserve(static_cast<std::size_t>(bootstrap_samples));
  slopes.reserve(static_cast<std::size_t>(bootstrap_samples));
  std::uniform_int_distribution<std::size_t> pick(0, d.size() - 1);
  std::vector<double> bd(d.size()), bg(d.size());
  for (int b = 0; b < bootstrap_samples; ++b) {
    for (std::size_t k = 0; k < d.size(); ++k) {
      const std::size_t idx = pick(rng);
      bd[k] = d[idx];
      bg[k] = g[idx];
    }
    try {
      const auto f = fit_line(bd, bg);
      intercepts.push_back(f.intercept);
      slopes.push_back(f.slope);
    } catch (const FitError&) {
      // degenerate resample (all x equal); skip it
    }
  }
  if (intercepts.empty()) throw FitError("every bootstrap resample was degenerate");
  out.intercept_se = sample_stddev(intercepts);
  out.slope_se = sample_stddev(slopes);
  std::sort(intercepts.begin(), intercepts.end());
  std::sort(slopes.begin(), slopes.end());
  const double a = 0.5 * (1.0 - confidence);
  out.intercept_ci = {detail::quantile_sorted(intercepts, a),
                      detail::quantile_sorted(intercepts, 1.0 - a)};
  out.slope_ci = {detail::quantile_sorted(slopes, a), detail::quantile_sorted(slopes, 1.0 - a)};
  return out;
}

inline DistanceFit fit_distance_model(const SpatialNetwork& net, Metric metric,
                                      int bootstrap_samples, Rng& rng) {
  const auto pairs = collect_distance_pairs(net, metric);
  if (pairs.metric.size() < 3) throw FitError("need at least three finite distance pairs");
  auto fit = fit_distance_pairs(pairs.metric, pairs.network, metric, bootstrap_samples, rng);
  fit.pairs_excluded = pairs.excluded;
  return fit;
}

}  // namespace stochroute
