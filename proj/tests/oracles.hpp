#pragma once

// Independent reference computations used by the unit and acceptance tests.
// None of these call into the convolution or value-iteration code they check.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <span>
#include <tuple>
#include <vector>

#include "stochroute/distributions.hpp"
#include "stochroute/spatial_graph.hpp"

namespace oracle {

using stochroute::DiscreteDistribution;
using stochroute::EdgeId;
using stochroute::NodeId;
using stochroute::Rng;
using stochroute::SpatialNetwork;
using stochroute::TimeGrid;

/// Random distribution on `grid` with mass on a few random bins and some overflow.
inline DiscreteDistribution random_pmf(const TimeGrid& grid, Rng& rng, int support = 4,
                                       double overflow_share = 0.1) {
  std::uniform_int_distribution<std::size_t> bin(0, grid.bin_count() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> raw(grid.bin_count(), 0.0);
  for (int k = 0; k < support; ++k) raw[bin(rng)] += unit(rng) + 0.01;
  const double overflow = overflow_share * unit(rng);
  double total = 0.0;
  for (double r : raw) total += r;
  for (double& r : raw) r *= (1.0 - overflow) / total;
  double in = 0.0;
  for (double r : raw) in += r;
  return {grid, std::move(raw), 1.0 - in};
}

/// Plain O(n^2) truncated convolution written out with explicit indices.
inline std::vector<double> naive_convolve(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; i + j < out.size() && j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

/// Two-point edge weights on integer bins, as used by the brute-force solver oracle.
struct TwoPointEdge {
  NodeId tail, head;
  int bin_a, bin_b;  ///< both >= 1
  double prob_a;
};

/// Optimal probability of reaching `target` from `node` within `t` bins,
/// maximizing over every adaptive policy of at most `steps` moves. Plain
/// memoized recursion over (node, time left, steps left).
class PolicyEnumeration {
 public:
  PolicyEnumeration(std::size_t nodes, std::vector<TwoPointEdge> edges, NodeId target)
      : out_(nodes), target_(target) {
    for (auto& e : edges) out_[e.tail].push_back(e);
  }

  double best(NodeId node, int t, int steps) {
    if (node == target_) return t >= 0 ? 1.0 : 0.0;
    if (t < 0 || steps == 0) return 0.0;
    const auto key = std::make_tuple(node, t, steps);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    double result = 0.0;
    for (const auto& e : out_[node]) {
      const double p = e.prob_a * best(e.head, t - e.bin_a, steps - 1) +
                       (1.0 - e.prob_a) * best(e.head, t - e.bin_b, steps - 1);
      result = std::max(result, p);
    }
    memo_[key] = result;
    return result;
  }

 private:
  std::vector<std::vector<TwoPointEdge>> out_;
  NodeId target_;
  std::map<std::tuple<NodeId, int, int>, double> memo_;
};

inline DiscreteDistribution two_point_pmf(const TimeGrid& grid, const TwoPointEdge& e) {
  std::vector<double> m(grid.bin_count(), 0.0);
  double overflow = 0.0;
  auto put = [&](int bin, double p) {
    if (static_cast<std::size_t>(bin) < m.size()) m[bin] += p;
    else overflow += p;
  };
  put(e.bin_a, e.prob_a);
  put(e.bin_b, 1.0 - e.prob_a);
  return {grid, std::move(m), overflow};
}

/// Random directed network with <= max_nodes nodes and two-point edge weights.
struct RandomTwoPointNetwork {
  SpatialNetwork net;
  std::vector<TwoPointEdge> edges;
};

inline RandomTwoPointNetwork random_two_point_network(Rng& rng, int max_nodes, int max_bin) {
  std::uniform_int_distribution<int> count(3, max_nodes);
  const int n = count(rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> bin(1, max_bin);
  stochroute::NetworkBuilder b;
  for (int i = 0; i < n; ++i) b.add_node(unit(rng) * 10.0, unit(rng) * 10.0);
  std::vector<TwoPointEdge> edges;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j || unit(rng) > 0.35) continue;
      TwoPointEdge e{static_cast<NodeId>(i), static_cast<NodeId>(j), bin(rng), bin(rng), unit(rng)};
      edges.push_back(e);
    }
  // A two-point law is carried as a grid distribution; the grid is attached later.
  return {b.build(), edges};
}

/// Network with the given edges and grid-only weights.
inline SpatialNetwork attach_weights(const SpatialNetwork& nodes_only,
                                     const std::vector<TwoPointEdge>& edges, const TimeGrid& grid) {
  stochroute::NetworkBuilder b;
  for (const auto& n : nodes_only.nodes()) b.add_node(n.x, n.y);
  for (const auto& e : edges)
    b.add_edge(e.tail, e.head, stochroute::euclidean_distance(nodes_only, e.tail, e.head),
               two_point_pmf(grid, e));
  return b.build();
}

/// Empirical CDF of `samples` on a grid: fraction of samples with floor(x/dt) <= k.
inline std::vector<double> binned_ecdf(const std::vector<long>& sample_bins, std::size_t bins) {
  std::vector<double> counts(bins, 0.0);
  for (long b : sample_bins)
    if (b >= 0 && static_cast<std::size_t>(b) < bins) counts[b] += 1.0;
  std::vector<double> out(bins);
  double acc = 0.0;
  for (std::size_t k = 0; k < bins; ++k) {
    acc += counts[k];
    out[k] = acc / static_cast<double>(sample_bins.size());
  }
  return out;
}

inline double sup_distance(const std::vector<double>& a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k) d = std::max(d, std::abs(a[k] - b[k]));
  return d;
}

/// Three hand-drawn path CDFs on a unit grid, budget 80, theta 0.8:
/// path 1 rises quickly but levels off at 0.6, path 2 reaches 0.8 at t = 20,
/// path 3 at t = 40; paths 2 and 3 both reach 1 by t = 60.
struct ThreePaths {
  TimeGrid grid{1.0, 101};
  double budget = 80.0;
  double theta = 0.8;
  std::vector<std::vector<double>> cdf;  ///< cdf[p - 1] for path p
  std::vector<double> envelope;          ///< pointwise max
  std::vector<NodeId> successor;         ///< argmax path id per bin, ties to the lower id

  ThreePaths() {
    const std::size_t n = grid.bin_count();
    cdf.assign(3, std::vector<double>(n));
    for (std::size_t k = 0; k < n; ++k) {
      const double t = static_cast<double>(k);
      cdf[0][k] = t < 5 ? 0.1 * t : std::min(0.6, 0.5 + 0.002 * (t - 5));
      cdf[1][k] = t < 20 ? 0.04 * t : std::min(1.0, 0.8 + 0.005 * (t - 20));
      cdf[2][k] = t < 40 ? 0.02 * t : std::min(1.0, 0.8 + 0.01 * (t - 40));
    }
    envelope.resize(n);
    successor.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      NodeId best = 1;
      for (NodeId p = 2; p <= 3; ++p)
        if (cdf[p - 1][k] > cdf[best - 1][k]) best = p;
      successor[k] = best;
      envelope[k] = cdf[best - 1][k];
    }
  }
};

}  // namespace oracle
