#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "stochroute/distributions.hpp"
#include "stochroute/errors.hpp"

namespace stochroute {

using NodeId = std::uint32_t;
using EdgeId = std::uint32_t;

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

struct SpatialNode {
  NodeId id = 0;
  double x = 0.0;
  double y = 0.0;
};

/// Either analytic log-normal parameters or an already discretized PMF.
using EdgeWeight = std::variant<LogNormalParams, DiscreteDistribution>;

struct StochasticEdge {
  NodeId tail = 0;
  NodeId head = 0;
  double length = 0.0;
  EdgeWeight weight;
};

inline DiscreteDistribution discretize(const EdgeWeight& w, const TimeGrid& grid) {
  if (auto* ln = std::get_if<LogNormalParams>(&w)) return discretize_lognormal(*ln, grid);
  const auto& d = std::get<DiscreteDistribution>(w);
  detail::require_same_grid(d.grid(), grid);
  return d;
}

inline double sample(const EdgeWeight& w, Rng& rng) {
  return std::visit([&](const auto& p) { return sample(p, rng); }, w);
}

class SpatialNetwork {
 public:
  SpatialNetwork() = default;

  SpatialNetwork(std::vector<SpatialNode> nodes, std::vector<StochasticEdge> edges)
      : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (nodes_[i].id != i) throw IntegrityError("node ids must be contiguous from 0");
    out_.assign(nodes_.size(), {});
    in_.assign(nodes_.size(), {});
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const auto& edge = edges_[e];
      if (edge.tail >= nodes_.size() || edge.head >= nodes_.size())
        throw IntegrityError("edge " + std::to_string(e) + " references an unknown node");
      if (edge.tail == edge.head)
        throw IntegrityError("self-loop at node " + std::to_string(edge.tail));
      if (!(edge.length >= 0.0)) throw IntegrityError("negative edge length");
      out_[edge.tail].push_back(static_cast<EdgeId>(e));
      in_[edge.head].push_back(static_cast<EdgeId>(e));
    }
    for (auto& adj : out_)
      std::stable_sort(adj.begin(), adj.end(),
                       [&](EdgeId a, EdgeId b) { return edges_[a].head < edges_[b].head; });
    for (auto& adj : in_)
      std::stable_sort(adj.begin(), adj.end(),
                       [&](EdgeId a, EdgeId b) { return edges_[a].tail < edges_[b].tail; });
  }

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }

  const SpatialNode& node(NodeId i) const {
    check(i);
    return nodes_[i];
  }
  const StochasticEdge& edge(EdgeId e) const { return edges_.at(e); }
  std::span<const SpatialNode> nodes() const noexcept { return nodes_; }
  std::span<const StochasticEdge> edges() const noexcept { return edges_; }

  /// Outgoing edges of i, sorted by head id.
  std::span<const EdgeId> out_edges(NodeId i) const {
    check(i);
    return out_[i];
  }
  /// Incoming edges of i, sorted by tail id.
  std::span<const EdgeId> in_edges(NodeId i) const {
    check(i);
    return in_[i];
  }

  bool contains(NodeId i) const noexcept { return i < nodes_.size(); }

  void check(NodeId i) const {
    if (i >= nodes_.size()) throw LookupError("unknown node id " + std::to_string(i));
  }

  std::optional<NodeId> find_node_at(double x, double y, double tol = 1e-9) const {
    for (const auto& n : nodes_)
      if (std::abs(n.x - x) <= tol && std::abs(n.y - y) <= tol) return n.id;
    return std::nullopt;
  }

  double mean_edge_length() const {
    if (edges_.empty()) return 0.0;
    double s = 0.0;
    for (const auto& e : edges_) s += e.length;
    return s / static_cast<double>(edges_.size());
  }

 private:
  std::vector<SpatialNode> nodes_;
  std::vector<StochasticEdge> edges_;
  std::vector<std::vector<EdgeId>> out_;
  std::vector<std::vector<EdgeId>> in_;
};

class NetworkBuilder {
 public:
  NodeId add_node(double x, double y) {
    const auto id = static_cast<NodeId>(nodes_.size());
    nodes_.push_back({id, x, y});
    return id;
  }

  void add_edge(NodeId tail, NodeId head, double length, EdgeWeight weight) {
    edges_.push_back({tail, head, length, std::move(weight)});
  }

  /// Two directed edges with identical length and weight.
  void add_undirected(NodeId a, NodeId b, double length, const EdgeWeight& weight) {
    add_edge(a, b, length, weight);
    add_edge(b, a, length, weight);
  }

  /// Undirected edge whose length is the Euclidean distance between endpoints.
  void add_undirected(NodeId a, NodeId b, const EdgeWeight& weight) {
    const auto& p = nodes_.at(a);
    const auto& q = nodes_.at(b);
    add_undirected(a, b, std::hypot(p.x - q.x, p.y - q.y), weight);
  }

  std::size_t node_count() const noexcept { return nodes_.size(); }

  SpatialNetwork build() && { return {std::move(nodes_), std::move(edges_)}; }
  SpatialNetwork build() const& { return {nodes_, edges_}; }

 private:
  std::vector<SpatialNode> nodes_;
  std::vector<StochasticEdge> edges_;
};

inline double euclidean_distance(const SpatialNetwork& net, NodeId i, NodeId j) {
  const auto& a = net.node(i);
  const auto& b = net.node(j);
  return std::hypot(a.x - b.x, a.y - b.y);
}

inline double lattice_distance(const SpatialNetwork& net, NodeId i, NodeId j) {
  const auto& a = net.node(i);
  const auto& b = net.node(j);
  return std::abs(a.x - b.x) + std::abs(a.y - b.y);
}

enum class Metric { euclidean, lattice };

inline double metric_distance(const SpatialNetwork& net, NodeId i, NodeId j, Metric m) {
  return m == Metric::euclidean ? euclidean_distance(net, i, j) : lattice_distance(net, i, j);
}

/// Single-source shortest along-edge lengths (Dijkstra). Unreachable -> kUnreachable.
inline std::vector<double> network_distance(const SpatialNetwork& net, NodeId source) {
  net.check(source);
  std::vector<double> dist(net.node_count(), kUnreachable);
  std::vector<char> settled(net.node_count(), 0);
  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[source] = 0.0;
  pq.emplace(0.0, source);
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (settled[u]) continue;
    settled[u] = 1;
    for (EdgeId e : net.out_edges(u)) {
      const auto& edge = net.edge(e);
      const double nd = d + edge.length;
      if (nd < dist[edge.head]) {
        dist[edge.head] = nd;
        pq.emplace(nd, edge.head);
      }
    }
  }
  return dist;
}

/// Discretized PMF of every edge, indexed by EdgeId.
inline std::vector<DiscreteDistribution> discretize_edges(const SpatialNetwork& net,
                                                          const TimeGrid& grid) {
  std::vector<DiscreteDistribution> out;
  out.reserve(net.edge_count());
  for (const auto& e : net.edges()) out.push_back(discretize(e.weight, grid));
  return out;
}

/// Edge PMFs discretized on first use. A decentralized traveler only ever
/// touches the edges it has discovered, so it never pays for the rest.
class LazyEdgePmfs {
 public:
  LazyEdgePmfs(const SpatialNetwork& net, TimeGrid grid)
      : net_(&net), grid_(grid), slots_(net.edge_count()), owned_(net.edge_count()) {}

  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return slots_.size(); }

  const DiscreteDistribution& operator[](EdgeId e) const {
    if (const auto* p = slots_.at(e).load(std::memory_order_acquire)) return *p;
    std::lock_guard lock(mutex_);
    if (!owned_[e]) {
      owned_[e] = std::make_unique<const DiscreteDistribution>(discretize(net_->edge(e).weight, grid_));
      slots_[e].store(owned_[e].get(), std::memory_order_release);
      ++filled_;
    }
    return *owned_[e];
  }

  /// Number of edges discretized so far.
  std::size_t filled() const {
    std::lock_guard lock(mutex_);
    return filled_;
  }

 private:
  const SpatialNetwork* net_;
  TimeGrid grid_;
  mutable std::vector<std::atomic<const DiscreteDistribution*>> slots_;
  mutable std::vector<std::unique_ptr<const DiscreteDistribution>> owned_;
  mutable std::mutex mutex_;
  mutable std::size_t filled_ = 0;
};

// ---------------------------------------------------------------------------
// Kleinberg-style small world: a side x side lattice plus one long-range link
// per node drawn with probability proportional to 1/D^2 (D = lattice distance).

struct KleinbergOptions {
  double mu_min = 0.5;
  double mu_max = 1.5;
  double sigma_min = 0.5;
  double sigma_max = 1.5;
};

inline NodeId lattice_node(int side, int x, int y) {
  return static_cast<NodeId>(y * side + x);
}

/// Draws the far end of node `from`'s shortcut on a side x side lattice.
inline NodeId sample_shortcut_destination(int side, NodeId from, Rng& rng) {
  const int n = side * side;
  const int fx = static_cast<int>(from) % side;
  const int fy = static_cast<int>(from) / side;
  std::vector<double> w(static_cast<std::size_t>(n), 0.0);
  for (int j = 0; j < n; ++j) {
    if (j == static_cast<int>(from)) continue;
    const int d = std::abs(j % side - fx) + std::abs(j / side - fy);
    w[static_cast<std::size_t>(j)] = 1.0 / (static_cast<double>(d) * d);
  }
  std::discrete_distribution<int> pick(w.begin(), w.end());
  return static_cast<NodeId>(pick(rng));
}

inline SpatialNetwork generate_kleinberg_variant(int side, Rng& rng,
                                                 const KleinbergOptions& opt = {}) {
  if (side < 2) throw ParameterError("lattice side must be at least 2");
  if (!(opt.mu_min <= opt.mu_max) || !(opt.sigma_min <= opt.sigma_max) || !(opt.sigma_min > 0.0))
    throw ParameterError("invalid log-normal parameter intervals");
  NetworkBuilder b;
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) b.add_node(x, y);

  std::vector<std::pair<NodeId, NodeId>> links;
  std::vector<double> lengths;
  const auto n = static_cast<std::size_t>(side) * side;
  std::vector<std::vector<char>> linked(n, std::vector<char>(n, 0));
  auto connect = [&](NodeId a, NodeId c, double len) {
    links.emplace_back(a, c);
    lengths.push_back(len);
    linked[a][c] = linked[c][a] = 1;
  };
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      if (x + 1 < side) connect(lattice_node(side, x, y), lattice_node(side, x + 1, y), 1.0);
      if (y + 1 < side) connect(lattice_node(side, x, y), lattice_node(side, x, y + 1), 1.0);
    }
  for (NodeId i = 0; i < n; ++i) {
    const NodeId j = sample_shortcut_destination(side, i, rng);
    if (linked[i][j]) continue;  // duplicates are discarded, not redrawn
    const int dx = static_cast<int>(i % side) - static_cast<int>(j % side);
    const int dy = static_cast<int>(i / side) - static_cast<int>(j / side);
    connect(i, j, std::hypot(dx, dy));
  }

  std::uniform_real_distribution<double> mu(opt.mu_min, opt.mu_max);
  std::uniform_real_distribution<double> sigma(opt.sigma_min, opt.sigma_max);
  for (std::size_t k = 0; k < links.size(); ++k) {
    const double m = mu(rng);
    const double s = sigma(rng);
    b.add_undirected(links[k].first, links[k].second, lengths[k], LogNormalParams(m, s));
  }
  return std::move(b).build();
}

}  // namespace stochroute
