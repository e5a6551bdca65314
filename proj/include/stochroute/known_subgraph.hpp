#pragma once

// What a decentralized traveler has discovered: visited nodes, the frontier
// (unvisited out-neighbors of visited nodes), and every edge touching a
// visited node.

#include <algorithm>
#include <span>
#include <vector>

#include "stochroute/spatial_graph.hpp"

namespace stochroute {

class KnownSubgraph {
 public:
  KnownSubgraph() = default;

  std::span<const NodeId> visited() const noexcept { return visited_; }
  std::span<const NodeId> frontier() const noexcept { return frontier_; }
  std::span<const EdgeId> known_edges() const noexcept { return known_edges_; }

  bool is_visited(NodeId i) const { return std::binary_search(visited_.begin(), visited_.end(), i); }
  bool is_frontier(NodeId i) const {
    return std::binary_search(frontier_.begin(), frontier_.end(), i);
  }

  /// Out-edges of visited nodes, i.e. the local sample {(i, j) : i visited}.
  std::vector<EdgeId> visited_out_edges(const SpatialNetwork& net) const {
    std::vector<EdgeId> out;
    for (NodeId i : visited_) {
      auto e = net.out_edges(i);
      out.insert(out.end(), e.begin(), e.end());
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  friend KnownSubgraph expand_frontier(const KnownSubgraph& known, const SpatialNetwork& net,
                                       NodeId newly_visited);

 private:
  std::vector<NodeId> visited_;
  std::vector<NodeId> frontier_;
  std::vector<EdgeId> known_edges_;
};

inline KnownSubgraph expand_frontier(const KnownSubgraph& known, const SpatialNetwork& net,
                                     NodeId newly_visited) {
  net.check(newly_visited);
  if (known.is_visited(newly_visited)) return known;
  KnownSubgraph next = known;
  next.visited_.insert(std::lower_bound(next.visited_.begin(), next.visited_.end(), newly_visited),
                       newly_visited);
  std::erase(next.frontier_, newly_visited);
  for (EdgeId e : net.out_edges(newly_visited)) {
    const NodeId h = net.edge(e).head;
    if (!next.is_visited(h) && !next.is_frontier(h))
      next.frontier_.insert(std::lower_bound(next.frontier_.begin(), next.frontier_.end(), h), h);
  }
  auto add_edge = [&](EdgeId e) {
    auto it = std::lower_bound(next.known_edges_.begin(), next.known_edges_.end(), e);
    if (it == next.known_edges_.end() || *it != e) next.known_edges_.insert(it, e);
  };
  for (EdgeId e : net.out_edges(newly_visited)) add_edge(e);
  for (EdgeId e : net.in_edges(newly_visited)) add_edge(e);
  return next;
}

inline KnownSubgraph known_from_origin(const SpatialNetwork& net, NodeId origin) {
  return expand_frontier(KnownSubgraph{}, net, origin);
}

}  // namespace stochroute
