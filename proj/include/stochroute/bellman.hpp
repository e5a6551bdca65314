#pragma once

// The discretized arrival-probability recursion shared by the centralized and
// decentralized solvers:
//
//   value_i(t) = max_{j in J_i} sum_{t'} p_ij(t') value_j(t - t')
//
// Ties in the max go to the smallest head id (out-edges are sorted by head).

#include <algorithm>
#include <span>
#include <vector>

#include "stochroute/criteria.hpp"
#include "stochroute/distributions.hpp"
#include "stochroute/spatial_graph.hpp"

namespace stochroute::detail {

/// `pmfs[e]` must yield the DiscreteDistribution of edge e and `value_of(head)`
/// the current value array of `head`. `successor` may be empty when the argmax
/// is not needed.
template <typename Pmfs, typename ValueOf>
void bellman_max(const SpatialNetwork& net, std::span<const EdgeId> out_edges,
                 const Pmfs& pmfs, ValueOf&& value_of,
                 std::span<double> out, std::span<NodeId> successor, std::vector<double>& scratch) {
  std::fill(out.begin(), out.end(), 0.0);
  const bool track = !successor.empty();
  if (track) std::fill(successor.begin(), successor.end(), kNoNode);
  scratch.resize(out.size());
  bool first = true;
  for (EdgeId e : out_edges) {
    const NodeId head = net.edge(e).head;
    std::span<const double> values = value_of(head);
    causal_convolve(pmfs[e].mass(), values, scratch);
    if (first) {
      std::copy(scratch.begin(), scratch.end(), out.begin());
      if (track) std::fill(successor.begin(), successor.end(), head);
      first = false;
      continue;
    }
    if (track) {
      for (std::size_t k = 0; k < out.size(); ++k)
        if (scratch[k] > out[k]) {
          out[k] = scratch[k];
          successor[k] = head;
        }
    } else {
      for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::max(out[k], scratch[k]);
    }
  }
}

}  // namespace stochroute::detail
