#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "stochroute/spatial_graph.hpp"

namespace stochroute {

enum class TrialOutcome {
  arrived,           ///< reached the target within the budget
  budget_exhausted,  ///< ran out of time (possibly on the final edge)
  trapped,           ///< nowhere left to go
  no_choice,         ///< the criterion declined to pick (Frank without a feasible option)
};

inline std::string_view to_string(TrialOutcome o) {
  switch (o) {
    case TrialOutcome::arrived: return "arrived";
    case TrialOutcome::budget_exhausted: return "budget_exhausted";
    case TrialOutcome::trapped: return "trapped";
    case TrialOutcome::no_choice: return "no_choice";
  }
  return "?";
}

/// One routing attempt.
struct TrialRecord {
  std::vector<NodeId> path;          ///< visited nodes in order, origin first
  std::vector<double> step_weights;  ///< sampled weight of each traversed edge
  bool success = false;
  double travel_time = 0.0;
  TrialOutcome outcome = TrialOutcome::budget_exhausted;
  double solve_seconds = 0.0;        ///< wall-clock spent computing routing guidance

  std::size_t steps() const noexcept { return step_weights.size(); }

  friend bool same_route(const TrialRecord& a, const TrialRecord& b) {
    return a.path == b.path && a.step_weights == b.step_weights && a.success == b.success &&
           a.travel_time == b.travel_time && a.outcome == b.outcome;
  }
};

namespace detail {

inline const StochasticEdge& edge_between(const SpatialNetwork& net, NodeId from, NodeId to) {
  auto out = net.out_edges(from);
  auto it = std::lower_bound(out.begin(), out.end(), to,
                             [&](EdgeId e, NodeId h) { return net.edge(e).head < h; });
  if (it == out.end() || net.edge(*it).head != to)
    throw LookupError("no edge " + std::to_string(from) + " -> " + std::to_string(to));
  return net.edge(*it);
}

}  // namespace detail

}  // namespace stochroute
