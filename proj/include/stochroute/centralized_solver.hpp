#pragma once

// Centralized routing table: per-node probability of reaching a fixed target
// within t, computed by value iteration bracketed from both sides.
//
//   v^0_i = 0 (i != target), w^0_i = 1, v_target = w_target = 1
//   x^{s+1}_i(t) = max_j (p_ij * x^s_j)(t)        for x in {v, w}
//
// v increases and w decreases monotonically; iteration stops once
// max_i sup_t (w_i - v_i) < tolerance. The table keeps v (the certified lower
// bound) and the per-bin argmax successor computed from it.

#include <chrono>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "stochroute/bellman.hpp"
#include "stochroute/criteria.hpp"
#include "stochroute/distributions.hpp"
#include "stochroute/errors.hpp"
#include "stochroute/spatial_graph.hpp"
#include "stochroute/trial.hpp"

namespace stochroute {

struct ConvergenceParams {
  double tolerance = 1e-3;
  int max_iterations = 1000;

  void validate() const {
    if (!(tolerance > 0.0)) throw ParameterError("convergence tolerance must be positive");
    if (max_iterations < 1) throw ParameterError("max_iterations must be positive");
  }
};

class RoutingTable {
 public:
  RoutingTable(NodeId target, TimeGrid grid, std::vector<std::vector<double>> arrival,
               std::vector<std::vector<NodeId>> successor, int iterations, double residual)
      : target_(target),
        grid_(grid),
        arrival_(std::move(arrival)),
        successor_(std::move(successor)),
        iterations_(iterations),
        residual_(residual) {}

  NodeId target() const noexcept { return target_; }
  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t node_count() const noexcept { return arrival_.size(); }
  /// u_i on the grid.
  std::span<const double> arrival_cdf(NodeId i) const { return arrival_.at(i); }
  /// q_i per bin; kNoNode for the target and for nodes without out-edges.
  std::span<const NodeId> successor_map(NodeId i) const { return successor_.at(i); }
  int iterations_used() const noexcept { return iterations_; }
  /// Final max_i sup_t (w_i - v_i).
  double residual() const noexcept { return residual_; }

 private:
  NodeId target_;
  TimeGrid grid_;
  std::vector<std::vector<double>> arrival_;
  std::vector<std::vector<NodeId>> successor_;
  int iterations_;
  double residual_;
};

using ValueSequence = std::vector<std::vector<double>>;
/// Called with (s, v^s, w^s) for s = 0, 1, ... including the final iterate.
using IterationObserver = std::function<void(int, const ValueSequence&, const ValueSequence&)>;

inline RoutingTable solve(const SpatialNetwork& net, NodeId target,
                          std::span<const DiscreteDistribution> edge_pmfs, const TimeGrid& grid,
                          const ConvergenceParams& params, const IterationObserver& observer = {}) {
  net.check(target);
  params.validate();
  if (edge_pmfs.size() != net.edge_count())
    throw ParameterError("need one discretized PMF per edge");
  for (const auto& p : edge_pmfs) detail::require_same_grid(p.grid(), grid);

  const std::size_t n = net.node_count();
  const std::size_t bins = grid.bin_count();
  ValueSequence v(n, std::vector<double>(bins, 0.0));
  ValueSequence w(n, std::vector<double>(bins, 1.0));
  std::fill(v[target].begin(), v[target].end(), 1.0);
  ValueSequence v_next = v, w_next = w;
  std::vector<double> scratch;

  auto gap = [&] {
    double g = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < bins; ++k) g = std::max(g, w[i][k] - v[i][k]);
    return g;
  };

  int s = 0;
  double residual = gap();
  if (observer) observer(s, v, w);
  while (!(residual < params.tolerance)) {
    if (s >= params.max_iterations)
      throw ConvergenceError("value iteration did not converge within " +
                                 std::to_string(params.max_iterations) +
                                 " iterations (residual " + std::to_string(residual) + ")",
                             residual, s);
    // Jacobi sweep: every node reads only iterate s.
    for (NodeId i = 0; i < n; ++i) {
      if (i == target) continue;
      auto out = net.out_edges(i);
      detail::bellman_max(net, out, edge_pmfs, [&](NodeId j) -> std::span<const double> { return v[j]; },
                          v_next[i], {}, scratch);
      detail::bellman_max(net, out, edge_pmfs, [&](NodeId j) -> std::span<const double> { return w[j]; },
                          w_next[i], {}, scratch);
    }
    std::swap(v, v_next);
    std::swap(w, w_next);
    ++s;
    residual = gap();
    if (observer) observer(s, v, w);
  }

  std::vector<std::vector<NodeId>> successor(n, std::vector<NodeId>(bins, kNoNode));
  std::vector<double> unused(bins);
  for (NodeId i = 0; i < n; ++i) {
    if (i == target) continue;
    detail::bellman_max(net, net.out_edges(i), edge_pmfs,
                        [&](NodeId j) -> std::span<const double> { return v[j]; }, unused,
                        successor[i], scratch);
  }
  return {target, grid, std::move(v), std::move(successor), s, residual};
}

inline RoutingTable solve(const SpatialNetwork& net, NodeId target, const TimeGrid& grid,
                          const ConvergenceParams& params, const IterationObserver& observer = {}) {
  net.check(target);
  const auto pmfs = discretize_edges(net, grid);
  return solve(net, target, pmfs, grid, params, observer);
}

/// Simulates one traveler guided by a precomputed table.
inline TrialRecord route_with_table(const SpatialNetwork& net, const RoutingTable& table,
                                    NodeId origin, double budget, Criterion criterion, double theta,
                                    Rng& rng) {
  net.check(origin);
  TrialRecord rec;
  rec.path.push_back(origin);
  NodeId current = origin;
  const NodeId target = table.target();
  while (rec.travel_time <= budget && current != target) {
    if (net.out_edges(current).empty()) {
      rec.outcome = TrialOutcome::trapped;
      break;
    }
    PolicyInput in{table.arrival_cdf(current), table.successor_map(current),
                   budget - rec.travel_time, theta, table.grid()};
    auto next = select_successor(criterion, in);
    if (!next) {
      rec.outcome = TrialOutcome::no_choice;
      break;
    }
    const double w = sample(detail::edge_between(net, current, *next).weight, rng);
    rec.travel_time += w;
    rec.step_weights.push_back(w);
    rec.path.push_back(*next);
    current = *next;
  }
  rec.success = current == target && rec.travel_time <= budget;
  if (rec.success) rec.outcome = TrialOutcome::arrived;
  return rec;
}

}  // namespace stochroute
