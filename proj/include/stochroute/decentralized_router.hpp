#pragma once

// Decentralized routing: the traveler only knows the subgraph it has explored.
// Before every step it reruns the bracketed value iteration on that subgraph,
// with frontier nodes pinned to their estimated arrival CDF and visited nodes
// starting from v = 0 and w = max over the frontier estimates. A visited node
// is frozen once its bracket closes below the tolerance; the sweep ends as
// soon as the current node is frozen.

#include <chrono>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "stochroute/bellman.hpp"
#include "stochroute/centralized_solver.hpp"
#include "stochroute/criteria.hpp"
#include "stochroute/distributions.hpp"
#include "stochroute/errors.hpp"
#include "stochroute/estimation.hpp"
#include "stochroute/known_subgraph.hpp"
#include "stochroute/spatial_graph.hpp"
#include "stochroute/trial.hpp"

namespace stochroute {

struct LocalSolution {
  std::vector<NodeId> visited;              ///< same order as `values`
  std::vector<std::vector<double>> values;  ///< final v for each visited node
  std::vector<double> arrival;              ///< v of the current node
  std::vector<NodeId> successor;            ///< per-bin argmax for the current node
  int iterations = 0;
};

/// Called with (s, v^s, w^s) over the visited nodes, in KnownSubgraph::visited() order.
using LocalObserver = std::function<void(int, const ValueSequence&, const ValueSequence&)>;

/// Frontier boundary values: estimated CDF of reaching `target` from each
/// frontier node, in KnownSubgraph::frontier() order.
inline std::vector<std::vector<double>> frontier_estimates(const KnownSubgraph& known,
                                                           const SpatialNetwork& net,
                                                           const EstimationContext& ctx,
                                                           NodeId target) {
  std::vector<std::vector<double>> out;
  out.reserve(known.frontier().size());
  for (NodeId j : known.frontier()) out.push_back(estimate_cdf(ctx, target, j, net));
  return out;
}

/// Bracketed value iteration on the known subgraph with explicit frontier values.
template <typename Pmfs>
inline LocalSolution local_value_iteration(const KnownSubgraph& known, const SpatialNetwork& net,
                                           const Pmfs& edge_pmfs,
                                           std::span<const std::vector<double>> frontier_values,
                                           NodeId current, const ConvergenceParams& params,
                                           const LocalObserver& observer = {}) {
  params.validate();
  if (!known.is_visited(current)) throw ParameterError("current node has not been visited");
  if (known.frontier().empty())
    throw TrappedError("no frontier left around node " + std::to_string(current));
  if (frontier_values.size() != known.frontier().size())
    throw ParameterError("need one boundary CDF per frontier node");
  if (edge_pmfs.size() != net.edge_count()) throw ParameterError("need one PMF per edge");
  const std::size_t bins = frontier_values.front().size();

  const auto visited = known.visited();
  const auto frontier = known.frontier();
  // slot >= 0: visited index; slot < 0: frontier index -(slot + 1)
  constexpr int kUnknown = std::numeric_limits<int>::min();
  std::vector<int> slot(net.node_count(), kUnknown);
  for (std::size_t k = 0; k < visited.size(); ++k) slot[visited[k]] = static_cast<int>(k);
  for (std::size_t k = 0; k < frontier.size(); ++k) slot[frontier[k]] = -static_cast<int>(k) - 1;

  std::vector<double> upper(bins, 0.0);
  for (const auto& f : frontier_values) {
    if (f.size() != bins) throw GridError("frontier CDF does not match the grid");
    for (std::size_t t = 0; t < bins; ++t) upper[t] = std::max(upper[t], f[t]);
  }
  for (NodeId i : known.visited())
    for (EdgeId e : net.out_edges(i))
      if (edge_pmfs[e].grid().bin_count() != bins) throw GridError("edge PMF does not match the grid");

  ValueSequence v(visited.size(), std::vector<double>(bins, 0.0));
  ValueSequence w(visited.size(), upper);
  ValueSequence v_next = v, w_next = w;
  std::vector<char> unstable(visited.size(), 1);
  const auto current_slot = static_cast<std::size_t>(slot[current]);
  std::vector<double> scratch;

  auto values_from = [&](const ValueSequence& seq) {
    return [&slot, &frontier_values, seq = &seq](NodeId j) -> std::span<const double> {
      const int at = slot[j];
      if (at == kUnknown) throw LookupError("edge leaves the known subgraph");
      if (at >= 0) return (*seq)[static_cast<std::size_t>(at)];
      return frontier_values[static_cast<std::size_t>(-at - 1)];
    };
  };

  int s = 0;
  if (observer) observer(s, v, w);
  while (unstable[current_slot]) {
    if (s >= params.max_iterations) {
      double gap = 0.0;
      for (std::size_t t = 0; t < bins; ++t)
        gap = std::max(gap, std::abs(v[current_slot][t] - w[current_slot][t]));
      throw ConvergenceError("local value iteration did not converge within " +
                                 std::to_string(params.max_iterations) + " iterations",
                             gap, s);
    }
    for (std::size_t k = 0; k < visited.size(); ++k) {
      if (!unstable[k]) continue;
      auto out = net.out_edges(visited[k]);
      detail::bellman_max(net, out, edge_pmfs, values_from(v), v_next[k], {}, scratch);
      detail::bellman_max(net, out, edge_pmfs, values_from(w), w_next[k], {}, scratch);
    }
    for (std::size_t k = 0; k < visited.size(); ++k)
      if (unstable[k]) {
        std::swap(v[k], v_next[k]);
        std::swap(w[k], w_next[k]);
      }
    ++s;
    for (std::size_t k = 0; k < visited.size(); ++k) {
      if (!unstable[k]) continue;
      bool closed = true;
      for (std::size_t t = 0; t < bins && closed; ++t)
        closed = std::abs(v[k][t] - w[k][t]) < params.tolerance;
      if (closed) unstable[k] = 0;
    }
    if (observer) observer(s, v, w);
  }

  LocalSolution sol;
  sol.visited.assign(visited.begin(), visited.end());
  sol.iterations = s;
  sol.successor.assign(bins, kNoNode);
  std::vector<double> best(bins);
  detail::bellman_max(net, net.out_edges(current), edge_pmfs, values_from(v), best, sol.successor,
                      scratch);
  sol.arrival = v[current_slot];
  sol.values = std::move(v);
  return sol;
}

/// Same, with frontier values taken from the estimation function toward `target`.
template <typename Pmfs>
inline LocalSolution local_value_iteration(const KnownSubgraph& known, const SpatialNetwork& net,
                                           const Pmfs& edge_pmfs,
                                           const EstimationContext& ctx, NodeId current,
                                           NodeId target, const ConvergenceParams& params,
                                           const LocalObserver& observer = {}) {
  net.check(target);
  if (known.is_visited(target)) throw ParameterError("target already visited");
  const auto boundary = frontier_estimates(known, net, ctx, target);
  return local_value_iteration(known, net, edge_pmfs, boundary, current, params, observer);
}

struct DecentralizedOptions {
  EstimationMode mode = EstimationMode::local;
  DistanceModel model = DistanceModel::identity();
  ConvergenceParams params;
  /// Reuse local solutions across trials that reach the same (visited set,
  /// current node). The local solve never looks at the remaining budget, so
  /// this cannot change any result.
  bool use_cache = true;
  std::size_t cache_max_bytes = std::size_t{256} << 20;
};

class DecentralizedRouter {
 public:
  DecentralizedRouter(const SpatialNetwork& net, TimeGrid grid, DecentralizedOptions opt = {})
      : net_(&net), grid_(grid), opt_(opt), pmfs_(net, grid) {
    opt_.params.validate();
    if (opt_.mode == EstimationMode::global) global_.emplace(build_context_global(net, pmfs_, opt_.model));
  }

  const SpatialNetwork& network() const noexcept { return *net_; }
  const TimeGrid& grid() const noexcept { return grid_; }
  const DecentralizedOptions& options() const noexcept { return opt_; }
  const LazyEdgePmfs& edge_pmfs() const noexcept { return pmfs_; }

  /// Context used at a given knowledge state.
  EstimationContext context_for(const KnownSubgraph& known) const {
    if (global_) return *global_;
    return build_context_local(known, *net_, pmfs_, opt_.model);
  }

  TrialRecord route(NodeId origin, NodeId target, double budget, Criterion criterion, double theta,
                    Rng& rng) const {
    net_->check(origin);
    net_->check(target);
    if (!(budget >= 0.0)) throw ParameterError("budget must be non-negative");
    TrialRecord rec;
    rec.path.push_back(origin);
    NodeId current = origin;
    KnownSubgraph known = known_from_origin(*net_, origin);
    while (rec.travel_time <= budget && current != target) {
      if (known.frontier().empty()) {
        rec.outcome = TrialOutcome::trapped;
        break;
      }
      const auto t0 = std::chrono::steady_clock::now();
      auto step = guidance(known, current, target);
      rec.solve_seconds +=
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      PolicyInput in{step->arrival, step->successor, budget - rec.travel_time, theta, grid_};
      auto next = select_successor(criterion, in);
      if (!next) {
        rec.outcome = TrialOutcome::no_choice;
        break;
      }
      const double w = sample(detail::edge_between(*net_, current, *next).weight, rng);
      rec.travel_time += w;
      rec.step_weights.push_back(w);
      rec.path.push_back(*next);
      known = expand_frontier(known, *net_, *next);
      current = *next;
    }
    rec.success = current == target && rec.travel_time <= budget;
    if (rec.success) rec.outcome = TrialOutcome::arrived;
    return rec;
  }

  std::size_t cache_hits() const {
    std::lock_guard lock(cache_mutex_);
    return hits_;
  }
  std::size_t cache_misses() const {
    std::lock_guard lock(cache_mutex_);
    return misses_;
  }

 private:
  struct Guidance {
    std::vector<double> arrival;
    std::vector<NodeId> successor;
  };

  std::shared_ptr<const Guidance> guidance(const KnownSubgraph& known, NodeId current,
                                           NodeId target) const {
    std::string key;
    if (opt_.use_cache) {
      key.reserve(4 * (known.visited().size() + 2));
      auto put = [&](NodeId x) { key.append(reinterpret_cast<const char*>(&x), sizeof x); };
      put(target);
      put(current);
      for (NodeId x : known.visited()) put(x);
      std::lock_guard lock(cache_mutex_);
      if (auto it = cache_.find(key); it != cache_.end()) {
        ++hits_;
        return it->second;
      }
      ++misses_;
    }
    const auto ctx = context_for(known);
    auto sol = local_value_iteration(known, *net_, pmfs_, ctx, current, target, opt_.params);
    auto g = std::make_shared<const Guidance>(Guidance{std::move(sol.arrival), std::move(sol.successor)});
    if (opt_.use_cache) {
      const std::size_t entry = grid_.bin_count() * (sizeof(double) + sizeof(NodeId)) + key.size() + 64;
      std::lock_guard lock(cache_mutex_);
      if ((cache_.size() + 1) * entry > opt_.cache_max_bytes) cache_.clear();
      cache_.emplace(std::move(key), g);
    }
    return g;
  }

  const SpatialNetwork* net_;
  TimeGrid grid_;
  DecentralizedOptions opt_;
  LazyEdgePmfs pmfs_;
  std::optional<EstimationContext> global_;
  mutable std::mutex cache_mutex_;
  mutable std::unordered_map<std::string, std::shared_ptr<const Guidance>> cache_;
  mutable std::size_t hits_ = 0;
  mutable std::size_t misses_ = 0;
};

inline TrialRecord route_decentralized(const SpatialNetwork& net, NodeId origin, NodeId target,
                                       double budget, double theta, Criterion criterion,
                                       EstimationMode mode, const TimeGrid& grid,
                                       const ConvergenceParams& params, Rng& rng,
                                       const DistanceModel& model = DistanceModel::identity()) {
  DecentralizedOptions opt;
  opt.mode = mode;
  opt.model = model;
  opt.params = params;
  opt.use_cache = false;
  DecentralizedRouter router(net, grid, opt);
  return router.route(origin, target, budget, criterion, theta, rng);
}

}  // namespace stochroute
