#pragma once

// Successor selection from a node's arrival CDF and its time-indexed
// best-successor map.

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "stochroute/distributions.hpp"
#include "stochroute/errors.hpp"
#include "stochroute/spatial_graph.hpp"

namespace stochroute {

inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

enum class Criterion { fan, frank, joint };

inline std::string_view to_string(Criterion c) {
  switch (c) {
    case Criterion::fan: return "fan";
    case Criterion::frank: return "frank";
    case Criterion::joint: return "joint";
  }
  return "?";
}

inline Criterion parse_criterion(std::string_view s) {
  if (s == "fan") return Criterion::fan;
  if (s == "frank") return Criterion::frank;
  if (s == "joint") return Criterion::joint;
  throw ParameterError("unknown criterion '" + std::string(s) + "' (expected fan|frank|joint)");
}

struct PolicyInput {
  std::span<const double> arrival_cdf;  ///< v_current on the grid
  std::span<const NodeId> successor_at; ///< q_current per bin
  double remaining_budget = 0.0;
  double theta = 0.8;
  TimeGrid grid;
};

namespace detail {

inline std::size_t budget_bin(const PolicyInput& in) {
  if (!(in.remaining_budget >= 0.0)) throw ParameterError("remaining budget is negative");
  if (in.successor_at.empty()) throw PolicyError("empty successor map");
  return std::min(in.grid.bin_at(in.remaining_budget), in.successor_at.size() - 1);
}

inline NodeId successor_or_throw(const PolicyInput& in, std::size_t bin) {
  const NodeId n = in.successor_at[bin];
  if (n == kNoNode) throw PolicyError("node has no successor");
  return n;
}

}  // namespace detail

/// Maximize the arrival probability for the whole remaining budget.
inline NodeId fan_select(const PolicyInput& in) {
  return detail::successor_or_throw(in, detail::budget_bin(in));
}

/// Successor that reaches `theta` soonest, provided that happens within the
/// remaining budget.
inline std::optional<NodeId> frank_select(const PolicyInput& in) {
  const std::size_t last = detail::budget_bin(in);
  const auto searchable = in.arrival_cdf.subspan(0, std::min(in.arrival_cdf.size(), last + 1));
  auto hit = first_passage_bin(searchable, in.theta);
  if (!hit) return std::nullopt;
  return detail::successor_or_throw(in, *hit);
}

/// Frank when some option reaches theta within the budget, Fan otherwise.
inline NodeId joint_select(const PolicyInput& in) {
  if (auto f = frank_select(in)) return *f;
  return fan_select(in);
}

/// nullopt only for Criterion::frank when the threshold is out of reach.
inline std::optional<NodeId> select_successor(Criterion c, const PolicyInput& in) {
  switch (c) {
    case Criterion::fan: return fan_select(in);
    case Criterion::frank: return frank_select(in);
    case Criterion::joint: return joint_select(in);
  }
  return std::nullopt;
}

}  // namespace stochroute
