#include <gtest/gtest.h>

#include <vector>

#include "oracles.hpp"
#include "stochroute/centralized_solver.hpp"
#include "stochroute/errors.hpp"

using namespace stochroute;

namespace {

// 0 -> 1 -> 3 and 0 -> 2 -> 3 with two-point weights; 3 is the target.
std::vector<oracle::TwoPointEdge> diamond_edges() {
  return {{0, 1, 1, 6, 0.5}, {1, 3, 2, 2, 1.0}, {0, 2, 2, 2, 1.0}, {2, 3, 1, 9, 0.7}};
}

SpatialNetwork diamond(const TimeGrid& grid) {
  NetworkBuilder b;
  b.add_node(0, 0);
  b.add_node(1, 1);
  b.add_node(1, -1);
  b.add_node(2, 0);
  return oracle::attach_weights(std::move(b).build(), diamond_edges(), grid);
}

}  // namespace

TEST(Solve, RejectsBadInput) {
  TimeGrid g(1.0, 10);
  auto net = diamond(g);
  EXPECT_THROW(solve(net, 9, g, {}), LookupError);
  EXPECT_THROW(solve(net, 3, g, {0.0, 10}), ParameterError);
  EXPECT_THROW(solve(net, 3, g, {1e-3, 0}), ParameterError);
  EXPECT_THROW(solve(net, 3, TimeGrid(0.5, 10), {}), GridError);
}

TEST(Solve, TargetIsCertain) {
  TimeGrid g(1.0, 12);
  auto table = solve(diamond(g), 3, g, {});
  for (double u : table.arrival_cdf(3)) EXPECT_EQ(u, 1.0);
  for (NodeId q : table.successor_map(3)) EXPECT_EQ(q, kNoNode);
}

TEST(Solve, SingleEdgeGivesItsCdf) {
  TimeGrid g(0.5, 40);
  NetworkBuilder b;
  b.add_node(0, 0);
  b.add_node(1, 0);
  b.add_edge(0, 1, 1.0, LogNormalParams(0.5, 0.8));
  auto net = std::move(b).build();
  auto table = solve(net, 1, g, {1e-6, 100});
  auto pmf = discretize_lognormal({0.5, 0.8}, g);
  for (std::size_t k = 0; k < g.bin_count(); ++k) {
    EXPECT_DOUBLE_EQ(table.arrival_cdf(0)[k], pmf.cdf()[k]);
    EXPECT_EQ(table.successor_map(0)[k], 1u);
  }
}

TEST(Solve, DiamondMatchesPolicyEnumeration) {
  TimeGrid g(1.0, 15);
  auto table = solve(diamond(g), 3, g, {1e-9, 100});
  oracle::PolicyEnumeration oracle(4, diamond_edges(), 3);
  for (NodeId i = 0; i < 4; ++i)
    for (std::size_t k = 0; k < g.bin_count(); ++k)
      EXPECT_NEAR(table.arrival_cdf(i)[k], oracle.best(i, static_cast<int>(k), 15), 1e-9)
          << "node " << i << " bin " << k;
  // the upper branch is fast half the time; the lower one is sure to take 3 bins
  // only with probability 0.7
  EXPECT_NEAR(table.arrival_cdf(0)[3], 0.7, 1e-12);
  EXPECT_EQ(table.successor_map(0)[3], 2u);
  EXPECT_NEAR(table.arrival_cdf(0)[8], 1.0, 1e-12);
  EXPECT_EQ(table.successor_map(0)[8], 1u);
}

TEST(Solve, RandomNetworksMatchPolicyEnumeration) {
  Rng rng(2718);
  for (int rep = 0; rep < 20; ++rep) {
    TimeGrid g(1.0, 14);
    auto rnd = oracle::random_two_point_network(rng, 8, 5);
    auto net = oracle::attach_weights(rnd.net, rnd.edges, g);
    const NodeId target = static_cast<NodeId>(rep % net.node_count());
    const double eps = 1e-3;
    auto table = solve(net, target, g, {eps, 1000});
    oracle::PolicyEnumeration oracle(net.node_count(), rnd.edges, target);
    for (NodeId i = 0; i < net.node_count(); ++i)
      for (std::size_t k = 0; k < g.bin_count(); ++k) {
        const double truth = oracle.best(i, static_cast<int>(k), static_cast<int>(g.bin_count()));
        ASSERT_LE(table.arrival_cdf(i)[k], truth + 1e-12);
        ASSERT_GE(table.arrival_cdf(i)[k], truth - eps);
      }
  }
}

TEST(Solve, IteratesAreSandwichedAndMonotone) {
  Rng rng(77);
  TimeGrid g(1.0, 20);
  auto rnd = oracle::random_two_point_network(rng, 10, 6);
  auto net = oracle::attach_weights(rnd.net, rnd.edges, g);
  ValueSequence prev_v, prev_w;
  int calls = 0;
  auto table = solve(net, 0, g, {1e-3, 1000}, [&](int s, const ValueSequence& v, const ValueSequence& w) {
    EXPECT_EQ(s, calls++);
    for (std::size_t i = 0; i < v.size(); ++i)
      for (std::size_t k = 0; k < v[i].size(); ++k) {
        ASSERT_LE(v[i][k], w[i][k] + 1e-15);
        if (!prev_v.empty()) {
          ASSERT_GE(v[i][k], prev_v[i][k] - 1e-15);
          ASSERT_LE(w[i][k], prev_w[i][k] + 1e-15);
        }
      }
    prev_v = v;
    prev_w = w;
  });
  EXPECT_EQ(calls, table.iterations_used() + 1);
  EXPECT_LT(table.residual(), 1e-3);
}

TEST(Solve, ReportsNonConvergence) {
  Rng rng(5);
  TimeGrid g = TimeGrid::covering(40.0, 200);
  auto net = generate_kleinberg_variant(5, rng);
  try {
    solve(net, 24, g, {1e-6, 2});
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_EQ(e.iterations(), 2);
    EXPECT_GT(e.residual(), 1e-6);
  }
}

TEST(Solve, NodeWithoutOutEdgesHasNoSuccessor) {
  TimeGrid g(1.0, 8);
  NetworkBuilder b;
  b.add_node(0, 0);
  b.add_node(1, 0);
  b.add_node(2, 0);
  b.add_edge(0, 1, 1.0, DiscreteDistribution::point_mass(g, 1));
  auto net = std::move(b).build();
  auto table = solve(net, 1, g, {});
  for (std::size_t k = 0; k < g.bin_count(); ++k) {
    EXPECT_EQ(table.arrival_cdf(2)[k], 0.0);
    EXPECT_EQ(table.successor_map(2)[k], kNoNode);
  }
  Rng rng(1);
  auto rec = route_with_table(net, table, 2, 5.0, Criterion::fan, 0.8, rng);
  EXPECT_EQ(rec.outcome, TrialOutcome::trapped);
  EXPECT_FALSE(rec.success);
}

TEST(Route, OriginEqualsTarget) {
  TimeGrid g(1.0, 12);
  auto net = diamond(g);
  auto table = solve(net, 3, g, {});
  Rng rng(3);
  auto rec = route_with_table(net, table, 3, 0.0, Criterion::joint, 0.8, rng);
  EXPECT_TRUE(rec.success);
  EXPECT_EQ(rec.travel_time, 0.0);
  EXPECT_EQ(rec.path, (std::vector<NodeId>{3}));
}

TEST(Route, DeterministicWeightsAlwaysArriveWithGenerousBudget) {
  TimeGrid g(1.0, 30);
  NetworkBuilder b;
  for (int i = 0; i < 4; ++i) b.add_node(i, 0);
  for (NodeId i = 0; i < 3; ++i) b.add_edge(i, i + 1, 1.0, DiscreteDistribution::point_mass(g, 2));
  auto net = std::move(b).build();
  auto table = solve(net, 3, g, {});
  Rng rng(10);
  for (auto c : {Criterion::fan, Criterion::frank, Criterion::joint})
    for (int t = 0; t < 50; ++t) {
      auto rec = route_with_table(net, table, 0, 20.0, c, 0.8, rng);
      ASSERT_TRUE(rec.success);
      ASSERT_EQ(rec.path, (std::vector<NodeId>{0, 1, 2, 3}));
    }
}

TEST(Route, ZeroBudgetFailsUnlessAtTarget) {
  TimeGrid g(1.0, 12);
  auto net = diamond(g);
  auto table = solve(net, 3, g, {});
  Rng rng(4);
  auto rec = route_with_table(net, table, 0, 0.0, Criterion::fan, 0.8, rng);
  EXPECT_FALSE(rec.success);
  EXPECT_EQ(rec.outcome, TrialOutcome::budget_exhausted);
}

TEST(Route, SameSeedSameTrial) {
  Rng net_rng(8);
  auto net = generate_kleinberg_variant(6, net_rng);
  auto g = TimeGrid::covering(40.0, 400);
  auto table = solve(net, 35, g, {});
  Rng a(123), b(123);
  for (int t = 0; t < 20; ++t) {
    auto r1 = route_with_table(net, table, 0, 40.0, Criterion::joint, 0.8, a);
    auto r2 = route_with_table(net, table, 0, 40.0, Criterion::joint, 0.8, b);
    ASSERT_TRUE(same_route(r1, r2));
  }
}
