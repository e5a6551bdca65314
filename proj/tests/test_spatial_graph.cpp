#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <map>
#include <set>
#include <thread>
#include <vector>

#include "stochroute/errors.hpp"
#include "stochroute/spatial_graph.hpp"

using namespace stochroute;

namespace {

SpatialNetwork triangle() {
  NetworkBuilder b;
  b.add_node(0, 0);
  b.add_node(3, 0);
  b.add_node(3, 4);
  const LogNormalParams w{0.0, 1.0};
  b.add_edge(0, 1, 3.0, w);
  b.add_edge(1, 2, 4.0, w);
  b.add_edge(0, 2, 10.0, w);
  return b.build();
}

}  // namespace

TEST(SpatialNetwork, RejectsBrokenEdges) {
  const LogNormalParams w{0.0, 1.0};
  NetworkBuilder loop;
  loop.add_node(0, 0);
  loop.add_edge(0, 0, 1.0, w);
  EXPECT_THROW(loop.build(), IntegrityError);
  NetworkBuilder dangling;
  dangling.add_node(0, 0);
  dangling.add_edge(0, 4, 1.0, w);
  EXPECT_THROW(dangling.build(), IntegrityError);
  NetworkBuilder negative;
  negative.add_node(0, 0);
  negative.add_node(1, 0);
  negative.add_edge(0, 1, -1.0, w);
  EXPECT_THROW(negative.build(), IntegrityError);
}

TEST(SpatialNetwork, LookupOfUnknownNodeThrows) {
  auto net = triangle();
  EXPECT_THROW(net.out_edges(7), LookupError);
  EXPECT_THROW(net.node(3), LookupError);
  EXPECT_THROW(network_distance(net, 9), LookupError);
}

TEST(SpatialNetwork, OutEdgesSortedByHead) {
  NetworkBuilder b;
  for (int i = 0; i < 4; ++i) b.add_node(i, 0);
  const LogNormalParams w{0.0, 1.0};
  b.add_edge(0, 3, 1.0, w);
  b.add_edge(0, 1, 1.0, w);
  b.add_edge(0, 2, 1.0, w);
  auto net = b.build();
  std::vector<NodeId> heads;
  for (EdgeId e : net.out_edges(0)) heads.push_back(net.edge(e).head);
  EXPECT_EQ(heads, (std::vector<NodeId>{1, 2, 3}));
  EXPECT_EQ(net.in_edges(2).size(), 1u);
}

TEST(Distances, MetricExamples) {
  auto net = triangle();
  EXPECT_DOUBLE_EQ(euclidean_distance(net, 0, 2), 5.0);
  EXPECT_DOUBLE_EQ(lattice_distance(net, 0, 2), 7.0);
  EXPECT_DOUBLE_EQ(metric_distance(net, 0, 2, Metric::euclidean), 5.0);
  EXPECT_DOUBLE_EQ(metric_distance(net, 0, 2, Metric::lattice), 7.0);
  EXPECT_DOUBLE_EQ(euclidean_distance(net, 1, 1), 0.0);
}

TEST(Distances, DijkstraTakesShorterDetour) {
  auto net = triangle();
  auto d = network_distance(net, 0);
  EXPECT_DOUBLE_EQ(d[0], 0.0);
  EXPECT_DOUBLE_EQ(d[1], 3.0);
  EXPECT_DOUBLE_EQ(d[2], 7.0);
  auto back = network_distance(net, 2);
  EXPECT_TRUE(std::isinf(back[0]));
}

TEST(Distances, DijkstraSatisfiesEdgeRelaxation) {
  Rng rng(4);
  auto net = generate_kleinberg_variant(12, rng);
  for (NodeId s : {0u, 37u, 143u}) {
    auto d = network_distance(net, s);
    for (const auto& e : net.edges()) ASSERT_LE(d[e.head], d[e.tail] + e.length + 1e-12);
    for (NodeId v = 0; v < net.node_count(); ++v) {
      ASSERT_TRUE(std::isfinite(d[v]));
      ASSERT_GE(d[v] + 1e-9, euclidean_distance(net, s, v));
    }
  }
}

TEST(Kleinberg, RejectsBadInput) {
  Rng rng(1);
  EXPECT_THROW(generate_kleinberg_variant(1, rng), ParameterError);
  KleinbergOptions bad;
  bad.mu_min = 2.0;
  EXPECT_THROW(generate_kleinberg_variant(5, rng, bad), ParameterError);
}

TEST(Kleinberg, StructureAndParameterRanges) {
  for (int side : {2, 5, 10, 25}) {
    Rng rng(100 + side);
    auto net = generate_kleinberg_variant(side, rng);
    const std::size_t n = static_cast<std::size_t>(side) * side;
    const std::size_t lattice_links = 2u * side * (side - 1);
    ASSERT_EQ(net.node_count(), n);
    ASSERT_EQ(net.edge_count() % 2, 0u);
    ASSERT_GE(net.edge_count() / 2, lattice_links);
    ASSERT_LE(net.edge_count() / 2, lattice_links + n);

    std::set<std::pair<NodeId, NodeId>> seen;
    std::size_t unit_links = 0;
    for (const auto& e : net.edges()) {
      ASSERT_TRUE(seen.emplace(e.tail, e.head).second) << "duplicate edge";
      const auto& p = std::get<LogNormalParams>(e.weight);
      ASSERT_GE(p.mu, 0.5);
      ASSERT_LE(p.mu, 1.5);
      ASSERT_GE(p.sigma, 0.5);
      ASSERT_LE(p.sigma, 1.5);
      ASSERT_NEAR(e.length, euclidean_distance(net, e.tail, e.head), 1e-12);
      if (lattice_distance(net, e.tail, e.head) == 1.0) ++unit_links;
    }
    for (const auto& e : net.edges()) {
      ASSERT_TRUE(seen.count({e.head, e.tail}));
      const auto& back = net.edge(net.out_edges(e.head)[0]);
      (void)back;
    }
    EXPECT_EQ(unit_links, 2 * lattice_links);
  }
}

TEST(Kleinberg, ReverseEdgesShareTheirLaw) {
  Rng rng(9);
  auto net = generate_kleinberg_variant(8, rng);
  std::map<std::pair<NodeId, NodeId>, LogNormalParams> law;
  for (const auto& e : net.edges()) law.emplace(std::make_pair(e.tail, e.head), std::get<LogNormalParams>(e.weight));
  for (const auto& [key, p] : law) EXPECT_EQ(law.at({key.second, key.first}), p);
}

TEST(Kleinberg, SameSeedSameNetwork) {
  Rng a(42), b(42), c(43);
  auto n1 = generate_kleinberg_variant(10, a);
  auto n2 = generate_kleinberg_variant(10, b);
  auto n3 = generate_kleinberg_variant(10, c);
  ASSERT_EQ(n1.edge_count(), n2.edge_count());
  bool differs = n1.edge_count() != n3.edge_count();
  for (std::size_t e = 0; e < n1.edge_count(); ++e) {
    const auto& x = n1.edges()[e];
    const auto& y = n2.edges()[e];
    EXPECT_EQ(x.tail, y.tail);
    EXPECT_EQ(x.head, y.head);
    EXPECT_EQ(std::get<LogNormalParams>(x.weight), std::get<LogNormalParams>(y.weight));
    if (!differs && e < n3.edge_count()) {
      const auto& z = n3.edges()[e];
      differs = z.head != x.head || !(std::get<LogNormalParams>(z.weight) == std::get<LogNormalParams>(x.weight));
    }
  }
  EXPECT_TRUE(differs);
}

// Shortcut destinations from a fixed node, grouped by lattice distance, against
// the inverse-square law with a chi-square goodness-of-fit test.
TEST(Kleinberg, ShortcutsFollowInverseSquareLaw) {
  const int side = 9;
  const NodeId from = lattice_node(side, 2, 3);
  std::map<int, double> weight_by_distance;
  double z = 0.0;
  for (int j = 0; j < side * side; ++j) {
    if (j == static_cast<int>(from)) continue;
    const int d = std::abs(j % side - 2) + std::abs(j / side - 3);
    weight_by_distance[d] += 1.0 / (d * d);
    z += 1.0 / (d * d);
  }
  Rng rng(555);
  const int draws = 200000;
  std::map<int, double> observed;
  for (int i = 0; i < draws; ++i) {
    const NodeId j = sample_shortcut_destination(side, from, rng);
    ASSERT_NE(j, from);
    observed[std::abs(static_cast<int>(j % side) - 2) + std::abs(static_cast<int>(j / side) - 3)] += 1;
  }
  double chi2 = 0.0;
  for (const auto& [d, w] : weight_by_distance) {
    const double expected = draws * w / z;
    const double o = observed.count(d) ? observed.at(d) : 0.0;
    chi2 += (o - expected) * (o - expected) / expected;
  }
  const double dof = static_cast<double>(weight_by_distance.size() - 1);
  const double critical = boost::math::quantile(boost::math::chi_squared(dof), 0.999);
  EXPECT_LT(chi2, critical);
}

TEST(LazyEdgePmfs, MatchesEagerDiscretization) {
  Rng rng(6);
  auto net = generate_kleinberg_variant(6, rng);
  auto grid = TimeGrid::covering(30.0, 300);
  auto eager = discretize_edges(net, grid);
  LazyEdgePmfs lazy(net, grid);
  EXPECT_EQ(lazy.size(), net.edge_count());
  EXPECT_EQ(lazy.filled(), 0u);
  const auto& first = lazy[3];
  EXPECT_EQ(&first, &lazy[3]);
  EXPECT_EQ(lazy.filled(), 1u);

  std::vector<std::thread> workers;
  for (int t = 0; t < 4; ++t)
    workers.emplace_back([&] {
      for (EdgeId e = 0; e < net.edge_count(); ++e) (void)lazy[e];
    });
  for (auto& w : workers) w.join();
  EXPECT_EQ(lazy.filled(), net.edge_count());
  for (EdgeId e = 0; e < net.edge_count(); ++e)
    for (std::size_t k = 0; k < grid.bin_count(); ++k) ASSERT_EQ(lazy[e].mass()[k], eager[e].mass()[k]);
}

TEST(Discretize, GridMismatchForDiscreteWeightThrows) {
  EdgeWeight w = DiscreteDistribution::point_mass(TimeGrid(1.0, 5), 2);
  EXPECT_THROW(discretize(w, TimeGrid(0.5, 5)), GridError);
  EXPECT_NO_THROW(discretize(w, TimeGrid(1.0, 5)));
}
