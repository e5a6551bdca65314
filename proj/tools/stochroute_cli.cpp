// stochroute: command-line front end for network generation, table solves,
// single routing attempts and configured experiments.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "stochroute/centralized_solver.hpp"
#include "stochroute/decentralized_router.hpp"
#include "stochroute/experiments.hpp"
#include "stochroute/tntp.hpp"

namespace fs = std::filesystem;
using namespace stochroute;

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::optional<int> threads;
};

struct NetworkArgs {
  int side = 10;
  std::uint64_t net_seed = 1;
  std::string nodes;
  std::string edges;

  void add(CLI::App* cmd) {
    cmd->add_option("--side", side, "Lattice side of a generated network")->check(CLI::PositiveNumber);
    cmd->add_option("--net-seed", net_seed, "Seed of the generated network");
    cmd->add_option("--nodes", nodes, "TNTP node file (id x y)");
    cmd->add_option("--edges", edges, "TNTP edge file (tail head length mu sigma)");
  }

  SpatialNetwork load() const {
    if (!nodes.empty() || !edges.empty()) {
      if (nodes.empty() || edges.empty()) throw ConfigError("--nodes/--edges", "both files are required");
      return load_tntp(nodes, edges, generated_file_options());
    }
    Rng rng(net_seed);
    return generate_kleinberg_variant(side, rng);
  }
};

NodeId node_arg(const SpatialNetwork& net, const std::vector<double>& xy, const char* what) {
  if (xy.size() == 1) {
    const auto id = static_cast<NodeId>(xy[0]);
    net.check(id);
    return id;
  }
  if (xy.size() == 2)
    if (auto n = net.find_node_at(xy[0], xy[1])) return *n;
  throw ConfigError(what, "expects a node id or an existing 'x y' coordinate");
}

void print_record(const TrialRecord& r) {
  std::cout << "outcome " << to_string(r.outcome) << "\nsuccess " << (r.success ? 1 : 0)
            << "\ntravel_time " << format_number(r.travel_time) << "\nsteps " << r.steps()
            << "\npath";
  for (NodeId n : r.path) std::cout << ' ' << n;
  std::cout << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic on-time arrival routing: centralized and decentralized"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--seed", common.seed, "Master seed (overrides the config)");
  app.add_option("--out-dir", common.out_dir, "Directory for CSV output");
  app.add_option("--threads", common.threads, "Worker threads")->check(CLI::PositiveNumber);

  // generate
  auto* gen = app.add_subcommand("generate", "Write a Kleinberg-variant lattice as TNTP files");
  int gen_side = 10;
  gen->add_option("--side", gen_side, "Lattice side")->check(CLI::Range(2, 100000));
  std::string gen_prefix = "network";
  gen->add_option("--prefix", gen_prefix, "Output file prefix inside --out-dir");

  // solve
  auto* sol = app.add_subcommand("solve", "Build a centralized routing table and print a node's CDF");
  NetworkArgs sol_net;
  sol_net.add(sol);
  std::vector<double> sol_target{9, 9}, sol_node{2, 2};
  double sol_horizon = 150.0, sol_eps = 1e-3;
  std::size_t sol_bins = 1000;
  sol->add_option("--target", sol_target, "Target id or 'x y'")->expected(1, 2);
  sol->add_option("--node", sol_node, "Node whose CDF is printed")->expected(1, 2);
  sol->add_option("--horizon", sol_horizon, "Grid horizon");
  sol->add_option("--bins", sol_bins, "Grid bins");
  sol->add_option("--epsilon", sol_eps, "Convergence tolerance");

  // route
  auto* rt = app.add_subcommand("route", "Simulate one routing attempt");
  NetworkArgs rt_net;
  rt_net.add(rt);
  std::vector<double> rt_origin{2, 2}, rt_target{9, 9};
  double rt_budget = 50.0, rt_theta = 0.8, rt_eps = 1e-3;
  std::size_t rt_bins = 1000;
  std::string rt_algo = "centralized", rt_crit = "joint";
  rt->add_option("--origin", rt_origin, "Origin id or 'x y'")->expected(1, 2);
  rt->add_option("--target", rt_target, "Target id or 'x y'")->expected(1, 2);
  rt->add_option("--budget", rt_budget, "Time budget");
  rt->add_option("--theta", rt_theta, "CDF threshold");
  rt->add_option("--epsilon", rt_eps, "Convergence tolerance");
  rt->add_option("--bins", rt_bins, "Grid bins");
  rt->add_option("--algorithm", rt_algo, "centralized|decentralized-GE|decentralized-LE");
  rt->add_option("--criterion", rt_crit, "fan|frank|joint");

  // experiment
  auto* exp = app.add_subcommand("experiment", "Run a configured experiment");
  std::string exp_config;
  exp->add_option("config", exp_config, "JSON config file")->required()->check(CLI::ExistingFile);

  // distance-analysis
  auto* dist = app.add_subcommand("distance-analysis", "Metric vs. network distance statistics");
  NetworkArgs dist_net;
  dist_net.add(dist);
  std::string dist_config;
  dist->add_option("--config", dist_config, "JSON config (overrides network flags)")->check(CLI::ExistingFile);
  int dist_bootstrap = 1000, dist_bins = 200;
  dist->add_option("--bootstrap", dist_bootstrap, "Bootstrap resamples");
  dist->add_option("--histogram-bins", dist_bins, "Histogram bins per axis");

  // bench-scaling
  auto* bench = app.add_subcommand("bench-scaling", "Computational scaling with network size");
  std::string bench_config;
  bench->add_option("--config", bench_config, "JSON config")->check(CLI::ExistingFile);
  std::vector<int> bench_sides{5, 10, 15, 20, 25};
  int bench_runs = 100;
  bench->add_option("--sides", bench_sides, "Lattice sides");
  bench->add_option("--runs", bench_runs, "Runs per size");

  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path out_dir = common.out_dir;
    auto apply_common = [&](ExperimentConfig& c) {
      if (common.seed) c.master_seed = *common.seed;
      if (common.threads) c.threads = *common.threads;
      c.validate();
    };
    auto report = [](const std::vector<fs::path>& files) {
      for (const auto& f : files) std::cout << f.string() << '\n';
    };

    if (*gen) {
      Rng rng(common.seed.value_or(1));
      const auto net = generate_kleinberg_variant(gen_side, rng);
      fs::create_directories(out_dir);
      std::ofstream nodes(out_dir / (gen_prefix + "_node.tntp"));
      std::ofstream edges(out_dir / (gen_prefix + "_net.tntp"));
      if (!nodes || !edges) throw std::runtime_error("cannot write into " + out_dir.string());
      write_tntp(net, nodes, edges);
      std::cout << "nodes " << net.node_count() << "\nedges " << net.edge_count() << '\n';
    } else if (*sol) {
      const auto net = sol_net.load();
      const NodeId target = node_arg(net, sol_target, "--target");
      const NodeId node = node_arg(net, sol_node, "--node");
      const auto grid = TimeGrid::covering(sol_horizon, sol_bins);
      const auto table = solve(net, target, grid, {sol_eps, 1000});
      std::cerr << "iterations " << table.iterations_used() << " residual "
                << format_number(table.residual()) << '\n';
      std::cout << "time,cdf,successor\n";
      const auto u = table.arrival_cdf(node);
      const auto q = table.successor_map(node);
      for (std::size_t k = 0; k < grid.bin_count(); ++k)
        std::cout << format_number(grid.time_of(k)) << ',' << format_number(u[k]) << ','
                  << (q[k] == kNoNode ? std::string("") : std::to_string(q[k])) << '\n';
    } else if (*rt) {
      const auto net = rt_net.load();
      const NodeId origin = node_arg(net, rt_origin, "--origin");
      const NodeId target = node_arg(net, rt_target, "--target");
      const auto algo = parse_algorithm(rt_algo);
      const auto crit = parse_criterion(rt_crit);
      const auto grid = TimeGrid::covering(rt_budget > 0 ? rt_budget : 1.0, rt_bins);
      Rng rng(common.seed.value_or(1));
      TrialRecord rec;
      if (algo == Algorithm::centralized) {
        const auto table = solve(net, target, grid, {rt_eps, 1000});
        rec = route_with_table(net, table, origin, rt_budget, crit, rt_theta, rng);
      } else {
        rec = route_decentralized(net, origin, target, rt_budget, rt_theta, crit,
                                  algo == Algorithm::decentralized_ge ? EstimationMode::global
                                                                      : EstimationMode::local,
                                  grid, {rt_eps, 1000}, rng);
      }
      print_record(rec);
    } else if (*exp) {
      auto config = load_config(exp_config);
      apply_common(config);
      report(run_experiment(config, out_dir));
    } else if (*dist) {
      ExperimentConfig config;
      if (!dist_config.empty()) {
        config = load_config(dist_config);
      } else {
        config.kind = ExperimentKind::distance_analysis;
        config.network.side = dist_net.side;
        config.network.seed = dist_net.net_seed;
        if (!dist_net.nodes.empty() || !dist_net.edges.empty()) {
          config.network.kind = NetworkSource::Kind::tntp;
          config.network.node_file = dist_net.nodes;
          config.network.edge_file = dist_net.edges;
        }
        config.bootstrap_samples = dist_bootstrap;
        config.histogram_bins = dist_bins;
      }
      config.kind = ExperimentKind::distance_analysis;
      apply_common(config);
      report(run_experiment(config, out_dir));
    } else if (*bench) {
      ExperimentConfig config;
      if (!bench_config.empty()) {
        config = load_config(bench_config);
      } else {
        config.sides = bench_sides;
        config.runs = bench_runs;
      }
      config.kind = ExperimentKind::scaling;
      apply_common(config);
      report(run_experiment(config, out_dir));
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ConvergenceError& e) {
    std::cerr << "convergence error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
