#pragma once

// Configuration-driven experiment harness: arrival fraction vs. budget,
// threshold sweeps, travel-time regimes, distance analysis and the
// computational-scaling benchmark. Trials run on a worker pool; every trial
// draws from its own generator seeded from (master_seed, trial index), and
// results are written in trial order, so output does not depend on the
// number of workers.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "stochroute/centralized_solver.hpp"
#include "stochroute/criteria.hpp"
#include "stochroute/decentralized_router.hpp"
#include "stochroute/errors.hpp"
#include "stochroute/estimation.hpp"
#include "stochroute/spatial_graph.hpp"
#include "stochroute/stats.hpp"
#include "stochroute/tntp.hpp"
#include "stochroute/trial.hpp"

namespace stochroute {

inline constexpr const char* kSummarySchema = "# stochroute summary v1";
inline constexpr const char* kTrialsSchema = "# stochroute trials v1";

enum class Algorithm { centralized, decentralized_ge, decentralized_le };

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::centralized: return "centralized";
    case Algorithm::decentralized_ge: return "decentralized-GE";
    case Algorithm::decentralized_le: return "decentralized-LE";
  }
  return "?";
}

inline Algorithm parse_algorithm(std::string_view s) {
  if (s == "centralized") return Algorithm::centralized;
  if (s == "decentralized-GE" || s == "decentralized-ge" || s == "GE") return Algorithm::decentralized_ge;
  if (s == "decentralized-LE" || s == "decentralized-le" || s == "LE") return Algorithm::decentralized_le;
  throw ParameterError("unknown algorithm '" + std::string(s) +
                       "' (expected centralized|decentralized-GE|decentralized-LE)");
}

/// Child seed for stream (a, b) of a master seed. std::seed_seq's mixing is
/// fully specified by the standard, so this is portable.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// ---------------------------------------------------------------------------
// Configuration

enum class ExperimentKind { arrival, threshold_sweep, travel_time, distance_analysis, scaling };

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::arrival: return "arrival";
    case ExperimentKind::threshold_sweep: return "threshold_sweep";
    case ExperimentKind::travel_time: return "travel_time";
    case ExperimentKind::distance_analysis: return "distance_analysis";
    case ExperimentKind::scaling: return "scaling";
  }
  return "?";
}

struct NetworkSource {
  enum class Kind { kleinberg, tntp } kind = Kind::kleinberg;
  int side = 10;
  KleinbergOptions kleinberg;
  std::uint64_t seed = 1;  ///< generator seed (Kleinberg) or weight-rule seed (TNTP)
  std::string node_file;
  std::string edge_file;
  TntpOptions tntp;
};

struct EndpointRule {
  enum class Kind { fixed, random_band } kind = Kind::fixed;
  double origin_x = 2, origin_y = 2;
  double target_x = 9, target_y = 9;
  double min_distance = 40.0;  ///< Euclidean band for random pairs
  double max_distance = 50.0;
};

struct DistanceModelSpec {
  enum class Kind { identity, line, fit } kind = Kind::identity;
  double intercept = 0.0;
  double slope = 1.0;
  Metric metric = Metric::euclidean;
  int bootstrap_samples = 200;
};

struct ExperimentConfig {
  std::string name = "experiment";
  ExperimentKind kind = ExperimentKind::arrival;
  NetworkSource network;
  EndpointRule endpoints;
  std::vector<double> budgets{10, 20, 30, 40, 60, 80, 100, 120, 150};
  std::vector<double> thetas{0.8};
  double epsilon = 1e-3;
  int max_iterations = 1000;
  int trials = 1000;
  std::vector<Algorithm> algorithms{Algorithm::centralized, Algorithm::decentralized_ge,
                                    Algorithm::decentralized_le};
  std::vector<Criterion> criteria{Criterion::joint};
  double grid_horizon = 0.0;  ///< 0: the largest budget
  std::size_t grid_bins = 1000;
  std::uint64_t master_seed = 1;
  DistanceModelSpec model;
  std::vector<double> regime_bounds{40.0, 90.0};
  // distance analysis
  std::vector<Metric> metrics{Metric::euclidean, Metric::lattice};
  int bootstrap_samples = 1000;
  int histogram_bins = 200;
  // scaling
  std::vector<int> sides{5, 10, 15, 20, 25};
  int runs = 100;
  double scaling_budget = 50.0;
  int threads = 1;

  void validate() const {
    if (trials < 1) throw ConfigError("trials", "must be at least 1");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon", "must be positive");
    if (max_iterations < 1) throw ConfigError("max_iterations", "must be positive");
    if (grid_bins < 2) throw ConfigError("grid.bins", "must be at least 2");
    if (threads < 1) throw ConfigError("threads", "must be at least 1");
    for (double t : thetas)
      if (!(t > 0.0 && t <= 1.0)) throw ConfigError("thetas", "every threshold must lie in (0, 1]");
    const bool routed = kind == ExperimentKind::arrival || kind == ExperimentKind::threshold_sweep ||
                        kind == ExperimentKind::travel_time;
    if (routed) {
      if (budgets.empty()) throw ConfigError("budgets", "must not be empty");
      for (double b : budgets)
        if (!(b >= 0.0)) throw ConfigError("budgets", "budgets must be non-negative");
      if (thetas.empty()) throw ConfigError("thetas", "must not be empty");
      if (algorithms.empty()) throw ConfigError("algorithms", "must not be empty");
      if (criteria.empty()) throw ConfigError("criteria", "must not be empty");
    }
    if (kind == ExperimentKind::threshold_sweep && thetas.size() < 2)
      throw ConfigError("thetas", "a threshold sweep needs at least two thresholds");
    if (kind == ExperimentKind::scaling) {
      std::vector<int> s = sides;
      std::sort(s.begin(), s.end());
      s.erase(std::unique(s.begin(), s.end()), s.end());
      if (s.size() < 3) throw ConfigError("sides", "exponent fit needs at least three sizes");
      for (int x : s)
        if (x < 2) throw ConfigError("sides", "lattice side must be at least 2");
      if (runs < 1) throw ConfigError("runs", "must be at least 1");
      if (!(scaling_budget > 0.0)) throw ConfigError("scaling_budget", "must be positive");
    }
    if (kind == ExperimentKind::distance_analysis) {
      if (network.kind != NetworkSource::Kind::tntp && network.side < 2)
        throw ConfigError("network", "needs a loadable network");
      if (histogram_bins < 1) throw ConfigError("histogram_bins", "must be positive");
      if (bootstrap_samples < 1) throw ConfigError("bootstrap_samples", "must be positive");
    }
    if (network.kind == NetworkSource::Kind::tntp &&
        (network.node_file.empty() || network.edge_file.empty()))
      throw ConfigError("network", "tntp source needs node_file and edge_file");
  }

  double horizon() const {
    if (grid_horizon > 0.0) return grid_horizon;
    double h = 0.0;
    for (double b : budgets) h = std::max(h, b);
    return h > 0.0 ? h : 1.0;
  }
};

namespace detail {

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(key, e.what());
  }
}

inline Metric parse_metric(const std::string& s) {
  if (s == "euclidean") return Metric::euclidean;
  if (s == "lattice") return Metric::lattice;
  throw ConfigError("metric", "expected euclidean|lattice, got '" + s + "'");
}

inline std::optional<std::size_t> optional_column(const nlohmann::json& j, const char* key,
                                                  std::optional<std::size_t> fallback) {
  if (!j.contains(key)) return fallback;
  if (j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::size_t>();
}

}  // namespace detail

inline ExperimentKind parse_experiment_kind(const std::string& s) {
  if (s == "arrival") return ExperimentKind::arrival;
  if (s == "threshold_sweep") return ExperimentKind::threshold_sweep;
  if (s == "travel_time") return ExperimentKind::travel_time;
  if (s == "distance_analysis") return ExperimentKind::distance_analysis;
  if (s == "scaling") return ExperimentKind::scaling;
  throw ConfigError("kind", "unknown experiment kind '" + s + "'");
}

/// Builds a config from JSON; relative file paths resolve against `base_dir`.
inline ExperimentConfig config_from_json(const nlohmann::json& j,
                                         const std::filesystem::path& base_dir = {}) {
  using detail::get_or;
  ExperimentConfig c;
  c.name = get_or<std::string>(j, "name", c.name);
  if (!j.contains("kind")) throw ConfigError("kind", "missing");
  c.kind = parse_experiment_kind(j.at("kind").get<std::string>());
  if (j.contains("network")) {
    const auto& n = j.at("network");
    const auto type = get_or<std::string>(n, "type", "kleinberg");
    if (type == "kleinberg") {
      c.network.kind = NetworkSource::Kind::kleinberg;
      c.network.side = get_or<int>(n, "side", c.network.side);
      c.network.kleinberg.mu_min = get_or<double>(n, "mu_min", 0.5);
      c.network.kleinberg.mu_max = get_or<double>(n, "mu_max", 1.5);
      c.network.kleinberg.sigma_min = get_or<double>(n, "sigma_min", 0.5);
      c.network.kleinberg.sigma_max = get_or<double>(n, "sigma_max", 1.5);
    } else if (type == "tntp") {
      c.network.kind = NetworkSource::Kind::tntp;
      auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return (path.is_relative() && !base_dir.empty() ? base_dir / path : path).string();
      };
      c.network.node_file = resolve(get_or<std::string>(n, "node_file", ""));
      c.network.edge_file = resolve(get_or<std::string>(n, "edge_file", ""));
      auto& t = c.network.tntp;
      t.coordinate_scale = get_or<double>(n, "coordinate_scale", 1.0);
      t.length_column = detail::optional_column(n, "length_column", t.length_column);
      t.length_scale = get_or<double>(n, "length_scale", 1.0);
      t.mu_column = detail::optional_column(n, "mu_column", std::nullopt);
      t.sigma_column = detail::optional_column(n, "sigma_column", std::nullopt);
      t.undirected = get_or<bool>(n, "undirected", false);
      t.weight_rule.mu_min = get_or<double>(n, "mu_min", 0.5);
      t.weight_rule.mu_max = get_or<double>(n, "mu_max", 1.5);
      t.weight_rule.sigma_min = get_or<double>(n, "sigma_min", 0.5);
      t.weight_rule.sigma_max = get_or<double>(n, "sigma_max", 1.5);
    } else {
      throw ConfigError("network.type", "expected kleinberg|tntp");
    }
    c.network.seed = get_or<std::uint64_t>(n, "seed", c.network.seed);
    c.network.tntp.weight_rule.seed = c.network.seed;
  }
  if (j.contains("endpoints")) {
    const auto& e = j.at("endpoints");
    const auto rule = get_or<std::string>(e, "rule", "fixed");
    if (rule == "fixed") {
      c.endpoints.kind = EndpointRule::Kind::fixed;
      auto o = get_or<std::vector<double>>(e, "origin", {2, 2});
      auto t = get_or<std::vector<double>>(e, "target", {9, 9});
      if (o.size() != 2 || t.size() != 2) throw ConfigError("endpoints", "coordinates need [x, y]");
      c.endpoints.origin_x = o[0];
      c.endpoints.origin_y = o[1];
      c.endpoints.target_x = t[0];
      c.endpoints.target_y = t[1];
    } else if (rule == "random_band") {
      c.endpoints.kind = EndpointRule::Kind::random_band;
      c.endpoints.min_distance = get_or<double>(e, "min_distance", 40.0);
      c.endpoints.max_distance = get_or<double>(e, "max_distance", 50.0);
    } else {
      throw ConfigError("endpoints.rule", "expected fixed|random_band");
    }
  }
  c.budgets = get_or<std::vector<double>>(j, "budgets", c.budgets);
  c.thetas = get_or<std::vector<double>>(j, "thetas", c.thetas);
  c.epsilon = get_or<double>(j, "epsilon", c.epsilon);
  c.max_iterations = get_or<int>(j, "max_iterations", c.max_iterations);
  c.trials = get_or<int>(j, "trials", c.trials);
  if (j.contains("algorithms")) {
    c.algorithms.clear();
    for (const auto& a : j.at("algorithms")) c.algorithms.push_back(parse_algorithm(a.get<std::string>()));
  }
  if (j.contains("criteria")) {
    c.criteria.clear();
    for (const auto& a : j.at("criteria")) c.criteria.push_back(parse_criterion(a.get<std::string>()));
  }
  if (j.contains("grid")) {
    c.grid_horizon = get_or<double>(j.at("grid"), "horizon", 0.0);
    c.grid_bins = get_or<std::size_t>(j.at("grid"), "bins", c.grid_bins);
  }
  c.master_seed = get_or<std::uint64_t>(j, "master_seed", c.master_seed);
  if (j.contains("distance_model")) {
    const auto& m = j.at("distance_model");
    const auto type = get_or<std::string>(m, "type", "identity");
    if (type == "identity") c.model.kind = DistanceModelSpec::Kind::identity;
    else if (type == "line") c.model.kind = DistanceModelSpec::Kind::line;
    else if (type == "fit") c.model.kind = DistanceModelSpec::Kind::fit;
    else throw ConfigError("distance_model.type", "expected identity|line|fit");
    c.model.intercept = get_or<double>(m, "intercept", 0.0);
    c.model.slope = get_or<double>(m, "slope", 1.0);
    c.model.metric = detail::parse_metric(get_or<std::string>(m, "metric", "euclidean"));
    c.model.bootstrap_samples = get_or<int>(m, "bootstrap_samples", c.model.bootstrap_samples);
  }
  c.regime_bounds = get_or<std::vector<double>>(j, "regime_bounds", c.regime_bounds);
  if (j.contains("metrics")) {
    c.metrics.clear();
    for (const auto& m : j.at("metrics")) c.metrics.push_back(detail::parse_metric(m.get<std::string>()));
  }
  c.bootstrap_samples = get_or<int>(j, "bootstrap_samples", c.bootstrap_samples);
  c.histogram_bins = get_or<int>(j, "histogram_bins", c.histogram_bins);
  c.sides = get_or<std::vector<int>>(j, "sides", c.sides);
  c.runs = get_or<int>(j, "runs", c.runs);
  c.scaling_budget = get_or<double>(j, "scaling_budget", c.scaling_budget);
  c.threads = get_or<int>(j, "threads", c.threads);
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config", e.what());
  }
  return config_from_json(j, path.parent_path());
}

// ---------------------------------------------------------------------------
// Worker pool

/// Runs fn(i) for i in [0, n) on `threads` workers; rethrows the first failure.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next.store(n);
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Results

struct TrialRow {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  Algorithm algorithm = Algorithm::centralized;
  Criterion criterion = Criterion::joint;
  double budget = 0.0;
  double theta = 0.0;
  NodeId origin = 0;
  NodeId target = 0;
  TrialRecord record;
};

/// Aggregates for one (algorithm, criterion, budget, theta) cell.
struct CellSummary {
  Algorithm algorithm = Algorithm::centralized;
  Criterion criterion = Criterion::joint;
  double budget = 0.0;
  double theta = 0.0;
  std::size_t trials = 0;
  std::size_t successes = 0;
  double arrival_fraction = 0.0;
  double arrival_se = 0.0;  ///< binomial standard error
  double mean_time = std::numeric_limits<double>::quiet_NaN();  ///< over successes
  double time_std = std::numeric_limits<double>::quiet_NaN();
  double time_se = std::numeric_limits<double>::quiet_NaN();
  bool flagged = false;  ///< no successful trial, so no travel-time statistics

  double arrival_band() const noexcept { return 3.0 * arrival_se; }
};

inline CellSummary summarize(Algorithm a, Criterion c, double budget, double theta,
                             std::span<const TrialRecord> records) {
  CellSummary s;
  s.algorithm = a;
  s.criterion = c;
  s.budget = budget;
  s.theta = theta;
  s.trials = records.size();
  std::vector<double> times;
  for (const auto& r : records)
    if (r.success) times.push_back(r.travel_time);
  s.successes = times.size();
  if (s.trials > 0) {
    const double n = static_cast<double>(s.trials);
    s.arrival_fraction = static_cast<double>(s.successes) / n;
    s.arrival_se = std::sqrt(s.arrival_fraction * (1.0 - s.arrival_fraction) / n);
  }
  if (times.empty()) {
    s.flagged = true;
  } else {
    s.mean_time = mean(times);
    s.time_std = sample_stddev(times);
    s.time_se = s.time_std / std::sqrt(static_cast<double>(times.size()));
  }
  return s;
}

/// Least-squares slope of mean travel time against budget inside one regime.
struct RegimeSlope {
  Algorithm algorithm = Algorithm::centralized;
  Criterion criterion = Criterion::joint;
  std::size_t regime = 0;  ///< 0 = small budgets, 1 = intermediate, 2 = large
  double lo = 0.0;
  double hi = 0.0;
  std::size_t points = 0;
  double slope = std::numeric_limits<double>::quiet_NaN();
  double slope_se = std::numeric_limits<double>::quiet_NaN();  ///< propagated from cell SEs
};

struct ExperimentResult {
  std::vector<CellSummary> cells;
  std::vector<TrialRow> trials;
  std::vector<RegimeSlope> regimes;
};

/// Slope of y on x with uncertainty propagated from per-point standard errors.
inline RegimeSlope regime_slope(std::span<const double> x, std::span<const double> y,
                                std::span<const double> se) {
  RegimeSlope r;
  r.points = x.size();
  if (x.size() < 2) return r;
  const double mx = mean(x);
  double sxx = 0.0;
  for (double xi : x) sxx += (xi - mx) * (xi - mx);
  if (!(sxx > 0.0)) return r;
  double slope = 0.0, var = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double c = (x[i] - mx) / sxx;
    slope += c * y[i];
    var += c * c * se[i] * se[i];
  }
  r.slope = slope;
  r.slope_se = std::sqrt(var);
  return r;
}

inline std::vector<RegimeSlope> regime_slopes(std::span<const CellSummary> cells,
                                              std::span<const double> bounds) {
  std::vector<double> edges{-std::numeric_limits<double>::infinity()};
  edges.insert(edges.end(), bounds.begin(), bounds.end());
  edges.push_back(std::numeric_limits<double>::infinity());
  std::vector<std::pair<Algorithm, Criterion>> groups;
  for (const auto& c : cells)
    if (std::find(groups.begin(), groups.end(), std::pair{c.algorithm, c.criterion}) == groups.end())
      groups.emplace_back(c.algorithm, c.criterion);
  std::vector<RegimeSlope> out;
  for (auto [a, cr] : groups) {
    for (std::size_t r = 0; r + 1 < edges.size(); ++r) {
      std::vector<double> x, y, se;
      for (const auto& c : cells) {
        if (c.algorithm != a || c.criterion != cr || c.flagged || c.successes < 2) continue;
        if (c.budget < edges[r] || c.budget >= edges[r + 1]) continue;
        x.push_back(c.budget);
        y.push_back(c.mean_time);
        se.push_back(c.time_se);
      }
      auto s = regime_slope(x, y, se);
      s.algorithm = a;
      s.criterion = cr;
      s.regime = r;
      s.lo = edges[r];
      s.hi = edges[r + 1];
      out.push_back(s);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV output

inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

inline void write_summary_csv(std::ostream& out, std::span<const CellSummary> cells) {
  out << kSummarySchema << '\n'
      << "algorithm,criterion,budget,theta,trials,n_success,arrival_fraction,arrival_se,"
         "arrival_3sigma,mean_time,std,time_se,flag\n";
  for (const auto& c : cells)
    out << to_string(c.algorithm) << ',' << to_string(c.criterion) << ',' << format_number(c.budget)
        << ',' << format_number(c.theta) << ',' << c.trials << ',' << c.successes << ','
        << format_number(c.arrival_fraction) << ',' << format_number(c.arrival_se) << ','
        << format_number(c.arrival_band()) << ',' << format_number(c.mean_time) << ','
        << format_number(c.time_std) << ',' << format_number(c.time_se) << ','
        << (c.flagged ? "no_success" : "") << '\n';
}

inline void write_trials_csv(std::ostream& out, std::span<const TrialRow> rows) {
  out << kTrialsSchema << '\n'
      << "algorithm,criterion,budget,theta,trial,seed,origin,target,success,outcome,travel_time,"
         "steps,path\n";
  for (const auto& r : rows) {
    out << to_string(r.algorithm) << ',' << to_string(r.criterion) << ',' << format_number(r.budget)
        << ',' << format_number(r.theta) << ',' << r.trial << ',' << r.seed << ',' << r.origin << ','
        << r.target << ',' << (r.record.success ? 1 : 0) << ',' << to_string(r.record.outcome) << ','
        << format_number(r.record.travel_time) << ',' << r.record.steps() << ',';
    for (std::size_t k = 0; k < r.record.path.size(); ++k)
      out << (k ? " " : "") << r.record.path[k];
    out << '\n';
  }
}

/// Wall-clock solve time per trial; kept apart from trials.csv, which is
/// byte-reproducible.
inline void write_timings_csv(std::ostream& out, std::span<const TrialRow> rows) {
  out << "algorithm,criterion,budget,theta,trial,solve_seconds\n";
  for (const auto& r : rows)
    out << to_string(r.algorithm) << ',' << to_string(r.criterion) << ',' << format_number(r.budget)
        << ',' << format_number(r.theta) << ',' << r.trial << ','
        << format_number(r.record.solve_seconds) << '\n';
}

inline void write_regimes_csv(std::ostream& out, std::span<const RegimeSlope> slopes) {
  out << "algorithm,criterion,regime,budget_lo,budget_hi,points,slope,slope_se\n";
  for (const auto& s : slopes)
    out << to_string(s.algorithm) << ',' << to_string(s.criterion) << ',' << s.regime << ','
        << format_number(s.lo) << ',' << format_number(s.hi) << ',' << s.points << ','
        << format_number(s.slope) << ',' << format_number(s.slope_se) << '\n';
}

// ---------------------------------------------------------------------------
// Network and endpoints

inline SpatialNetwork build_network(const NetworkSource& src) {
  if (src.kind == NetworkSource::Kind::kleinberg) {
    Rng rng(src.seed);
    return generate_kleinberg_variant(src.side, rng, src.kleinberg);
  }
  return load_tntp(src.node_file, src.edge_file, src.tntp);
}

/// Picks (origin, target) for each trial.
class EndpointSampler {
 public:
  EndpointSampler(const SpatialNetwork& net, const EndpointRule& rule, std::uint64_t master_seed)
      : rule_(rule), master_seed_(master_seed) {
    if (rule.kind == EndpointRule::Kind::fixed) {
      auto o = net.find_node_at(rule.origin_x, rule.origin_y);
      auto t = net.find_node_at(rule.target_x, rule.target_y);
      if (!o || !t) throw ConfigError("endpoints", "no node at the configured coordinates");
      fixed_ = {*o, *t};
      return;
    }
    for (NodeId i = 0; i < net.node_count(); ++i)
      for (NodeId j = 0; j < net.node_count(); ++j) {
        if (i == j) continue;
        const double d = euclidean_distance(net, i, j);
        if (d >= rule.min_distance && d <= rule.max_distance) pairs_.emplace_back(i, j);
      }
    if (pairs_.empty()) throw ConfigError("endpoints", "no node pair inside the distance band");
  }

  std::pair<NodeId, NodeId> operator()(std::size_t trial) const {
    if (rule_.kind == EndpointRule::Kind::fixed) return fixed_;
    Rng rng(derive_seed(master_seed_, trial, 1));
    std::uniform_int_distribution<std::size_t> pick(0, pairs_.size() - 1);
    return pairs_[pick(rng)];
  }

  std::size_t candidate_pairs() const noexcept { return pairs_.size(); }

 private:
  EndpointRule rule_;
  std::uint64_t master_seed_;
  std::pair<NodeId, NodeId> fixed_{0, 0};
  std::vector<std::pair<NodeId, NodeId>> pairs_;
};

// ---------------------------------------------------------------------------
// Routing experiments

/// Owns the network and every solver shared across cells of one experiment.
class RoutingHarness {
 public:
  explicit RoutingHarness(const ExperimentConfig& config)
      : config_(config),
        net_(build_network(config.network)),
        grid_(TimeGrid::covering(config.horizon(), config.grid_bins)),
        endpoints_(net_, config.endpoints, config.master_seed),
        pmfs_(discretize_edges(net_, grid_)) {
    model_ = resolve_model();
  }

  const SpatialNetwork& network() const noexcept { return net_; }
  const TimeGrid& grid() const noexcept { return grid_; }
  const DistanceModel& model() const noexcept { return model_; }

  std::uint64_t trial_seed(std::size_t trial) const {
    return derive_seed(config_.master_seed, trial, 0);
  }

  TrialRow run_trial(Algorithm a, Criterion c, double budget, double theta, std::size_t trial) {
    TrialRow row;
    row.trial = trial;
    row.seed = trial_seed(trial);
    row.algorithm = a;
    row.criterion = c;
    row.budget = budget;
    row.theta = theta;
    std::tie(row.origin, row.target) = endpoints_(trial);
    Rng rng(row.seed);
    if (a == Algorithm::centralized) {
      auto entry = table_for(row.target);
      row.record = route_with_table(net_, *entry->table, row.origin, budget, c, theta, rng);
      row.record.solve_seconds = entry->seconds;
    } else {
      row.record = router(a).route(row.origin, row.target, budget, c, theta, rng);
    }
    return row;
  }

  /// Runs every trial of every cell; cells are (algorithm, criterion, budget, theta).
  ExperimentResult run_cells(
      const std::vector<std::tuple<Algorithm, Criterion, double, double>>& cells) {
    const auto trials = static_cast<std::size_t>(config_.trials);
    std::vector<TrialRow> rows(cells.size() * trials);
    parallel_for(rows.size(), config_.threads, [&](std::size_t i) {
      const auto& [a, c, b, t] = cells[i / trials];
      rows[i] = run_trial(a, c, b, t, i % trials);
    });
    ExperimentResult res;
    for (std::size_t k = 0; k < cells.size(); ++k) {
      std::vector<TrialRecord> recs;
      recs.reserve(trials);
      for (std::size_t t = 0; t < trials; ++t) recs.push_back(rows[k * trials + t].record);
      const auto& [a, c, b, th] = cells[k];
      res.cells.push_back(summarize(a, c, b, th, recs));
    }
    res.trials = std::move(rows);
    return res;
  }

 private:
  struct TableEntry {
    std::shared_ptr<const RoutingTable> table;
    double seconds = 0.0;
  };

  DistanceModel resolve_model() const {
    const auto& m = config_.model;
    if (m.kind == DistanceModelSpec::Kind::identity) return DistanceModel::identity(m.metric);
    if (m.kind == DistanceModelSpec::Kind::line) return {m.intercept, m.slope, m.metric};
    Rng rng(derive_seed(config_.master_seed, 0, 2));
    return fit_distance_model(net_, m.metric, m.bootstrap_samples, rng).model;
  }

  std::shared_ptr<const TableEntry> table_for(NodeId target) {
    std::shared_future<std::shared_ptr<const TableEntry>> fut;
    std::promise<std::shared_ptr<const TableEntry>> promise;
    bool owner = false;
    {
      std::lock_guard lock(mutex_);
      auto it = tables_.find(target);
      if (it == tables_.end()) {
        fut = promise.get_future().share();
        tables_.emplace(target, fut);
        owner = true;
      } else {
        fut = it->second;
      }
    }
    if (owner) {
      try {
        const auto t0 = std::chrono::steady_clock::now();
        auto table = std::make_shared<const RoutingTable>(
            solve(net_, target, pmfs_, grid_, {config_.epsilon, config_.max_iterations}));
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        promise.set_value(std::make_shared<const TableEntry>(TableEntry{std::move(table), secs}));
      } catch (...) {
        promise.set_exception(std::current_exception());
      }
    }
    return fut.get();
  }

  const DecentralizedRouter& router(Algorithm a) {
    std::lock_guard lock(mutex_);
    auto& slot = a == Algorithm::decentralized_ge ? ge_ : le_;
    if (!slot) {
      DecentralizedOptions opt;
      opt.mode = a == Algorithm::decentralized_ge ? EstimationMode::global : EstimationMode::local;
      opt.model = model_;
      opt.params = {config_.epsilon, config_.max_iterations};
      slot = std::make_unique<DecentralizedRouter>(net_, grid_, opt);
    }
    return *slot;
  }

  ExperimentConfig config_;
  SpatialNetwork net_;
  TimeGrid grid_;
  EndpointSampler endpoints_;
  std::vector<DiscreteDistribution> pmfs_;
  DistanceModel model_;
  std::mutex mutex_;
  std::map<NodeId, std::shared_future<std::shared_ptr<const TableEntry>>> tables_;
  std::unique_ptr<DecentralizedRouter> ge_;
  std::unique_ptr<DecentralizedRouter> le_;
};

/// Arrival fraction vs. budget for each algorithm (first criterion, first theta).
inline ExperimentResult run_arrival_experiment(const ExperimentConfig& config) {
  config.validate();
  RoutingHarness h(config);
  std::vector<std::tuple<Algorithm, Criterion, double, double>> cells;
  for (auto a : config.algorithms)
    for (double b : config.budgets) cells.emplace_back(a, config.criteria.front(), b, config.thetas.front());
  return h.run_cells(cells);
}

/// Arrival fraction per (theta, budget) under the joint criterion.
inline ExperimentResult run_threshold_sweep(const ExperimentConfig& config) {
  config.validate();
  RoutingHarness h(config);
  std::vector<std::tuple<Algorithm, Criterion, double, double>> cells;
  for (auto a : config.algorithms)
    for (double th : config.thetas)
      for (double b : config.budgets) cells.emplace_back(a, Criterion::joint, b, th);
  return h.run_cells(cells);
}

/// Mean travel time of successful trials per (algorithm, criterion, budget),
/// plus least-squares slopes inside each budget regime.
inline ExperimentResult run_travel_time_experiment(const ExperimentConfig& config) {
  config.validate();
  RoutingHarness h(config);
  std::vector<std::tuple<Algorithm, Criterion, double, double>> cells;
  for (auto a : config.algorithms)
    for (auto c : config.criteria)
      for (double b : config.budgets) cells.emplace_back(a, c, b, config.thetas.front());
  auto res = h.run_cells(cells);
  res.regimes = regime_slopes(res.cells, config.regime_bounds);
  return res;
}

// ---------------------------------------------------------------------------
// Distance analysis

struct DistanceAnalysis {
  Metric metric = Metric::euclidean;
  std::size_t pairs = 0;
  std::size_t excluded = 0;
  DistanceFit fit;
  double max_metric = 0.0;
  double max_network = 0.0;
  std::vector<std::size_t> histogram;  ///< bins x bins, row = metric-distance bin
  int bins = 0;
};

inline DistanceAnalysis analyze_distances(const SpatialNetwork& net, Metric metric, int bins,
                                          int bootstrap_samples, Rng& rng) {
  DistanceAnalysis out;
  out.metric = metric;
  out.bins = bins;
  const auto pairs = collect_distance_pairs(net, metric);
  out.pairs = pairs.metric.size();
  out.excluded = pairs.excluded;
  if (pairs.metric.size() < 3) throw FitError("need at least three finite distance pairs");
  out.fit = fit_distance_pairs(pairs.metric, pairs.network, metric, bootstrap_samples, rng);
  out.fit.pairs_excluded = pairs.excluded;
  for (std::size_t k = 0; k < pairs.metric.size(); ++k) {
    out.max_metric = std::max(out.max_metric, pairs.metric[k]);
    out.max_network = std::max(out.max_network, pairs.network[k]);
  }
  out.histogram.assign(static_cast<std::size_t>(bins) * bins, 0);
  auto bin_of = [&](double v, double hi) {
    if (!(hi > 0.0)) return std::size_t{0};
    auto b = static_cast<std::size_t>(v / hi * bins);
    return std::min(b, static_cast<std::size_t>(bins - 1));
  };
  for (std::size_t k = 0; k < pairs.metric.size(); ++k)
    ++out.histogram[bin_of(pairs.metric[k], out.max_metric) * bins +
                    bin_of(pairs.network[k], out.max_network)];
  return out;
}

inline std::string_view to_string(Metric m) { return m == Metric::euclidean ? "euclidean" : "lattice"; }

inline void write_distance_fit_csv(std::ostream& out, std::span<const DistanceAnalysis> runs) {
  out << "metric,pairs,excluded,pearson_rho,intercept,intercept_se,intercept_ci_lo,intercept_ci_hi,"
         "slope,slope_se,slope_ci_lo,slope_ci_hi\n";
  for (const auto& r : runs)
    out << to_string(r.metric) << ',' << r.pairs << ',' << r.excluded << ','
        << format_number(r.fit.pearson_rho) << ',' << format_number(r.fit.model.intercept) << ','
        << format_number(r.fit.intercept_se) << ',' << format_number(r.fit.intercept_ci.lo) << ','
        << format_number(r.fit.intercept_ci.hi) << ',' << format_number(r.fit.model.slope) << ','
        << format_number(r.fit.slope_se) << ',' << format_number(r.fit.slope_ci.lo) << ','
        << format_number(r.fit.slope_ci.hi) << '\n';
}

inline void write_histogram_csv(std::ostream& out, const DistanceAnalysis& a) {
  out << "metric_bin,network_bin,metric_lo,network_lo,count,density\n";
  const double dw = a.max_metric / a.bins;
  const double gw = a.max_network / a.bins;
  const double total = static_cast<double>(a.pairs);
  for (int i = 0; i < a.bins; ++i)
    for (int j = 0; j < a.bins; ++j) {
      const auto c = a.histogram[static_cast<std::size_t>(i) * a.bins + j];
      if (c == 0) continue;
      out << i << ',' << j << ',' << format_number(i * dw) << ',' << format_number(j * gw) << ','
          << c << ',' << format_number(static_cast<double>(c) / (total * dw * gw)) << '\n';
    }
}

inline std::vector<DistanceAnalysis> run_distance_analysis(const ExperimentConfig& config) {
  config.validate();
  const auto net = build_network(config.network);
  std::vector<DistanceAnalysis> out;
  for (std::size_t k = 0; k < config.metrics.size(); ++k) {
    Rng rng(derive_seed(config.master_seed, k, 3));
    out.push_back(analyze_distances(net, config.metrics[k], config.histogram_bins,
                                    config.bootstrap_samples, rng));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Computational scaling

struct ScalingPoint {
  Algorithm algorithm = Algorithm::centralized;
  int side = 0;
  std::size_t nodes = 0;
  std::size_t runs = 0;
  double mean_seconds = 0.0;
  double se_seconds = 0.0;
};

struct ScalingFit {
  Algorithm algorithm = Algorithm::centralized;
  double exponent = 0.0;
  double exponent_se = 0.0;
  double prefactor = 0.0;
};

struct ScalingResult {
  std::vector<ScalingPoint> points;
  std::vector<ScalingFit> fits;
};

/// Power-law exponent of mean time vs. node count (least squares in log-log).
inline ScalingFit fit_power_law(Algorithm a, std::span<const ScalingPoint> pts) {
  std::vector<double> x, y;
  for (const auto& p : pts)
    if (p.algorithm == a && p.mean_seconds > 0.0) {
      x.push_back(std::log(static_cast<double>(p.nodes)));
      y.push_back(std::log(p.mean_seconds));
    }
  if (x.size() < 3) throw FitError("power-law fit needs at least three sizes");
  const auto f = fit_line(x, y);
  return {a, f.slope, f.slope_se, std::exp(f.intercept)};
}

/// Wall-clock cost per routing attempt on growing lattices. Centralized
/// attempts include building the routing table. Runs sequentially so timings
/// are not perturbed by other workers.
inline ScalingResult run_scaling_benchmark(const ExperimentConfig& config) {
  config.validate();
  ScalingResult res;
  std::vector<int> sides = config.sides;
  std::sort(sides.begin(), sides.end());
  sides.erase(std::unique(sides.begin(), sides.end()), sides.end());
  std::vector<Algorithm> algos = config.algorithms;
  const auto grid = TimeGrid::covering(config.scaling_budget, config.grid_bins);
  const ConvergenceParams params{config.epsilon, config.max_iterations};
  using clock = std::chrono::steady_clock;
  for (int side : sides) {
    std::map<Algorithm, std::vector<double>> times;
    for (int r = 0; r < config.runs; ++r) {
      Rng net_rng(derive_seed(config.master_seed, static_cast<std::uint64_t>(side), static_cast<std::uint64_t>(r)));
      const auto net = generate_kleinberg_variant(side, net_rng, config.network.kleinberg);
      std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(net.node_count() - 1));
      const NodeId origin = pick(net_rng);
      NodeId target = pick(net_rng);
      while (target == origin) target = pick(net_rng);
      for (auto a : algos) {
        Rng rng(derive_seed(config.master_seed, static_cast<std::uint64_t>(side) * 1000003u + r, 4));
        const auto t0 = clock::now();
        if (a == Algorithm::centralized) {
          const auto table = solve(net, target, grid, params);
          route_with_table(net, table, origin, config.scaling_budget, config.criteria.front(),
                           config.thetas.front(), rng);
        } else {
          DecentralizedOptions opt;
          opt.mode = a == Algorithm::decentralized_ge ? EstimationMode::global : EstimationMode::local;
          opt.params = params;
          opt.use_cache = false;
          DecentralizedRouter router(net, grid, opt);
          router.route(origin, target, config.scaling_budget, config.criteria.front(),
                       config.thetas.front(), rng);
        }
        times[a].push_back(std::chrono::duration<double>(clock::now() - t0).count());
      }
    }
    for (auto a : algos) {
      const auto& ts = times[a];
      res.points.push_back({a, side, static_cast<std::size_t>(side) * side, ts.size(), mean(ts),
                            sample_stddev(ts) / std::sqrt(static_cast<double>(ts.size()))});
    }
  }
  for (auto a : algos) res.fits.push_back(fit_power_law(a, res.points));
  return res;
}

inline void write_scaling_csv(std::ostream& out, const ScalingResult& r) {
  out << "algorithm,side,nodes,runs,mean_seconds,se_seconds\n";
  for (const auto& p : r.points)
    out << to_string(p.algorithm) << ',' << p.side << ',' << p.nodes << ',' << p.runs << ','
        << format_number(p.mean_seconds) << ',' << format_number(p.se_seconds) << '\n';
}

inline void write_scaling_fit_csv(std::ostream& out, const ScalingResult& r) {
  out << "algorithm,exponent,exponent_se,prefactor\n";
  for (const auto& f : r.fits)
    out << to_string(f.algorithm) << ',' << format_number(f.exponent) << ','
        << format_number(f.exponent_se) << ',' << format_number(f.prefactor) << '\n';
}

// ---------------------------------------------------------------------------

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& fn) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  fn(out);
}

}  // namespace detail

/// Runs the experiment named by config.kind and writes its CSV files into out_dir.
/// Returns the list of files written.
inline std::vector<std::filesystem::path> run_experiment(const ExperimentConfig& config,
                                                         const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  auto emit = [&](const char* name, const std::function<void(std::ostream&)>& fn) {
    detail::write_file(out_dir / name, fn);
    written.push_back(out_dir / name);
  };
  switch (config.kind) {
    case ExperimentKind::arrival:
    case ExperimentKind::threshold_sweep:
    case ExperimentKind::travel_time: {
      ExperimentResult res = config.kind == ExperimentKind::arrival ? run_arrival_experiment(config)
                             : config.kind == ExperimentKind::threshold_sweep
                                 ? run_threshold_sweep(config)
                                 : run_travel_time_experiment(config);
      emit("summary.csv", [&](std::ostream& o) { write_summary_csv(o, res.cells); });
      emit("trials.csv", [&](std::ostream& o) { write_trials_csv(o, res.trials); });
      emit("timings.csv", [&](std::ostream& o) { write_timings_csv(o, res.trials); });
      if (config.kind == ExperimentKind::travel_time)
        emit("regimes.csv", [&](std::ostream& o) { write_regimes_csv(o, res.regimes); });
      break;
    }
    case ExperimentKind::distance_analysis: {
      const auto runs = run_distance_analysis(config);
      emit("distance_fit.csv", [&](std::ostream& o) { write_distance_fit_csv(o, runs); });
      for (const auto& r : runs) {
        const std::string name = "distance_histogram_" + std::string(to_string(r.metric)) + ".csv";
        detail::write_file(out_dir / name, [&](std::ostream& o) { write_histogram_csv(o, r); });
        written.push_back(out_dir / name);
      }
      break;
    }
    case ExperimentKind::scaling: {
      const auto res = run_scaling_benchmark(config);
      emit("scaling.csv", [&](std::ostream& o) { write_scaling_csv(o, res); });
      emit("scaling_fit.csv", [&](std::ostream& o) { write_scaling_fit_csv(o, res); });
      break;
    }
  }
  return written;
}

}  // namespace stochroute
