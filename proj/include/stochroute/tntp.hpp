#pragma once

// Plain-text node/edge files in the style of the TNTP transportation network
// test problems.
//
//   node file:  id x y [...]
//   edge file:  tail head [length [...]]
//
// Lines starting with '~', '#' or '<' (metadata such as <NUMBER OF NODES>)
// and blank lines are skipped, as are trailing ';' terminators. A leading
// non-numeric header row (e.g. "Node X Y ;") is tolerated once per file.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "stochroute/errors.hpp"
#include "stochroute/spatial_graph.hpp"

namespace stochroute {

/// One parsed edge row. `fields` holds every column after tail and head.
struct EdgeRecord {
  std::size_t line = 0;
  long long tail = 0;
  long long head = 0;
  std::vector<double> fields;
};

/// Maps edges to log-normal parameters. Default: mu and sigma drawn uniformly
/// from the configured intervals with a dedicated seeded generator, in file
/// order. `custom` replaces that rule, e.g. mu = ln(free-flow time).
struct WeightRule {
  double mu_min = 0.5;
  double mu_max = 1.5;
  double sigma_min = 0.5;
  double sigma_max = 1.5;
  std::uint64_t seed = 1;
  std::function<LogNormalParams(const EdgeRecord&, Rng&)> custom;
};

struct TntpOptions {
  WeightRule weight_rule;
  /// Multiplies node coordinates, e.g. to convert miles or feet to km.
  double coordinate_scale = 1.0;
  /// Index into EdgeRecord::fields holding the edge length; nullopt or a
  /// missing column means "use the Euclidean distance between endpoints".
  std::optional<std::size_t> length_column = 0;
  double length_scale = 1.0;
  /// When both are set, mu/sigma are read from these columns instead of the rule.
  std::optional<std::size_t> mu_column;
  std::optional<std::size_t> sigma_column;
  /// Each row also creates the reverse edge (a row whose reverse was already
  /// read is skipped).
  bool undirected = false;
};

struct TntpNetwork {
  SpatialNetwork network;
  /// file_ids[i] is the id used in the files for node i.
  std::vector<long long> file_ids;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r' || line[i] == ','))
      ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r' && line[j] != ',')
      ++j;
    if (j > i) {
      auto tok = line.substr(i, j - i);
      if (tok != ";") {
        if (tok.back() == ';') tok.remove_suffix(1);
        out.push_back(tok);
      }
    }
    i = j;
  }
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

inline bool parse_int(std::string_view s, long long& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

inline bool skippable(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
  if (i == line.size()) return true;
  return line[i] == '~' || line[i] == '#' || line[i] == '<';
}

/// Calls fn(line_number, fields) for every data row; handles the header row.
template <typename Fn>
void for_each_row(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  bool seen_data = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (skippable(line)) continue;
    auto fields = split_fields(line);
    if (fields.empty()) continue;
    long long probe = 0;
    if (!seen_data && !parse_int(fields.front(), probe)) {
      seen_data = true;  // header row
      continue;
    }
    seen_data = true;
    fn(lineno, fields);
  }
}

}  // namespace detail

inline TntpNetwork parse_tntp(std::istream& node_stream, std::istream& edge_stream,
                              const TntpOptions& opt = {}) {
  NetworkBuilder b;
  std::vector<long long> file_ids;
  std::map<long long, NodeId> index;
  detail::for_each_row(node_stream, [&](std::size_t lineno, const auto& f) {
    long long id = 0;
    double x = 0, y = 0;
    if (f.size() < 3 || !detail::parse_int(f[0], id) || !detail::parse_double(f[1], x) ||
        !detail::parse_double(f[2], y))
      throw ParseError("node file line " + std::to_string(lineno) + ": expected 'id x y'", lineno);
    if (index.count(id))
      throw ParseError("node file line " + std::to_string(lineno) + ": duplicate node id " +
                           std::to_string(id),
                       lineno);
    index[id] = b.add_node(x * opt.coordinate_scale, y * opt.coordinate_scale);
    file_ids.push_back(id);
  });

  std::vector<EdgeRecord> rows;
  detail::for_each_row(edge_stream, [&](std::size_t lineno, const auto& f) {
    EdgeRecord r;
    r.line = lineno;
    if (f.size() < 2 || !detail::parse_int(f[0], r.tail) || !detail::parse_int(f[1], r.head))
      throw ParseError("edge file line " + std::to_string(lineno) + ": expected 'tail head ...'",
                       lineno);
    for (std::size_t k = 2; k < f.size(); ++k) {
      double v = 0;
      if (!detail::parse_double(f[k], v))
        throw ParseError("edge file line " + std::to_string(lineno) + ": bad number '" +
                             std::string(f[k]) + "'",
                         lineno);
      r.fields.push_back(v);
    }
    rows.push_back(std::move(r));
  });

  std::vector<NodeId> tails, heads;
  for (const auto& r : rows) {
    auto t = index.find(r.tail);
    auto h = index.find(r.head);
    if (t == index.end() || h == index.end())
      throw IntegrityError("edge file line " + std::to_string(r.line) + ": endpoint " +
                           std::to_string(t == index.end() ? r.tail : r.head) +
                           " is not in the node file");
    if (t->second == h->second)
      throw IntegrityError("edge file line " + std::to_string(r.line) + ": self-loop");
    tails.push_back(t->second);
    heads.push_back(h->second);
  }
  SpatialNetwork nodes_only = b.build();

  const auto& rule = opt.weight_rule;
  Rng rng(rule.seed);
  std::uniform_real_distribution<double> mu(rule.mu_min, rule.mu_max);
  std::uniform_real_distribution<double> sigma(rule.sigma_min, rule.sigma_max);
  std::set<std::pair<NodeId, NodeId>> added;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    if (opt.undirected && !added.insert(std::minmax(tails[k], heads[k])).second) continue;
    double length = euclidean_distance(nodes_only, tails[k], heads[k]);
    if (opt.length_column && *opt.length_column < r.fields.size())
      length = r.fields[*opt.length_column] * opt.length_scale;
    LogNormalParams params;
    if (opt.mu_column && opt.sigma_column && *opt.mu_column < r.fields.size() &&
        *opt.sigma_column < r.fields.size()) {
      params = LogNormalParams(r.fields[*opt.mu_column], r.fields[*opt.sigma_column]);
    } else if (rule.custom) {
      params = rule.custom(r, rng);
    } else {
      const double m = mu(rng);
      const double s = sigma(rng);
      params = LogNormalParams(m, s);
    }
    if (!(length >= 0.0))
      throw ParseError("edge file line " + std::to_string(r.line) + ": negative length", r.line);
    b.add_edge(tails[k], heads[k], length, params);
    if (opt.undirected) b.add_edge(heads[k], tails[k], length, params);
  }
  return {std::move(b).build(), std::move(file_ids)};
}

inline TntpNetwork load_tntp_with_ids(const std::filesystem::path& node_file,
                                      const std::filesystem::path& edge_file,
                                      const TntpOptions& opt = {}) {
  std::ifstream nodes(node_file);
  if (!nodes) throw ParseError("cannot open node file " + node_file.string(), 0);
  std::ifstream edges(edge_file);
  if (!edges) throw ParseError("cannot open edge file " + edge_file.string(), 0);
  return parse_tntp(nodes, edges, opt);
}

inline SpatialNetwork load_tntp(const std::filesystem::path& node_file,
                                const std::filesystem::path& edge_file,
                                const TntpOptions& opt = {}) {
  return load_tntp_with_ids(node_file, edge_file, opt).network;
}

/// Writes `id x y` and `tail head length mu sigma` files readable by load_tntp
/// with mu_column = 1, sigma_column = 2. Only log-normal edges are supported.
inline void write_tntp(const SpatialNetwork& net, std::ostream& node_out, std::ostream& edge_out) {
  node_out << "~ id x y\n" << std::setprecision(17);
  for (const auto& n : net.nodes()) node_out << n.id << ' ' << n.x << ' ' << n.y << '\n';
  edge_out << "~ tail head length mu sigma\n" << std::setprecision(17);
  for (const auto& e : net.edges()) {
    auto* ln = std::get_if<LogNormalParams>(&e.weight);
    if (!ln) throw ParameterError("only log-normal edges can be written to TNTP files");
    edge_out << e.tail << ' ' << e.head << ' ' << e.length << ' ' << ln->mu << ' ' << ln->sigma
             << '\n';
  }
}

inline TntpOptions generated_file_options() {
  TntpOptions opt;
  opt.length_column = 0;
  opt.mu_column = 1;
  opt.sigma_column = 2;
  return opt;
}

}  // namespace stochroute
