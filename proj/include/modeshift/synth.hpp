#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "modeshift/clock.hpp"
#include "modeshift/csv.hpp"
#include "modeshift/demand.hpp"
#include "modeshift/error.hpp"
#include "modeshift/meso_sim.hpp"
#include "modeshift/network.hpp"
#include "modeshift/rng.hpp"

// Synthetic inputs: grid and random road networks, straight-line bus lines on
// a grid written as a GTFS feed, and gravity-style OD matrices.
namespace modeshift::synth {

namespace fs = std::filesystem;

struct GridSpec {
  int rows{2};
  int cols{2};
  double block_m{200.0};
  double speed_mps{13.9};
  int lanes{1};
  int zone_rows{1};  // zones form a zone_rows x zone_cols partition of the nodes
  int zone_cols{1};
};

struct GridCounts {
  std::size_t nodes{};
  std::size_t edges{};
  std::size_t zones{};
};

inline GridCounts expected_counts(GridSpec const& s) {
  auto const r = static_cast<std::size_t>(s.rows);
  auto const c = static_cast<std::size_t>(s.cols);
  return {r * c, 2 * (r * (c - 1) + c * (r - 1)),
          static_cast<std::size_t>(s.zone_rows * s.zone_cols)};
}

inline std::string grid_node(int r, int c) {
  return "n" + std::to_string(r) + "_" + std::to_string(c);
}

// Edge leaving node (r, c) in direction d: 'E' (c+1), 'W' (c-1), 'S' (r+1), 'N' (r-1).
inline std::string grid_edge(int r, int c, char d) {
  return "e" + std::to_string(r) + "_" + std::to_string(c) + d;
}

inline std::string grid_zone(int zr, int zc) {
  return "z" + std::to_string(zr) + "_" + std::to_string(zc);
}

inline std::pair<int, int> zone_of_node(GridSpec const& s, int r, int c) {
  return {r * s.zone_rows / s.rows, c * s.zone_cols / s.cols};
}

inline nlohmann::json grid_json(GridSpec const& s) {
  if (s.rows < 1 || s.cols < 1 || s.rows * s.cols < 2 || s.zone_rows < 1 ||
      s.zone_cols < 1 || s.zone_rows > s.rows || s.zone_cols > s.cols) {
    fail(ErrorCode::kDomain, "grid needs at least two nodes and no more zones than nodes");
  }
  nlohmann::json doc;
  doc["nodes"] = nlohmann::json::array();
  doc["edges"] = nlohmann::json::array();
  std::vector<std::vector<std::string>> zone_edges(
      static_cast<std::size_t>(s.zone_rows * s.zone_cols));
  for (int r = 0; r < s.rows; ++r) {
    for (int c = 0; c < s.cols; ++c) {
      doc["nodes"].push_back({{"id", grid_node(r, c)}});
      struct Step {
        char d;
        int dr, dc;
      };
      for (auto const [d, dr, dc] : {Step{'E', 0, 1}, Step{'N', -1, 0}, Step{'S', 1, 0},
                                     Step{'W', 0, -1}}) {
        auto const r2 = r + dr, c2 = c + dc;
        if (r2 < 0 || r2 >= s.rows || c2 < 0 || c2 >= s.cols) continue;
        auto const id = grid_edge(r, c, d);
        doc["edges"].push_back({{"id", id},
                                {"from", grid_node(r, c)},
                                {"to", grid_node(r2, c2)},
                                {"length_m", s.block_m},
                                {"free_speed_mps", s.speed_mps},
                                {"lanes", s.lanes}});
        auto const [zr, zc] = zone_of_node(s, r, c);
        zone_edges[static_cast<std::size_t>(zr * s.zone_cols + zc)].push_back(id);
      }
    }
  }
  doc["zones"] = nlohmann::json::array();
  for (int zr = 0; zr < s.zone_rows; ++zr) {
    for (int zc = 0; zc < s.zone_cols; ++zc) {
      doc["zones"].push_back(
          {{"id", grid_zone(zr, zc)},
           {"edges", zone_edges[static_cast<std::size_t>(zr * s.zone_cols + zc)]}});
    }
  }
  return doc;
}

inline NetworkGraph make_grid(GridSpec const& s) {
  return parse_network(grid_json(s).dump(), "grid");
}

struct RandomNetworkSpec {
  int nodes{5};
  int edges{10};
  double min_length{50.0};
  double max_length{500.0};
  double min_speed{5.0};
  double max_speed{30.0};
  double capacity_vph{1800.0};
  int zones{1};
};

// Strongly connected random digraph: a directed ring through all nodes plus
// random extra edges. Edges are dealt round-robin into zones.
inline nlohmann::json random_network_json(RandomNetworkSpec const& s, std::uint64_t seed) {
  if (s.nodes < 2 || s.edges < s.nodes || s.zones < 1 || s.zones > s.edges) {
    fail(ErrorCode::kDomain, "random network needs >= 2 nodes, edges >= nodes, 1..edges zones");
  }
  Rng rng{seed};
  nlohmann::json doc;
  doc["nodes"] = nlohmann::json::array();
  for (int i = 0; i < s.nodes; ++i) doc["nodes"].push_back({{"id", "v" + std::to_string(i)}});
  doc["edges"] = nlohmann::json::array();
  std::vector<std::vector<std::string>> zone_edges(static_cast<std::size_t>(s.zones));
  for (int k = 0; k < s.edges; ++k) {
    int from = k, to = (k + 1) % s.nodes;
    if (k >= s.nodes) {
      from = static_cast<int>(rng.below(static_cast<std::uint64_t>(s.nodes)));
      to = static_cast<int>(rng.below(static_cast<std::uint64_t>(s.nodes - 1)));
      if (to >= from) ++to;
    }
    auto const length = s.min_length + (s.max_length - s.min_length) * rng.uniform();
    auto const speed = s.min_speed + (s.max_speed - s.min_speed) * rng.uniform();
    char id[16];
    std::snprintf(id, sizeof(id), "a%03d", k);
    doc["edges"].push_back({{"id", id},
                            {"from", "v" + std::to_string(from)},
                            {"to", "v" + std::to_string(to)},
                            {"length_m", std::round(length * 10.0) / 10.0},
                            {"free_speed_mps", std::round(speed * 10.0) / 10.0},
                            {"lanes", 1},
                            {"capacity_vph", s.capacity_vph}});
    zone_edges[static_cast<std::size_t>(k % s.zones)].push_back(id);
  }
  doc["zones"] = nlohmann::json::array();
  for (int z = 0; z < s.zones; ++z) {
    doc["zones"].push_back({{"id", "z" + std::to_string(z)},
                            {"edges", zone_edges[static_cast<std::size_t>(z)]}});
  }
  return doc;
}

inline NetworkGraph random_network(RandomNetworkSpec const& s, std::uint64_t seed) {
  return parse_network(random_network_json(s, seed).dump(), "random");
}

// --- bus lines on a grid --------------------------------------------------------

// A straight line along grid row `index` (horizontal) or column `index`,
// spanning nodes from..to, served in both directions. Stops sit on every
// `stop_every`-th edge and on the last edge; `runs` counts both directions.
struct LineSpec {
  std::string route_id;
  std::string short_name;
  bool horizontal{true};
  int index{0};
  int from{0};
  int to{1};
  int stop_every{2};
  int runs{2};
};

struct LineStop {
  std::string stop_id;
  std::string edge_id;
  int edges_from_start{};  // edges travelled from the start of the line to the stop
};

inline std::vector<LineStop> line_stops(LineSpec const& l, int direction) {
  auto const n = l.to - l.from;
  std::vector<int> positions;
  for (int i = 0; i < n; i += l.stop_every) positions.push_back(i);
  if (positions.back() != n - 1) positions.push_back(n - 1);
  std::vector<LineStop> out;
  for (std::size_t k = 0; k < positions.size(); ++k) {
    auto const i = positions[k];
    // edge i in travel direction
    int a = direction == 0 ? l.from + i : l.to - i;
    char d = 0;
    if (l.horizontal) d = direction == 0 ? 'E' : 'W';
    else d = direction == 0 ? 'S' : 'N';
    auto const edge = l.horizontal ? grid_edge(l.index, a, d) : grid_edge(a, l.index, d);
    char sid[64];
    std::snprintf(sid, sizeof(sid), "%s_%c%02zu", l.route_id.c_str(),
                  direction == 0 ? 'a' : 'b', k);
    out.push_back({sid, edge, i + 1});
  }
  return out;
}

struct FeedSpec {
  GridSpec grid;
  std::vector<LineSpec> lines;
  TimeWindow window{5 * 3600, 21 * 3600};
  double schedule_slack{1.25};   // scheduled edge time / free-flow time
  Seconds stop_allowance{15};    // scheduled dwell per intermediate stop
  std::string service_start{"20230101"};
  std::string service_end{"20241231"};
};

// Writes a GTFS feed to `dir` and returns the stop -> edge mapping.
inline std::map<std::string, std::string> write_line_feed(FeedSpec const& spec,
                                                          fs::path const& dir) {
  fs::create_directories(dir);
  std::map<std::string, std::string> stop_edges;
  csv::Writer stops{dir / "stops.txt"};
  stops.row("stop_id", "stop_name", "stop_lat", "stop_lon");
  csv::Writer routes{dir / "routes.txt"};
  routes.row("route_id", "route_short_name", "route_long_name", "route_type");
  csv::Writer trips{dir / "trips.txt"};
  trips.row("route_id", "service_id", "trip_id", "direction_id");
  csv::Writer times{dir / "stop_times.txt"};
  times.row("trip_id", "arrival_time", "departure_time", "stop_id", "stop_sequence");

  auto const edge_time = spec.grid.block_m / spec.grid.speed_mps * spec.schedule_slack;
  auto const span = static_cast<double>(spec.window.end - spec.window.start);
  for (auto const& l : spec.lines) {
    if (l.to - l.from < 1 || l.runs < 1 || l.stop_every < 1) {
      fail(ErrorCode::kDomain, "line " + l.short_name + " needs an edge, a run and a stop gap");
    }
    routes.row(l.route_id, l.short_name, "Line " + l.short_name, 3);
    for (int dir = 0; dir < 2; ++dir) {
      auto const ls = line_stops(l, dir);
      for (auto const& s : ls) {
        stops.row(s.stop_id, "Stop " + s.stop_id, "0.0", "0.0");
        stop_edges[s.stop_id] = s.edge_id;
      }
      auto const n = dir == 0 ? (l.runs + 1) / 2 : l.runs / 2;
      for (int k = 0; k < n; ++k) {
        char tid[64];
        std::snprintf(tid, sizeof(tid), "%s_%d_%04d", l.route_id.c_str(), dir, k);
        trips.row(l.route_id, "WK", tid, dir);
        // Runs are spread evenly over the window; the two directions are offset.
        auto const offset = dir == 0 ? 0.25 : 0.75;
        auto const first =
            spec.window.start + static_cast<Seconds>(std::floor(span * (k + offset) / n));
        for (std::size_t j = 0; j < ls.size(); ++j) {
          auto const travel = static_cast<Seconds>(
              std::lround((ls[j].edges_from_start - ls[0].edges_from_start) * edge_time));
          auto const t = first + travel + static_cast<Seconds>(j) * spec.stop_allowance;
          times.row(tid, format_clock(t), format_clock(t), ls[j].stop_id, j + 1);
        }
      }
    }
  }
  stops.close();
  routes.close();
  trips.close();
  times.close();

  csv::Writer cal{dir / "calendar.txt"};
  cal.row("service_id", "monday", "tuesday", "wednesday", "thursday", "friday", "saturday",
          "sunday", "start_date", "end_date");
  cal.row("WK", 1, 1, 1, 1, 1, 0, 0, spec.service_start, spec.service_end);
  cal.close();
  return stop_edges;
}

// --- OD matrices ----------------------------------------------------------------

// Gravity-style matrix over the grid zones: T_ij = w_i w_j / (1 + d_ij)^gamma
// with zone weights drawn from [0.5, 1.5) and d_ij the block distance between
// zone centres. Only pairs accepted by `keep` are non-zero.
template <class Keep>
ODMatrix gravity_od(GridSpec const& g, std::uint64_t seed, double gamma, Keep keep) {
  Rng rng{seed};
  ODMatrix od;
  std::vector<double> w;
  std::vector<std::pair<double, double>> centre;
  for (int zr = 0; zr < g.zone_rows; ++zr) {
    for (int zc = 0; zc < g.zone_cols; ++zc) {
      od.zones.push_back(grid_zone(zr, zc));
      w.push_back(0.5 + rng.uniform());
      centre.emplace_back((zr + 0.5) * g.rows / g.zone_rows, (zc + 0.5) * g.cols / g.zone_cols);
    }
  }
  auto const n = od.zones.size();
  od.trips.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!keep(i, j)) continue;
      auto const d = std::abs(centre[i].first - centre[j].first) +
                     std::abs(centre[i].second - centre[j].second);
      od.at(i, j) = w[i] * w[j] / std::pow(1.0 + d, gamma);
    }
  }
  return od;
}

inline ODMatrix gravity_od(GridSpec const& g, std::uint64_t seed, double gamma = 1.0) {
  return gravity_od(g, seed, gamma, [](std::size_t, std::size_t) { return true; });
}

// Zone indices (row-major) that a line passes through.
inline std::vector<bool> zones_on_line(GridSpec const& g, LineSpec const& l) {
  std::vector<bool> on(static_cast<std::size_t>(g.zone_rows * g.zone_cols), false);
  for (int a = l.from; a <= l.to; ++a) {
    auto const [zr, zc] = l.horizontal ? zone_of_node(g, l.index, a) : zone_of_node(g, a, l.index);
    on[static_cast<std::size_t>(zr * g.zone_cols + zc)] = true;
  }
  return on;
}

// --- scenario bundles -----------------------------------------------------------

// A self-contained run-pipeline input directory: grid network, line feed,
// stop mapping, car and passenger OD matrices and config.json. Passenger
// demand only links distinct zones that share a line.
struct BundleSpec {
  std::string name;
  FeedSpec feed;
  std::string profile{"mixed_use"};
  std::string service_date{"20231108"};  // a Wednesday
  double p0{};
  double c0{};
  double gamma{1.0};
  std::uint64_t seed{1};
  std::optional<double> capacity_vph;  // overrides the per-lane default
};

inline void write_bundle(BundleSpec const& b, fs::path const& dir) {
  fs::create_directories(dir);
  auto net = grid_json(b.feed.grid);
  if (b.capacity_vph) {
    for (auto& e : net["edges"]) e["capacity_vph"] = *b.capacity_vph;
  }
  {
    std::ofstream out{dir / "network.json", std::ios::binary | std::ios::trunc};
    out << net.dump(1) << '\n';
  }
  write_stop_edges_csv(write_line_feed(b.feed, dir / "gtfs"), dir / "stop_edges.csv");

  auto const& g = b.feed.grid;
  write_od_csv(calibrate_total(gravity_od(g, Rng::derive(b.seed, 1), b.gamma), b.c0),
               dir / "od_car.csv");
  std::vector<std::vector<bool>> on;
  for (auto const& l : b.feed.lines) on.push_back(zones_on_line(g, l));
  auto const shared = [&](std::size_t i, std::size_t j) {
    if (i == j) return false;
    for (auto const& z : on) {
      if (z[i] && z[j]) return true;
    }
    return false;
  };
  write_od_csv(calibrate_total(gravity_od(g, Rng::derive(b.seed, 2), b.gamma, shared), b.p0),
               dir / "od_passenger.csv");

  std::vector<std::string> routes;
  for (auto const& l : b.feed.lines) routes.push_back(l.short_name);
  nlohmann::json const config{
      {"name", b.name},
      {"inputs",
       {{"gtfs", "gtfs"},
        {"network", "network.json"},
        {"stop_edges", "stop_edges.csv"},
        {"car_od", "od_car.csv"},
        {"passenger_od", "od_passenger.csv"},
        {"profile", b.profile}}},
      {"service_date", b.service_date},
      {"window", {{"start", format_clock(b.feed.window.start)}, {"end", format_clock(b.feed.window.end)}}},
      {"routes", routes},
      {"baseline", {{"P0", b.p0}, {"C0", b.c0}}},
      {"fleet", {{"bus_capacity", 35}, {"car_occupancy", 1.5}, {"max_load", 1.0}}},
      {"scenarios",
       {{{"multiplier", 2}}, {{"target_utilization", 0.5}}, {{"target_utilization", 0.7}}}},
      {"seed", b.seed},
  };
  std::ofstream out{dir / "config.json", std::ios::binary | std::ios::trunc};
  out << config.dump(2) << '\n';
}

// Two calibrated desk-scale bundles. "mixeduse-grid" carries the mixed-use
// baseline (P0 6585, B0 1035, C0 35335) on a 23 x 23 grid with five lines;
// "residential-grid" the residential one (P0 982, B0 173, C0 7239) on a
// 12 x 12 grid with three lines.
inline BundleSpec mixeduse_bundle() {
  BundleSpec b;
  b.name = "mixeduse-grid";
  b.feed.grid = {23, 23, 200.0, 13.9, 1, 5, 5};
  b.feed.lines = {{"R5", "5", true, 3, 0, 22, 2, 207},    {"R16", "16", false, 4, 0, 22, 2, 207},
                  {"R19", "19", true, 11, 0, 22, 2, 207}, {"R35", "35", false, 15, 0, 22, 2, 207},
                  {"R41X", "41x", true, 19, 0, 22, 3, 207}};
  b.profile = "mixed_use";
  b.p0 = 6585;
  b.c0 = 35335;
  b.seed = 20231108;
  return b;
}

inline BundleSpec residential_bundle() {
  BundleSpec b;
  b.name = "residential-grid";
  b.feed.grid = {12, 12, 200.0, 13.9, 1, 4, 4};
  b.feed.lines = {{"R10A", "10A", true, 3, 0, 11, 2, 58},
                  {"R10C", "10C", false, 5, 0, 11, 2, 58},
                  {"R10G", "10G", true, 8, 0, 11, 2, 57}};
  b.profile = "residential_bimodal";
  b.p0 = 982;
  b.c0 = 7239;
  b.seed = 20231108;
  return b;
}

}  // namespace modeshift::synth
