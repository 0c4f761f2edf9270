#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "modeshift/csv.hpp"
#include "modeshift/error.hpp"

namespace modeshift {

using EdgeIndex = std::uint32_t;
using NodeIndex = std::uint32_t;

inline constexpr double kDefaultLaneCapacityVph = 1800.0;

struct Edge {
  std::string edge_id;
  std::string from_node;
  std::string to_node;
  double length{};      // m
  double free_speed{};  // m/s
  int lanes{1};
  double capacity{};    // veh/h

  double free_flow_time() const { return length / free_speed; }
};

struct Zone {
  std::string zone_id;
  std::vector<std::string> edge_ids;
};

// Directed road graph with TAZ zones. Immutable after construction; all
// index-based accessors refer to the input order, while anything that must
// not depend on input order (routing tie-breaks) goes through id_rank().
class NetworkGraph {
 public:
  NetworkGraph() = default;

  static NetworkGraph build(std::vector<std::string> nodes,
                            std::vector<Edge> edges, std::vector<Zone> zones) {
    NetworkGraph g;
    g.nodes_ = std::move(nodes);
    g.edges_ = std::move(edges);
    g.zones_ = std::move(zones);

    for (NodeIndex i = 0; i < g.nodes_.size(); ++i) {
      if (!g.node_index_.emplace(g.nodes_[i], i).second) {
        fail(ErrorCode::kFormat, "duplicate node id " + g.nodes_[i]);
      }
    }
    g.out_by_node_.resize(g.nodes_.size());
    g.in_by_node_.resize(g.nodes_.size());
    g.from_.resize(g.edges_.size());
    g.to_.resize(g.edges_.size());
    g.travel_time_.resize(g.edges_.size());
    for (EdgeIndex e = 0; e < g.edges_.size(); ++e) {
      auto const& edge = g.edges_[e];
      if (!g.edge_index_.emplace(edge.edge_id, e).second) {
        fail(ErrorCode::kFormat, "duplicate edge id " + edge.edge_id);
      }
      auto const f = g.node_index_.find(edge.from_node);
      auto const t = g.node_index_.find(edge.to_node);
      if (f == g.node_index_.end()) {
        fail(ErrorCode::kReferentialIntegrity,
             "edge " + edge.edge_id + " references unknown node " + edge.from_node);
      }
      if (t == g.node_index_.end()) {
        fail(ErrorCode::kReferentialIntegrity,
             "edge " + edge.edge_id + " references unknown node " + edge.to_node);
      }
      if (!(edge.length > 0) || !(edge.free_speed > 0) || !(edge.capacity > 0) ||
          edge.lanes <= 0) {
        fail(ErrorCode::kDomain,
             "edge " + edge.edge_id +
                 " must have positive length, free speed, lanes and capacity");
      }
      g.from_[e] = f->second;
      g.to_[e] = t->second;
      g.travel_time_[e] = edge.free_flow_time();
      g.out_by_node_[f->second].push_back(e);
      g.in_by_node_[t->second].push_back(e);
    }

    std::vector<EdgeIndex> order(g.edges_.size());
    std::iota(order.begin(), order.end(), EdgeIndex{0});
    std::sort(order.begin(), order.end(), [&](EdgeIndex a, EdgeIndex b) {
      return g.edges_[a].edge_id < g.edges_[b].edge_id;
    });
    g.rank_.resize(g.edges_.size());
    for (EdgeIndex r = 0; r < order.size(); ++r) g.rank_[order[r]] = r;
    for (auto& v : g.out_by_node_) {
      std::sort(v.begin(), v.end(),
                [&](EdgeIndex a, EdgeIndex b) { return g.rank_[a] < g.rank_[b]; });
    }

    g.zone_edges_.resize(g.zones_.size());
    for (std::size_t z = 0; z < g.zones_.size(); ++z) {
      auto const& zone = g.zones_[z];
      if (!g.zone_index_.emplace(zone.zone_id, z).second) {
        fail(ErrorCode::kFormat, "duplicate zone id " + zone.zone_id);
      }
      for (auto const& id : zone.edge_ids) {
        auto const it = g.edge_index_.find(id);
        if (it == g.edge_index_.end()) {
          fail(ErrorCode::kReferentialIntegrity,
               "zone " + zone.zone_id + " references missing edge " + id);
        }
        g.zone_edges_[z].push_back(it->second);
      }
    }
    return g;
  }

  std::vector<std::string> const& nodes() const { return nodes_; }
  std::vector<Edge> const& edges() const { return edges_; }
  std::vector<Zone> const& zones() const { return zones_; }
  Edge const& edge(EdgeIndex e) const { return edges_[e]; }

  std::optional<EdgeIndex> edge_index(std::string_view id) const {
    auto const it = edge_index_.find(std::string{id});
    if (it == edge_index_.end()) return std::nullopt;
    return it->second;
  }

  EdgeIndex require_edge(std::string_view id) const {
    auto const e = edge_index(id);
    if (!e) {
      fail(ErrorCode::kReferentialIntegrity, "unknown edge " + std::string{id});
    }
    return *e;
  }

  std::optional<std::size_t> zone_index(std::string_view id) const {
    auto const it = zone_index_.find(std::string{id});
    if (it == zone_index_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<EdgeIndex> const& zone_edges(std::size_t z) const {
    return zone_edges_[z];
  }

  // Edges leaving the head node of `e`, ordered by edge-id rank.
  std::vector<EdgeIndex> const& successors(EdgeIndex e) const {
    return out_by_node_[to_[e]];
  }
  // Edges arriving at the tail node of `e`.
  std::vector<EdgeIndex> const& predecessors(EdgeIndex e) const {
    return in_by_node_[from_[e]];
  }

  double travel_time(EdgeIndex e) const { return travel_time_[e]; }
  EdgeIndex id_rank(EdgeIndex e) const { return rank_[e]; }

 private:
  std::vector<std::string> nodes_;
  std::vector<Edge> edges_;
  std::vector<Zone> zones_;
  std::unordered_map<std::string, NodeIndex> node_index_;
  std::unordered_map<std::string, EdgeIndex> edge_index_;
  std::unordered_map<std::string, std::size_t> zone_index_;
  std::vector<NodeIndex> from_;
  std::vector<NodeIndex> to_;
  std::vector<double> travel_time_;
  std::vector<EdgeIndex> rank_;
  std::vector<std::vector<EdgeIndex>> out_by_node_;
  std::vector<std::vector<EdgeIndex>> in_by_node_;
  std::vector<std::vector<EdgeIndex>> zone_edges_;
};

namespace detail {

inline std::size_t line_of(std::string const& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(
                 std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
}

template <typename T>
T field(nlohmann::json const& obj, char const* key, std::string const& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    fail(ErrorCode::kFormat, where + "." + key + ": missing field");
  }
  auto const& v = obj.at(key);
  if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) fail(ErrorCode::kFormat, where + "." + key + ": expected string");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) {
      fail(ErrorCode::kFormat, where + "." + key + ": expected integer");
    }
  } else {
    if (!v.is_number()) fail(ErrorCode::kFormat, where + "." + key + ": expected number");
  }
  return v.get<T>();
}

inline nlohmann::json const& array_field(nlohmann::json const& doc, char const* key) {
  if (!doc.contains(key) || !doc.at(key).is_array()) {
    fail(ErrorCode::kFormat, std::string{key} + ": missing top-level array");
  }
  return doc.at(key);
}

}  // namespace detail

// Parses the network interchange document. `source` names the input in
// error messages.
inline NetworkGraph parse_network(std::string const& text,
                                  std::string const& source = "network") {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (nlohmann::json::parse_error const& e) {
    fail(ErrorCode::kFormat, source + " line " +
                                 std::to_string(detail::line_of(text, e.byte)) +
                                 ": " + e.what());
  }
  if (!doc.is_object()) {
    fail(ErrorCode::kFormat, source + ": top level must be an object");
  }

  std::vector<std::string> nodes;
  for (std::size_t i = 0; auto const& n : detail::array_field(doc, "nodes")) {
    nodes.push_back(
        detail::field<std::string>(n, "id", "nodes[" + std::to_string(i++) + "]"));
  }

  std::vector<Edge> edges;
  for (std::size_t i = 0; auto const& e : detail::array_field(doc, "edges")) {
    auto const where = "edges[" + std::to_string(i++) + "]";
    Edge edge;
    edge.edge_id = detail::field<std::string>(e, "id", where);
    edge.from_node = detail::field<std::string>(e, "from", where);
    edge.to_node = detail::field<std::string>(e, "to", where);
    edge.length = detail::field<double>(e, "length_m", where);
    edge.free_speed = detail::field<double>(e, "free_speed_mps", where);
    edge.lanes = detail::field<int>(e, "lanes", where);
    if (e.contains("capacity_vph") && !e.at("capacity_vph").is_null()) {
      edge.capacity = detail::field<double>(e, "capacity_vph", where);
    } else {
      edge.capacity = kDefaultLaneCapacityVph * edge.lanes;
    }
    if (!(edge.length > 0) || !(edge.free_speed > 0) || !(edge.capacity > 0) ||
        edge.lanes <= 0) {
      fail(ErrorCode::kDomain,
           where + " (" + edge.edge_id +
               "): length_m, free_speed_mps, lanes and capacity_vph must be positive");
    }
    edges.push_back(std::move(edge));
  }

  std::vector<Zone> zones;
  for (std::size_t i = 0; auto const& z : detail::array_field(doc, "zones")) {
    auto const where = "zones[" + std::to_string(i++) + "]";
    Zone zone;
    zone.zone_id = detail::field<std::string>(z, "id", where);
    if (!z.contains("edges") || !z.at("edges").is_array()) {
      fail(ErrorCode::kFormat, where + ".edges: missing array");
    }
    for (auto const& id : z.at("edges")) {
      if (!id.is_string()) fail(ErrorCode::kFormat, where + ".edges: expected strings");
      zone.edge_ids.push_back(id.get<std::string>());
    }
    if (zone.edge_ids.empty()) {
      fail(ErrorCode::kFormat, where + " (" + zone.zone_id + "): empty edge set");
    }
    zones.push_back(std::move(zone));
  }
  return NetworkGraph::build(std::move(nodes), std::move(edges), std::move(zones));
}

inline NetworkGraph load_network(std::filesystem::path const& file) {
  return parse_network(csv::read_file(file), file.filename().string());
}

inline nlohmann::json network_to_json(NetworkGraph const& g) {
  nlohmann::json doc;
  doc["nodes"] = nlohmann::json::array();
  for (auto const& n : g.nodes()) doc["nodes"].push_back({{"id", n}});
  doc["edges"] = nlohmann::json::array();
  for (auto const& e : g.edges()) {
    doc["edges"].push_back({{"id", e.edge_id},
                            {"from", e.from_node},
                            {"to", e.to_node},
                            {"length_m", e.length},
                            {"free_speed_mps", e.free_speed},
                            {"lanes", e.lanes},
                            {"capacity_vph", e.capacity}});
  }
  doc["zones"] = nlohmann::json::array();
  for (auto const& z : g.zones()) {
    doc["zones"].push_back({{"id", z.zone_id}, {"edges", z.edge_ids}});
  }
  return doc;
}

// Free-flow shortest paths over the edge graph. A path starts on the origin
// edge and ends on the destination edge; its cost is the free-flow time of
// every edge after the origin, so the identity path costs zero.
//
// One reverse Dijkstra tree is kept per destination, computed on first use.
// Trees are immutable once built, so a Router may be shared across threads.
class Router {
 public:
  explicit Router(NetworkGraph const& graph)
      : graph_{&graph},
        trees_(graph.edges().size()),
        once_{std::make_unique<std::once_flag[]>(graph.edges().size())} {}

  NetworkGraph const& graph() const { return *graph_; }

  // cost_to(d)[e]: cheapest cost from the end of e to the end of d.
  std::vector<double> const& cost_to(EdgeIndex dest) const {
    std::call_once(once_[dest], [&] { trees_[dest] = build_tree(dest); });
    return trees_[dest];
  }

  double cost(EdgeIndex origin, EdgeIndex dest) const {
    return cost_to(dest)[origin];
  }

  // Among all cheapest paths, returns the lexicographically smallest
  // edge-id sequence.
  std::vector<EdgeIndex> path(EdgeIndex origin, EdgeIndex dest) const {
    auto const& dist = cost_to(dest);
    if (!std::isfinite(dist[origin])) {
      fail(ErrorCode::kNoPath, "no path from " + graph_->edge(origin).edge_id +
                                   " to " + graph_->edge(dest).edge_id);
    }
    std::vector<EdgeIndex> out{origin};
    auto cur = origin;
    while (cur != dest) {
      auto const target = dist[cur];
      auto const tol = 1e-9 * std::max(1.0, target);
      std::optional<EdgeIndex> next;
      for (auto const f : graph_->successors(cur)) {
        if (std::isfinite(dist[f]) &&
            std::abs(graph_->travel_time(f) + dist[f] - target) <= tol) {
          next = f;  // successors are rank-ordered; first match is smallest id
          break;
        }
      }
      cur = *next;
      out.push_back(cur);
    }
    return out;
  }

 private:
  std::vector<double> build_tree(EdgeIndex dest) const {
    auto const n = graph_->edges().size();
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    using Item = std::pair<double, EdgeIndex>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[dest] = 0.0;
    pq.emplace(0.0, dest);
    while (!pq.empty()) {
      auto const [d, f] = pq.top();
      pq.pop();
      if (d > dist[f]) continue;
      auto const through = d + graph_->travel_time(f);
      for (auto const e : graph_->predecessors(f)) {
        if (through < dist[e]) {
          dist[e] = through;
          pq.emplace(through, e);
        }
      }
    }
    return dist;
  }

  NetworkGraph const* graph_;
  mutable std::vector<std::vector<double>> trees_;
  std::unique_ptr<std::once_flag[]> once_;
};

inline double path_cost(NetworkGraph const& g, std::vector<EdgeIndex> const& path) {
  double c = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) c += g.travel_time(path[i]);
  return c;
}

inline std::vector<std::string> shortest_path(NetworkGraph const& graph,
                                              std::string_view origin_edge,
                                              std::string_view dest_edge) {
  auto const o = graph.require_edge(origin_edge);
  auto const d = graph.require_edge(dest_edge);
  Router router{graph};
  std::vector<std::string> out;
  for (auto const e : router.path(o, d)) out.push_back(graph.edge(e).edge_id);
  return out;
}

}  // namespace modeshift
