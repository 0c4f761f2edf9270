#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <vector>

#include "modeshift/meso_sim.hpp"

namespace modeshift::oracle {

struct ReplayVehicle {
  Seconds depart{};
  std::vector<EdgeIndex> path;
};

struct ReplayResult {
  // per vehicle, per path position: (enter, exit)
  std::vector<std::vector<std::pair<Seconds, Seconds>>> traversals;
  std::vector<std::optional<Seconds>> arrival;
};

// Second-by-second replay of car traffic. Every edge holds an explicit FIFO
// queue; a vehicle may leave once its BPR timer has run out and every vehicle
// that entered before it has left. Vehicles moving in the same second enter
// their next edges in ascending vehicle order. The BPR volume is recounted
// each time from the full entry log of the edge.
inline ReplayResult replay_cars(NetworkGraph const& graph,
                                std::vector<ReplayVehicle> const& vehicles,
                                SimParams const& params) {
  struct OnEdge {
    std::size_t vehicle;
    Seconds due;
  };
  std::vector<std::deque<OnEdge>> queues(graph.edges().size());
  std::vector<std::vector<Seconds>> entry_log(graph.edges().size());
  std::vector<std::size_t> position(vehicles.size(), 0);
  ReplayResult out;
  out.traversals.resize(vehicles.size());
  out.arrival.resize(vehicles.size());

  auto const enter = [&](std::size_t v, EdgeIndex e, Seconds t) {
    auto const& log = entry_log[e];
    auto const n = std::count_if(log.begin(), log.end(), [&](Seconds s) {
      return s > t - params.flow_window && s <= t;
    });
    auto const volume = static_cast<double>(n) * 3600.0 / static_cast<double>(params.flow_window);
    auto const ff = graph.edge(e).length / graph.edge(e).free_speed;
    auto const tau = ff * (1.0 + params.bpr_alpha *
                                     std::pow(volume / graph.edge(e).capacity, params.bpr_beta));
    entry_log[e].push_back(t);
    queues[e].push_back({v, t + static_cast<Seconds>(std::ceil(tau - 1e-9))});
    out.traversals[v].push_back({t, -1});
  };

  for (Seconds t = 0; t < params.horizon_end(); ++t) {
    std::vector<std::size_t> moving;
    for (std::size_t v = 0; v < vehicles.size(); ++v) {
      if (vehicles[v].depart == t && params.admit.contains(t)) moving.push_back(v);
    }
    for (auto& q : queues) {
      while (!q.empty() && q.front().due <= t) {
        auto const v = q.front().vehicle;
        out.traversals[v].back().second = t;
        ++position[v];
        moving.push_back(v);
        q.pop_front();
      }
    }
    std::sort(moving.begin(), moving.end());
    for (auto const v : moving) {
      auto const& path = vehicles[v].path;
      if (position[v] >= path.size()) {
        out.arrival[v] = t;
      } else {
        enter(v, path[position[v]], t);
      }
    }
  }
  return out;
}

}  // namespace modeshift::oracle
