#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "modeshift/clock.hpp"
#include "modeshift/csv.hpp"
#include "modeshift/demand.hpp"
#include "modeshift/error.hpp"
#include "modeshift/gtfs.hpp"
#include "modeshift/mode_shift.hpp"
#include "modeshift/network.hpp"
#include "modeshift/rng.hpp"

namespace modeshift {

enum class VehicleClass : std::uint8_t { kCar, kBus };

constexpr std::string_view to_string(VehicleClass c) {
  return c == VehicleClass::kCar ? "car" : "bus";
}

struct SimParams {
  TimeWindow admit{5 * 3600, 21 * 3600};  // departures admitted
  Seconds cooldown{2 * 3600};             // en-route vehicles may finish
  double bpr_alpha{0.15};
  double bpr_beta{4.0};
  Seconds flow_window{900};
  double dwell_min{10.0};
  double t_board{2.0};
  double t_alight{1.5};
  int bus_capacity{35};

  Seconds horizon_end() const { return admit.end + cooldown; }
};

// BPR link performance: free-flow time inflated by (V/C)^beta, V in veh/h.
inline double bpr_time(double free_flow_time, double volume_vph, double capacity_vph,
                       double alpha, double beta) {
  return free_flow_time * (1.0 + alpha * std::pow(volume_vph / capacity_vph, beta));
}

struct VehicleRecord {
  std::string id;
  VehicleClass cls{VehicleClass::kCar};
  Seconds depart{};
  std::optional<Seconds> arrive;
};

struct TrajectorySegment {
  std::uint32_t vehicle{};  // index into SimOutput::vehicles
  EdgeIndex edge{};
  Seconds enter{};
  Seconds exit{};
  double mean_speed{};
};

struct StopVisit {
  std::string stop_id;
  Seconds scheduled_arrival{};
  Seconds scheduled_departure{};
  Seconds actual_arrival{};
  Seconds actual_departure{};
  int boardings{};
  int alightings{};
  double load_factor{};  // on departure
};

struct PassengerWait {
  std::string trip_id;
  std::string stop_id;
  Seconds arrive{};
  Seconds board{};
  Seconds wait() const { return board - arrive; }
};

struct BusKpi {
  std::string run_id;
  std::string route;
  std::vector<StopVisit> stops;
  std::vector<PassengerWait> waits;
};

struct ModeCounts {
  std::size_t not_admitted{};  // departure outside the admission window
  std::size_t departed{};
  std::size_t arrived{};
  std::size_t unfinished{};
  std::size_t unserved{};      // passengers: no usable stop pair or stranded

  friend bool operator==(ModeCounts const&, ModeCounts const&) = default;
};

struct SimOutput {
  std::vector<VehicleRecord> vehicles;
  std::vector<TrajectorySegment> segments;
  std::vector<BusKpi> bus_kpis;
  ModeCounts cars;
  ModeCounts buses;
  ModeCounts passengers;

  std::size_t unfinished() const {
    return cars.unfinished + buses.unfinished + passengers.unfinished;
  }
};

using StopToEdge = std::map<std::string, std::string>;

inline StopToEdge read_stop_edges_csv(std::filesystem::path const& path) {
  auto const t = csv::Table::load(path);
  auto const c_stop = t.require("stop_id");
  auto const c_edge = t.require("edge_id");
  StopToEdge out;
  for (std::size_t r = 0; r < t.size(); ++r) {
    out[std::string{csv::trim(t.cell(r, c_stop))}] =
        std::string{csv::trim(t.cell(r, c_edge))};
  }
  return out;
}

inline void write_stop_edges_csv(StopToEdge const& m, std::filesystem::path const& path) {
  csv::Writer w{path};
  w.row("stop_id", "edge_id");
  for (auto const& [s, e] : m) w.row(s, e);
  w.close();
}

namespace detail {

// Board/alight choice for one passenger. Walking is not modelled; the pair
// minimizing free-flow drive time from the trip origin to the boarding stop
// plus from the alighting stop to the destination is taken.
struct StopPair {
  std::uint32_t board{};
  std::uint32_t alight{};
  std::vector<std::uint32_t> routes;  // route indices serving board before alight
};

struct Pattern {
  std::uint32_t route{};
  std::vector<std::uint32_t> stops;
};

class PassengerAssigner {
 public:
  PassengerAssigner(Router const& router, std::vector<std::string> const& stop_ids,
                    std::vector<EdgeIndex> const& stop_edge,
                    std::vector<Pattern> patterns)
      : router_{router}, stop_ids_{stop_ids}, stop_edge_{stop_edge},
        patterns_{std::move(patterns)} {}

  std::optional<StopPair> const& assign(EdgeIndex origin, EdgeIndex dest) {
    auto const key = (std::uint64_t{origin} << 32) | dest;
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, compute(origin, dest)).first;
    return it->second;
  }

 private:
  std::optional<StopPair> compute(EdgeIndex origin, EdgeIndex dest) const {
    auto const inf = std::numeric_limits<double>::infinity();
    auto const& to_dest = router_.cost_to(dest);
    double best = inf;
    std::uint32_t best_b = 0, best_a = 0;
    auto const better = [&](double c, std::uint32_t b, std::uint32_t a) {
      if (c != best) return c < best;
      if (stop_ids_[b] != stop_ids_[best_b]) return stop_ids_[b] < stop_ids_[best_b];
      return stop_ids_[a] < stop_ids_[best_a];
    };
    for (auto const& p : patterns_) {
      double best_access = inf;
      std::uint32_t access_stop = 0;
      for (auto const s : p.stops) {
        auto const egress = to_dest[stop_edge_[s]];
        if (std::isfinite(best_access) && std::isfinite(egress) && s != access_stop) {
          auto const c = best_access + egress;
          if (better(c, access_stop, s)) {
            best = c;
            best_b = access_stop;
            best_a = s;
          }
        }
        auto const access = router_.cost(origin, stop_edge_[s]);
        if (access < best_access ||
            (access == best_access && stop_ids_[s] < stop_ids_[access_stop])) {
          best_access = access;
          access_stop = s;
        }
      }
    }
    if (!std::isfinite(best)) return std::nullopt;
    StopPair out{best_b, best_a, {}};
    for (auto const& p : patterns_) {
      auto const b = std::find(p.stops.begin(), p.stops.end(), best_b);
      if (b != p.stops.end() && std::find(b + 1, p.stops.end(), best_a) != p.stops.end()) {
        out.routes.push_back(p.route);
      }
    }
    std::sort(out.routes.begin(), out.routes.end());
    out.routes.erase(std::unique(out.routes.begin(), out.routes.end()), out.routes.end());
    return out;
  }

  Router const& router_;
  std::vector<std::string> const& stop_ids_;
  std::vector<EdgeIndex> const& stop_edge_;
  std::vector<Pattern> patterns_;
  std::unordered_map<std::uint64_t, std::optional<StopPair>> cache_;
};

}  // namespace detail

// Deterministic mesoscopic day simulation on a 1 s clock.
//
// Each edge is a point queue: a vehicle entering at t leaves at
//   max(t + ceil(bpr_time(tff, 4 * n, C)), previous exit on the edge)
// where n counts earlier entries to the edge in (t - 900, t]. Events are
// ordered by (time, kind, vehicle id); passenger arrivals precede vehicle
// moves at equal times. The queue model draws no random numbers; `seed` is
// accepted so callers can thread one seed through the whole pipeline.
inline SimOutput run_day(Router const& router, TripTable const& trips,
                         gtfs::TransitSchedule const& schedule,
                         StopToEdge const& stop_to_edge, SimParams const& params,
                         std::uint64_t seed = 0) {
  (void)seed;
  auto const& graph = router.graph();
  auto const horizon_end = params.horizon_end();
  if (params.bus_capacity <= 0) fail(ErrorCode::kConfiguration, "bus capacity must be positive");

  SimOutput out;

  // --- stops and runs ------------------------------------------------------
  std::vector<std::string> stop_ids;
  std::unordered_map<std::string, std::uint32_t> stop_index;
  std::vector<EdgeIndex> stop_edge;
  auto const stop_of = [&](std::string const& id) -> std::uint32_t {
    if (auto const it = stop_index.find(id); it != stop_index.end()) return it->second;
    auto const m = stop_to_edge.find(id);
    if (m == stop_to_edge.end()) {
      fail(ErrorCode::kConfiguration, "stop " + id + " is not mapped to an edge");
    }
    auto const e = graph.edge_index(m->second);
    if (!e) {
      fail(ErrorCode::kReferentialIntegrity,
           "stop " + id + " maps to unknown edge " + m->second);
    }
    auto const idx = static_cast<std::uint32_t>(stop_ids.size());
    stop_ids.push_back(id);
    stop_edge.push_back(*e);
    stop_index.emplace(id, idx);
    return idx;
  };

  std::vector<std::string> route_names;
  std::unordered_map<std::string, std::uint32_t> route_index;
  for (auto const& r : schedule.routes) {
    route_index.emplace(r.route_id, static_cast<std::uint32_t>(route_names.size()));
    route_names.push_back(r.short_name);
  }

  struct Run {
    gtfs::BusRunTemplate const* tmpl;
    std::uint32_t route;
    std::vector<std::uint32_t> stops;
    std::vector<std::size_t> stop_path_pos;  // path index after which stop k is served
    std::vector<EdgeIndex> path;
  };
  std::vector<Run> runs;
  std::map<std::pair<std::uint32_t, std::vector<std::uint32_t>>, bool> pattern_set;
  for (auto const& tmpl : schedule.runs) {
    if (!params.admit.contains(tmpl.first_departure())) {
      ++out.buses.not_admitted;
      continue;
    }
    Run run{&tmpl, route_index.at(tmpl.route_id), {}, {}, {}};
    for (auto const& ev : tmpl.stop_events) run.stops.push_back(stop_of(ev.stop_id));
    run.path.push_back(stop_edge[run.stops.front()]);
    run.stop_path_pos.push_back(0);
    for (std::size_t k = 1; k < run.stops.size(); ++k) {
      auto const leg = router.path(stop_edge[run.stops[k - 1]], stop_edge[run.stops[k]]);
      run.path.insert(run.path.end(), leg.begin() + 1, leg.end());
      run.stop_path_pos.push_back(run.path.size() - 1);
    }
    pattern_set.emplace(std::pair{run.route, run.stops}, true);
    runs.push_back(std::move(run));
  }

  // --- vehicles --------------------------------------------------------------
  struct Vehicle {
    std::string id;
    VehicleClass cls;
    Seconds depart;
    std::vector<EdgeIndex> path;
    std::size_t run = 0;        // buses
  };
  std::vector<Vehicle> pending;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    auto const& tmpl = *runs[r].tmpl;
    pending.push_back(Vehicle{tmpl.trip_id, VehicleClass::kBus,
                              tmpl.stop_events.front().arrival, {}, r});
  }
  std::vector<std::size_t> passenger_trips;
  for (std::size_t i = 0; i < trips.trips.size(); ++i) {
    auto const& t = trips.trips[i];
    auto const o = graph.edge_index(t.origin_edge);
    auto const d = graph.edge_index(t.dest_edge);
    if (!o || !d) {
      fail(ErrorCode::kReferentialIntegrity,
           "trip " + t.trip_id + " uses unknown edge " + (o ? t.dest_edge : t.origin_edge));
    }
    auto& counts = t.mode == TripMode::kCar ? out.cars : out.passengers;
    if (!params.admit.contains(t.depart)) {
      ++counts.not_admitted;
      continue;
    }
    if (t.mode == TripMode::kCar) {
      pending.push_back(Vehicle{t.trip_id, VehicleClass::kCar, t.depart,
                                router.path(*o, *d), 0});
    } else {
      passenger_trips.push_back(i);
    }
  }
  std::sort(pending.begin(), pending.end(),
            [](auto const& a, auto const& b) { return a.id < b.id; });
  for (std::size_t v = 1; v < pending.size(); ++v) {
    if (pending[v].id == pending[v - 1].id) {
      fail(ErrorCode::kConfiguration, "duplicate vehicle id " + pending[v].id);
    }
  }

  // --- event queue -------------------------------------------------------------
  enum Kind : std::uint8_t { kPassengerArrival = 0, kVehicle = 1 };
  struct Event {
    Seconds time;
    std::uint8_t kind;
    std::uint32_t id;
    bool operator>(Event const& o) const {
      if (time != o.time) return time > o.time;
      if (kind != o.kind) return kind > o.kind;
      return id > o.id;
    }
  };
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue;

  enum class Phase : std::uint8_t { kStart, kOnEdge, kReady };
  struct VehicleState {
    Phase phase = Phase::kStart;
    std::size_t pos = 0;       // index of the current edge in the path
    Seconds entered = 0;
    std::size_t next_stop = 0; // buses
    std::vector<std::uint32_t> onboard;
  };
  std::vector<VehicleState> state(pending.size());
  out.vehicles.reserve(pending.size());
  for (std::uint32_t v = 0; v < pending.size(); ++v) {
    out.vehicles.push_back(VehicleRecord{pending[v].id, pending[v].cls, pending[v].depart, {}});
    auto& counts = pending[v].cls == VehicleClass::kCar ? out.cars : out.buses;
    ++counts.departed;
    queue.push(Event{pending[v].depart, kVehicle, v});
  }

  // --- passengers ----------------------------------------------------------------
  std::vector<detail::Pattern> patterns;
  for (auto const& [key, _] : pattern_set) patterns.push_back({key.first, key.second});
  detail::PassengerAssigner assigner{router, stop_ids, stop_edge, std::move(patterns)};

  struct Passenger {
    std::size_t trip;
    std::uint32_t board;
    std::uint32_t alight;
    std::vector<std::uint32_t> routes;
    bool arrived = false;
    bool boarded = false;
    std::size_t alight_pos = 0;  // run stop index
  };
  std::vector<Passenger> passengers;
  std::sort(passenger_trips.begin(), passenger_trips.end(), [&](auto a, auto b) {
    return trips.trips[a].trip_id < trips.trips[b].trip_id;
  });
  for (auto const i : passenger_trips) {
    auto const& t = trips.trips[i];
    ++out.passengers.departed;
    auto const& pair = assigner.assign(graph.require_edge(t.origin_edge),
                                       graph.require_edge(t.dest_edge));
    if (!pair) {
      ++out.passengers.unserved;
      continue;
    }
    auto const idx = static_cast<std::uint32_t>(passengers.size());
    passengers.push_back(Passenger{i, pair->board, pair->alight, pair->routes});
    queue.push(Event{t.depart, kPassengerArrival, idx});
  }
  std::vector<std::vector<std::uint32_t>> waiting(stop_ids.size());

  // --- edges ---------------------------------------------------------------------
  struct EdgeState {
    std::deque<Seconds> recent;  // entry times within the trailing flow window
    Seconds last_exit = std::numeric_limits<Seconds>::min();
  };
  std::vector<EdgeState> edges(graph.edges().size());
  auto const enter_edge = [&](EdgeIndex e, Seconds t) {
    auto& es = edges[e];
    while (!es.recent.empty() && es.recent.front() <= t - params.flow_window) {
      es.recent.pop_front();
    }
    auto const volume = static_cast<double>(es.recent.size()) * 3600.0 /
                        static_cast<double>(params.flow_window);
    es.recent.push_back(t);
    auto const& edge = graph.edge(e);
    auto const tau = bpr_time(graph.travel_time(e), volume, edge.capacity,
                              params.bpr_alpha, params.bpr_beta);
    auto const exit = std::max(t + static_cast<Seconds>(std::ceil(tau - 1e-9)), es.last_exit);
    es.last_exit = exit;
    return exit;
  };

  out.bus_kpis.resize(runs.size());
  for (std::size_t r = 0; r < runs.size(); ++r) {
    out.bus_kpis[r].run_id = runs[r].tmpl->trip_id;
    out.bus_kpis[r].route = route_names[runs[r].route];
  }

  // Serves every stop of bus `v` located at the end of its current edge.
  // Returns the departure time from the last of them.
  auto const serve_stops = [&](std::uint32_t v, Seconds t) {
    auto& st = state[v];
    auto const r = pending[v].run;
    auto const& run = runs[r];
    auto& kpi = out.bus_kpis[r];
    while (st.next_stop < run.stops.size() && run.stop_path_pos[st.next_stop] == st.pos) {
      auto const k = st.next_stop++;
      auto const s = run.stops[k];
      auto const& ev = run.tmpl->stop_events[k];

      int alightings = 0;
      std::erase_if(st.onboard, [&](std::uint32_t p) {
        if (passengers[p].alight_pos != k) return false;
        passengers[p].arrived = true;
        ++out.passengers.arrived;
        ++alightings;
        return true;
      });

      int boardings = 0;
      auto& queue_at_stop = waiting[s];
      std::vector<std::uint32_t> still_waiting;
      for (auto const p : queue_at_stop) {
        auto& pax = passengers[p];
        bool eligible = std::binary_search(pax.routes.begin(), pax.routes.end(), run.route);
        std::size_t alight_pos = 0;
        if (eligible) {
          eligible = false;
          for (auto j = k + 1; j < run.stops.size(); ++j) {
            if (run.stops[j] == pax.alight) {
              alight_pos = j;
              eligible = true;
              break;
            }
          }
        }
        if (eligible && static_cast<int>(st.onboard.size()) < params.bus_capacity) {
          pax.boarded = true;
          pax.alight_pos = alight_pos;
          st.onboard.push_back(p);
          ++boardings;
          auto const& trip = trips.trips[pax.trip];
          kpi.waits.push_back(PassengerWait{trip.trip_id, stop_ids[s], trip.depart, t});
        } else {
          still_waiting.push_back(p);
        }
      }
      queue_at_stop = std::move(still_waiting);

      auto const dwell = std::max(params.dwell_min, params.t_board * boardings +
                                                        params.t_alight * alightings);
      auto const depart =
          std::max(t + static_cast<Seconds>(std::ceil(dwell - 1e-9)), ev.departure);
      kpi.stops.push_back(StopVisit{stop_ids[s], ev.arrival, ev.departure, t, depart,
                                    boardings, alightings,
                                    static_cast<double>(st.onboard.size()) /
                                        params.bus_capacity});
      t = depart;
    }
    return t;
  };

  while (!queue.empty()) {
    auto const ev = queue.top();
    if (ev.time >= horizon_end) break;
    queue.pop();

    if (ev.kind == kPassengerArrival) {
      waiting[passengers[ev.id].board].push_back(ev.id);
      continue;
    }

    auto const v = ev.id;
    auto& st = state[v];
    auto const& veh = pending[v];
    bool const is_bus = veh.cls == VehicleClass::kBus;
    auto const& path = is_bus ? runs[veh.run].path : veh.path;
    auto const t = ev.time;

    std::size_t next = st.pos + 1;
    if (st.phase == Phase::kStart) {
      if (is_bus) {
        // A bus appears at its first stop at the scheduled arrival.
        st.phase = Phase::kReady;
        if (auto const depart = serve_stops(v, t); depart > t) {
          queue.push(Event{depart, kVehicle, v});
          continue;
        }
      } else {
        next = 0;
      }
    } else if (st.phase == Phase::kOnEdge) {
      auto const e = path[st.pos];
      out.segments.push_back(TrajectorySegment{
          v, e, st.entered, t, graph.edge(e).length / static_cast<double>(t - st.entered)});
      st.phase = Phase::kReady;
      if (is_bus) {
        if (auto const depart = serve_stops(v, t); depart > t) {
          queue.push(Event{depart, kVehicle, v});
          continue;
        }
      }
    }

    if (next >= path.size()) {
      out.vehicles[v].arrive = t;
      ++(is_bus ? out.buses : out.cars).arrived;
      continue;
    }
    st.pos = next;
    st.entered = t;
    st.phase = Phase::kOnEdge;
    queue.push(Event{enter_edge(path[next], t), kVehicle, v});
  }

  for (auto* c : {&out.cars, &out.buses, &out.passengers}) {
    c->unfinished = c->departed - c->arrived;
  }
  for (auto const& p : passengers) {
    if (!p.boarded) ++out.passengers.unserved;
  }
  return out;
}

// Removes round(cars_removed) car trips (uniformly, without replacement) and
// appends round(delta_passengers) bus-passenger trips whose zone pairs follow
// `passenger_od` and whose departures follow `profile`.
inline TripTable apply_modeshift_to_trips(TripTable const& trips, ScenarioResult const& result,
                                          ODMatrix const& passenger_od,
                                          TemporalProfile const& profile,
                                          NetworkGraph const& graph, std::uint64_t seed) {
  auto const remove = std::llround(result.cars_removed);
  auto const add = std::llround(result.delta_passengers);
  if (remove < 0 || add < 0) {
    fail(ErrorCode::kDomain, "mode shift must not add cars or remove passengers");
  }
  std::vector<std::size_t> cars;
  for (std::size_t i = 0; i < trips.trips.size(); ++i) {
    if (trips.trips[i].mode == TripMode::kCar) cars.push_back(i);
  }
  if (static_cast<std::size_t>(remove) > cars.size()) {
    fail(ErrorCode::kDemandExhausted, "cannot remove " + std::to_string(remove) +
                                          " of " + std::to_string(cars.size()) + " car trips");
  }
  if (remove == 0 && add == 0) return trips;

  Rng rng{Rng::derive(seed, 0x5eed)};
  // Partial Fisher-Yates: the first `remove` slots become the removal set.
  for (std::size_t i = 0; i < static_cast<std::size_t>(remove); ++i) {
    auto const j = i + rng.below(cars.size() - i);
    std::swap(cars[i], cars[j]);
  }
  std::vector<bool> dropped(trips.trips.size(), false);
  for (std::size_t i = 0; i < static_cast<std::size_t>(remove); ++i) dropped[cars[i]] = true;

  TripTable out;
  out.trips.reserve(trips.trips.size() - static_cast<std::size_t>(remove) +
                    static_cast<std::size_t>(add));
  for (std::size_t i = 0; i < trips.trips.size(); ++i) {
    if (!dropped[i]) out.trips.push_back(trips.trips[i]);
  }
  if (add > 0) {
    profile.validate();
    auto const od = calibrate_total(passenger_od, static_cast<double>(add));
    auto const counts = largest_remainder(od.trips);
    DepartureSampler bins{profile, rng};
    TripTable extra;
    auto const n = od.size();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        sample_cell_trips(graph, bins, od.zones[i], od.zones[j], counts[i * n + j],
                          TripMode::kBusPassenger, "shift", rng, extra);
      }
    }
    out.trips.insert(out.trips.end(), std::make_move_iterator(extra.trips.begin()),
                     std::make_move_iterator(extra.trips.end()));
  }
  return out;
}

// --- exports ----------------------------------------------------------------

inline void write_segments_csv(SimOutput const& sim, NetworkGraph const& graph,
                               std::filesystem::path const& path) {
  csv::Writer w{path};
  w.row("vehicle_id", "class", "edge_id", "enter_s", "exit_s", "mean_speed_mps");
  for (auto const& s : sim.segments) {
    auto const& v = sim.vehicles[s.vehicle];
    w.row(v.id, to_string(v.cls), graph.edge(s.edge).edge_id, s.enter, s.exit, s.mean_speed);
  }
  w.close();
}

inline void write_bus_kpis_csv(SimOutput const& sim, std::filesystem::path const& path) {
  csv::Writer w{path};
  w.row("run_id", "stop_id", "sched_s", "actual_s", "boardings", "alightings", "load_factor");
  for (auto const& k : sim.bus_kpis) {
    for (auto const& s : k.stops) {
      w.row(k.run_id, s.stop_id, s.scheduled_arrival, s.actual_arrival, s.boardings,
            s.alightings, s.load_factor);
    }
  }
  w.close();
}

inline void write_waits_csv(SimOutput const& sim, std::filesystem::path const& path) {
  csv::Writer w{path};
  w.row("run_id", "stop_id", "trip_id", "arrive_s", "board_s", "wait_s");
  for (auto const& k : sim.bus_kpis) {
    for (auto const& p : k.waits) {
      w.row(k.run_id, p.stop_id, p.trip_id, p.arrive, p.board, p.wait());
    }
  }
  w.close();
}

}  // namespace modeshift
