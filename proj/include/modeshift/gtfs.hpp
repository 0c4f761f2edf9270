#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "modeshift/clock.hpp"
#include "modeshift/csv.hpp"
#include "modeshift/error.hpp"

namespace modeshift::gtfs {

namespace fs = std::filesystem;

struct Stop {
  std::string stop_id;
  std::string name;
  double lat{};
  double lon{};
  friend bool operator==(Stop const&, Stop const&) = default;
};

enum class RouteType { kBus };

struct RouteDef {
  std::string route_id;
  std::string short_name;
  RouteType type{RouteType::kBus};
  friend bool operator==(RouteDef const&, RouteDef const&) = default;
};

struct StopEvent {
  std::string stop_id;
  Seconds arrival{};
  Seconds departure{};
  friend bool operator==(StopEvent const&, StopEvent const&) = default;
};

struct BusRunTemplate {
  std::string trip_id;
  std::string route_id;
  std::string service_id;
  std::vector<StopEvent> stop_events;

  Seconds first_departure() const { return stop_events.front().departure; }
  friend bool operator==(BusRunTemplate const&, BusRunTemplate const&) = default;
};

// Immutable once parsed. Runs are sorted by trip_id.
struct TransitSchedule {
  std::vector<Stop> stops;
  std::vector<RouteDef> routes;
  std::vector<BusRunTemplate> runs;
  std::chrono::year_month_day service_date{};

  RouteDef const* route(std::string_view route_id) const {
    auto const it = std::find_if(routes.begin(), routes.end(), [&](auto& r) {
      return r.route_id == route_id;
    });
    return it == routes.end() ? nullptr : &*it;
  }

  Stop const* stop(std::string_view stop_id) const {
    auto const it = std::find_if(stops.begin(), stops.end(), [&](auto& s) {
      return s.stop_id == stop_id;
    });
    return it == stops.end() ? nullptr : &*it;
  }

  std::string const& short_name_of(BusRunTemplate const& run) const {
    return route(run.route_id)->short_name;
  }

  friend bool operator==(TransitSchedule const&, TransitSchedule const&) = default;
};

namespace detail {

inline bool is_bus_route_type(long long t) {
  // Basic GTFS bus (3) and the extended bus block 700-799.
  return t == 3 || (t >= 700 && t <= 799);
}

inline csv::Table load_required(fs::path const& dir, char const* file) {
  auto const path = dir / file;
  if (!fs::exists(path)) {
    fail(ErrorCode::kFeedIncomplete, std::string{"missing "} + file);
  }
  return csv::Table::load(path);
}

struct CalendarRule {
  std::chrono::sys_days start;
  std::chrono::sys_days end;
  std::array<bool, 7> weekday{};  // indexed by std::chrono::weekday::c_encoding()
};

}  // namespace detail

// Resolves a GTFS static feed into the bus runs operating on `service_date`.
// Non-bus routes and their trips are dropped; frequency-based service is
// rejected.
inline TransitSchedule parse_feed(fs::path const& feed_directory,
                                  std::chrono::year_month_day service_date) {
  using namespace std::chrono;
  using detail::load_required;

  if (!fs::is_directory(feed_directory)) {
    fail(ErrorCode::kFeedIncomplete,
         "feed directory " + feed_directory.string() + " does not exist");
  }
  for (auto const* f : {"stops.txt", "routes.txt", "trips.txt",
                        "stop_times.txt", "calendar.txt"}) {
    if (!fs::exists(feed_directory / f)) {
      fail(ErrorCode::kFeedIncomplete, std::string{"missing "} + f);
    }
  }
  if (auto const freq = feed_directory / "frequencies.txt"; fs::exists(freq)) {
    if (csv::Table::load(freq).size() > 0) {
      fail(ErrorCode::kUnsupportedFeature,
           "frequencies.txt: frequency-based trips are not supported");
    }
  }

  TransitSchedule out;
  out.service_date = service_date;

  // stops
  auto const stops = load_required(feed_directory, "stops.txt");
  {
    auto const c_id = stops.require("stop_id");
    auto const c_name = stops.column("stop_name");
    auto const c_lat = stops.require("stop_lat");
    auto const c_lon = stops.require("stop_lon");
    std::unordered_set<std::string> seen;
    for (std::size_t r = 0; r < stops.size(); ++r) {
      Stop s;
      s.stop_id = std::string{csv::trim(stops.cell(r, c_id))};
      s.name = std::string{stops.cell(r, c_name)};
      auto const where = "stops.txt row " + std::to_string(r + 2);
      s.lat = csv::to_double(stops.cell(r, c_lat), where + " stop_lat");
      s.lon = csv::to_double(stops.cell(r, c_lon), where + " stop_lon");
      if (s.stop_id.empty()) {
        fail(ErrorCode::kFormat, where + ": empty stop_id");
      }
      if (s.lat < -90 || s.lat > 90 || s.lon < -180 || s.lon > 180) {
        fail(ErrorCode::kDomain, where + ": coordinates out of range for " +
                                     s.stop_id);
      }
      if (!seen.insert(s.stop_id).second) {
        fail(ErrorCode::kFormat, "stops.txt: duplicate stop_id " + s.stop_id);
      }
      out.stops.push_back(std::move(s));
    }
  }
  std::unordered_set<std::string> stop_ids;
  for (auto const& s : out.stops) stop_ids.insert(s.stop_id);

  // routes
  std::unordered_set<std::string> non_bus_routes;
  {
    auto const routes = load_required(feed_directory, "routes.txt");
    auto const c_id = routes.require("route_id");
    auto const c_short = routes.column("route_short_name");
    auto const c_long = routes.column("route_long_name");
    auto const c_type = routes.require("route_type");
    std::unordered_set<std::string> seen;
    for (std::size_t r = 0; r < routes.size(); ++r) {
      auto const where = "routes.txt row " + std::to_string(r + 2);
      std::string id{csv::trim(routes.cell(r, c_id))};
      if (!seen.insert(id).second) {
        fail(ErrorCode::kFormat, "routes.txt: duplicate route_id " + id);
      }
      auto const type = csv::to_int(routes.cell(r, c_type), where + " route_type");
      if (!detail::is_bus_route_type(type)) {
        non_bus_routes.insert(id);
        continue;
      }
      std::string name{csv::trim(routes.cell(r, c_short))};
      if (name.empty()) name = std::string{csv::trim(routes.cell(r, c_long))};
      if (name.empty()) name = id;
      out.routes.push_back(RouteDef{id, name, RouteType::kBus});
    }
  }
  std::unordered_set<std::string> bus_routes;
  for (auto const& r : out.routes) bus_routes.insert(r.route_id);

  // calendar + calendar_dates
  std::map<std::string, detail::CalendarRule> rules;
  std::map<std::string, std::map<sys_days, int>> exceptions;
  std::optional<sys_days> valid_from, valid_to;
  auto const widen = [&](sys_days a, sys_days b) {
    valid_from = valid_from ? std::min(*valid_from, a) : a;
    valid_to = valid_to ? std::max(*valid_to, b) : b;
  };
  {
    auto const cal = load_required(feed_directory, "calendar.txt");
    static constexpr std::array<char const*, 7> kDays{
        "sunday", "monday", "tuesday", "wednesday",
        "thursday", "friday", "saturday"};
    auto const c_sid = cal.require("service_id");
    auto const c_start = cal.require("start_date");
    auto const c_end = cal.require("end_date");
    std::array<std::size_t, 7> c_day{};
    for (std::size_t d = 0; d < 7; ++d) c_day[d] = cal.require(kDays[d]);
    for (std::size_t r = 0; r < cal.size(); ++r) {
      auto const where = "calendar.txt row " + std::to_string(r + 2);
      detail::CalendarRule rule;
      rule.start = sys_days{parse_date(cal.cell(r, c_start))};
      rule.end = sys_days{parse_date(cal.cell(r, c_end))};
      for (std::size_t d = 0; d < 7; ++d) {
        rule.weekday[d] = csv::to_int(cal.cell(r, c_day[d]), where) == 1;
      }
      widen(rule.start, rule.end);
      rules[std::string{csv::trim(cal.cell(r, c_sid))}] = rule;
    }
  }
  if (auto const path = feed_directory / "calendar_dates.txt"; fs::exists(path)) {
    auto const cd = csv::Table::load(path);
    auto const c_sid = cd.require("service_id");
    auto const c_date = cd.require("date");
    auto const c_type = cd.require("exception_type");
    for (std::size_t r = 0; r < cd.size(); ++r) {
      auto const where = "calendar_dates.txt row " + std::to_string(r + 2);
      auto const day = sys_days{parse_date(cd.cell(r, c_date))};
      auto const type = csv::to_int(cd.cell(r, c_type), where);
      if (type != 1 && type != 2) {
        fail(ErrorCode::kFormat, where + ": exception_type must be 1 or 2");
      }
      exceptions[std::string{csv::trim(cd.cell(r, c_sid))}][day] =
          static_cast<int>(type);
      if (type == 1) widen(day, day);
    }
  }
  auto const date = sys_days{service_date};
  if (!valid_from || date < *valid_from || date > *valid_to) {
    fail(ErrorCode::kDomain, "service date " + format_date(service_date) +
                                 " is outside the feed's calendar validity");
  }
  auto const weekday = std::chrono::weekday{date}.c_encoding();
  auto const service_active = [&](std::string const& sid) {
    if (auto const e = exceptions.find(sid); e != exceptions.end()) {
      if (auto const x = e->second.find(date); x != e->second.end()) {
        return x->second == 1;
      }
    }
    auto const it = rules.find(sid);
    return it != rules.end() && date >= it->second.start &&
           date <= it->second.end && it->second.weekday[weekday];
  };

  // trips
  struct TripRow {
    std::string route_id;
    std::string service_id;
  };
  std::unordered_map<std::string, TripRow> trips;
  std::unordered_set<std::string> skipped_trips;
  {
    auto const t = load_required(feed_directory, "trips.txt");
    auto const c_route = t.require("route_id");
    auto const c_service = t.require("service_id");
    auto const c_trip = t.require("trip_id");
    for (std::size_t r = 0; r < t.size(); ++r) {
      std::string trip_id{csv::trim(t.cell(r, c_trip))};
      std::string route_id{csv::trim(t.cell(r, c_route))};
      std::string service_id{csv::trim(t.cell(r, c_service))};
      if (non_bus_routes.contains(route_id)) {
        skipped_trips.insert(trip_id);
        continue;
      }
      if (!bus_routes.contains(route_id)) {
        fail(ErrorCode::kReferentialIntegrity,
             "trips.txt: trip " + trip_id + " references unknown route_id " +
                 route_id);
      }
      if (!rules.contains(service_id) && !exceptions.contains(service_id)) {
        fail(ErrorCode::kReferentialIntegrity,
             "trips.txt: trip " + trip_id + " references unknown service_id " +
                 service_id);
      }
      if (!trips.emplace(trip_id, TripRow{route_id, service_id}).second) {
        fail(ErrorCode::kFormat, "trips.txt: duplicate trip_id " + trip_id);
      }
    }
  }

  // stop_times
  struct TimeRow {
    long long sequence;
    std::string stop_id;
    std::optional<Seconds> arrival;
    std::optional<Seconds> departure;
  };
  std::unordered_map<std::string, std::vector<TimeRow>> times;
  {
    auto const st = load_required(feed_directory, "stop_times.txt");
    auto const c_trip = st.require("trip_id");
    auto const c_arr = st.require("arrival_time");
    auto const c_dep = st.require("departure_time");
    auto const c_stop = st.require("stop_id");
    auto const c_seq = st.require("stop_sequence");
    auto const opt_time = [](std::string_view s) -> std::optional<Seconds> {
      if (csv::trim(s).empty()) return std::nullopt;
      return parse_clock(s);
    };
    for (std::size_t r = 0; r < st.size(); ++r) {
      auto const where = "stop_times.txt row " + std::to_string(r + 2);
      std::string trip_id{csv::trim(st.cell(r, c_trip))};
      std::string stop_id{csv::trim(st.cell(r, c_stop))};
      if (!stop_ids.contains(stop_id)) {
        fail(ErrorCode::kReferentialIntegrity,
             where + ": undefined stop_id " + stop_id);
      }
      if (skipped_trips.contains(trip_id)) continue;
      if (!trips.contains(trip_id)) {
        fail(ErrorCode::kReferentialIntegrity,
             where + ": undefined trip_id " + trip_id);
      }
      times[trip_id].push_back(
          TimeRow{csv::to_int(st.cell(r, c_seq), where + " stop_sequence"),
                  std::move(stop_id), opt_time(st.cell(r, c_arr)),
                  opt_time(st.cell(r, c_dep))});
    }
  }

  for (auto& [trip_id, rows] : times) {
    auto const& trip = trips.at(trip_id);
    if (!service_active(trip.service_id)) continue;

    std::sort(rows.begin(), rows.end(),
              [](auto const& a, auto const& b) { return a.sequence < b.sequence; });
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].sequence == rows[i - 1].sequence) {
        fail(ErrorCode::kFormat, "stop_times.txt: trip " + trip_id +
                                     " repeats stop_sequence " +
                                     std::to_string(rows[i].sequence));
      }
    }
    for (auto& row : rows) {
      if (!row.arrival) row.arrival = row.departure;
      if (!row.departure) row.departure = row.arrival;
    }
    if (!rows.front().arrival || !rows.back().arrival) {
      fail(ErrorCode::kFormat,
           "stop_times.txt: trip " + trip_id + " lacks first or last time");
    }
    // Untimed intermediate stops: interpolate linearly by position between
    // the surrounding timepoints.
    for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
      if (rows[i].arrival) continue;
      std::size_t j = i;
      while (!rows[j].arrival) ++j;
      auto const t0 = *rows[i - 1].departure;
      auto const t1 = *rows[j].arrival;
      auto const span = static_cast<Seconds>(j - (i - 1));
      for (std::size_t k = i; k < j; ++k) {
        auto const v = t0 + (t1 - t0) * static_cast<Seconds>(k - (i - 1)) / span;
        rows[k].arrival = rows[k].departure = v;
      }
    }

    BusRunTemplate run{trip_id, trip.route_id, trip.service_id, {}};
    run.stop_events.reserve(rows.size());
    Seconds last = std::numeric_limits<Seconds>::min();
    for (auto& row : rows) {
      if (*row.arrival > *row.departure || *row.arrival < last) {
        fail(ErrorCode::kDomain,
             "stop_times.txt: trip " + trip_id + " has decreasing times at stop " +
                 row.stop_id);
      }
      last = *row.departure;
      run.stop_events.push_back(
          StopEvent{std::move(row.stop_id), *row.arrival, *row.departure});
    }
    out.runs.push_back(std::move(run));
  }
  std::sort(out.runs.begin(), out.runs.end(),
            [](auto const& a, auto const& b) { return a.trip_id < b.trip_id; });
  return out;
}

inline std::vector<BusRunTemplate> runs_in_window(
    TransitSchedule const& schedule, TimeWindow window,
    std::optional<std::set<std::string>> const& route_filter = std::nullopt) {
  if (!(window.start < window.end)) {
    fail(ErrorCode::kDomain, "window start must precede end");
  }
  std::unordered_set<std::string> allowed_routes;
  if (route_filter) {
    for (auto const& name : *route_filter) {
      bool found = false;
      for (auto const& r : schedule.routes) {
        if (r.short_name == name) {
          allowed_routes.insert(r.route_id);
          found = true;
        }
      }
      if (!found) {
        fail(ErrorCode::kUnknownRoute, "no route with short name " + name);
      }
    }
  }
  std::vector<BusRunTemplate> out;
  for (auto const& run : schedule.runs) {
    if (route_filter && !allowed_routes.contains(run.route_id)) continue;
    if (window.contains(run.first_departure())) out.push_back(run);
  }
  return out;
}

// Sorted gaps between consecutive departures of `route` at `stop_id`.
inline std::vector<Seconds> headways(TransitSchedule const& schedule,
                                     std::string_view route,
                                     std::string_view stop_id) {
  bool route_known = false;
  std::vector<Seconds> departures;
  for (auto const& run : schedule.runs) {
    auto const* r = schedule.route(run.route_id);
    if (r->short_name != route) continue;
    route_known = true;
    for (auto const& ev : run.stop_events) {
      if (ev.stop_id == stop_id) departures.push_back(ev.departure);
    }
  }
  if (!route_known &&
      std::none_of(schedule.routes.begin(), schedule.routes.end(),
                   [&](auto const& r) { return r.short_name == route; })) {
    fail(ErrorCode::kUnknownRoute, "no route with short name " + std::string{route});
  }
  if (departures.empty()) {
    fail(ErrorCode::kNotServed, "stop " + std::string{stop_id} +
                                    " is not served by route " + std::string{route});
  }
  std::sort(departures.begin(), departures.end());
  std::vector<Seconds> gaps;
  gaps.reserve(departures.size() - 1);
  for (std::size_t i = 1; i < departures.size(); ++i) {
    gaps.push_back(departures[i] - departures[i - 1]);
  }
  return gaps;
}

}  // namespace modeshift::gtfs
