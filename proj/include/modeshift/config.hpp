#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "modeshift/clock.hpp"
#include "modeshift/csv.hpp"
#include "modeshift/emissions.hpp"
#include "modeshift/error.hpp"
#include "modeshift/meso_sim.hpp"
#include "modeshift/mode_shift.hpp"

namespace modeshift {

namespace fs = std::filesystem;

inline constexpr char kVersion[] = "0.1.0";

struct EmissionSettings {
  Seconds bin_width{60};
  int smoothing_bins{5};
  ClassCoefficients coefficients;
};

// One run-pipeline configuration. Paths are resolved against the directory
// of the config file. Only the baseline block is needed for scenario-table;
// the simulation commands need every input.
struct PipelineConfig {
  fs::path source;
  std::string name;

  std::optional<fs::path> gtfs_dir;
  std::optional<fs::path> network;
  std::optional<fs::path> stop_edges;
  std::optional<fs::path> car_od;
  std::optional<fs::path> passenger_od;
  std::optional<fs::path> profile_file;
  std::string profile_name{"mixed_use"};

  std::optional<std::string> service_date;  // kept as text, checked by validate
  std::string window_start{"05:00:00"};
  std::string window_end{"21:00:00"};
  std::optional<std::set<std::string>> routes;

  std::optional<double> p0, b0, c0;
  FleetParams fleet;
  std::vector<ScenarioSpec> scenarios{standard_scenarios()};

  SimParams sim;
  EmissionSettings emissions;
  bool write_ledger{false};
  std::uint64_t seed{1};

  bool has_simulation_inputs() const {
    return gtfs_dir || network || stop_edges || car_od || passenger_od;
  }
};

namespace detail {

inline nlohmann::json const* member(nlohmann::json const& j, char const* key) {
  if (!j.is_object()) return nullptr;
  auto const it = j.find(key);
  return it == j.end() || it->is_null() ? nullptr : &*it;
}

inline double number_at(nlohmann::json const& j, char const* key, double fallback,
                        std::string const& where) {
  auto const* v = member(j, key);
  if (!v) return fallback;
  if (!v->is_number()) fail(ErrorCode::kFormat, where + "." + key + ": expected a number");
  return v->get<double>();
}

inline std::optional<double> optional_number(nlohmann::json const& j, char const* key,
                                             std::string const& where) {
  auto const* v = member(j, key);
  if (!v) return std::nullopt;
  if (!v->is_number()) fail(ErrorCode::kFormat, where + "." + key + ": expected a number");
  return v->get<double>();
}

inline std::optional<std::string> optional_string(nlohmann::json const& j, char const* key,
                                                  std::string const& where) {
  auto const* v = member(j, key);
  if (!v) return std::nullopt;
  if (!v->is_string()) fail(ErrorCode::kFormat, where + "." + key + ": expected a string");
  return v->get<std::string>();
}

inline std::optional<EmissionCoefficients> parse_coefficients(nlohmann::json const& j,
                                                              char const* key,
                                                              std::optional<EmissionCoefficients> d) {
  auto const* v = member(j, key);
  if (!v) return d;
  auto const where = std::string{"emissions."} + key;
  if (!v->is_object()) fail(ErrorCode::kFormat, where + ": expected {c0, c1, c2}");
  EmissionCoefficients c;
  for (auto const* k : {"c0", "c1", "c2"}) {
    if (!member(*v, k)) fail(ErrorCode::kFormat, where + "." + k + ": missing");
  }
  c.c0 = number_at(*v, "c0", 0, where);
  c.c1 = number_at(*v, "c1", 0, where);
  c.c2 = number_at(*v, "c2", 0, where);
  return c;
}

}  // namespace detail

// Structural parse only; semantic checks (files exist, windows ordered,
// coefficients valid, ...) are left to validate() so they can all be listed.
inline PipelineConfig parse_config(nlohmann::json const& j, fs::path const& source) {
  using detail::member;
  if (!j.is_object()) fail(ErrorCode::kFormat, source.string() + ": expected a JSON object");
  PipelineConfig c;
  c.source = source;
  auto const dir = source.parent_path();
  c.name = detail::optional_string(j, "name", "config").value_or(source.stem().string());

  if (auto const* in = member(j, "inputs")) {
    if (!in->is_object()) fail(ErrorCode::kFormat, "inputs: expected an object");
    auto const path_of = [&](char const* key) -> std::optional<fs::path> {
      if (auto s = detail::optional_string(*in, key, "inputs")) return dir / *s;
      return std::nullopt;
    };
    c.gtfs_dir = path_of("gtfs");
    c.network = path_of("network");
    c.stop_edges = path_of("stop_edges");
    c.car_od = path_of("car_od");
    c.passenger_od = path_of("passenger_od");
    c.profile_file = path_of("profile_file");
    if (auto p = detail::optional_string(*in, "profile", "inputs")) c.profile_name = *p;
  }

  c.service_date = detail::optional_string(j, "service_date", "config");
  if (auto const* w = member(j, "window")) {
    c.window_start = detail::optional_string(*w, "start", "window").value_or(c.window_start);
    c.window_end = detail::optional_string(*w, "end", "window").value_or(c.window_end);
  }
  if (auto const* r = member(j, "routes")) {
    if (!r->is_array()) fail(ErrorCode::kFormat, "routes: expected an array of short names");
    std::set<std::string> names;
    for (auto const& n : *r) {
      if (!n.is_string()) fail(ErrorCode::kFormat, "routes: expected strings");
      names.insert(n.get<std::string>());
    }
    c.routes = std::move(names);
  }

  if (auto const* b = member(j, "baseline")) {
    c.p0 = detail::optional_number(*b, "P0", "baseline");
    c.b0 = detail::optional_number(*b, "B0", "baseline");
    c.c0 = detail::optional_number(*b, "C0", "baseline");
  }
  if (auto const* f = member(j, "fleet")) {
    if (!f->is_object()) fail(ErrorCode::kFormat, "fleet: expected an object");
    c.fleet.bus_capacity = detail::number_at(*f, "bus_capacity", c.fleet.bus_capacity, "fleet");
    c.fleet.car_occupancy = detail::number_at(*f, "car_occupancy", c.fleet.car_occupancy, "fleet");
    c.fleet.max_load = detail::number_at(*f, "max_load", c.fleet.max_load, "fleet");
  }
  if (auto const* s = member(j, "scenarios")) c.scenarios = parse_scenarios(*s);

  if (auto const* s = member(j, "simulation")) {
    auto const w = std::string{"simulation"};
    c.sim.cooldown = static_cast<Seconds>(detail::number_at(*s, "cooldown_s", c.sim.cooldown, w));
    c.sim.bpr_alpha = detail::number_at(*s, "bpr_alpha", c.sim.bpr_alpha, w);
    c.sim.bpr_beta = detail::number_at(*s, "bpr_beta", c.sim.bpr_beta, w);
    c.sim.flow_window =
        static_cast<Seconds>(detail::number_at(*s, "flow_window_s", c.sim.flow_window, w));
    c.sim.dwell_min = detail::number_at(*s, "dwell_min_s", c.sim.dwell_min, w);
    c.sim.t_board = detail::number_at(*s, "t_board_s", c.sim.t_board, w);
    c.sim.t_alight = detail::number_at(*s, "t_alight_s", c.sim.t_alight, w);
  }
  if (auto const* e = member(j, "emissions")) {
    auto const w = std::string{"emissions"};
    c.emissions.bin_width =
        static_cast<Seconds>(detail::number_at(*e, "bin_width_s", c.emissions.bin_width, w));
    c.emissions.smoothing_bins =
        static_cast<int>(detail::number_at(*e, "smoothing_bins", c.emissions.smoothing_bins, w));
    c.emissions.coefficients.car =
        detail::parse_coefficients(*e, "car", c.emissions.coefficients.car);
    c.emissions.coefficients.bus =
        detail::parse_coefficients(*e, "bus", c.emissions.coefficients.bus);
  }
  if (auto const* o = member(j, "outputs")) {
    if (auto const* l = member(*o, "ledger"); l && l->is_boolean()) c.write_ledger = l->get<bool>();
  }
  if (auto const* s = member(j, "seed")) {
    if (!s->is_number_unsigned()) fail(ErrorCode::kFormat, "seed: expected a non-negative integer");
    c.seed = s->get<std::uint64_t>();
  }
  return c;
}

inline PipelineConfig load_config(fs::path const& path) {
  if (!fs::is_regular_file(path)) fail(ErrorCode::kIo, "cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(csv::read_file(path));
  } catch (nlohmann::json::parse_error const& e) {
    fail(ErrorCode::kFormat, path.string() + ": " + e.what());
  }
  return parse_config(j, path);
}

inline nlohmann::json coefficients_json(std::optional<EmissionCoefficients> const& c) {
  if (!c) return nullptr;
  return {{"c0", c->c0}, {"c1", c->c1}, {"c2", c->c2}};
}

// Every setting with defaults filled in; recorded in the run manifest. Paths
// are given relative to the config directory so the record is portable.
inline nlohmann::json resolved_json(PipelineConfig const& c) {
  auto const dir = c.source.parent_path();
  auto const rel = [&](std::optional<fs::path> const& p) -> nlohmann::json {
    if (!p) return nullptr;
    return p->lexically_relative(dir).generic_string();
  };
  nlohmann::json scenarios = nlohmann::json::array();
  for (auto const& s : c.scenarios) {
    if (auto const* m = std::get_if<Multiplier>(&s)) {
      scenarios.push_back({{"multiplier", m->k}});
    } else {
      scenarios.push_back({{"target_utilization", std::get<TargetUtilization>(s).u}});
    }
  }
  nlohmann::json routes = nullptr;
  if (c.routes) routes = std::vector<std::string>(c.routes->begin(), c.routes->end());
  auto const opt = [](std::optional<double> v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {
      {"name", c.name},
      {"inputs",
       {{"gtfs", rel(c.gtfs_dir)},
        {"network", rel(c.network)},
        {"stop_edges", rel(c.stop_edges)},
        {"car_od", rel(c.car_od)},
        {"passenger_od", rel(c.passenger_od)},
        {"profile", c.profile_file ? nlohmann::json(nullptr) : nlohmann::json(c.profile_name)},
        {"profile_file", rel(c.profile_file)}}},
      {"service_date", c.service_date ? nlohmann::json(*c.service_date) : nlohmann::json(nullptr)},
      {"window", {{"start", c.window_start}, {"end", c.window_end}}},
      {"routes", routes},
      {"baseline", {{"P0", opt(c.p0)}, {"B0", opt(c.b0)}, {"C0", opt(c.c0)}}},
      {"fleet",
       {{"bus_capacity", c.fleet.bus_capacity},
        {"car_occupancy", c.fleet.car_occupancy},
        {"max_load", c.fleet.max_load}}},
      {"scenarios", scenarios},
      {"simulation",
       {{"cooldown_s", c.sim.cooldown},
        {"bpr_alpha", c.sim.bpr_alpha},
        {"bpr_beta", c.sim.bpr_beta},
        {"flow_window_s", c.sim.flow_window},
        {"dwell_min_s", c.sim.dwell_min},
        {"t_board_s", c.sim.t_board},
        {"t_alight_s", c.sim.t_alight}}},
      {"emissions",
       {{"bin_width_s", c.emissions.bin_width},
        {"smoothing_bins", c.emissions.smoothing_bins},
        {"car", coefficients_json(c.emissions.coefficients.car)},
        {"bus", coefficients_json(c.emissions.coefficients.bus)}}},
      {"outputs", {{"ledger", c.write_ledger}}},
      {"seed", c.seed},
  };
}

}  // namespace modeshift
