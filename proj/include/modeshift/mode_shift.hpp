#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "modeshift/csv.hpp"
#include "modeshift/error.hpp"

namespace modeshift {

// Defaults are reverse-engineered from the published scenario tables; see
// derive_fleet_constants() and docs/derivations.md.
struct FleetParams {
  double bus_capacity{35.0};   // persons per bus
  double car_occupancy{1.5};   // persons per car
  double max_load{1.0};        // usable fraction of capacity

  void validate() const {
    if (!(bus_capacity > 0) || !(car_occupancy > 0)) {
      fail(ErrorCode::kDomain, "bus_capacity and car_occupancy must be positive");
    }
    if (!(max_load > 0) || max_load > 1) {
      fail(ErrorCode::kDomain, "max_load must lie in (0, 1]");
    }
  }
};

struct BaselineStats {
  double bus_person_trips{};  // P0
  double bus_runs{};          // B0
  double car_trips{};         // C0
  double total_traffic{};     // T0 = C0 + B0
  double utilization{};       // U0
  double avg_occupancy{};     // P0 / B0
};

struct Multiplier {
  double k{};
};
struct TargetUtilization {
  double u{};
};
using ScenarioSpec = std::variant<Multiplier, TargetUtilization>;

inline std::string label(ScenarioSpec const& s) {
  if (auto const* m = std::get_if<Multiplier>(&s)) {
    return csv::shortest(m->k) + "X";
  }
  return csv::shortest(std::get<TargetUtilization>(s).u * 100.0) + "%";
}

struct ScenarioResult {
  std::string label;
  double u0{};
  double u1{};
  double multiplier{};            // U1 / U0
  double passengers{};            // P1
  double delta_passengers{};
  double cars_removed{};
  double reduction_car_basis{};   // cars_removed / C0
  double reduction_total_basis{}; // cars_removed / T0
  double traffic_after{};         // T1
  double avg_occupancy_before{};
  double avg_occupancy_after{};
  double required_runs{};
};

inline BaselineStats derive_baseline(double bus_person_trips, double bus_runs,
                                     double car_trips, FleetParams const& fleet) {
  fleet.validate();
  if (!(bus_runs > 0)) fail(ErrorCode::kDomain, "B0 must be positive");
  if (!(bus_person_trips >= 0) || !(car_trips >= 0)) {
    fail(ErrorCode::kDomain, "P0 and C0 must be non-negative");
  }
  auto const seats = bus_runs * fleet.bus_capacity;
  if (bus_person_trips > seats) {
    fail(ErrorCode::kInfeasibleBaseline,
         "P0 = " + csv::shortest(bus_person_trips) + " exceeds B0 x capacity = " +
             csv::shortest(seats));
  }
  BaselineStats b;
  b.bus_person_trips = bus_person_trips;
  b.bus_runs = bus_runs;
  b.car_trips = car_trips;
  b.total_traffic = car_trips + bus_runs;
  b.utilization = bus_person_trips / seats;
  b.avg_occupancy = bus_person_trips / bus_runs;
  return b;
}

inline ScenarioResult apply_scenario(BaselineStats const& base, ScenarioSpec const& spec,
                                     FleetParams const& fleet) {
  fleet.validate();
  auto const seats = base.bus_runs * fleet.bus_capacity;

  ScenarioResult r;
  r.label = label(spec);
  r.u0 = base.utilization;
  if (auto const* m = std::get_if<Multiplier>(&spec)) {
    if (!(m->k > 0)) fail(ErrorCode::kDomain, "multiplier must be positive");
    r.u1 = m->k * base.utilization;
  } else {
    auto const u = std::get<TargetUtilization>(spec).u;
    if (!(u > 0) || u > 1) fail(ErrorCode::kDomain, "target utilization must lie in (0, 1]");
    r.u1 = u;
  }
  if (r.u1 > 1.0) {
    fail(ErrorCode::kOverCapacity,
         r.label + ": utilization " + csv::shortest(r.u1) + " exceeds 1");
  }
  r.passengers = r.u1 * seats;
  r.delta_passengers = r.passengers - base.bus_person_trips;
  // Reproducing the baseline utilization is the identity scenario; absorb
  // the last-ulp residue of U0 * seats.
  if (std::abs(r.delta_passengers) <= 1e-9 * std::max(1.0, base.bus_person_trips)) {
    r.passengers = base.bus_person_trips;
    r.delta_passengers = 0.0;
    r.u1 = base.utilization;
  }
  if (r.delta_passengers < 0) {
    fail(ErrorCode::kDomain, r.label + ": target is below the baseline utilization");
  }
  r.multiplier = base.utilization > 0 ? r.u1 / base.utilization : 1.0;
  r.cars_removed = r.delta_passengers / fleet.car_occupancy;
  if (r.cars_removed > base.car_trips) {
    fail(ErrorCode::kDemandExhausted,
         r.label + ": removing " + csv::shortest(r.cars_removed) +
             " cars exceeds the " + csv::shortest(base.car_trips) + " available");
  }
  r.reduction_car_basis = base.car_trips > 0 ? r.cars_removed / base.car_trips : 0.0;
  r.reduction_total_basis =
      base.total_traffic > 0 ? r.cars_removed / base.total_traffic : 0.0;
  r.traffic_after = base.total_traffic - r.cars_removed;
  r.avg_occupancy_before = base.avg_occupancy;
  r.avg_occupancy_after = r.passengers / base.bus_runs;
  r.required_runs = std::ceil(r.passengers / (fleet.bus_capacity * fleet.max_load));
  return r;
}

inline std::vector<ScenarioSpec> standard_scenarios() {
  return {Multiplier{2.0}, TargetUtilization{0.5}, TargetUtilization{0.7}};
}

// Scenarios 1-3: doubled utilization, 50 % and 70 % targets.
inline std::vector<ScenarioResult> scenario_suite(BaselineStats const& base,
                                                  FleetParams const& fleet) {
  std::vector<ScenarioResult> out;
  for (auto const& s : standard_scenarios()) out.push_back(apply_scenario(base, s, fleet));
  return out;
}

// The "base" row of a scenario table.
inline ScenarioResult baseline_row(BaselineStats const& base, FleetParams const& fleet) {
  auto r = apply_scenario(base, Multiplier{1.0}, fleet);
  r.label = "base";
  return r;
}

// --- hidden-constant derivation ------------------------------------------

// One published scenario row: passengers requiring bus service and total
// traffic after the reduction, alongside its area's baseline.
struct PublishedRow {
  std::string label;
  double target_utilization{};  // 0 when the row is multiplier-based
  double passengers{};
  double traffic_after{};
};

struct PublishedTable {
  std::string area;
  double bus_person_trips{};
  double bus_runs{};
  double car_trips{};
  double total_traffic{};
  std::vector<PublishedRow> rows;
};

struct DerivedConstants {
  std::vector<double> capacity_estimates;   // one per table, from its 50 % row
  std::vector<double> occupancy_estimates;  // one per scenario row
};

// capacity: P1 = U* x B0 x cap solved on each table's 50 % row.
// occupancy: passengers gained per car removed, (P1 - P0) / (T0 - T1).
inline DerivedConstants derive_fleet_constants(std::vector<PublishedTable> const& tables) {
  DerivedConstants d;
  for (auto const& t : tables) {
    for (auto const& row : t.rows) {
      if (row.target_utilization == 0.5) {
        d.capacity_estimates.push_back(row.passengers / (0.5 * t.bus_runs));
      }
      auto const cars = t.total_traffic - row.traffic_after;
      if (cars > 0) {
        d.occupancy_estimates.push_back((row.passengers - t.bus_person_trips) / cars);
      }
    }
  }
  return d;
}

inline std::vector<PublishedTable> published_case_tables() {
  return {
      PublishedTable{"South End", 6585, 1035, 35335, 36370,
                     {{"2X", 0.0, 13165.2, 31983},
                      {"50%", 0.5, 18112.5, 28685},
                      {"70%", 0.7, 25357.5, 23855}}},
      PublishedTable{"Avondale", 982, 173, 7239, 7412,
                     {{"2X", 0.0, 1972, 6752},
                      {"50%", 0.5, 3027.5, 6048},
                      {"70%", 0.7, 4238.5, 5241}}},
  };
}

// --- scenario spec file ---------------------------------------------------

struct ScenarioFile {
  double bus_person_trips{};
  double bus_runs{};
  double car_trips{};
  FleetParams fleet;
  std::vector<ScenarioSpec> scenarios;
};

inline FleetParams parse_fleet(nlohmann::json const& j) {
  FleetParams f;
  if (j.is_null()) return f;
  if (!j.is_object()) fail(ErrorCode::kFormat, "fleet must be an object");
  f.bus_capacity = j.value("bus_capacity", f.bus_capacity);
  f.car_occupancy = j.value("car_occupancy", f.car_occupancy);
  f.max_load = j.value("max_load", f.max_load);
  f.validate();
  return f;
}

inline std::vector<ScenarioSpec> parse_scenarios(nlohmann::json const& j) {
  if (j.is_null()) return standard_scenarios();
  if (!j.is_array()) fail(ErrorCode::kFormat, "scenarios must be an array");
  std::vector<ScenarioSpec> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    auto const& s = j[i];
    auto const where = "scenarios[" + std::to_string(i) + "]";
    bool const has_k = s.is_object() && s.contains("multiplier");
    bool const has_u = s.is_object() && s.contains("target_utilization");
    if (has_k == has_u) {
      fail(ErrorCode::kFormat,
           where + ": exactly one of multiplier / target_utilization is required");
    }
    if (has_k) {
      if (!s["multiplier"].is_number()) fail(ErrorCode::kFormat, where + ".multiplier");
      out.emplace_back(Multiplier{s["multiplier"].get<double>()});
    } else {
      if (!s["target_utilization"].is_number()) {
        fail(ErrorCode::kFormat, where + ".target_utilization");
      }
      out.emplace_back(TargetUtilization{s["target_utilization"].get<double>()});
    }
  }
  return out;
}

inline ScenarioFile parse_scenario_file(nlohmann::json const& j) {
  ScenarioFile f;
  if (!j.contains("baseline") || !j["baseline"].is_object()) {
    fail(ErrorCode::kFormat, "baseline: missing object");
  }
  auto const& b = j["baseline"];
  for (auto const* key : {"P0", "B0", "C0"}) {
    if (!b.contains(key) || !b[key].is_number()) {
      fail(ErrorCode::kFormat, std::string{"baseline."} + key + ": missing number");
    }
  }
  f.bus_person_trips = b["P0"].get<double>();
  f.bus_runs = b["B0"].get<double>();
  f.car_trips = b["C0"].get<double>();
  f.fleet = parse_fleet(j.value("fleet", nlohmann::json{}));
  f.scenarios = parse_scenarios(j.value("scenarios", nlohmann::json{}));
  return f;
}

// --- table output ---------------------------------------------------------

inline std::vector<std::string> scenario_table_columns() {
  return {"scenario",
          "current_bus_utilization",
          "increase_rate",
          "new_bus_utilization",
          "current_person_trips_using_buses",
          "total_passengers_requiring_bus",
          "cars_removed",
          "reduction_in_car_trips_pct",
          "reduction_total_traffic_pct",
          "total_traffic_after_reduction",
          "avg_occupancy_before",
          "avg_occupancy_after",
          "required_runs"};
}

inline std::vector<std::string> scenario_table_cells(ScenarioResult const& r,
                                                     BaselineStats const& base) {
  return {r.label,
          csv::fixed(r.u0 * 100.0, 4),
          csv::fixed(r.multiplier, 4),
          csv::fixed(r.u1 * 100.0, 4),
          csv::fixed(base.bus_person_trips, 4),
          csv::fixed(r.passengers, 4),
          csv::fixed(r.cars_removed, 4),
          csv::fixed(r.reduction_car_basis * 100.0, 4),
          csv::fixed(r.reduction_total_basis * 100.0, 4),
          csv::fixed(r.traffic_after, 4),
          csv::fixed(r.avg_occupancy_before, 4),
          csv::fixed(r.avg_occupancy_after, 4),
          csv::fixed(r.required_runs, 0)};
}

inline nlohmann::json to_json(ScenarioResult const& r) {
  return {{"scenario", r.label},
          {"current_bus_utilization", r.u0},
          {"increase_rate", r.multiplier},
          {"new_bus_utilization", r.u1},
          {"total_passengers_requiring_bus", r.passengers},
          {"delta_passengers", r.delta_passengers},
          {"cars_removed", r.cars_removed},
          {"reduction_car_basis", r.reduction_car_basis},
          {"reduction_total_basis", r.reduction_total_basis},
          {"total_traffic_after_reduction", r.traffic_after},
          {"avg_occupancy_before", r.avg_occupancy_before},
          {"avg_occupancy_after", r.avg_occupancy_after},
          {"required_runs", r.required_runs}};
}

inline nlohmann::json to_json(BaselineStats const& b) {
  return {{"P0", b.bus_person_trips}, {"B0", b.bus_runs},     {"C0", b.car_trips},
          {"T0", b.total_traffic},    {"U0", b.utilization}, {"avg_occupancy", b.avg_occupancy}};
}

}  // namespace modeshift
