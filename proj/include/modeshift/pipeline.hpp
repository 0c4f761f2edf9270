#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unistd.h>
#include <vector>

#include <nlohmann/json.hpp>

#include "modeshift/config.hpp"
#include "modeshift/demand.hpp"
#include "modeshift/digest.hpp"
#include "modeshift/emissions.hpp"
#include "modeshift/gtfs.hpp"
#include "modeshift/meso_sim.hpp"
#include "modeshift/mode_shift.hpp"
#include "modeshift/network.hpp"
#include "modeshift/report.hpp"

namespace modeshift {

struct Diagnostic {
  std::string subject;
  ErrorCode code{};
  std::string message;
};

inline nlohmann::json to_json(Diagnostic const& d) {
  return {{"subject", d.subject}, {"code", to_string(d.code)}, {"message", d.message}};
}

// Raised when a command's inputs do not validate; carries every diagnostic.
class ValidationFailure : public Error {
 public:
  explicit ValidationFailure(std::vector<Diagnostic> diagnostics)
      : Error{ErrorCode::kConfiguration, summary(diagnostics)},
        diagnostics_{std::move(diagnostics)} {}

  std::vector<Diagnostic> const& diagnostics() const { return diagnostics_; }

 private:
  static std::string summary(std::vector<Diagnostic> const& d) {
    return std::to_string(d.size()) + " validation diagnostic(s)";
  }
  std::vector<Diagnostic> diagnostics_;
};

// Everything a config refers to, loaded and cross-checked. Members stay empty
// when the config does not declare them or when loading failed.
struct Inputs {
  TimeWindow window{5 * 3600, 21 * 3600};
  std::optional<gtfs::TransitSchedule> schedule;  // runs restricted to the window
  std::optional<NetworkGraph> graph;
  std::optional<StopToEdge> stops;
  std::optional<ODMatrix> car_od;
  std::optional<ODMatrix> passenger_od;
  std::optional<TemporalProfile> profile;
  std::optional<BaselineStats> baseline;
};

struct Validation {
  std::vector<Diagnostic> diagnostics;
  Inputs inputs;
  bool ok() const { return diagnostics.empty(); }
};

namespace detail {

inline std::string detail_of(Error const& e) {
  std::string const what = e.what();
  auto const prefix = std::string{to_string(e.code())} + ": ";
  return what.starts_with(prefix) ? what.substr(prefix.size()) : what;
}

template <typename F>
bool collect(std::vector<Diagnostic>& out, std::string const& subject, F&& f) {
  try {
    f();
    return true;
  } catch (Error const& e) {
    out.push_back({subject, e.code(), detail_of(e)});
  } catch (std::exception const& e) {
    out.push_back({subject, ErrorCode::kIo, e.what()});
  }
  return false;
}

inline void check_od_zones(std::vector<Diagnostic>& out, std::string const& subject,
                           ODMatrix const& od, NetworkGraph const& g) {
  for (auto const& z : od.zones) {
    auto const zi = g.zone_index(z);
    if (!zi) {
      out.push_back({subject, ErrorCode::kReferentialIntegrity,
                     "zone " + z + " is not defined in the network"});
    } else if (g.zone_edges(*zi).empty()) {
      out.push_back({subject, ErrorCode::kReferentialIntegrity, "zone " + z + " has no edges"});
    }
  }
}

}  // namespace detail

// Loads every declared input and lists every problem found, never just the
// first. With `require_simulation` the simulation inputs become mandatory.
inline Validation validate(PipelineConfig const& c, bool require_simulation) {
  Validation v;
  auto& d = v.diagnostics;
  auto& in = v.inputs;
  using detail::collect;

  bool window_ok = collect(d, "window", [&] {
    in.window = {parse_clock(c.window_start), parse_clock(c.window_end)};
    if (!(in.window.start < in.window.end) || in.window.end > kDay) {
      fail(ErrorCode::kDomain, "window must satisfy start < end <= 24:00:00");
    }
  });

  if (require_simulation) {
    auto const need = [&](std::optional<fs::path> const& p, char const* key) {
      if (!p) {
        d.push_back({std::string{"inputs."} + key, ErrorCode::kConfiguration,
                     "required to simulate"});
      }
    };
    need(c.gtfs_dir, "gtfs");
    need(c.network, "network");
    need(c.stop_edges, "stop_edges");
    need(c.car_od, "car_od");
    need(c.passenger_od, "passenger_od");
  }

  // transit feed
  if (c.gtfs_dir) {
    std::optional<std::chrono::year_month_day> date;
    if (!c.service_date) {
      d.push_back({"service_date", ErrorCode::kConfiguration, "required with a GTFS feed"});
    } else {
      collect(d, "service_date", [&] { date = parse_date(*c.service_date); });
    }
    bool files_ok = true;
    if (!fs::is_directory(*c.gtfs_dir)) {
      d.push_back({"inputs.gtfs", ErrorCode::kFeedIncomplete,
                   "feed directory " + c.gtfs_dir->string() + " does not exist"});
      files_ok = false;
    } else {
      for (auto const* f : {"stops.txt", "routes.txt", "trips.txt", "stop_times.txt",
                            "calendar.txt"}) {
        if (!fs::exists(*c.gtfs_dir / f)) {
          d.push_back({std::string{"gtfs/"} + f, ErrorCode::kFeedIncomplete,
                       std::string{"missing "} + f + " in " + c.gtfs_dir->string()});
          files_ok = false;
        }
      }
    }
    if (files_ok && date) {
      collect(d, "inputs.gtfs", [&] {
        auto s = gtfs::parse_feed(*c.gtfs_dir, *date);
        if (window_ok) {
          collect(d, "routes", [&] {
            s.runs = gtfs::runs_in_window(s, in.window, c.routes);
            in.schedule = std::move(s);
          });
        }
      });
    }
  }

  if (c.network) collect(d, "inputs.network", [&] { in.graph = load_network(*c.network); });
  if (c.stop_edges) {
    collect(d, "inputs.stop_edges", [&] { in.stops = read_stop_edges_csv(*c.stop_edges); });
  }
  if (in.stops && in.graph) {
    for (auto const& [stop, edge] : *in.stops) {
      if (!in.graph->edge_index(edge)) {
        d.push_back({"inputs.stop_edges", ErrorCode::kReferentialIntegrity,
                     "stop " + stop + " maps to unknown edge " + edge});
      }
    }
  }
  if (in.stops && in.schedule) {
    std::set<std::string> unmapped;
    for (auto const& run : in.schedule->runs) {
      for (auto const& ev : run.stop_events) {
        if (!in.stops->contains(ev.stop_id)) unmapped.insert(ev.stop_id);
      }
    }
    for (auto const& s : unmapped) {
      d.push_back({"inputs.stop_edges", ErrorCode::kConfiguration,
                   "stop " + s + " is served in the window but not mapped to an edge"});
    }
  }

  auto const load_od = [&](std::optional<fs::path> const& p, char const* key,
                           std::optional<ODMatrix>& slot) {
    if (!p) return;
    auto const subject = std::string{"inputs."} + key;
    if (collect(d, subject, [&] {
          auto od = read_od_csv(*p);
          od.validate();
          slot = std::move(od);
        }) &&
        in.graph) {
      detail::check_od_zones(d, subject, *slot, *in.graph);
    }
  };
  load_od(c.car_od, "car_od", in.car_od);
  load_od(c.passenger_od, "passenger_od", in.passenger_od);

  if (c.profile_file) {
    collect(d, "inputs.profile_file", [&] {
      auto p = read_profile_csv(*c.profile_file);
      p.validate();
      in.profile = std::move(p);
    });
  } else if (require_simulation || c.has_simulation_inputs()) {
    collect(d, "inputs.profile", [&] { in.profile = builtin_profile(c.profile_name); });
  }

  collect(d, "emissions", [&] {
    if (c.emissions.bin_width <= 0) fail(ErrorCode::kConfiguration, "bin_width_s must be positive");
    if (c.emissions.smoothing_bins < 1 || c.emissions.smoothing_bins % 2 == 0) {
      fail(ErrorCode::kConfiguration, "smoothing_bins must be a positive odd number");
    }
  });
  collect(d, "emissions.car", [&] {
    if (c.emissions.coefficients.car) c.emissions.coefficients.car->validate("car");
  });
  collect(d, "emissions.bus", [&] {
    if (c.emissions.coefficients.bus) c.emissions.coefficients.bus->validate("bus");
  });
  collect(d, "simulation", [&] {
    auto const& s = c.sim;
    if (s.cooldown < 0 || !(s.bpr_alpha >= 0) || !(s.bpr_beta > 0) || s.flow_window <= 0 ||
        !(s.dwell_min >= 0) || !(s.t_board >= 0) || !(s.t_alight >= 0)) {
      fail(ErrorCode::kConfiguration,
           "simulation parameters must be non-negative, with bpr_beta and flow_window_s positive");
    }
  });

  // baseline statistics: explicit values win, otherwise derived from inputs
  bool const fleet_ok = collect(d, "fleet", [&] { c.fleet.validate(); });
  auto const figure = [&](std::optional<double> given, char const* key, bool declared,
                          auto derive) -> std::optional<double> {
    if (given) return given;
    if (auto x = derive()) return x;
    if (!declared) {
      d.push_back({std::string{"baseline."} + key, ErrorCode::kConfiguration,
                   "not given and no input to derive it from"});
    }
    return std::nullopt;
  };
  auto const p0 = figure(c.p0, "P0", c.passenger_od.has_value(), [&]() -> std::optional<double> {
    if (in.passenger_od) return in.passenger_od->total();
    return std::nullopt;
  });
  auto const b0 = figure(c.b0, "B0", c.gtfs_dir.has_value(), [&]() -> std::optional<double> {
    if (in.schedule) return static_cast<double>(in.schedule->runs.size());
    return std::nullopt;
  });
  auto const c0 = figure(c.c0, "C0", c.car_od.has_value(), [&]() -> std::optional<double> {
    if (in.car_od) return in.car_od->total();
    return std::nullopt;
  });
  if (c.b0 && in.schedule && *c.b0 != static_cast<double>(in.schedule->runs.size())) {
    d.push_back({"baseline.B0", ErrorCode::kReferentialIntegrity,
                 "B0 = " + csv::shortest(*c.b0) + " but the feed has " +
                     std::to_string(in.schedule->runs.size()) + " runs in the window"});
  }
  if (p0 && b0 && c0 && fleet_ok) {
    if (collect(d, "baseline", [&] { in.baseline = derive_baseline(*p0, *b0, *c0, c.fleet); })) {
      for (auto const& s : c.scenarios) {
        collect(d, "scenario " + label(s), [&] { apply_scenario(*in.baseline, s, c.fleet); });
      }
    }
  }
  if (in.car_od && c0) {
    collect(d, "inputs.car_od", [&] { calibrate_total(*in.car_od, *c0); });
  }
  if (in.passenger_od && p0) {
    collect(d, "inputs.passenger_od", [&] { calibrate_total(*in.passenger_od, *p0); });
  }
  return v;
}

// --- outputs ------------------------------------------------------------------

// Outputs are written under a staging directory inside `out` and moved into
// place by commit(); a command that fails leaves no partial files behind.
class StagedOutput {
 public:
  explicit StagedOutput(fs::path out) : out_{std::move(out)} {
    fs::create_directories(out_);
    staging_ = out_ / (".staging-" + std::to_string(::getpid()));
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }
  ~StagedOutput() {
    std::error_code ec;
    fs::remove_all(staging_, ec);
  }
  StagedOutput(StagedOutput const&) = delete;
  StagedOutput& operator=(StagedOutput const&) = delete;

  fs::path const& dir() const { return staging_; }
  fs::path file(fs::path const& rel) const {
    auto p = staging_ / rel;
    fs::create_directories(p.parent_path());
    return p;
  }

  // Relative paths of every staged file, sorted.
  std::vector<fs::path> files() const {
    std::vector<fs::path> out;
    for (auto const& e : fs::recursive_directory_iterator(staging_)) {
      if (e.is_regular_file()) out.push_back(e.path().lexically_relative(staging_));
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  void commit() {
    for (auto const& rel : files()) {
      auto const target = out_ / rel;
      fs::create_directories(target.parent_path());
      fs::rename(staging_ / rel, target);
    }
    fs::remove_all(staging_);
  }

 private:
  fs::path out_;
  fs::path staging_;
};

inline void write_json(nlohmann::json const& j, fs::path const& path) {
  std::ofstream out{path, std::ios::binary | std::ios::trunc};
  out << j.dump(2) << '\n';
  out.close();
  if (!out) fail(ErrorCode::kIo, "failed writing " + path.string());
}

inline void write_text(std::string const& text, fs::path const& path) {
  std::ofstream out{path, std::ios::binary | std::ios::trunc};
  out << text;
  out.close();
  if (!out) fail(ErrorCode::kIo, "failed writing " + path.string());
}

using StageTimings = std::vector<std::pair<std::string, double>>;

// Runs one pipeline stage, recording its wall time and prefixing any error
// with the stage name.
template <typename F>
auto run_stage(std::string const& name, StageTimings& timings, F&& f) {
  auto const t0 = std::chrono::steady_clock::now();
  auto const done = [&] {
    timings.emplace_back(
        name, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                  .count());
  };
  try {
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      done();
    } else {
      auto r = f();
      done();
      return r;
    }
  } catch (ValidationFailure const&) {
    throw;
  } catch (Error const& e) {
    throw Error{e.code(), "stage " + name + ": " + detail::detail_of(e)};
  } catch (std::exception const& e) {
    throw Error{ErrorCode::kIo, "stage " + name + ": " + e.what()};
  }
}

// --- stages -------------------------------------------------------------------

inline Inputs require_valid(PipelineConfig const& c, bool require_simulation) {
  auto v = validate(c, require_simulation);
  if (!v.ok()) throw ValidationFailure{std::move(v.diagnostics)};
  return std::move(v.inputs);
}

// Scenario keys used for file names: base, s1, s2, ...
inline std::string scenario_key(std::size_t i) { return i == 0 ? "base" : "s" + std::to_string(i); }

inline std::vector<ScenarioResult> scenario_rows(PipelineConfig const& c,
                                                 BaselineStats const& baseline) {
  std::vector<ScenarioResult> rows{baseline_row(baseline, c.fleet)};
  for (auto const& s : c.scenarios) rows.push_back(apply_scenario(baseline, s, c.fleet));
  return rows;
}

inline nlohmann::json scenario_table_json(std::vector<ScenarioResult> const& rows,
                                          BaselineStats const& baseline) {
  nlohmann::json out{{"baseline", to_json(baseline)}, {"rows", nlohmann::json::array()}};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto j = to_json(rows[i]);
    j["key"] = scenario_key(i);
    out["rows"].push_back(std::move(j));
  }
  return out;
}

inline void write_scenario_table(std::vector<ScenarioResult> const& rows,
                                 BaselineStats const& baseline, fs::path const& dir) {
  csv::Writer w{dir / "scenario_table.csv"};
  w.row(scenario_table_columns());
  for (auto const& r : rows) w.row(scenario_table_cells(r, baseline));
  w.close();
  write_json(scenario_table_json(rows, baseline), dir / "scenario_table.json");
}

struct Demand {
  std::vector<std::string> keys;
  std::vector<TripTable> tables;  // base first
};

inline Demand build_demand(Inputs const& in,
                           std::vector<ScenarioResult> const& rows, std::uint64_t seed) {
  auto const& b = *in.baseline;
  auto const car_od = calibrate_total(*in.car_od, b.car_trips);
  auto const pax_od = calibrate_total(*in.passenger_od, b.bus_person_trips);
  auto base = generate_trips(car_od, *in.profile, *in.graph, TripMode::kCar, Rng::derive(seed, 1));
  auto pax = generate_trips(pax_od, *in.profile, *in.graph, TripMode::kBusPassenger,
                            Rng::derive(seed, 2));
  base.trips.insert(base.trips.end(), std::make_move_iterator(pax.trips.begin()),
                    std::make_move_iterator(pax.trips.end()));
  Demand d;
  d.keys.push_back("base");
  d.tables.push_back(std::move(base));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    d.keys.push_back(scenario_key(i));
    d.tables.push_back(apply_modeshift_to_trips(d.tables.front(), rows[i], *in.passenger_od,
                                                *in.profile, *in.graph,
                                                Rng::derive(seed, 10 + i)));
  }
  return d;
}

inline SimParams sim_params(PipelineConfig const& c, Inputs const& in) {
  auto p = c.sim;
  p.admit = in.window;
  p.bus_capacity = static_cast<int>(std::floor(c.fleet.bus_capacity * c.fleet.max_load + 1e-9));
  return p;
}

// Simulates every table concurrently; each run is single-threaded and shares
// only immutable inputs.
inline std::vector<SimOutput> simulate_all(PipelineConfig const& c, Inputs const& in,
                                           Router const& router, std::vector<TripTable> const& tables,
                                           std::uint64_t seed) {
  auto const params = sim_params(c, in);
  std::vector<std::future<SimOutput>> jobs;
  for (std::size_t i = 0; i < tables.size(); ++i) {
    jobs.push_back(std::async(std::launch::async, [&, i] {
      return run_day(router, tables[i], *in.schedule, *in.stops, params,
                     Rng::derive(seed, 100 + i));
    }));
  }
  std::vector<SimOutput> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

inline TimeWindow series_horizon(PipelineConfig const& c, Inputs const& in) {
  return {in.window.start, in.window.end + c.sim.cooldown};
}

inline DailySeries emission_series(PipelineConfig const& c, Inputs const& in, SimOutput const& sim,
                                   EmissionLedger* keep = nullptr) {
  auto ledger = integrate(sim, c.emissions.coefficients, c.emissions.bin_width);
  auto s = aggregate(ledger, c.emissions.smoothing_bins, series_horizon(c, in));
  if (keep) *keep = std::move(ledger);
  return s;
}

inline nlohmann::json counts_json(ModeCounts const& m) {
  return {{"not_admitted", m.not_admitted}, {"departed", m.departed}, {"arrived", m.arrived},
          {"unfinished", m.unfinished},     {"unserved", m.unserved}};
}

inline nlohmann::json sim_summary(SimOutput const& sim) {
  double load = 0, wait = 0;
  std::size_t visits = 0, waits = 0;
  for (auto const& k : sim.bus_kpis) {
    for (auto const& s : k.stops) load += s.load_factor, ++visits;
    for (auto const& w : k.waits) wait += static_cast<double>(w.wait()), ++waits;
  }
  return {{"cars", counts_json(sim.cars)},
          {"buses", counts_json(sim.buses)},
          {"passengers", counts_json(sim.passengers)},
          {"segments", sim.segments.size()},
          {"mean_load_factor", visits ? load / static_cast<double>(visits) : 0.0},
          {"mean_wait_s", waits ? wait / static_cast<double>(waits) : 0.0}};
}

inline void write_sim_outputs(Inputs const& in, SimOutput const& sim,
                              DailySeries const& series, EmissionLedger const* ledger,
                              StagedOutput const& out, std::string const& key) {
  write_segments_csv(sim, *in.graph, out.file("sim/" + key + "/segments.csv"));
  write_bus_kpis_csv(sim, out.file("sim/" + key + "/bus_kpis.csv"));
  write_waits_csv(sim, out.file("sim/" + key + "/waits.csv"));
  write_json(sim_summary(sim), out.file("sim/" + key + "/summary.json"));
  if (ledger) write_ledger_csv(*ledger, sim, *in.graph, out.file("sim/" + key + "/ledger.csv"));
  write_series_csv(series, out.file("series/series_" + key + ".csv"));
}

// Builds the comparison report, plot data, chart and summary from the series
// and scenario table found in `dir`.
inline std::vector<report::Entry> write_report(PipelineConfig const& c, fs::path const& dir,
                                               fs::path const& target) {
  auto const table_path = dir / "scenario_table.json";
  if (!fs::exists(table_path)) fail(ErrorCode::kIo, "missing " + table_path.string());
  auto const table = nlohmann::json::parse(csv::read_file(table_path));
  std::vector<report::Entry> entries;
  for (auto const& row : table["rows"]) {
    auto const key = row["key"].get<std::string>();
    auto const path = dir / "series" / ("series_" + key + ".csv");
    if (!fs::exists(path)) fail(ErrorCode::kIo, "missing " + path.string());
    entries.push_back({key, row["scenario"].get<std::string>(),
                       read_series_csv(path, c.emissions.smoothing_bins),
                       row["reduction_total_basis"].get<double>()});
  }
  if (entries.empty()) fail(ErrorCode::kEmptySeries, "scenario table has no rows");
  fs::create_directories(target);
  write_json(report::comparison_json(entries), target / "comparison.json");
  report::write_plot_csv(entries, target / "series.csv");
  write_text(report::svg_chart(entries, c.name + ": daily CO2"), target / "chart.svg");
  write_text(report::markdown(c.name, entries, table), target / "report.md");
  return entries;
}

// --- commands -----------------------------------------------------------------

inline std::vector<Diagnostic> cmd_validate(PipelineConfig const& c, fs::path const& out) {
  auto const v = validate(c, false);
  nlohmann::json j{{"config", c.name}, {"diagnostics", nlohmann::json::array()}};
  for (auto const& d : v.diagnostics) j["diagnostics"].push_back(to_json(d));
  fs::create_directories(out);
  write_json(j, out / "diagnostics.json");
  return v.diagnostics;
}

inline void cmd_scenario_table(PipelineConfig const& c, fs::path const& out) {
  auto const in = require_valid(c, false);
  StagedOutput staged{out};
  write_scenario_table(scenario_rows(c, *in.baseline), *in.baseline, staged.dir());
  staged.commit();
}

inline void cmd_gen_demand(PipelineConfig const& c, fs::path const& out, std::uint64_t seed) {
  auto const in = require_valid(c, true);
  StagedOutput staged{out};
  auto const rows = scenario_rows(c, *in.baseline);
  auto const demand = build_demand(in, rows, seed);
  for (std::size_t i = 0; i < demand.keys.size(); ++i) {
    write_trips_csv(demand.tables[i], staged.file("demand/trips_" + demand.keys[i] + ".csv"));
  }
  staged.commit();
}

// Simulates the baseline and every scenario, or just `only` (a key such as
// "base" or "s2"), and writes their exports and emission series.
inline void cmd_simulate(PipelineConfig const& c, fs::path const& out, std::uint64_t seed,
                         std::optional<std::string> const& only = std::nullopt) {
  auto const in = require_valid(c, true);
  StagedOutput staged{out};
  auto const rows = scenario_rows(c, *in.baseline);
  auto demand = build_demand(in, rows, seed);
  Router const router{*in.graph};
  std::vector<SimOutput> sims;
  if (only) {
    auto const it = std::find(demand.keys.begin(), demand.keys.end(), *only);
    if (it == demand.keys.end()) fail(ErrorCode::kConfiguration, "no scenario with key " + *only);
    auto const k = static_cast<std::size_t>(it - demand.keys.begin());
    sims.push_back(run_day(router, demand.tables[k], *in.schedule, *in.stops, sim_params(c, in),
                           Rng::derive(seed, 100 + k)));
    demand.keys = {demand.keys[k]};
  } else {
    sims = simulate_all(c, in, router, demand.tables, seed);
  }
  for (std::size_t i = 0; i < sims.size(); ++i) {
    EmissionLedger ledger;
    auto const series = emission_series(c, in, sims[i], c.write_ledger ? &ledger : nullptr);
    write_sim_outputs(in, sims[i], series, c.write_ledger ? &ledger : nullptr, staged,
                      demand.keys[i]);
  }
  staged.commit();
}

inline void cmd_report(PipelineConfig const& c, fs::path const& out) {
  StagedOutput staged{out};
  write_report(c, out, staged.dir());
  staged.commit();
}

struct PipelineResult {
  BaselineStats baseline;
  std::vector<ScenarioResult> rows;
  std::vector<report::Entry> series;  // as re-read from the written files
  std::vector<nlohmann::json> summaries;
  nlohmann::json manifest;
};

inline nlohmann::json input_digests(PipelineConfig const& c) {
  auto const dir = c.source.parent_path();
  nlohmann::json out = nlohmann::json::object();
  auto const add = [&](fs::path const& p) {
    out[p.lexically_relative(dir).generic_string()] = sha256_file(p);
  };
  for (auto const& p : {c.network, c.stop_edges, c.car_od, c.passenger_od, c.profile_file}) {
    if (p) add(*p);
  }
  if (c.gtfs_dir) {
    std::vector<fs::path> files;
    for (auto const& e : fs::directory_iterator(*c.gtfs_dir)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (auto const& f : files) add(f);
  }
  return out;
}

// validate -> scenario table -> demand -> simulation -> emissions -> report,
// followed by a manifest of digests and timings.
inline PipelineResult run_pipeline(PipelineConfig const& c, fs::path const& out,
                                   std::uint64_t seed) {
  StageTimings timings;
  auto const in = run_stage("validate", timings, [&] { return require_valid(c, true); });
  StagedOutput staged{out};
  PipelineResult result;
  result.baseline = *in.baseline;

  run_stage("scenario-table", timings, [&] {
    result.rows = scenario_rows(c, *in.baseline);
    write_scenario_table(result.rows, *in.baseline, staged.dir());
  });
  auto const demand = run_stage("gen-demand", timings, [&] {
    auto d = build_demand(in, result.rows, seed);
    for (std::size_t i = 0; i < d.keys.size(); ++i) {
      write_trips_csv(d.tables[i], staged.file("demand/trips_" + d.keys[i] + ".csv"));
    }
    return d;
  });
  Router const router{*in.graph};
  auto const sims = run_stage("simulate", timings, [&] {
    return simulate_all(c, in, router, demand.tables, seed);
  });
  run_stage("emissions", timings, [&] {
    for (std::size_t i = 0; i < sims.size(); ++i) {
      EmissionLedger ledger;
      auto const series = emission_series(c, in, sims[i], c.write_ledger ? &ledger : nullptr);
      write_sim_outputs(in, sims[i], series, c.write_ledger ? &ledger : nullptr, staged,
                        demand.keys[i]);
      result.summaries.push_back(sim_summary(sims[i]));
    }
  });
  result.series = run_stage("report", timings,
                            [&] { return write_report(c, staged.dir(), staged.dir()); });

  run_stage("manifest", timings, [&] {
    nlohmann::json outputs = nlohmann::json::object();
    for (auto const& rel : staged.files()) {
      outputs[rel.generic_string()] = sha256_file(staged.dir() / rel);
    }
    nlohmann::json stage_ms = nlohmann::json::object();
    for (auto const& [name, ms] : timings) stage_ms[name] = ms;
    result.manifest = {
        {"tool", "modeshift"},
        {"version", kVersion},
        {"formats",
         {{"scenario_table", 1}, {"trips", 1}, {"segments", 1}, {"bus_kpis", 1},
          {"waits", 1}, {"series", 1}, {"comparison", 1}}},
        {"config_sha256", sha256_file(c.source)},
        {"resolved_config", resolved_json(c)},
        {"seed", seed},
        {"inputs", input_digests(c)},
        {"outputs", outputs},
        {"timings_ms", stage_ms},
    };
    write_json(result.manifest, staged.dir() / "manifest.json");
  });
  staged.commit();
  return result;
}

}  // namespace modeshift
