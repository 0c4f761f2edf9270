#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "modeshift/clock.hpp"
#include "modeshift/csv.hpp"
#include "modeshift/error.hpp"
#include "modeshift/network.hpp"
#include "modeshift/rng.hpp"

namespace modeshift {

// Daily person/vehicle trips between zones, row-major.
struct ODMatrix {
  std::vector<std::string> zones;
  std::vector<double> trips;

  std::size_t size() const { return zones.size(); }
  double& at(std::size_t i, std::size_t j) { return trips[i * zones.size() + j]; }
  double at(std::size_t i, std::size_t j) const { return trips[i * zones.size() + j]; }

  double total() const {
    // Fixed row-major summation order keeps totals reproducible.
    double s = 0.0;
    for (auto const v : trips) s += v;
    return s;
  }

  void validate() const {
    if (trips.size() != zones.size() * zones.size()) {
      fail(ErrorCode::kFormat, "OD matrix must be square");
    }
    for (auto const v : trips) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        fail(ErrorCode::kDomain, "OD entries must be finite and non-negative");
      }
    }
  }

  friend bool operator==(ODMatrix const&, ODMatrix const&) = default;
};

inline constexpr std::size_t kProfileBins = 96;

struct TemporalProfile {
  std::string name;
  std::array<double, kProfileBins> weights{};

  static constexpr Seconds bin_start(std::size_t b) {
    return static_cast<Seconds>(b) * kBinWidth15Min;
  }

  void validate() const {
    double s = 0.0;
    for (auto const w : weights) {
      if (!(w >= 0.0)) fail(ErrorCode::kDomain, "profile weights must be non-negative");
      s += w;
    }
    if (std::abs(s - 1.0) > 1e-9) {
      fail(ErrorCode::kDomain, "profile " + name + " weights sum to " +
                                   csv::shortest(s) + ", expected 1");
    }
  }
};

enum class TripMode { kCar, kBusPassenger };

constexpr std::string_view to_string(TripMode m) {
  return m == TripMode::kCar ? "car" : "bus_passenger";
}

inline TripMode parse_trip_mode(std::string_view s) {
  if (s == "car") return TripMode::kCar;
  if (s == "bus_passenger") return TripMode::kBusPassenger;
  fail(ErrorCode::kFormat, "unknown trip mode '" + std::string{s} + "'");
}

struct Trip {
  std::string trip_id;
  TripMode mode{TripMode::kCar};
  Seconds depart{};
  std::string origin_edge;
  std::string dest_edge;
  std::string origin_zone;
  std::string dest_zone;
  friend bool operator==(Trip const&, Trip const&) = default;
};

struct TripTable {
  std::vector<Trip> trips;

  std::size_t count(TripMode m) const {
    return static_cast<std::size_t>(std::count_if(
        trips.begin(), trips.end(), [&](auto const& t) { return t.mode == m; }));
  }
  friend bool operator==(TripTable const&, TripTable const&) = default;
};

// Scales every cell so the matrix sums to `target_total`. A matrix already
// within 1e-12 (relative) of the target is returned unchanged, which makes
// calibration idempotent despite rounding in the rescaled sum.
inline ODMatrix calibrate_total(ODMatrix od, double target_total) {
  od.validate();
  if (!(target_total >= 0.0)) {
    fail(ErrorCode::kDomain, "calibration target must be non-negative");
  }
  auto const current = od.total();
  if (std::abs(current - target_total) <= 1e-12 * std::max(1.0, target_total)) return od;
  if (current <= 0.0) {
    if (target_total == 0.0) return od;
    fail(ErrorCode::kDegenerateDemand,
         "cannot scale an all-zero OD matrix to a positive total");
  }
  auto const factor = target_total / current;
  for (auto& v : od.trips) v *= factor;
  return od;
}

// Integer apportionment preserving round(sum): floors first, then one extra
// unit to the largest fractional remainders (earlier index wins ties).
inline std::vector<std::int64_t> largest_remainder(std::vector<double> const& values) {
  std::vector<std::int64_t> out(values.size());
  double total = 0.0;
  std::int64_t assigned = 0;
  std::vector<double> frac(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    total += values[i];
    auto const f = std::floor(values[i]);
    out[i] = static_cast<std::int64_t>(f);
    frac[i] = values[i] - f;
    assigned += out[i];
  }
  auto remaining = std::llround(total) - assigned;
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t k = 0; k < order.size() && remaining > 0; ++k, --remaining) {
    ++out[order[k]];
  }
  return out;
}

inline TemporalProfile builtin_profile(std::string_view name) {
  TemporalProfile p;
  p.name = std::string{name};
  auto const gauss = [](double h, double mu, double sigma) {
    return std::exp(-0.5 * (h - mu) * (h - mu) / (sigma * sigma));
  };
  auto const in_service = [](std::size_t b) { return b >= 20 && b < 84; };  // 05:00-21:00

  if (name == "uniform") {
    p.weights.fill(1.0 / kProfileBins);
    return p;
  }
  if (name == "residential_bimodal") {
    for (std::size_t b = 0; b < kProfileBins; ++b) {
      if (!in_service(b)) continue;
      auto const h = static_cast<double>(b) / 4.0;
      p.weights[b] = 0.12 + 1.0 * gauss(h, 7.5, 0.75) + 0.9 * gauss(h, 17.0, 0.9);
    }
  } else if (name == "mixed_use") {
    for (std::size_t b = 0; b < kProfileBins; ++b) {
      if (!in_service(b)) continue;
      auto const h = static_cast<double>(b) / 4.0;
      double w = 1.0;
      if (h < 7.0) {
        w = 0.35 + 0.65 * (h - 5.0) / 2.0;  // morning ramp
      } else if (h >= 19.0) {
        w = 1.0 - 0.55 * (h - 19.0) / 2.0;  // evening taper
      }
      w += 0.2 * gauss(h, 8.5, 1.0) + 0.2 * gauss(h, 17.5, 1.0);
      p.weights[b] = w;
    }
  } else {
    fail(ErrorCode::kUnknownProfile, "unknown profile '" + std::string{name} + "'");
  }
  auto const s = std::accumulate(p.weights.begin(), p.weights.end(), 0.0);
  for (auto& w : p.weights) w /= s;
  return p;
}

namespace detail {

inline std::vector<EdgeIndex> const& zone_edges_or_fail(NetworkGraph const& g,
                                                       std::string const& zone) {
  auto const z = g.zone_index(zone);
  if (!z) {
    fail(ErrorCode::kReferentialIntegrity, "zone " + zone + " is not in the network");
  }
  auto const& edges = g.zone_edges(*z);
  if (edges.empty()) {
    fail(ErrorCode::kReferentialIntegrity, "zone " + zone + " has no edges");
  }
  return edges;
}

inline std::string trip_id(std::string_view prefix, std::size_t n) {
  auto digits = std::to_string(n);
  if (digits.size() < 6) digits.insert(0, 6 - digits.size(), '0');
  return std::string{prefix} + digits;
}

}  // namespace detail

inline std::array<double, kProfileBins> cumulative(TemporalProfile const& profile) {
  std::array<double, kProfileBins> cdf{};
  std::partial_sum(profile.weights.begin(), profile.weights.end(), cdf.begin());
  return cdf;
}

// Departure-bin sampler over the profile CDF. Quantiles follow the additive
// golden-ratio sequence from a seeded random start: every draw is marginally
// distributed as the profile, and the bin histogram of n draws deviates from
// the weights by O(log n / n) instead of O(1 / sqrt(n)).
class DepartureSampler {
 public:
  DepartureSampler(TemporalProfile const& profile, Rng& rng)
      : cdf_{cumulative(profile)}, phase_{rng.uniform()} {}

  std::size_t next_bin() {
    phase_ += 0.6180339887498948482;
    if (phase_ >= 1.0) phase_ -= 1.0;
    auto const u = phase_ * cdf_.back();
    auto const bin = static_cast<std::size_t>(
        std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
    return std::min(bin, kProfileBins - 1);
  }

 private:
  std::array<double, kProfileBins> cdf_;
  double phase_;
};

// Draws departure, origin edge and destination edge for `count` trips of
// one OD cell and appends them to `out`. Shared by baseline generation and
// mode-shift passenger injection.
inline void sample_cell_trips(NetworkGraph const& graph, DepartureSampler& bins,
                              std::string const& origin_zone,
                              std::string const& dest_zone, std::int64_t count,
                              TripMode mode, std::string_view id_prefix, Rng& rng,
                              TripTable& out) {
  auto const& oe = detail::zone_edges_or_fail(graph, origin_zone);
  auto const& de = detail::zone_edges_or_fail(graph, dest_zone);
  for (std::int64_t k = 0; k < count; ++k) {
    auto const b = bins.next_bin();
    Trip t;
    t.trip_id = detail::trip_id(id_prefix, out.trips.size() + 1);
    t.mode = mode;
    t.depart = TemporalProfile::bin_start(b) + static_cast<Seconds>(rng.below(kBinWidth15Min));
    t.origin_edge = graph.edge(oe[rng.below(oe.size())]).edge_id;
    t.dest_edge = graph.edge(de[rng.below(de.size())]).edge_id;
    t.origin_zone = origin_zone;
    t.dest_zone = dest_zone;
    out.trips.push_back(std::move(t));
  }
}

inline TripTable generate_trips(ODMatrix const& od, TemporalProfile const& profile,
                                NetworkGraph const& graph, TripMode mode,
                                std::uint64_t seed, std::string_view id_prefix = {}) {
  od.validate();
  profile.validate();
  auto const prefix = id_prefix.empty()
                          ? std::string{mode == TripMode::kCar ? "car" : "pax"}
                          : std::string{id_prefix};
  for (auto const& z : od.zones) detail::zone_edges_or_fail(graph, z);

  auto const counts = largest_remainder(od.trips);
  Rng rng{seed};
  DepartureSampler bins{profile, rng};
  TripTable out;
  out.trips.reserve(static_cast<std::size_t>(
      std::accumulate(counts.begin(), counts.end(), std::int64_t{0})));
  auto const n = od.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      sample_cell_trips(graph, bins, od.zones[i], od.zones[j], counts[i * n + j], mode,
                        prefix, rng, out);
    }
  }
  return out;
}

// --- file formats ---------------------------------------------------------

inline ODMatrix read_od_csv(std::filesystem::path const& path) {
  auto const rows = csv::parse(csv::read_file(path));
  auto const name = path.filename().string();
  if (rows.empty()) fail(ErrorCode::kFormat, name + ": empty OD file");
  ODMatrix od;
  for (std::size_t c = 1; c < rows[0].size(); ++c) {
    od.zones.emplace_back(csv::trim(rows[0][c]));
  }
  if (rows.size() != od.zones.size() + 1) {
    fail(ErrorCode::kFormat, name + ": expected " + std::to_string(od.zones.size()) +
                                 " data rows, found " + std::to_string(rows.size() - 1));
  }
  od.trips.assign(od.zones.size() * od.zones.size(), 0.0);
  for (std::size_t i = 0; i < od.zones.size(); ++i) {
    auto const& r = rows[i + 1];
    auto const where = name + " row " + std::to_string(i + 2);
    if (r.size() != od.zones.size() + 1) {
      fail(ErrorCode::kFormat, where + ": wrong number of cells");
    }
    if (csv::trim(r[0]) != od.zones[i]) {
      fail(ErrorCode::kFormat, where + ": row label '" + r[0] +
                                   "' does not match column '" + od.zones[i] + "'");
    }
    for (std::size_t j = 0; j < od.zones.size(); ++j) {
      od.at(i, j) = csv::to_double(r[j + 1], where);
    }
  }
  od.validate();
  return od;
}

inline void write_od_csv(ODMatrix const& od, std::filesystem::path const& path) {
  csv::Writer w{path};
  std::vector<std::string> header{"zone"};
  header.insert(header.end(), od.zones.begin(), od.zones.end());
  w.row(header);
  for (std::size_t i = 0; i < od.size(); ++i) {
    std::vector<std::string> r{od.zones[i]};
    for (std::size_t j = 0; j < od.size(); ++j) r.push_back(csv::shortest(od.at(i, j)));
    w.row(r);
  }
  w.close();
}

inline TemporalProfile read_profile_csv(std::filesystem::path const& path) {
  auto rows = csv::parse(csv::read_file(path));
  auto const name = path.filename().string();
  if (!rows.empty() && !rows[0].empty()) {
    auto const first = csv::trim(rows[0][0]);
    if (!first.empty() && !(first[0] >= '0' && first[0] <= '9')) {
      rows.erase(rows.begin());  // header
    }
  }
  if (rows.size() != kProfileBins) {
    fail(ErrorCode::kFormat, name + ": expected 96 rows, found " +
                                 std::to_string(rows.size()));
  }
  TemporalProfile p;
  p.name = path.stem().string();
  for (std::size_t b = 0; b < kProfileBins; ++b) {
    auto const where = name + " bin " + std::to_string(b);
    if (rows[b].size() < 2) fail(ErrorCode::kFormat, where + ": expected 2 cells");
    if (csv::to_int(rows[b][0], where) != TemporalProfile::bin_start(b)) {
      fail(ErrorCode::kFormat, where + ": bin_start_seconds must be " +
                                   std::to_string(TemporalProfile::bin_start(b)));
    }
    p.weights[b] = csv::to_double(rows[b][1], where);
  }
  p.validate();
  return p;
}

inline void write_profile_csv(TemporalProfile const& p, std::filesystem::path const& path) {
  csv::Writer w{path};
  w.row("bin_start_seconds", "weight");
  for (std::size_t b = 0; b < kProfileBins; ++b) {
    w.row(TemporalProfile::bin_start(b), csv::shortest(p.weights[b]));
  }
  w.close();
}

inline void write_trips_csv(TripTable const& table, std::filesystem::path const& path) {
  csv::Writer w{path};
  w.row("trip_id", "mode", "depart_s", "origin_edge", "dest_edge", "origin_zone",
        "dest_zone");
  for (auto const& t : table.trips) {
    w.row(t.trip_id, to_string(t.mode), t.depart, t.origin_edge, t.dest_edge,
          t.origin_zone, t.dest_zone);
  }
  w.close();
}

inline TripTable read_trips_csv(std::filesystem::path const& path) {
  auto const table = csv::Table::load(path);
  auto const c_id = table.require("trip_id");
  auto const c_mode = table.require("mode");
  auto const c_dep = table.require("depart_s");
  auto const c_oe = table.require("origin_edge");
  auto const c_de = table.require("dest_edge");
  auto const c_oz = table.require("origin_zone");
  auto const c_dz = table.require("dest_zone");
  TripTable out;
  out.trips.reserve(table.size());
  for (std::size_t r = 0; r < table.size(); ++r) {
    auto const where = table.name() + " row " + std::to_string(r + 2);
    Trip t;
    t.trip_id = std::string{table.cell(r, c_id)};
    t.mode = parse_trip_mode(table.cell(r, c_mode));
    t.depart = csv::to_int(table.cell(r, c_dep), where);
    if (t.depart < 0 || t.depart >= kDay) {
      fail(ErrorCode::kDomain, where + ": depart_s outside [0, 86400)");
    }
    t.origin_edge = std::string{table.cell(r, c_oe)};
    t.dest_edge = std::string{table.cell(r, c_de)};
    t.origin_zone = std::string{table.cell(r, c_oz)};
    t.dest_zone = std::string{table.cell(r, c_dz)};
    out.trips.push_back(std::move(t));
  }
  return out;
}

}  // namespace modeshift
