#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "modeshift/clock.hpp"
#include "modeshift/csv.hpp"
#include "modeshift/error.hpp"
#include "modeshift/meso_sim.hpp"
#include "modeshift/network.hpp"

namespace modeshift {

// CO2 rate in g/s as a quadratic in mean speed v (m/s):
//   rate(v) = c0 + c1 v + c2 v^2
// so a segment of length L at speed v emits c0 L / v + c1 L + c2 L v grams.
struct EmissionCoefficients {
  double c0{};  // g/s
  double c1{};  // g/m
  double c2{};  // g s/m^2

  static constexpr double kMaxSpeed = 60.0;

  double rate(double v) const { return c0 + c1 * v + c2 * v * v; }

  void validate(std::string_view what = "coefficients") const {
    auto lowest = std::min(rate(0.0), rate(kMaxSpeed));
    if (c2 > 0) {
      auto const vertex = -c1 / (2 * c2);
      if (vertex > 0 && vertex < kMaxSpeed) lowest = std::min(lowest, rate(vertex));
    }
    if (!(lowest >= 0.0) || !std::isfinite(c0 + c1 + c2)) {
      fail(ErrorCode::kConfiguration,
           std::string{what} + ": CO2 rate is negative somewhere on [0, 60] m/s");
    }
  }
};

struct ClassCoefficients {
  std::optional<EmissionCoefficients> car{EmissionCoefficients{0.6, 0.12, 0.003}};
  std::optional<EmissionCoefficients> bus{EmissionCoefficients{2.0, 0.9, 0.015}};

  EmissionCoefficients const& of(VehicleClass c) const {
    auto const& slot = c == VehicleClass::kCar ? car : bus;
    if (!slot) {
      fail(ErrorCode::kConfiguration,
           "no emission coefficients for class " + std::string{to_string(c)});
    }
    return *slot;
  }
};

struct LedgerEntry {
  std::uint32_t vehicle{};
  VehicleClass cls{};
  EdgeIndex edge{};
  Seconds bin_start{};
  double grams{};
};

struct EmissionLedger {
  Seconds bin_width{60};
  std::vector<LedgerEntry> entries;

  double total() const {
    double s = 0.0;
    for (auto const& e : entries) s += e.grams;
    return s;
  }
};

inline Seconds floor_to(Seconds t, Seconds width) {
  auto q = t / width;
  if (t % width != 0 && t < 0) --q;
  return q * width;
}

// Each segment emits rate(mean_speed) * duration grams, spread over the bins
// it overlaps in proportion to the overlap. The last bin of a segment takes
// the remainder so a segment's parts sum to its closed-form total.
inline EmissionLedger integrate(SimOutput const& sim, ClassCoefficients const& coefficients,
                                Seconds bin_width = 60) {
  if (bin_width <= 0) fail(ErrorCode::kConfiguration, "bin width must be positive");
  if (coefficients.car) coefficients.car->validate("car");
  if (coefficients.bus) coefficients.bus->validate("bus");

  EmissionLedger ledger;
  ledger.bin_width = bin_width;
  ledger.entries.reserve(sim.segments.size() * 2);
  for (auto const& seg : sim.segments) {
    auto const cls = sim.vehicles[seg.vehicle].cls;
    auto const& c = coefficients.of(cls);
    auto const duration = static_cast<double>(seg.exit - seg.enter);
    if (duration <= 0) continue;
    auto const grams = c.rate(seg.mean_speed) * duration;
    auto bin = floor_to(seg.enter, bin_width);
    double assigned = 0.0;
    while (true) {
      auto const next = bin + bin_width;
      if (next >= seg.exit) {
        ledger.entries.push_back({seg.vehicle, cls, seg.edge, bin, grams - assigned});
        break;
      }
      auto const overlap = static_cast<double>(next - std::max(bin, seg.enter));
      auto const part = grams * overlap / duration;
      ledger.entries.push_back({seg.vehicle, cls, seg.edge, bin, part});
      assigned += part;
      bin = next;
    }
  }
  return ledger;
}

struct DailySeries {
  Seconds start{};
  Seconds bin_width{60};
  std::vector<double> values;    // grams per bin
  std::vector<double> smoothed;  // centered moving average
  double total{};
  Seconds peak_time{};
  double peak_value{};

  Seconds end() const { return start + bin_width * static_cast<Seconds>(values.size()); }
  std::size_t bin_of(Seconds t) const { return static_cast<std::size_t>((t - start) / bin_width); }
};

// Centered moving average over `window` bins; bins beyond the series count
// as zero so the divisor is constant.
inline std::vector<double> moving_average(std::vector<double> const& values, int window) {
  if (window < 1 || window % 2 == 0) {
    fail(ErrorCode::kConfiguration, "smoothing window must be a positive odd bin count");
  }
  auto const half = window / 2;
  auto const n = static_cast<long>(values.size());
  std::vector<double> out(values.size());
  for (long i = 0; i < n; ++i) {
    double s = 0.0;
    for (long j = std::max(0L, i - half); j <= std::min(n - 1, i + half); ++j) s += values[j];
    out[static_cast<std::size_t>(i)] = s / window;
  }
  return out;
}

// Highest smoothed bin. Ties on the smoothed value go to the larger raw
// value, so a lone spike peaks at its own bin, then to the earlier bin.
inline std::size_t peak_bin(std::vector<double> const& values,
                            std::vector<double> const& smoothed) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < smoothed.size(); ++i) {
    if (smoothed[i] > smoothed[best] ||
        (smoothed[i] == smoothed[best] && values[i] > values[best])) {
      best = i;
    }
  }
  return best;
}

inline DailySeries make_series(Seconds start, Seconds bin_width, std::vector<double> values,
                               int smoothing_window) {
  if (values.empty()) fail(ErrorCode::kEmptySeries, "series has no bins");
  DailySeries s;
  s.start = start;
  s.bin_width = bin_width;
  s.values = std::move(values);
  s.smoothed = moving_average(s.values, smoothing_window);
  for (auto const v : s.values) s.total += v;
  auto const p = peak_bin(s.values, s.smoothed);
  s.peak_time = start + static_cast<Seconds>(p) * bin_width;
  s.peak_value = s.smoothed[p];
  return s;
}

// Per-bin sums over `horizon` (default: the span the ledger covers).
inline DailySeries aggregate(EmissionLedger const& ledger, int smoothing_window = 5,
                             std::optional<TimeWindow> horizon = std::nullopt) {
  if (ledger.entries.empty()) fail(ErrorCode::kEmptySeries, "emission ledger is empty");
  auto const w = ledger.bin_width;
  TimeWindow span;
  if (horizon) {
    span = {floor_to(horizon->start, w), horizon->end};
  } else {
    auto const [lo, hi] = std::minmax_element(
        ledger.entries.begin(), ledger.entries.end(),
        [](auto const& a, auto const& b) { return a.bin_start < b.bin_start; });
    span = {lo->bin_start, hi->bin_start + w};
  }
  auto const bins = static_cast<std::size_t>((span.end - span.start + w - 1) / w);
  std::vector<double> values(bins, 0.0);
  for (auto const& e : ledger.entries) {
    if (e.bin_start < span.start || e.bin_start >= span.start + static_cast<Seconds>(bins) * w) {
      fail(ErrorCode::kConfiguration,
           "ledger bin " + std::to_string(e.bin_start) + " lies outside the series horizon");
    }
    values[static_cast<std::size_t>((e.bin_start - span.start) / w)] += e.grams;
  }
  return make_series(span.start, w, std::move(values), smoothing_window);
}

struct ComparisonReport {
  double total_base{};
  double total_variant{};
  double reduction{};  // (base - variant) / base
  Seconds base_peak_time{};
  Seconds variant_peak_time{};
  Seconds peak_shift{};  // variant - base
};

inline ComparisonReport compare(DailySeries const& base, DailySeries const& variant) {
  if (base.bin_width != variant.bin_width || base.start != variant.start ||
      base.values.size() != variant.values.size()) {
    fail(ErrorCode::kIncompatibleSeries, "series differ in bin width or horizon");
  }
  if (!(base.total > 0)) fail(ErrorCode::kDomain, "base series has no emissions");
  return {base.total,
          variant.total,
          (base.total - variant.total) / base.total,
          base.peak_time,
          variant.peak_time,
          variant.peak_time - base.peak_time};
}

// --- files ------------------------------------------------------------------

inline void write_ledger_csv(EmissionLedger const& ledger, SimOutput const& sim,
                             NetworkGraph const& graph, std::filesystem::path const& path) {
  csv::Writer w{path};
  w.row("vehicle_id", "class", "edge_id", "bin_start_s", "grams");
  for (auto const& e : ledger.entries) {
    w.row(sim.vehicles[e.vehicle].id, to_string(e.cls), graph.edge(e.edge).edge_id,
          e.bin_start, e.grams);
  }
  w.close();
}

inline void write_series_csv(DailySeries const& s, std::filesystem::path const& path) {
  csv::Writer w{path};
  w.row("bin_start_s", "grams", "smoothed_grams");
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    w.row(s.start + static_cast<Seconds>(i) * s.bin_width, s.values[i], s.smoothed[i]);
  }
  w.close();
}

inline DailySeries read_series_csv(std::filesystem::path const& path, int smoothing_window) {
  auto const t = csv::Table::load(path);
  auto const c_bin = t.require("bin_start_s");
  auto const c_g = t.require("grams");
  if (t.size() == 0) fail(ErrorCode::kEmptySeries, t.name() + " has no rows");
  std::vector<double> values;
  Seconds start = 0, width = 60, prev = 0;
  for (std::size_t r = 0; r < t.size(); ++r) {
    auto const where = t.name() + " row " + std::to_string(r + 2);
    auto const b = csv::to_int(t.cell(r, c_bin), where);
    if (r == 0) start = b;
    if (r == 1) width = b - start;
    if (r > 0 && (width <= 0 || b - prev != width)) {
      fail(ErrorCode::kFormat, where + ": bins must be contiguous and equally spaced");
    }
    prev = b;
    values.push_back(csv::to_double(t.cell(r, c_g), where));
  }
  return make_series(start, width, std::move(values), smoothing_window);
}

inline nlohmann::json to_json(ComparisonReport const& r) {
  return {{"total_base_g", r.total_base},
          {"total_variant_g", r.total_variant},
          {"reduction_fraction", r.reduction},
          {"percent_reduction", r.reduction * 100.0},
          {"base_peak_s", r.base_peak_time},
          {"variant_peak_s", r.variant_peak_time},
          {"base_peak_clock", format_clock(r.base_peak_time)},
          {"variant_peak_clock", format_clock(r.variant_peak_time)},
          {"peak_shift_s", r.peak_shift}};
}

}  // namespace modeshift
