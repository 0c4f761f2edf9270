#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "modeshift/clock.hpp"
#include "modeshift/csv.hpp"
#include "modeshift/emissions.hpp"

namespace modeshift::report {

// One daily series in a report: "base" first, then the scenarios in order.
struct Entry {
  std::string key;    // file stem: base, s1, s2, ...
  std::string label;  // table label: base, 2X, 50%, ...
  DailySeries series;
  double traffic_reduction{};  // total-basis reduction from the scenario table
};

inline std::string hhmm(Seconds t) { return format_clock(t).substr(0, 5); }

inline nlohmann::json comparison_json(std::vector<Entry> const& entries) {
  auto const& base = entries.front();
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 1; i < entries.size(); ++i) {
    auto const& e = entries[i];
    auto j = to_json(compare(base.series, e.series));
    j["scenario"] = e.label;
    j["key"] = e.key;
    j["traffic_reduction_fraction"] = e.traffic_reduction;
    j["emission_to_traffic_ratio"] =
        e.traffic_reduction > 0 ? nlohmann::json(j["reduction_fraction"].get<double>() /
                                                 e.traffic_reduction)
                                : nlohmann::json(nullptr);
    rows.push_back(std::move(j));
  }
  return {{"base",
           {{"total_g", base.series.total},
            {"peak_s", base.series.peak_time},
            {"peak_clock", format_clock(base.series.peak_time)},
            {"peak_smoothed_g", base.series.peak_value}}},
          {"bin_width_s", base.series.bin_width},
          {"scenarios", rows}};
}

// Wide plot-ready table: one row per bin, raw and smoothed grams per series.
inline void write_plot_csv(std::vector<Entry> const& entries, std::filesystem::path const& path) {
  csv::Writer w{path};
  std::vector<std::string> header{"bin_start_s", "clock"};
  for (auto const& e : entries) {
    header.push_back(e.key + "_g");
    header.push_back(e.key + "_smoothed_g");
  }
  w.row(header);
  auto const& s0 = entries.front().series;
  for (std::size_t i = 0; i < s0.values.size(); ++i) {
    auto const t = s0.start + static_cast<Seconds>(i) * s0.bin_width;
    std::vector<std::string> row{std::to_string(t), format_clock(t)};
    for (auto const& e : entries) {
      row.push_back(csv::fixed(e.series.values[i]));
      row.push_back(csv::fixed(e.series.smoothed[i]));
    }
    w.row(row);
  }
  w.close();
}

inline double nice_step(double span, int target_ticks) {
  auto const raw = span / target_ticks;
  auto const mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double const m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10 * mag;
}

// Line chart of the smoothed series in kg per bin against time of day, with
// each series' peak marked and labelled.
inline std::string svg_chart(std::vector<Entry> const& entries, std::string const& title) {
  constexpr double kW = 960, kH = 540, kL = 90, kR = 930, kT = 50, kB = 470;
  static constexpr char const* kColours[] = {"#222222", "#1f77b4", "#ff7f0e", "#2ca02c",
                                             "#d62728", "#9467bd"};
  auto const& s0 = entries.front().series;
  auto const t0 = static_cast<double>(s0.start);
  auto const t1 = static_cast<double>(s0.end());
  double ymax = 0;
  for (auto const& e : entries) {
    ymax = std::max(ymax, *std::max_element(e.series.smoothed.begin(), e.series.smoothed.end()));
  }
  ymax = std::max(ymax / 1000.0, 1e-6);
  auto const ystep = nice_step(ymax, 5);
  auto const ytop = std::ceil(ymax / ystep) * ystep;
  auto const x_of = [&](double t) { return kL + (t - t0) / (t1 - t0) * (kR - kL); };
  auto const y_of = [&](double kg) { return kB - kg / ytop * (kB - kT); };
  auto const f1 = [](double v) { return csv::fixed(v, 1); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
    << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << (kL + kR) / 2 << "\" y=\"25\" text-anchor=\"middle\" font-size=\"16\">"
    << title << "</text>\n";

  // axes, grid and ticks
  o << "<g stroke=\"#dddddd\">\n";
  for (double y = 0; y <= ytop + 1e-9; y += ystep) {
    o << "<line x1=\"" << kL << "\" x2=\"" << kR << "\" y1=\"" << f1(y_of(y)) << "\" y2=\""
      << f1(y_of(y)) << "\"/>\n";
  }
  o << "</g>\n<g stroke=\"black\">\n";
  o << "<line x1=\"" << kL << "\" x2=\"" << kR << "\" y1=\"" << kB << "\" y2=\"" << kB << "\"/>\n";
  o << "<line x1=\"" << kL << "\" x2=\"" << kL << "\" y1=\"" << kT << "\" y2=\"" << kB << "\"/>\n";
  o << "</g>\n";
  auto const first_hour = static_cast<Seconds>(std::ceil(t0 / 3600.0));
  for (auto h = first_hour; h * 3600 <= static_cast<Seconds>(t1); h += 2) {
    auto const x = f1(x_of(static_cast<double>(h * 3600)));
    o << "<line x1=\"" << x << "\" x2=\"" << x << "\" y1=\"" << kB << "\" y2=\"" << kB + 5
      << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << x << "\" y=\"" << kB + 20 << "\" text-anchor=\"middle\">"
      << hhmm(h * 3600) << "</text>\n";
  }
  for (double y = 0; y <= ytop + 1e-9; y += ystep) {
    o << "<text x=\"" << kL - 8 << "\" y=\"" << f1(y_of(y) + 4) << "\" text-anchor=\"end\">"
      << csv::shortest(std::round(y * 1e6) / 1e6) << "</text>\n";
  }
  o << "<text x=\"" << (kL + kR) / 2 << "\" y=\"" << kH - 25
    << "\" text-anchor=\"middle\">Time of day (hours)</text>\n";
  o << "<text transform=\"translate(25," << (kT + kB) / 2
    << ") rotate(-90)\" text-anchor=\"middle\">CO2 (kg per " << s0.bin_width
    << " s bin, moving average)</text>\n";

  for (std::size_t k = 0; k < entries.size(); ++k) {
    auto const& s = entries[k].series;
    auto const colour = kColours[k % 6];
    o << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.smoothed.size(); ++i) {
      auto const t = static_cast<double>(s.start) + (static_cast<double>(i) + 0.5) *
                                                       static_cast<double>(s.bin_width);
      o << (i ? " " : "") << f1(x_of(t)) << ',' << f1(y_of(s.smoothed[i] / 1000.0));
    }
    o << "\"/>\n";
    auto const px = f1(x_of(static_cast<double>(s.peak_time) + 0.5 * s.bin_width));
    auto const py = y_of(s.peak_value / 1000.0);
    o << "<circle cx=\"" << px << "\" cy=\"" << f1(py) << "\" r=\"4\" fill=\"" << colour
      << "\"/>\n";
    o << "<text x=\"" << px << "\" y=\"" << f1(py - 8 - 13.0 * static_cast<double>(k))
      << "\" text-anchor=\"middle\" fill=\"" << colour << "\">" << entries[k].label << " peak "
      << hhmm(s.peak_time) << "</text>\n";
    // legend
    auto const ly = kT + 10 + 18.0 * static_cast<double>(k);
    o << "<line x1=\"" << kR - 200 << "\" x2=\"" << kR - 175 << "\" y1=\"" << ly << "\" y2=\"" << ly
      << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << kR - 168 << "\" y=\"" << ly + 4 << "\">" << entries[k].label << " ("
      << csv::fixed(s.total / 1e6, 2) << " t)</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

inline std::string markdown(std::string const& name, std::vector<Entry> const& entries,
                            nlohmann::json const& scenario_table) {
  std::ostringstream o;
  o << "# " << name << "\n\n## Scenario table\n\n";
  o << "| scenario | U1 (%) | passengers | cars removed | traffic after | reduction, total basis (%) |\n";
  o << "|---|---|---|---|---|---|\n";
  for (auto const& r : scenario_table["rows"]) {
    o << "| " << r["scenario"].get<std::string>() << " | "
      << csv::fixed(r["new_bus_utilization"].get<double>() * 100, 2) << " | "
      << csv::fixed(r["total_passengers_requiring_bus"].get<double>(), 1) << " | "
      << csv::fixed(r["cars_removed"].get<double>(), 1) << " | "
      << csv::fixed(r["total_traffic_after_reduction"].get<double>(), 1) << " | "
      << csv::fixed(r["reduction_total_basis"].get<double>() * 100, 2) << " |\n";
  }
  o << "\n## Daily CO2\n\n";
  o << "| series | total (t) | peak | emission reduction (%) | traffic reduction (%) |\n";
  o << "|---|---|---|---|---|\n";
  auto const& base = entries.front().series;
  for (auto const& e : entries) {
    auto const red = (base.total - e.series.total) / base.total;
    o << "| " << e.label << " | " << csv::fixed(e.series.total / 1e6, 3) << " | "
      << hhmm(e.series.peak_time) << " | " << csv::fixed(red * 100, 2) << " | "
      << csv::fixed(e.traffic_reduction * 100, 2) << " |\n";
  }
  o << "\nChart: chart.svg. Plot data: series.csv.\n";
  return o.str();
}

}  // namespace modeshift::report
