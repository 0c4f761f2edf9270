// Recovers the fleet constants implied by the published case-study tables and
// checks them against the defaults in FleetParams. Exit 1 on disagreement.
#include <cmath>
#include <iostream>

#include "modeshift/csv.hpp"
#include "modeshift/mode_shift.hpp"

using namespace modeshift;

namespace {

double mean(std::vector<double> const& v) {
  double s = 0;
  for (auto const x : v) s += x;
  return s / static_cast<double>(v.size());
}

bool report(char const* name, std::vector<double> const& estimates, double step, double fallback) {
  std::cout << name << " estimates:";
  for (auto const e : estimates) std::cout << ' ' << csv::fixed(e, 4);
  auto const derived = std::round(mean(estimates) / step) * step;
  std::cout << "\n  rounded to " << csv::shortest(derived) << ", default "
            << csv::shortest(fallback) << '\n';
  return std::abs(derived - fallback) < 1e-9;
}

}  // namespace

int main() {
  auto const d = derive_fleet_constants(published_case_tables());
  FleetParams const defaults;
  auto const cap_ok = report("bus capacity", d.capacity_estimates, 1.0, defaults.bus_capacity);
  auto const occ_ok = report("car occupancy", d.occupancy_estimates, 0.1, defaults.car_occupancy);
  std::cout << (cap_ok && occ_ok ? "defaults agree" : "defaults disagree") << '\n';
  return cap_ok && occ_ok ? 0 : 1;
}
