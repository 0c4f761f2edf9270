#include <iostream>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "modeshift/synth.hpp"

using namespace modeshift;

namespace {

void write_table_config(std::filesystem::path const& path, std::string const& name, double p0,
                        double b0, double c0) {
  nlohmann::json const j{{"name", name},
                         {"baseline", {{"P0", p0}, {"B0", b0}, {"C0", c0}}},
                         {"fleet", {{"bus_capacity", 35}, {"car_occupancy", 1.5}}},
                         {"scenarios",
                          {{{"multiplier", 2}},
                           {{"target_utilization", 0.5}},
                           {{"target_utilization", 0.7}}}}};
  std::filesystem::create_directories(path.parent_path());
  std::ofstream{path, std::ios::binary} << j.dump(2) << '\n';
}

}  // namespace

// Regenerates the shipped scenario bundles under the given directory.
int main(int argc, char** argv) {
  CLI::App app{"Write the synthetic scenario bundles"};
  std::string root = "scenarios";
  app.add_option("--out", root, "bundle root directory");
  CLI11_PARSE(app, argc, argv);
  try {
    std::filesystem::path const dir{root};
    for (auto const& b : {synth::mixeduse_bundle(), synth::residential_bundle()}) {
      std::filesystem::remove_all(dir / b.name);
      synth::write_bundle(b, dir / b.name);
      std::cout << "wrote " << (dir / b.name).string() << '\n';
    }
    write_table_config(dir / "tables" / "south_end.json", "south-end", 6585, 1035, 35335);
    write_table_config(dir / "tables" / "avondale.json", "avondale", 982, 173, 7239);
    std::cout << "wrote " << (dir / "tables").string() << '\n';
  } catch (std::exception const& e) {
    std::cerr << "make_bundles: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
