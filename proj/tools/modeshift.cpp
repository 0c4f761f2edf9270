#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "modeshift/pipeline.hpp"

using namespace modeshift;

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kValidationFailure = 2;

void print(std::vector<Diagnostic> const& diagnostics) {
  for (auto const& d : diagnostics) {
    std::cerr << d.subject << ": " << to_string(d.code) << ": " << d.message << '\n';
  }
}

struct Common {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "pipeline config (JSON)")->required();
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--seed", c.seed, "seed; overrides the config");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transit mode-shift scenario simulator"};
  app.require_subcommand(1);
  Common common;
  std::optional<std::string> only;

  auto* validate_cmd = app.add_subcommand("validate", "check every input and cross-reference");
  auto* table_cmd = app.add_subcommand("scenario-table", "write the scenario arithmetic table");
  auto* demand_cmd = app.add_subcommand("gen-demand", "write baseline and scenario trip tables");
  auto* sim_cmd = app.add_subcommand("simulate", "simulate the day for each scenario");
  auto* run_cmd = app.add_subcommand("run-pipeline", "run every stage and write the report");
  auto* report_cmd = app.add_subcommand("report", "rebuild the report from written series");
  for (auto* cmd : {validate_cmd, table_cmd, demand_cmd, sim_cmd, run_cmd, report_cmd}) {
    add_common(cmd, common);
  }
  sim_cmd->add_option("--scenario", only, "simulate one key only (base, s1, ...)");

  try {
    app.parse(argc, argv);
  } catch (CLI::ParseError const& e) {
    return app.exit(e) == 0 ? kOk : kValidationFailure;
  }

  std::optional<PipelineConfig> loaded;
  try {
    loaded = load_config(common.config);
  } catch (Error const& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidationFailure;
  }

  try {
    auto const& config = *loaded;
    auto const seed = common.seed.value_or(config.seed);
    std::filesystem::path const out{common.out};

    if (validate_cmd->parsed()) {
      auto const diagnostics = cmd_validate(config, out);
      print(diagnostics);
      std::cout << diagnostics.size() << " diagnostic(s)\n";
      return diagnostics.empty() ? kOk : kValidationFailure;
    }
    if (table_cmd->parsed()) cmd_scenario_table(config, out);
    if (demand_cmd->parsed()) cmd_gen_demand(config, out, seed);
    if (sim_cmd->parsed()) cmd_simulate(config, out, seed, only);
    if (report_cmd->parsed()) cmd_report(config, out);
    if (run_cmd->parsed()) {
      auto const r = run_pipeline(config, out, seed);
      for (std::size_t i = 1; i < r.series.size(); ++i) {
        auto const& base = r.series.front().series;
        auto const& s = r.series[i];
        std::cout << s.label << ": CO2 " << csv::fixed((base.total - s.series.total) / base.total * 100, 2)
                  << "% lower, traffic " << csv::fixed(s.traffic_reduction * 100, 2) << "% lower\n";
      }
    }
    std::cout << "wrote " << out.string() << '\n';
    return kOk;
  } catch (ValidationFailure const& e) {
    print(e.diagnostics());
    return kValidationFailure;
  } catch (Error const& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  } catch (std::exception const& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
}
