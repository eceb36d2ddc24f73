// tctip: command-line front end.
//
//   tctip <subcommand> [--config file.json] [--out dir] [--seed n] [--print-config]
//
// Writes <out>/<subcommand>.json plus CSV tables and prints the payload and
// file list on stdout. Errors go to stderr as a JSON record; exit codes are 2 (config),
// 3 (numerical failure), 4 (nonconvergence).

#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tctip/commands.hpp"
#include "tctip/errors.hpp"

namespace {

const std::map<std::string, std::string> kHelp = {
    {"fixed-points", "equilibria, stability and eigenvalues at (gamma, c)"},
    {"bifurcation", "equilibrium branches over the c sweep"},
    {"phase-diagram", "saddle-node locus c*(gamma) over the gamma sweep"},
    {"separatrix", "stable and unstable manifolds of the saddle"},
    {"basin-grid", "basin labels on an nv x nm grid"},
    {"center-manifold", "local center manifold of O"},
    {"rate-tip", "one ramp run from S^- with its verdict"},
    {"critical-rate", "bisection for the critical ramp rate"},
    {"sde-ensemble", "Monte Carlo tipping statistics"},
    {"combined", "ramp plus noise ensemble"},
    {"mpp", "most probable O -> S path (gradient flow plus deterministic tail)"},
    {"action", "action of a path (gradient flow, deterministic or CSV)"},
    {"tip-time", "scaling-law action and the tipping-time bound"},
};

int fail(const std::exception& e) {
  std::cerr << tctip::error_record(e).dump() << '\n';
  return tctip::exit_code_for(e);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tropical-cyclone tipping lab"};
  app.require_subcommand(0, 1);
  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  bool print_config = false;
  app.add_option("--config", config_path, "JSON run configuration (or a result envelope to replay)");
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  app.add_option("--seed", seed, "random seed (overrides the config)");
  app.add_flag("--print-config", print_config, "print the resolved configuration and exit");
  for (const auto& name : tctip::command_names()) {
    const auto h = kHelp.find(name);
    app.add_subcommand(name, h == kHelp.end() ? "" : h->second)->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(tctip::ConfigError(e.what()));
  }

  try {
    tctip::RunConfig config = config_path.empty() ? tctip::RunConfig{} : tctip::load_run_config(config_path);
    if (!out_dir.empty()) config.out = out_dir;
    if (seed) {
      config.seed = *seed;
      config.stochastic.noise.seed = *seed;
    }
    if (print_config) {
      config.validate();
      std::cout << tctip::dump_json(tctip::to_json(config));
      return 0;
    }
    const auto subs = app.get_subcommands();
    if (subs.empty()) throw tctip::ConfigError("no subcommand given (see --help)");
    const std::string command = subs.front()->get_name();
    const auto out = tctip::run_command(command, config);
    const auto files = tctip::write_outputs(command, config, out);
    const tctip::Json summary = {{"command", command}, {"files", files}, {"payload", out.payload}};
    std::cout << tctip::dump_json(summary);
    return 0;
  } catch (const std::exception& e) {
    return fail(e);
  }
}
