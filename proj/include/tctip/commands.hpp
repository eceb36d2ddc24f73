#ifndef TCTIP_COMMANDS_HPP
#define TCTIP_COMMANDS_HPP

// The analyses behind the CLI subcommands. Each returns a JSON payload and
// named tables; write_outputs puts them in the output directory as
// <command>.json (the envelope) and <command>_<table>.csv.

#include <exception>
#include <string>
#include <utility>
#include <vector>

#include "tctip/io.hpp"

namespace tctip {

struct CommandOutput {
  Json payload;
  std::vector<std::pair<std::string, Table>> tables;
};

const std::vector<std::string>& command_names();

// Validates the config, then runs the named command. Throws ConfigError for an
// unknown command.
CommandOutput run_command(const std::string& name, const RunConfig& config);

// Returns the written file paths, envelope first.
std::vector<std::string> write_outputs(const std::string& command, const RunConfig& config,
                                       const CommandOutput& out);

// 2 config error, 3 numerical failure, 4 nonconvergence, 1 anything else.
int exit_code_for(const std::exception& e);
Json error_record(const std::exception& e);

}  // namespace tctip

#endif  // TCTIP_COMMANDS_HPP
