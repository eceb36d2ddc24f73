#ifndef TCTIP_IO_HPP
#define TCTIP_IO_HPP

// Run configuration, result envelopes and CSV tables.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tctip/action.hpp"
#include "tctip/manifolds.hpp"
#include "tctip/model.hpp"
#include "tctip/rate_tipping.hpp"
#include "tctip/stochastic.hpp"

namespace tctip {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

struct SweepConfig {
  double c_min = 0.01, c_max = 0.5;
  long c_count = 50;
  double gamma_min = 0.05, gamma_max = 0.95;
  long gamma_count = 19;
};

struct GridConfig {
  int nv = 41, nm = 41;
  BasinOptions basin;
};

struct CenterManifoldConfig {
  int order = 5;
  double v_max = 0.05;
  long count = 51;
};

struct RampConfig {
  RampSpec spec;
  RampRunOptions run;
  double r_lo = 0.03;  // critical-rate bracket
  double r_hi = 0.08;
  double tol = 1e-7;
};

// Start for the stochastic runs: "O" or "S" (frozen equilibria), "S_minus"
// for the combined run, or an explicit state.
struct StochasticConfig {
  NoiseSpec noise;
  long count = 100;
  std::string start = "O";
  std::optional<State> x0;
  ReflectionConvention convention = ReflectionConvention::kComponentwise;
  double near_tol = 0.05;
};

struct ActionConfig {
  MamDefaults grid;
  MamOptions mam;
  double r_fraction = 0.5;
  MomentumBranch branch = MomentumBranch::kHamiltonianZero;
  // Path for the action subcommand: "deterministic" (flow from x0 over T with
  // grid.nodes nodes), "mam" (from -> to between equilibria) or "csv".
  std::string source = "mam";
  State x0 = State(0.5, 0.5);
  std::string from = "O", to = "S";
  std::string csv;
};

struct RunConfig {
  ModelParams model;
  SweepConfig sweep;
  GridConfig grid;
  ManifoldOptions manifold;
  CenterManifoldConfig center_manifold;
  RampConfig ramp;
  StochasticConfig stochastic;
  ActionConfig action;
  std::uint64_t seed = 1;
  std::string out = ".";

  // Throws ConfigError on invalid values.
  void validate() const;
};

Json to_json(const RunConfig& c);
// Missing keys keep their defaults; unknown keys raise ConfigError. Accepts a
// bare config or a result envelope (its "config" member).
RunConfig run_config_from_json(const Json& j);
RunConfig load_run_config(const std::string& path);

// Envelope written next to every output. It carries no timestamp and no
// output directory, so a replayed config reproduces the file byte for byte.
struct ResultEnvelope {
  std::string command;
  Json config;
  Json payload;
  std::vector<std::string> tables;  // CSV files written alongside

  Json to_json() const;
};

// Table of string cells; numbers are formatted with 17 significant digits.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  std::size_t columns() const { return header.size(); }
  // Parses column `name` of every row as a double (empty cells as NaN).
  std::vector<double> numeric_column(const std::string& name) const;
};

std::string format_number(double x);
std::string format_number(long x);
std::string format_optional(const std::optional<double>& x);

// RFC 4180 with LF line endings; fields containing a comma, quote or newline
// are quoted.
void write_csv(std::ostream& os, const Table& t);
std::string to_csv(const Table& t);
Table read_csv(std::istream& is);
Table parse_csv(const std::string& text);

// Writes text to path, creating parent directories.
void write_text_file(const std::string& path, const std::string& text);
std::string dump_json(const Json& j);  // indented, trailing newline

}  // namespace tctip

#endif  // TCTIP_IO_HPP
