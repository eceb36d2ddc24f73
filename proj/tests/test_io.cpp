#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <doctest.h>

#include "oracles.hpp"
#include "tctip/commands.hpp"
#include "tctip/errors.hpp"

using namespace tctip;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("tctip_io_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

const Table& table(const CommandOutput& out, const std::string& name) {
  for (const auto& [n, t] : out.tables) {
    if (n == name) return t;
  }
  throw std::out_of_range(name);
}

struct Run {
  int code;
  std::string out, err;
};

Run run_cli(const std::string& args, const fs::path& dir) {
  const fs::path so = dir / "stdout.txt", se = dir / "stderr.txt";
  const std::string cmd = std::string(TCTIP_CLI) + " " + args + " >" + so.string() + " 2>" + se.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(so), slurp(se)};
}

}  // namespace

TEST_SUITE("cli_io") {

TEST_CASE("config round trip") {
  RunConfig d;
  CHECK(to_json(run_config_from_json(to_json(d))) == to_json(d));

  RunConfig c;
  c.model.gamma = 0.1 + 0.2;
  c.model.c = 1.0 / 3.0;
  c.model.vp = 12.5;
  c.model.vp_ref = 10.0;
  c.sweep.c_count = 0;
  c.ramp.spec.shape = RampShape::kSmoothstep;
  c.ramp.spec.shear_minus = 1.3;
  c.ramp.spec.shear_plus = 13.0;
  c.ramp.run.tau0 = -123.456;
  c.stochastic.x0 = State(std::nextafter(0.2, 1.0), -0.0);
  c.stochastic.convention = ReflectionConvention::kAsPrinted;
  c.action.branch = MomentumBranch::kAsPrinted;
  c.action.source = "csv";
  c.action.csv = "path,with \"quotes\".csv";
  c.seed = 18446744073709551615ULL;
  c.out = "some/dir";
  const Json j = to_json(c);
  const RunConfig back = run_config_from_json(Json::parse(j.dump()));
  CHECK(to_json(back) == j);
  CHECK(back.model.gamma == c.model.gamma);
  CHECK(back.model.c == c.model.c);
  CHECK(back.stochastic.x0->x() == c.stochastic.x0->x());
  CHECK(std::signbit(back.stochastic.x0->y()));
  CHECK(back.seed == c.seed);
  CHECK(back.stochastic.noise.seed == c.seed);
  CHECK(back.ramp.spec.shape == RampShape::kSmoothstep);
  CHECK(!back.ramp.run.tau_f.has_value());

  // Sparse configs keep defaults; envelopes replay their config.
  const RunConfig sparse = run_config_from_json(Json::parse(R"({"model": {"c": 0.22}})"));
  CHECK(sparse.model.c == 0.22);
  CHECK(sparse.model.gamma == 0.43);
  Json env = ResultEnvelope{"fixed-points", j, Json::object(), {}}.to_json();
  CHECK(to_json(run_config_from_json(env)) == j);
}

TEST_CASE("config errors") {
  for (const char* text : {R"({"model": {"c": "x"}})", R"({"model": {"cc": 0.2}})", R"({"nope": 1})",
                           R"({"ramp": {"shape": "cubic"}})", R"({"seed": -1})", R"({"grid": {"nv": 2.5}})",
                           R"({"stochastic": {"x0": [1]}})", R"([1, 2])", R"({"model": 3})"}) {
    CAPTURE(text);
    CHECK_THROWS_AS(run_config_from_json(Json::parse(text)), ConfigError);
  }
  RunConfig c;
  c.model.gamma = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig{};
  c.stochastic.start = "X";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(run_command("fixed-points", c), ConfigError);
  CHECK_THROWS_AS(run_command("no-such-command", RunConfig{}), ConfigError);
  CHECK_THROWS_AS(load_run_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("numbers and CSV") {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 20000; ++k) {
    double x;
    const std::uint64_t bits = rng();
    std::memcpy(&x, &bits, sizeof x);
    if (!std::isfinite(x)) continue;
    const std::string s = format_number(x);
    const double y = std::strtod(s.c_str(), nullptr);
    CHECK(std::memcmp(&x, &y, sizeof x) == 0);
  }
  CHECK(format_number(0.1) == "0.10000000000000001");
  CHECK(format_number(1.0 / 3.0) == "0.33333333333333331");
  CHECK(format_number(1e-300) == "1e-300");
  CHECK(format_optional(std::nullopt).empty());

  Table t{{"a", "b,c", "d"}, {}};
  t.add_row({"1", "x\"y", "line\nbreak"});
  t.add_row({"", "2", "3"});
  const std::string text = to_csv(t);
  CHECK(text == "a,\"b,c\",d\n1,\"x\"\"y\",\"line\nbreak\"\n,2,3\n");
  const Table back = parse_csv(text);
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  CHECK(std::isnan(back.numeric_column("a")[1]));
  CHECK(parse_csv("x,y\r\n1,2\r\n").rows.size() == 1);
  CHECK_THROWS(parse_csv("a,b\n1\n"));
  CHECK_THROWS(parse_csv("a\n\"open\n"));
  CHECK_THROWS(t.add_row({"1"}));
}

TEST_CASE("fixed points record") {
  RunConfig c;
  const auto out = run_command("fixed-points", c);
  CHECK(out.payload["status"] == "three-equilibria");
  const auto& eq = out.payload["equilibria"];
  REQUIRE(eq.size() == 3);
  CHECK(eq[1]["stability"] == "saddle");
  CHECK(std::string(eq[2]["stability"]).rfind("stable", 0) == 0);
  for (const auto& e : eq) CHECK(e["residual"].get<double>() <= 1e-10);
  c.model.c = 0.9;
  const auto absent = run_command("fixed-points", c);
  CHECK(absent.payload["status"] == "storm-state-absent");
  CHECK(absent.payload["equilibria"].size() == 1);
}

TEST_CASE("bifurcation and phase diagram") {
  RunConfig c;
  c.sweep.c_min = 0.05;
  c.sweep.c_max = 0.6;
  c.sweep.c_count = 56;
  const auto out = run_command("bifurcation", c);
  const Table& t = table(out, "branches");
  REQUIRE(t.rows.size() == 56);
  const double cstar = out.payload["saddle_node_c"];
  const auto cs = t.numeric_column("c");
  const auto vs = t.numeric_column("v_S");
  const auto vu = t.numeric_column("v_U");
  for (std::size_t k = 0; k < cs.size(); ++k) {
    CHECK(std::isnan(vs[k]) == (cs[k] > cstar));
    if (cs[k] < cstar) CHECK(vs[k] > vu[k]);
  }
  const Table back = parse_csv(to_csv(t));
  CHECK(back.rows == t.rows);
  CHECK(back.numeric_column("v_S").size() == vs.size());

  c.sweep.c_count = 0;
  const auto empty = run_command("bifurcation", c);
  CHECK(to_csv(table(empty, "branches")) ==
        "c,status,v_O,m_O,v_U,m_U,v_S,m_S,stability_O,stability_U,stability_S\n");

  c.sweep.gamma_min = 0.1;
  c.sweep.gamma_max = 0.9;
  c.sweep.gamma_count = 9;
  const auto pd = run_command("phase-diagram", c);
  const Table& locus = table(pd, "locus");
  const auto g = locus.numeric_column("gamma");
  const auto cc = locus.numeric_column("c_star");
  REQUIRE(g.size() == 9);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double gamma = g[k];
    // Saddle-node where the peak of the cubic touches zero.
    auto peak = [&](double cv) {
      auto q = [&](double v) {
        const double w = v + cv;
        return (1.0 - gamma) * v + gamma * v * v * v - w * w * w;
      };
      return q(oracle::golden_max(q, 0.0, 1.0));
    };
    const double ref = oracle::bisect(peak, 1e-4, 1.0, 1e-12);
    CHECK(std::abs(cc[k] - ref) <= 1e-8);
  }
  CHECK(parse_csv(to_csv(locus)).rows == locus.rows);
  c.sweep.gamma_count = 0;
  CHECK(table(run_command("phase-diagram", c), "locus").rows.empty());
}

TEST_CASE("geometry commands") {
  RunConfig c;
  const auto sep = run_command("separatrix", c);
  CHECK(table(sep, "stable").rows.size() > 100);
  CHECK(table(sep, "unstable").rows.size() > 100);
  c.grid.nv = 7;
  c.grid.nm = 5;
  const auto grid = run_command("basin-grid", c);
  CHECK(table(grid, "labels").rows.size() == 35);
  CHECK(grid.payload["nv"] == 7);
  CHECK(grid.payload["nm"] == 5);
  c.center_manifold.order = 3;
  const auto cm = run_command("center-manifold", c);
  const Table& curve = table(cm, "curve");
  CHECK(curve.rows.size() == 51);
  const auto v = curve.numeric_column("v"), m = curve.numeric_column("m");
  const double cc = c.model.c, g = c.model.gamma;
  for (std::size_t k = 0; k < v.size(); ++k) {
    CHECK(m[k] == doctest::Approx(v[k] / cc + (g - 1.0) * std::pow(v[k], 3) / std::pow(cc, 5)).epsilon(1e-14));
  }
  c.model.c = 0.9;
  CHECK_THROWS_AS(run_command("separatrix", c), ConfigError);
}

TEST_CASE("rate commands") {
  RunConfig c;
  c.ramp.spec.r = 0.03;
  const auto tracked = run_command("rate-tip", c);
  CHECK(tracked.payload["verdict"] == "tracked");
  CHECK(table(tracked, "trajectory").rows.size() > 10);
  c.ramp.spec.r = 0.08;
  CHECK(run_command("rate-tip", c).payload["verdict"] == "tipped_to_O");
  c.ramp.tol = 1e-4;
  const auto cr = run_command("critical-rate", c);
  CHECK(cr.payload["r_lo"].get<double>() < 0.050628);
  CHECK(cr.payload["r_hi"].get<double>() > 0.0506279);
  CHECK(cr.payload["width"].get<double>() < 1e-4);
}

TEST_CASE("stochastic commands") {
  RunConfig c;
  c.model.c = 0.22;
  c.stochastic.noise.tau_f = 2e4;
  c.stochastic.count = 12;
  const auto a = run_command("sde-ensemble", c);
  const auto b = run_command("sde-ensemble", c);
  CHECK(to_csv(table(a, "realizations")) == to_csv(table(b, "realizations")));
  CHECK(a.payload.dump() == b.payload.dump());
  CHECK(a.payload["stats"]["n_tipped"].get<long>() > 0);
  c.seed = 2;
  c.stochastic.noise.seed = 2;
  CHECK(to_csv(table(run_command("sde-ensemble", c), "realizations")) != to_csv(table(a, "realizations")));

  RunConfig k;
  k.ramp.spec.r = 0.03;
  k.stochastic.noise.tau_f = 2500;
  k.stochastic.count = 200;
  k.stochastic.start = "S_minus";
  const auto comb = run_command("combined", k);
  CHECK(comb.payload["counts"]["tipped_S_to_O"].get<long>() > 0);
  CHECK(comb.payload["counts"]["tracked_S_to_S"].get<long>() > 0);
  CHECK(table(comb, "realizations").rows.size() == 200);
  k.stochastic.start = "S";
  CHECK_THROWS_AS(run_command("combined", k), ConfigError);
}

TEST_CASE("action commands") {
  RunConfig c;
  c.action.source = "deterministic";
  c.action.grid.T = 50.0;
  c.action.grid.nodes = 2001;
  const auto det = run_command("action", c);
  CHECK(det.payload["action"].get<double>() < 1e-3);

  // Replay the written path through the csv source.
  const fs::path dir = scratch_dir("action");
  c.out = dir.string();
  write_outputs("action", c, det);
  RunConfig r = c;
  r.action.source = "csv";
  r.action.csv = (dir / "action_path.csv").string();
  const auto replay = run_command("action", r);
  CHECK(replay.payload["action"].get<double>() ==
        doctest::Approx(det.payload["action"].get<double>()).epsilon(1e-12));

  const auto tt = run_command("tip-time", c);
  CHECK(tt.payload["log_bound"].get<double>() == tt.payload["action"].get<double>());
  CHECK(tt.payload["ratio"].get<double>() == doctest::Approx(6.26).epsilon(1e-3));

  RunConfig m;
  m.action.grid.nodes = 2001;
  const auto mpp = run_command("mpp", m);
  CHECK(mpp.payload["total_action"].get<double>() == doctest::Approx(3.88).epsilon(0.01));
  const Table& path = table(mpp, "path");
  CHECK(path.rows.front()[0] == "flow");
  CHECK(path.rows.back()[0] == "tail");
  CHECK(table(mpp, "local").rows.size() == 51);
}

TEST_CASE("outputs and replay") {
  const fs::path a = scratch_dir("replay_a"), b = scratch_dir("replay_b");
  RunConfig c;
  c.sweep.c_count = 7;
  c.out = a.string();
  const auto files = write_outputs("bifurcation", c, run_command("bifurcation", c));
  REQUIRE(files.size() == 2);
  const Json env = Json::parse(slurp(files[0]));
  CHECK(env["schema_version"] == kSchemaVersion);
  CHECK(env["command"] == "bifurcation");
  CHECK(env["tables"][0] == "bifurcation_branches.csv");
  CHECK(!env["config"].contains("out"));

  RunConfig again = run_config_from_json(env);
  again.out = b.string();
  write_outputs("bifurcation", again, run_command("bifurcation", again));
  CHECK(slurp(a / "bifurcation.json") == slurp(b / "bifurcation.json"));
  CHECK(slurp(a / "bifurcation_branches.csv") == slurp(b / "bifurcation_branches.csv"));
}

TEST_CASE("command line") {
  const fs::path dir = scratch_dir("cli");
  const auto ok = run_cli("fixed-points --out " + (dir / "o").string(), dir);
  CHECK(ok.code == 0);
  CHECK(Json::parse(ok.out)["payload"]["status"] == "three-equilibria");
  CHECK(fs::exists(dir / "o" / "fixed-points.json"));

  const auto pc = run_cli("--print-config --seed 7", dir);
  CHECK(pc.code == 0);
  RunConfig expect;
  expect.seed = 7;
  CHECK(Json::parse(pc.out) == to_json(expect));

  std::ofstream(dir / "bad.json") << "{\"model\": {\"gamma\": 2}}";
  const auto bad = run_cli("fixed-points --config " + (dir / "bad.json").string(), dir);
  CHECK(bad.code == 2);
  CHECK(Json::parse(bad.err)["error"]["kind"] == "config");

  std::ofstream(dir / "garbage.json") << "{model";
  CHECK(run_cli("fixed-points --config " + (dir / "garbage.json").string(), dir).code == 2);
  CHECK(run_cli("fixed-points --bogus", dir).code == 2);
  CHECK(run_cli("", dir).code == 2);

  std::ofstream(dir / "blowup.json")
      << R"({"stochastic": {"x0": [1e100, 0.5], "dt": 1, "tau_f": 10, "count": 1}})";
  const auto num = run_cli("sde-ensemble --out " + (dir / "n").string() + " --config " +
                               (dir / "blowup.json").string(),
                           dir);
  CHECK(num.code == 3);
  CHECK(Json::parse(num.err)["error"]["kind"] == "numerical");

  std::ofstream(dir / "budget.json")
      << R"({"action": {"T": 100, "nodes": 101, "s_max": 1}})";
  const auto nc = run_cli("action --out " + (dir / "b").string() + " --config " +
                              (dir / "budget.json").string(),
                          dir);
  CHECK(nc.code == 4);
  CHECK(Json::parse(nc.err)["error"].contains("last_value"));

  // Same seed, same bytes.
  std::ofstream(dir / "mc.json")
      << R"({"model": {"c": 0.22}, "stochastic": {"tau_f": 5000, "count": 4}})";
  for (const char* sub : {"r1", "r2"}) {
    CHECK(run_cli("sde-ensemble --seed 3 --config " + (dir / "mc.json").string() + " --out " +
                      (dir / sub).string(),
                  dir)
              .code == 0);
  }
  CHECK(slurp(dir / "r1" / "sde-ensemble_realizations.csv") ==
        slurp(dir / "r2" / "sde-ensemble_realizations.csv"));
  CHECK(slurp(dir / "r1" / "sde-ensemble.json") == slurp(dir / "r2" / "sde-ensemble.json"));
}

}  // TEST_SUITE
