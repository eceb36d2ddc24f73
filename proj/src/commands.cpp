#include "tctip/commands.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>

#include "tctip/errors.hpp"

namespace tctip {

namespace {

using Fn = std::function<CommandOutput(const RunConfig&)>;

std::string num(double x) { return format_number(x); }
std::string num(long x) { return format_number(x); }

Json state_json(const State& x) { return Json::array({x(0), x(1)}); }

// NaN has no JSON literal; absent values are null.
Json number_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

std::vector<double> linspace(double lo, double hi, long n) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  for (long k = 0; k < n; ++k) {
    out.push_back(n == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1));
  }
  return out;
}

WeightMatrix weights(const RunConfig& c) {
  return {c.stochastic.noise.sigma1, c.stochastic.noise.sigma2};
}

FixedPointSet three_equilibria(const ModelParams& p, const char* who) {
  auto fp = fixed_points(p);
  if (fp.status != EquilibriumStatus::kThreeEquilibria) {
    throw ConfigError(std::string(who) + " needs three equilibria (status " +
                      std::string(to_string(fp.status)) + ")");
  }
  return fp;
}

State named_equilibrium(const FixedPointSet& fp, const std::string& name) {
  if (name == "O") return fp.origin.x;
  if (name == "U") return fp.saddle->x;
  return fp.storm->x;
}

Table path_table(const TransitionPath& path) {
  Table t{{"tau", "v", "m"}, {}};
  for (std::size_t i = 0; i < path.size(); ++i) {
    t.add_row({num(path.tau(i)), num(path.psi[i](0)), num(path.psi[i](1))});
  }
  return t;
}

Json equilibrium_json(const char* name, const Equilibrium& e, const ModelParams& p) {
  Json ev = Json::array();
  for (int k = 0; k < 2; ++k) ev.push_back({e.eigenvalues(k).real(), e.eigenvalues(k).imag()});
  return {{"name", name},
          {"v", e.x(0)},
          {"m", e.x(1)},
          {"stability", std::string(to_string(e.stability))},
          {"eigenvalues", ev},
          {"residual", vector_field(e.x, p).norm()}};
}

CommandOutput cmd_fixed_points(const RunConfig& c) {
  const auto& p = c.model;
  const auto fp = fixed_points(p);
  Json eq = Json::array();
  eq.push_back(equilibrium_json("O", fp.origin, p));
  if (fp.saddle) eq.push_back(equilibrium_json("U", *fp.saddle, p));
  if (fp.storm) eq.push_back(equilibrium_json("S", *fp.storm, p));
  CommandOutput out;
  out.payload = {{"gamma", p.gamma},
                 {"c", p.c},
                 {"rho", p.rho()},
                 {"status", std::string(to_string(fp.status))},
                 {"peak_value", fp.peak_value},
                 {"equilibria", eq}};
  return out;
}

CommandOutput cmd_bifurcation(const RunConfig& c) {
  Table t{{"c", "status", "v_O", "m_O", "v_U", "m_U", "v_S", "m_S", "stability_O", "stability_U",
           "stability_S"},
          {}};
  for (double cc : linspace(c.sweep.c_min, c.sweep.c_max, c.sweep.c_count)) {
    ModelParams p = c.model;
    p.c = cc;
    const auto fp = fixed_points(p);
    auto cells = [](const std::optional<Equilibrium>& e) -> std::array<std::string, 3> {
      if (!e) return {"", "", ""};
      return {num(e->x(0)), num(e->x(1)), std::string(to_string(e->stability))};
    };
    const auto u = cells(fp.saddle), s = cells(fp.storm);
    t.add_row({num(cc), std::string(to_string(fp.status)), num(fp.origin.x(0)), num(fp.origin.x(1)), u[0],
               u[1], s[0], s[1], std::string(to_string(fp.origin.stability)), u[2], s[2]});
  }
  CommandOutput out;
  out.payload = {{"gamma", c.model.gamma},
                 {"rows", t.rows.size()},
                 {"saddle_node_c", saddle_node_locus(c.model.gamma, c.model.rho())}};
  out.tables.emplace_back("branches", std::move(t));
  return out;
}

CommandOutput cmd_phase_diagram(const RunConfig& c) {
  Table t{{"gamma", "c_star"}, {}};
  for (double g : linspace(c.sweep.gamma_min, c.sweep.gamma_max, c.sweep.gamma_count)) {
    t.add_row({num(g), num(saddle_node_locus(g, c.model.rho()))});
  }
  CommandOutput out;
  out.payload = {{"rho", c.model.rho()}, {"rows", t.rows.size()}};
  out.tables.emplace_back("locus", std::move(t));
  return out;
}

CommandOutput cmd_separatrix(const RunConfig& c) {
  const auto fp = three_equilibria(c.model, "separatrix");
  const auto sep = build_separatrix(c.model, c.manifold);
  Table stable{{"v", "m"}, {}};
  for (const auto& x : sep.polyline()) stable.add_row({num(x(0)), num(x(1))});
  Table unstable{{"branch", "v", "m"}, {}};
  Json branches = Json::array();
  for (auto sign : {BranchSign::kPlus, BranchSign::kMinus}) {
    const auto b = saddle_manifold(c.model, ManifoldKind::kUnstable, sign, c.manifold);
    const char* name = sign == BranchSign::kPlus ? "plus" : "minus";
    for (const auto& x : b.points) unstable.add_row({name, num(x(0)), num(x(1))});
    branches.push_back({{"branch", name},
                        {"points", b.points.size()},
                        {"termination", std::string(to_string(b.termination))},
                        {"length", b.length}});
  }
  CommandOutput out;
  out.payload = {{"saddle", state_json(fp.saddle->x)},
                 {"stable_points", stable.rows.size()},
                 {"unstable_branches", branches}};
  out.tables.emplace_back("stable", std::move(stable));
  out.tables.emplace_back("unstable", std::move(unstable));
  return out;
}

CommandOutput cmd_basin_grid(const RunConfig& c) {
  const auto g = basin_grid(c.model, c.grid.nv, c.grid.nm, c.grid.basin);
  Table t{{"i", "j", "v", "m", "label"}, {}};
  std::map<std::string, long> counts;
  for (std::size_t j = 0; j < g.m.size(); ++j) {
    for (std::size_t i = 0; i < g.v.size(); ++i) {
      const std::string label(to_string(g.at(i, j)));
      ++counts[label];
      t.add_row({num(static_cast<long>(i)), num(static_cast<long>(j)), num(g.v[i]), num(g.m[j]), label});
    }
  }
  CommandOutput out;
  out.payload = {{"nv", g.v.size()}, {"nm", g.m.size()}, {"counts", counts}};
  out.tables.emplace_back("labels", std::move(t));
  return out;
}

CommandOutput cmd_center_manifold(const RunConfig& c) {
  const int order = c.center_manifold.order;
  Table t{{"v", "m", "dm_dv", "dv_dtau"}, {}};
  for (double v : linspace(0.0, c.center_manifold.v_max, c.center_manifold.count)) {
    const double m = center_manifold(v, c.model, order);
    t.add_row({num(v), num(m), num(center_manifold_slope(v, c.model, order)),
               num(drift_v(v, m, c.model))});
  }
  CommandOutput out;
  out.payload = {{"order", order}, {"rows", t.rows.size()}};
  out.tables.emplace_back("curve", std::move(t));
  return out;
}

CommandOutput cmd_rate_tip(const RunConfig& c) {
  const auto& spec = c.ramp.spec;
  const double gamma = c.model.gamma;
  const auto run = simulate_ramp(storm_minus(spec, gamma), spec, gamma, c.ramp.run);
  Table t{{"tau", "v", "m"}, {}};
  for (std::size_t k = 0; k < run.path.t.size(); ++k) {
    t.add_row({num(run.path.t[k]), num(run.path.x[k](0)), num(run.path.x[k](1))});
  }
  CommandOutput out;
  out.payload = {{"r", spec.r},
                 {"verdict", std::string(to_string(run.verdict))},
                 {"start", state_json(storm_minus(spec, gamma))},
                 {"final_state", state_json(run.final_state)},
                 {"storm_plus", state_json(run.storm_plus)},
                 {"distance_to_storm", run.distance_to_storm},
                 {"distance_to_origin", run.distance_to_origin},
                 {"min_distance_to_saddle", run.min_distance_to_saddle},
                 {"tau0", run.tau0},
                 {"tau_f", run.tau_f},
                 {"quasi_static", run.quasi_static}};
  out.tables.emplace_back("trajectory", std::move(t));
  return out;
}

CommandOutput cmd_critical_rate(const RunConfig& c) {
  const auto cr = critical_rate(c.ramp.spec, c.model.gamma, c.ramp.r_lo, c.ramp.r_hi, c.ramp.tol,
                                c.ramp.run);
  CommandOutput out;
  out.payload = {{"r_lo", cr.r_lo},
                 {"r_hi", cr.r_hi},
                 {"width", cr.r_hi - cr.r_lo},
                 {"iterations", cr.iterations},
                 {"settle_doublings", cr.settle_doublings}};
  return out;
}

State stochastic_start(const RunConfig& c, const char* who) {
  if (c.stochastic.x0) return *c.stochastic.x0;
  if (c.stochastic.start == "O") return State::Zero();
  if (c.stochastic.start == "S") return three_equilibria(c.model, who).storm->x;
  throw ConfigError(std::string(who) + ": start " + c.stochastic.start + " is not available");
}

Json stats_json(const EnsembleStats& s) {
  return {{"n_realizations", s.n_realizations},
          {"n_tipped", s.n_tipped},
          {"tip_fraction", s.tip_fraction},
          {"standard_error", s.standard_error},
          {"tip_time_mean", number_or_null(s.tip_time_mean)},
          {"tip_time_median", number_or_null(s.tip_time_median)}};
}

CommandOutput cmd_sde_ensemble(const RunConfig& c) {
  const State x0 = stochastic_start(c, "sde-ensemble");
  EnsembleOptions opt;
  opt.convention = c.stochastic.convention;
  const auto res = run_ensemble(x0, c.model, c.stochastic.noise, c.stochastic.count, opt);
  Table t{{"index", "tipped", "kind", "tau_star", "step", "n_events", "unresolved", "final_tau",
           "final_v", "final_m"},
          {}};
  for (const auto& r : res.realizations) {
    const auto& e = r.first_event;
    t.add_row({num(r.index), e ? "1" : "0", e ? std::string(to_string(e->kind)) : "",
               e ? num(e->tau_star) : "", e ? num(e->step) : "", num(r.n_events), r.unresolved ? "1" : "0",
               num(r.final_tau), num(r.final_raw(0)), num(r.final_raw(1))});
  }
  CommandOutput out;
  out.payload = {{"x0", state_json(x0)},
                 {"counted_kind", std::string(to_string(res.counted_kind))},
                 {"stats", stats_json(res.stats)}};
  out.tables.emplace_back("realizations", std::move(t));
  return out;
}

CommandOutput cmd_combined(const RunConfig& c) {
  const auto& spec = c.ramp.spec;
  const State x0 = c.stochastic.x0                   ? *c.stochastic.x0
                   : c.stochastic.start == "S_minus" ? storm_minus(spec, c.model.gamma)
                   : c.stochastic.start == "O"       ? State::Zero()
                                                     : throw ConfigError("combined: start must be O or S_minus");
  CombinedOptions opt;
  opt.near_tol = c.stochastic.near_tol;
  opt.convention = c.stochastic.convention;
  const auto res = combined_rate_noise(x0, spec, c.model.gamma, c.stochastic.noise, c.stochastic.count, opt);
  Table t{{"index", "label", "tau_near_storm_minus", "tau_first_crossing", "final_v", "final_m"}, {}};
  for (const auto& r : res.realizations) {
    t.add_row({num(r.index), std::string(to_string(r.label)), format_optional(r.tau_near_storm_minus),
               format_optional(r.tau_first_crossing), num(r.final_state(0)), num(r.final_state(1))});
  }
  Json counts;
  for (auto l : {CombinedLabel::kTippedStoO, CombinedLabel::kTrackedStoS, CombinedLabel::kTippedOtoS,
                 CombinedLabel::kStayedO}) {
    counts[std::string(to_string(l))] = res.counts[static_cast<int>(l)];
  }
  CommandOutput out;
  out.payload = {{"r", spec.r},
                 {"x0", state_json(x0)},
                 {"tau0", res.tau0},
                 {"tau_f", res.tau_f},
                 {"storm_minus", state_json(res.storm_minus)},
                 {"storm_plus", state_json(res.storm_plus)},
                 {"counts", counts},
                 {"o_to_s_near_storm_minus_fraction", number_or_null(res.o_to_s_near_storm_minus_fraction)}};
  out.tables.emplace_back("realizations", std::move(t));
  return out;
}

Json mam_json(const MamResult& m) {
  return {{"action", m.path.action},
          {"iterations", m.iterations},
          {"rejections", m.rejections},
          {"gauge_shifts", m.gauge_shifts},
          {"flow_time", m.s},
          {"stationarity", m.stationarity},
          {"T", m.path.tau_f - m.path.tau0},
          {"nodes", m.path.size()}};
}

CommandOutput cmd_mpp(const RunConfig& c) {
  const auto fp = three_equilibria(c.model, "mpp");
  const WeightMatrix w = weights(c);
  MppOptions opt;
  opt.grid = c.action.grid;
  opt.mam = c.action.mam;
  const auto a = mpp_assemble(c.model, w, opt);
  Table path{{"segment", "tau", "v", "m"}, {}};
  const auto& f = a.flow_segment;
  for (std::size_t i = 0; i < f.size(); ++i) {
    path.add_row({"flow", num(f.tau(i)), num(f.psi[i](0)), num(f.psi[i](1))});
  }
  const double t0 = f.tau(f.size() - 1);
  for (std::size_t k = 0; k < a.tail.t.size(); ++k) {
    path.add_row({"tail", num(t0 + a.tail.t[k]), num(a.tail.x[k](0)), num(a.tail.x[k](1))});
  }
  Table local{{"v", "m_local", "p1", "p2"}, {}};
  for (double v : linspace(0.0, 0.5 * fp.saddle->x(0), 51)) {
    const auto l = local_mpp(v, c.model, w, c.action.branch);
    local.add_row({num(v), num(l.m), num(l.p1), num(l.p2)});
  }
  CommandOutput out;
  out.payload = {{"flow_action", a.flow_action},
                 {"tail_action", a.tail_action},
                 {"total_action", a.total_action},
                 {"junction_mismatch", a.junction_mismatch},
                 {"min_distance_to_saddle", a.min_distance_to_saddle},
                 {"mam", mam_json(a.mam)}};
  out.tables.emplace_back("path", std::move(path));
  out.tables.emplace_back("local", std::move(local));
  return out;
}

TransitionPath path_from_csv(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open path file " + file);
  const Table t = read_csv(in);
  TransitionPath p;
  std::vector<double> tau, v, m;
  try {
    tau = t.numeric_column("tau");
    v = t.numeric_column("v");
    m = t.numeric_column("m");
  } catch (const std::out_of_range& e) {
    throw ConfigError(std::string("path file: ") + e.what());
  }
  if (tau.size() < 3) throw ConfigError("path file needs at least 3 rows");
  p.tau0 = tau.front();
  p.tau_f = tau.back();
  for (std::size_t k = 0; k < tau.size(); ++k) p.psi.emplace_back(v[k], m[k]);
  const double h = p.h();
  for (std::size_t k = 0; k < tau.size(); ++k) {
    if (!(std::abs(tau[k] - p.tau(k)) <= 1e-9 * std::max(1.0, std::abs(p.tau_f)))) {
      throw ConfigError("path file must use a uniform tau grid (spacing " + num(h) + ")");
    }
  }
  return p;
}

CommandOutput cmd_action(const RunConfig& c) {
  const WeightMatrix w = weights(c);
  const auto& a = c.action;
  CommandOutput out;
  TransitionPath path;
  Json extra;
  if (a.source == "mam") {
    const auto fp = three_equilibria(c.model, "action");
    const auto res = minimum_action_path(named_equilibrium(fp, a.from), named_equilibrium(fp, a.to),
                                         c.model, w, a.grid, a.mam);
    path = res.path;
    extra = mam_json(res);
  } else if (a.source == "deterministic") {
    const auto traj = integrate_ode(a.x0, c.model, a.grid.T, a.grid.T / static_cast<double>(a.grid.nodes - 1));
    path.tau0 = 0.0;
    path.tau_f = a.grid.T;
    path.psi = traj.x;
  } else {
    path = path_from_csv(a.csv);
  }
  const double value = action_value(path, c.model, w);
  out.payload = {{"source", a.source}, {"action", value}, {"nodes", path.size()},
                 {"tau0", path.tau0}, {"tau_f", path.tau_f}};
  if (!extra.is_null()) out.payload["mam"] = extra;
  out.tables.emplace_back("path", path_table(path));
  return out;
}

CommandOutput cmd_tip_time(const RunConfig& c) {
  const WeightMatrix w = weights(c);
  const auto law = scaling_law_action(c.model, w, c.action.r_fraction);
  const auto bound = expected_tip_time_bound(c.model, w, c.action.r_fraction);
  CommandOutput out;
  out.payload = {{"action", law.action},
                 {"ratio", law.ratio},
                 {"c1", law.c1},
                 {"c2", law.c2},
                 {"linear_term", law.linear_term},
                 {"quadratic_term", law.quadratic_term},
                 {"log_bound", bound.log_value},
                 {"bound", number_or_null(bound.value)},
                 {"log_equivalence_only", bound.log_equivalence_only}};
  return out;
}

const std::vector<std::pair<std::string, Fn>>& registry() {
  static const std::vector<std::pair<std::string, Fn>> r = {
      {"fixed-points", cmd_fixed_points},   {"bifurcation", cmd_bifurcation},
      {"phase-diagram", cmd_phase_diagram}, {"separatrix", cmd_separatrix},
      {"basin-grid", cmd_basin_grid},       {"center-manifold", cmd_center_manifold},
      {"rate-tip", cmd_rate_tip},           {"critical-rate", cmd_critical_rate},
      {"sde-ensemble", cmd_sde_ensemble},   {"combined", cmd_combined},
      {"mpp", cmd_mpp},                     {"action", cmd_action},
      {"tip-time", cmd_tip_time},
  };
  return r;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [name, fn] : registry()) n.push_back(name);
    return n;
  }();
  return names;
}

CommandOutput run_command(const std::string& name, const RunConfig& config) {
  for (const auto& [n, fn] : registry()) {
    if (n == name) {
      config.validate();
      return fn(config);
    }
  }
  throw ConfigError("unknown command " + name);
}

std::vector<std::string> write_outputs(const std::string& command, const RunConfig& config,
                                       const CommandOutput& out) {
  const std::filesystem::path dir(config.out);
  ResultEnvelope env;
  env.command = command;
  env.config = to_json(config);
  env.config.erase("out");  // the envelope is identical wherever it is written
  env.payload = out.payload;
  std::vector<std::string> written{(dir / (command + ".json")).string()};
  for (const auto& [name, table] : out.tables) {
    const std::string file = command + "_" + name + ".csv";
    env.tables.push_back(file);
    written.push_back((dir / file).string());
  }
  write_text_file(written.front(), dump_json(env.to_json()));
  for (std::size_t k = 0; k < out.tables.size(); ++k) {
    write_text_file(written[k + 1], to_csv(out.tables[k].second));
  }
  return written;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const NonConvergence*>(&e)) return 4;
  if (dynamic_cast<const NumericalError*>(&e)) return 3;
  return 1;
}

Json error_record(const std::exception& e) {
  const int code = exit_code_for(e);
  const char* kind = code == 2 ? "config" : code == 3 ? "numerical" : code == 4 ? "nonconvergence" : "internal";
  Json j = {{"error", {{"kind", kind}, {"exit_code", code}, {"message", e.what()}}}};
  if (const auto* nc = dynamic_cast<const NonConvergence*>(&e)) j["error"]["last_value"] = nc->last_value();
  return j;
}

}  // namespace tctip
