#include "tctip/io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "tctip/errors.hpp"

namespace tctip {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

Json optional_json(const std::optional<double>& x) { return x ? Json(*x) : Json(nullptr); }

Json state_json(const State& x) { return Json::array({x(0), x(1)}); }

std::string_view convention_name(ReflectionConvention c) {
  return c == ReflectionConvention::kComponentwise ? "componentwise" : "as_printed";
}

std::string_view branch_name(MomentumBranch b) {
  return b == MomentumBranch::kHamiltonianZero ? "hamiltonian_zero" : "as_printed";
}

// Reads the members of one JSON object, rejecting keys nobody asked for.
class Section {
 public:
  Section(const Json& j, std::string name) : name_(std::move(name)) {
    if (j.is_null()) return;
    require(j.is_object(), name_ + " must be an object");
    j_ = &j;
  }
  void finish() const {
    if (!j_) return;
    for (const auto& [key, value] : j_->items()) {
      require(seen_.count(key) > 0, "unknown key " + name_ + "." + key);
    }
  }

  const Json* find(const std::string& key) {
    seen_.insert(key);
    if (!j_) return nullptr;
    auto it = j_->find(key);
    return it == j_->end() ? nullptr : &*it;
  }

  void get(const std::string& key, double& out) {
    if (const Json* v = find(key)) {
      require(v->is_number(), name_ + "." + key + " must be a number");
      out = v->get<double>();
    }
  }
  template <typename I>
  void get_integer(const std::string& key, I& out) {
    if (const Json* v = find(key)) {
      require(v->is_number_integer(), name_ + "." + key + " must be an integer");
      out = v->get<I>();
    }
  }
  void get(const std::string& key, std::string& out) {
    if (const Json* v = find(key)) {
      require(v->is_string(), name_ + "." + key + " must be a string");
      out = v->get<std::string>();
    }
  }
  void get(const std::string& key, std::optional<double>& out) {
    if (const Json* v = find(key)) {
      if (v->is_null()) {
        out.reset();
        return;
      }
      require(v->is_number(), name_ + "." + key + " must be a number or null");
      out = v->get<double>();
    }
  }
  void get(const std::string& key, State& out) {
    if (const Json* v = find(key)) out = parse_state(*v, key);
  }
  void get(const std::string& key, std::optional<State>& out) {
    if (const Json* v = find(key)) {
      if (v->is_null()) {
        out.reset();
      } else {
        out = parse_state(*v, key);
      }
    }
  }
  const Json& sub(const std::string& key) {
    static const Json null_json;
    const Json* v = find(key);
    return v ? *v : null_json;
  }

 private:
  State parse_state(const Json& v, const std::string& key) const {
    require(v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number(),
            name_ + "." + key + " must be [v, m]");
    return State(v[0].get<double>(), v[1].get<double>());
  }

  const Json* j_ = nullptr;
  std::string name_;
  std::set<std::string> seen_;
};

void require_finite(double x, const std::string& what) {
  require(std::isfinite(x), what + " must be finite");
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  require(sweep.c_count >= 0 && sweep.gamma_count >= 0, "sweep counts must be nonnegative");
  require_finite(sweep.c_min, "sweep.c_min");
  require_finite(sweep.c_max, "sweep.c_max");
  require(sweep.c_count == 0 || (sweep.c_min > 0.0 && sweep.c_max >= sweep.c_min),
          "sweep needs 0 < c_min <= c_max");
  require(sweep.gamma_count == 0 ||
              (sweep.gamma_min > 0.0 && sweep.gamma_max >= sweep.gamma_min && sweep.gamma_max < 1.0),
          "sweep needs 0 < gamma_min <= gamma_max < 1");
  require(grid.nv >= 2 && grid.nm >= 2, "grid needs at least 2 x 2 points");
  require(grid.basin.t_max > 0.0 && grid.basin.tol > 0.0 && grid.basin.dt > 0.0,
          "basin options must be positive");
  require(center_manifold.order == 3 || center_manifold.order == 5,
          "center_manifold.order must be 3 or 5");
  require(center_manifold.v_max > 0.0 && center_manifold.count >= 2,
          "center_manifold needs v_max > 0 and count >= 2");
  ramp.spec.validate();
  require(ramp.run.dt > 0.0 && ramp.run.settle > 0.0 && ramp.run.tol > 0.0,
          "ramp run options must be positive");
  require(ramp.r_lo > 0.0 && ramp.r_hi > ramp.r_lo && ramp.tol > 0.0,
          "critical-rate bracket needs 0 < r_lo < r_hi and tol > 0");
  stochastic.noise.validate();
  require(stochastic.count >= 1, "stochastic.count must be positive");
  require(stochastic.x0 || stochastic.start == "O" || stochastic.start == "S" ||
              stochastic.start == "S_minus",
          "stochastic.start must be O, S or S_minus");
  require(stochastic.near_tol > 0.0, "stochastic.near_tol must be positive");
  require(action.grid.T > 0.0 && action.grid.nodes >= 3, "action grid needs T > 0, nodes >= 3");
  require(action.r_fraction > 0.0 && action.r_fraction < 1.0, "action.r_fraction must lie in (0, 1)");
  require(action.source == "mam" || action.source == "deterministic" || action.source == "csv",
          "action.source must be mam, deterministic or csv");
  require(action.source != "csv" || !action.csv.empty(), "action.csv is required for source csv");
  for (const auto& e : {action.from, action.to}) {
    require(e == "O" || e == "U" || e == "S", "action endpoints must be O, U or S");
  }
}

Json to_json(const RunConfig& c) {
  Json j;
  j["model"] = {{"gamma", c.model.gamma},
                {"c", c.model.c},
                {"vp", optional_json(c.model.vp)},
                {"vp_ref", optional_json(c.model.vp_ref)}};
  j["sweep"] = {{"c_min", c.sweep.c_min},
                {"c_max", c.sweep.c_max},
                {"c_count", c.sweep.c_count},
                {"gamma_min", c.sweep.gamma_min},
                {"gamma_max", c.sweep.gamma_max},
                {"gamma_count", c.sweep.gamma_count}};
  j["grid"] = {{"nv", c.grid.nv},
               {"nm", c.grid.nm},
               {"t_max", c.grid.basin.t_max},
               {"tol", c.grid.basin.tol},
               {"dt", c.grid.basin.dt}};
  j["manifold"] = {{"eps", c.manifold.eps},
                   {"arclength", c.manifold.arclength},
                   {"ds", c.manifold.ds},
                   {"dt_max", c.manifold.dt_max},
                   {"equilibrium_tol", c.manifold.equilibrium_tol},
                   {"max_steps", c.manifold.max_steps}};
  j["center_manifold"] = {{"order", c.center_manifold.order},
                          {"v_max", c.center_manifold.v_max},
                          {"count", c.center_manifold.count}};
  const auto& s = c.ramp.spec;
  j["ramp"] = {{"r", s.r},
               {"shape", std::string(to_string(s.shape))},
               {"vp_minus", s.vp_minus},
               {"vp_plus", s.vp_plus},
               {"k", s.k},
               {"shear_minus", optional_json(s.shear_minus)},
               {"shear_plus", optional_json(s.shear_plus)},
               {"tau0", optional_json(c.ramp.run.tau0)},
               {"tau_f", optional_json(c.ramp.run.tau_f)},
               {"settle", c.ramp.run.settle},
               {"dt", c.ramp.run.dt},
               {"tol", c.ramp.run.tol},
               {"store_every", c.ramp.run.store_every},
               {"r_lo", c.ramp.r_lo},
               {"r_hi", c.ramp.r_hi},
               {"bisection_tol", c.ramp.tol}};
  const auto& n = c.stochastic.noise;
  j["stochastic"] = {{"sigma1", n.sigma1},
                     {"sigma2", n.sigma2},
                     {"dt", n.dt},
                     {"tau_f", n.tau_f},
                     {"store_every", n.store_every},
                     {"count", c.stochastic.count},
                     {"start", c.stochastic.start},
                     {"x0", c.stochastic.x0 ? state_json(*c.stochastic.x0) : Json(nullptr)},
                     {"convention", std::string(convention_name(c.stochastic.convention))},
                     {"near_tol", c.stochastic.near_tol}};
  const auto& a = c.action;
  j["action"] = {{"T", a.grid.T},
                 {"nodes", a.grid.nodes},
                 {"s_max", a.mam.s_max},
                 {"ds", a.mam.ds},
                 {"ds_max", a.mam.ds_max},
                 {"tol", a.mam.tol},
                 {"min_iterations", a.mam.min_iterations},
                 {"gauge_every", a.mam.gauge_every},
                 {"max_iterations", a.mam.max_iterations},
                 {"r_fraction", a.r_fraction},
                 {"momentum_branch", std::string(branch_name(a.branch))},
                 {"source", a.source},
                 {"x0", state_json(a.x0)},
                 {"from", a.from},
                 {"to", a.to},
                 {"csv", a.csv}};
  j["seed"] = c.seed;
  j["out"] = c.out;
  return j;
}

RunConfig run_config_from_json(const Json& in) {
  require(in.is_object(), "config must be a JSON object");
  if (in.contains("schema_version") && in.contains("config")) return run_config_from_json(in["config"]);
  RunConfig c;
  try {
    Section top(in, "config");
    {
      Section s(top.sub("model"), "model");
      s.get("gamma", c.model.gamma);
      s.get("c", c.model.c);
      s.get("vp", c.model.vp);
      s.get("vp_ref", c.model.vp_ref);
      s.finish();
    }
    {
      Section s(top.sub("sweep"), "sweep");
      s.get("c_min", c.sweep.c_min);
      s.get("c_max", c.sweep.c_max);
      s.get_integer("c_count", c.sweep.c_count);
      s.get("gamma_min", c.sweep.gamma_min);
      s.get("gamma_max", c.sweep.gamma_max);
      s.get_integer("gamma_count", c.sweep.gamma_count);
      s.finish();
    }
    {
      Section s(top.sub("grid"), "grid");
      s.get_integer("nv", c.grid.nv);
      s.get_integer("nm", c.grid.nm);
      s.get("t_max", c.grid.basin.t_max);
      s.get("tol", c.grid.basin.tol);
      s.get("dt", c.grid.basin.dt);
      s.finish();
    }
    {
      Section s(top.sub("manifold"), "manifold");
      s.get("eps", c.manifold.eps);
      s.get("arclength", c.manifold.arclength);
      s.get("ds", c.manifold.ds);
      s.get("dt_max", c.manifold.dt_max);
      s.get("equilibrium_tol", c.manifold.equilibrium_tol);
      s.get_integer("max_steps", c.manifold.max_steps);
      s.finish();
    }
    {
      Section s(top.sub("center_manifold"), "center_manifold");
      s.get_integer("order", c.center_manifold.order);
      s.get("v_max", c.center_manifold.v_max);
      s.get_integer("count", c.center_manifold.count);
      s.finish();
    }
    {
      Section s(top.sub("ramp"), "ramp");
      auto& r = c.ramp;
      s.get("r", r.spec.r);
      std::string shape(to_string(r.spec.shape));
      s.get("shape", shape);
      r.spec.shape = ramp_shape_from_string(shape);
      s.get("vp_minus", r.spec.vp_minus);
      s.get("vp_plus", r.spec.vp_plus);
      s.get("k", r.spec.k);
      s.get("shear_minus", r.spec.shear_minus);
      s.get("shear_plus", r.spec.shear_plus);
      s.get("tau0", r.run.tau0);
      s.get("tau_f", r.run.tau_f);
      s.get("settle", r.run.settle);
      s.get("dt", r.run.dt);
      s.get("tol", r.run.tol);
      s.get_integer("store_every", r.run.store_every);
      s.get("r_lo", r.r_lo);
      s.get("r_hi", r.r_hi);
      s.get("bisection_tol", r.tol);
      s.finish();
    }
    {
      Section s(top.sub("stochastic"), "stochastic");
      auto& st = c.stochastic;
      s.get("sigma1", st.noise.sigma1);
      s.get("sigma2", st.noise.sigma2);
      s.get("dt", st.noise.dt);
      s.get("tau_f", st.noise.tau_f);
      s.get_integer("store_every", st.noise.store_every);
      s.get_integer("count", st.count);
      s.get("start", st.start);
      s.get("x0", st.x0);
      std::string conv(convention_name(st.convention));
      s.get("convention", conv);
      require(conv == "componentwise" || conv == "as_printed",
              "stochastic.convention must be componentwise or as_printed");
      st.convention =
          conv == "componentwise" ? ReflectionConvention::kComponentwise : ReflectionConvention::kAsPrinted;
      s.get("near_tol", st.near_tol);
      s.finish();
    }
    {
      Section s(top.sub("action"), "action");
      auto& a = c.action;
      s.get("T", a.grid.T);
      s.get_integer("nodes", a.grid.nodes);
      s.get("s_max", a.mam.s_max);
      s.get("ds", a.mam.ds);
      s.get("ds_max", a.mam.ds_max);
      s.get("tol", a.mam.tol);
      s.get_integer("min_iterations", a.mam.min_iterations);
      s.get_integer("gauge_every", a.mam.gauge_every);
      s.get_integer("max_iterations", a.mam.max_iterations);
      s.get("r_fraction", a.r_fraction);
      std::string branch(branch_name(a.branch));
      s.get("momentum_branch", branch);
      require(branch == "hamiltonian_zero" || branch == "as_printed",
              "action.momentum_branch must be hamiltonian_zero or as_printed");
      a.branch = branch == "hamiltonian_zero" ? MomentumBranch::kHamiltonianZero
                                              : MomentumBranch::kAsPrinted;
      s.get("source", a.source);
      s.get("x0", a.x0);
      s.get("from", a.from);
      s.get("to", a.to);
      s.get("csv", a.csv);
      s.finish();
    }
    if (const Json* v = top.find("seed")) {
      require(v->is_number_unsigned() || (v->is_number_integer() && v->get<long long>() >= 0),
              "seed must be a nonnegative integer");
      c.seed = v->get<std::uint64_t>();
    }
    top.get("out", c.out);
    top.finish();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.stochastic.noise.seed = c.seed;
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot open config file " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

Json ResultEnvelope::to_json() const {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = command;
  j["produced_by"] = {{"program", "tctip"}, {"schema", "tctip-result"}};
  j["config"] = config;
  j["tables"] = tables;
  j["payload"] = payload;
  return j;
}

void Table::add_row(std::vector<std::string> row) {
  if (row.size() != header.size()) {
    throw std::invalid_argument("table row has " + std::to_string(row.size()) + " cells, header has " +
                                std::to_string(header.size()));
  }
  rows.push_back(std::move(row));
}

std::vector<double> Table::numeric_column(const std::string& name) const {
  std::size_t k = 0;
  while (k < header.size() && header[k] != name) ++k;
  if (k == header.size()) throw std::out_of_range("no column " + name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    out.push_back(r[k].empty() ? std::nan("") : std::strtod(r[k].c_str(), nullptr));
  }
  return out;
}

std::string format_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string format_number(long x) { return std::to_string(x); }

std::string format_optional(const std::optional<double>& x) { return x ? format_number(*x) : ""; }

namespace {

void write_field(std::ostream& os, const std::string& f) {
  if (f.find_first_of(",\"\n\r") == std::string::npos) {
    os << f;
    return;
  }
  os << '"';
  for (char ch : f) {
    if (ch == '"') os << '"';
    os << ch;
  }
  os << '"';
}

void write_record(std::ostream& os, const std::vector<std::string>& r) {
  for (std::size_t k = 0; k < r.size(); ++k) {
    if (k) os << ',';
    write_field(os, r[k]);
  }
  os << '\n';
}

}  // namespace

void write_csv(std::ostream& os, const Table& t) {
  write_record(os, t.header);
  for (const auto& r : t.rows) write_record(os, r);
}

std::string to_csv(const Table& t) {
  std::ostringstream os;
  write_csv(os, t);
  return os.str();
}

Table parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    if (ch == '"') {
      quoted = true;
      any = true;
    } else if (ch == ',') {
      record.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      record.push_back(std::move(field));
      field.clear();
      records.push_back(std::move(record));
      record.clear();
      any = false;
    } else {
      field += ch;
      any = true;
    }
  }
  if (quoted) throw std::invalid_argument("csv: unterminated quoted field");
  if (any || !field.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  Table t;
  if (records.empty()) return t;
  t.header = std::move(records.front());
  for (std::size_t k = 1; k < records.size(); ++k) {
    if (records[k].size() != t.header.size()) {
      throw std::invalid_argument("csv: record " + std::to_string(k) + " has the wrong field count");
    }
    t.rows.push_back(std::move(records[k]));
  }
  return t;
}

Table read_csv(std::istream& is) {
  std::ostringstream os;
  os << is.rdbuf();
  return parse_csv(os.str());
}

void write_text_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace tctip
