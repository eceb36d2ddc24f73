#include "tctip/stochastic.hpp"

#include <algorithm>
#include <string>

#include "tctip/errors.hpp"
#include "tctip/ode.hpp"
#include "tctip/parallel.hpp"

namespace tctip {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Smallest step count covering tau_f, ignoring round-off in the ratio.
long step_count(const NoiseSpec& n) { return static_cast<long>(std::ceil(n.tau_f / n.dt - 1e-9)); }

}  // namespace

void NoiseSpec::validate() const {
  require(std::isfinite(sigma1) && sigma1 >= 0.0, "sigma1 must be nonnegative");
  require(std::isfinite(sigma2) && sigma2 >= 0.0, "sigma2 must be nonnegative");
  require(std::isfinite(dt) && dt > 0.0, "dt must be positive");
  require(std::isfinite(tau_f) && tau_f >= dt, "tau_f must be at least dt");
  require(store_every >= 1, "store_every must be at least 1");
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t realization, std::uint64_t component) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ realization);
  return splitmix64(h ^ (component + 0x632be59bd9b4e019ULL));
}

std::string_view to_string(TipKind k) {
  return k == TipKind::kOtoS ? "O_to_S" : "S_to_O";
}

std::string_view to_string(CombinedLabel l) {
  switch (l) {
    case CombinedLabel::kTippedStoO: return "tipped_S_to_O";
    case CombinedLabel::kTrackedStoS: return "tracked_S_to_S";
    case CombinedLabel::kTippedOtoS: return "tipped_O_to_S";
    case CombinedLabel::kStayedO: return "stayed_O";
  }
  return "unknown";
}

Realization euler_maruyama(const State& x0, const ModelParams& p, const NoiseSpec& n,
                           std::uint64_t index, ReflectionConvention conv) {
  n.validate();
  NormalStream w1(n.seed, index, 0), w2(n.seed, index, 1);
  const long steps = step_count(n);
  Realization out;
  out.t.reserve(steps / n.store_every + 2);
  out.x.reserve(steps / n.store_every + 2);
  out.t.push_back(0.0);
  out.x.push_back(x0);
  State x = x0;
  for (long k = 1; k <= steps; ++k) {
    const double xi1 = w1(), xi2 = w2();
    x = euler_maruyama_step(x, p, n.dt, xi1, xi2, n.sigma1, n.sigma2, conv);
    if (!all_finite(x)) {
      throw NumericalError("euler_maruyama: non-finite state at step " + std::to_string(k));
    }
    if (k % n.store_every == 0 || k == steps) {
      out.t.push_back(k * n.dt);
      out.x.push_back(x);
    }
  }
  return out;
}

TipDetector::TipDetector(const Separatrix& sep, const State& x0)
    : sep_(&sep), origin_side_(sep.origin_side(reflect(x0))) {
  if (!sep.covers(reflect(x0))) unresolved_ = true;
}

bool TipDetector::observe(const State& raw, double tau, long step) {
  const State x = reflect(raw);
  if (!sep_->covers(x)) unresolved_ = true;
  const bool side = sep_->origin_side(x);
  if (side == origin_side_) return false;
  events_.push_back({origin_side_ ? TipKind::kOtoS : TipKind::kStoO, tau, step});
  origin_side_ = side;
  return true;
}

TipDetection detect_tips(const Realization& real, const Separatrix& sep) {
  TipDetection out;
  if (real.x.empty()) return out;
  TipDetector det(sep, real.x.front());
  for (std::size_t k = 1; k < real.x.size(); ++k) {
    det.observe(real.x[k], real.t[k], static_cast<long>(k));
  }
  out.events = det.events();
  out.unresolved = det.unresolved();
  return out;
}

EnsembleStats summarize(const std::vector<std::optional<double>>& first_tip_times) {
  EnsembleStats s;
  s.n_realizations = static_cast<long>(first_tip_times.size());
  std::vector<double> times;
  for (const auto& t : first_tip_times) {
    if (t) times.push_back(*t);
  }
  s.n_tipped = static_cast<long>(times.size());
  if (s.n_realizations > 0) {
    s.tip_fraction = static_cast<double>(s.n_tipped) / s.n_realizations;
    s.standard_error = std::sqrt(s.tip_fraction * (1.0 - s.tip_fraction) / s.n_realizations);
  }
  if (!times.empty()) {
    double sum = 0.0;
    for (double t : times) sum += t;
    s.tip_time_mean = sum / times.size();
    std::sort(times.begin(), times.end());
    const std::size_t h = times.size() / 2;
    s.tip_time_median = times.size() % 2 ? times[h] : 0.5 * (times[h - 1] + times[h]);
  }
  return s;
}

EnsembleResult run_ensemble(const State& x0, const ModelParams& p, const NoiseSpec& n, long count,
                            const EnsembleOptions& opt) {
  n.validate();
  return run_ensemble(x0, p, n, count, build_separatrix(p), opt);
}

EnsembleResult run_ensemble(const State& x0, const ModelParams& p, const NoiseSpec& n, long count,
                            const Separatrix& sep, const EnsembleOptions& opt) {
  n.validate();
  require(count >= 0, "count must be nonnegative");
  const long steps = step_count(n);
  EnsembleResult out;
  out.counted_kind = sep.origin_side(reflect(x0)) ? TipKind::kOtoS : TipKind::kStoO;
  out.realizations.resize(count);
  parallel_for(static_cast<std::size_t>(count), [&](std::size_t j) {
    NormalStream w1(n.seed, j, 0), w2(n.seed, j, 1);
    TipDetector det(sep, x0);
    State x = x0;
    long k = 1;
    for (; k <= steps; ++k) {
      const double xi1 = w1(), xi2 = w2();
      x = euler_maruyama_step(x, p, n.dt, xi1, xi2, n.sigma1, n.sigma2, opt.convention);
      if (!all_finite(x)) {
        throw NumericalError("run_ensemble: non-finite state in realization " +
                             std::to_string(j));
      }
      if (det.observe(x, k * n.dt, k) && opt.stop_at_first_tip) break;
    }
    RealizationSummary& r = out.realizations[j];
    r.index = static_cast<long>(j);
    r.n_events = static_cast<long>(det.events().size());
    if (!det.events().empty()) r.first_event = det.events().front();
    r.unresolved = det.unresolved();
    r.final_raw = x;
    r.final_tau = std::min(k, steps) * n.dt;
  });
  std::vector<std::optional<double>> first;
  first.reserve(count);
  for (const auto& r : out.realizations) {
    first.push_back(r.first_event ? std::optional<double>(r.first_event->tau_star) : std::nullopt);
  }
  out.stats = summarize(first);
  return out;
}

CombinedResult combined_rate_noise(const State& x0, const RampSpec& spec, double gamma,
                                   const NoiseSpec& n, long count, const CombinedOptions& opt) {
  spec.validate();
  n.validate();
  require(spec.r > 0.0, "combined_rate_noise needs r > 0");
  require(count >= 0, "count must be nonnegative");
  require(opt.near_tol > 0.0, "near_tol must be positive");
  CombinedResult out;
  out.tau0 = -0.5 * n.tau_f;
  out.tau_f = 0.5 * n.tau_f;
  require(ramp_value(out.tau_f, spec) > 1.0 - 1e-6,
          "tau_f too short: the ramp has not saturated at tau_f / 2");
  const ModelParams p_start = frozen_params_at_lambda(0.0, spec, gamma);
  const ModelParams p_end = frozen_params_at_lambda(1.0, spec, gamma);
  const Separatrix sep_start = build_separatrix(p_start);
  const Separatrix sep_end = build_separatrix(p_end);
  out.storm_minus = fixed_points(p_start).storm->x;
  out.storm_plus = fixed_points(p_end).storm->x;
  const bool start_o = sep_start.origin_side(reflect(x0));
  const long steps = step_count(n);
  const double g = gamma;

  out.realizations.resize(count);
  parallel_for(static_cast<std::size_t>(count), [&](std::size_t j) {
    NormalStream w1(n.seed, j, 0), w2(n.seed, j, 1);
    CombinedRealization& r = out.realizations[j];
    r.index = static_cast<long>(j);
    const double sq = std::sqrt(n.dt);
    ModelParams p;
    p.gamma = g;
    p.vp_ref = spec.vp_minus;
    State x = x0;
    if (opt.store_every > 0) {
      r.path.t.push_back(out.tau0);
      r.path.x.push_back(x);
    }
    bool side = start_o;
    for (long k = 0; k < steps; ++k) {
      const double tau = out.tau0 + k * n.dt;
      const RampedValues rv = ramped_params(tau, spec);
      p.c = rv.c;
      p.vp = rv.vp;
      const double xi1 = w1(), xi2 = w2();
      x += n.dt * reflected_field(x, p, opt.convention) + State(n.sigma1 * sq * xi1,
                                                               n.sigma2 * sq * xi2);
      if (!all_finite(x)) {
        throw NumericalError("combined_rate_noise: non-finite state in realization " +
                             std::to_string(j));
      }
      const State y = reflect(x);
      const double t_next = tau + n.dt;
      if (!r.tau_near_storm_minus && (y - out.storm_minus).norm() < opt.near_tol) {
        r.tau_near_storm_minus = t_next;
      }
      if (!r.tau_first_crossing && sep_start.origin_side(y) != side) {
        r.tau_first_crossing = t_next;
        side = !side;
      }
      if (opt.store_every > 0 && ((k + 1) % opt.store_every == 0 || k + 1 == steps)) {
        r.path.t.push_back(t_next);
        r.path.x.push_back(x);
      }
    }
    r.final_state = reflect(x);
    const bool end_o = sep_end.origin_side(r.final_state);
    if (start_o) {
      r.label = end_o ? CombinedLabel::kStayedO : CombinedLabel::kTippedOtoS;
    } else {
      r.label = end_o ? CombinedLabel::kTippedStoO : CombinedLabel::kTrackedStoS;
    }
  });
  long near = 0;
  for (const auto& r : out.realizations) {
    ++out.counts[static_cast<int>(r.label)];
    if (r.label == CombinedLabel::kTippedOtoS && r.tau_near_storm_minus) ++near;
  }
  const long tipped_os = out.counts[static_cast<int>(CombinedLabel::kTippedOtoS)];
  if (tipped_os > 0) out.o_to_s_near_storm_minus_fraction = static_cast<double>(near) / tipped_os;
  return out;
}

}  // namespace tctip
