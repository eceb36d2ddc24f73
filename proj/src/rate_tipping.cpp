#include "tctip/rate_tipping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tctip/errors.hpp"
#include "tctip/ode.hpp"

namespace tctip {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

std::string_view to_string(RampShape s) {
  switch (s) {
    case RampShape::kTanh: return "tanh";
    case RampShape::kSmoothstep: return "smoothstep";
    case RampShape::kPiecewiseLinear: return "piecewise-linear";
  }
  return "unknown";
}

RampShape ramp_shape_from_string(std::string_view s) {
  if (s == "tanh") return RampShape::kTanh;
  if (s == "smoothstep") return RampShape::kSmoothstep;
  if (s == "piecewise-linear") return RampShape::kPiecewiseLinear;
  throw ConfigError("unknown ramp shape: " + std::string(s));
}

std::string_view to_string(TipVerdict v) {
  switch (v) {
    case TipVerdict::kTracked: return "tracked";
    case TipVerdict::kTippedToO: return "tipped_to_O";
    case TipVerdict::kUndetermined: return "undetermined";
  }
  return "unknown";
}

void RampSpec::validate() const {
  require(std::isfinite(r) && r >= 0.0, "ramp rate r must be nonnegative");
  require(std::isfinite(vp_minus) && vp_minus > 0.0, "vp_minus must be positive");
  require(std::isfinite(vp_plus) && vp_plus > 0.0, "vp_plus must be positive");
  require(shear_minus.has_value() == shear_plus.has_value(),
          "shear_minus and shear_plus must be given together");
  if (shear_minus) {
    require(std::isfinite(*shear_minus) && *shear_minus > 0.0, "shear_minus must be positive");
    require(std::isfinite(*shear_plus) && *shear_plus > 0.0, "shear_plus must be positive");
  } else {
    require(std::isfinite(k) && k > 0.0, "k must be positive");
  }
}

double ramp_value(double tau, const RampSpec& spec) {
  if (spec.r == 0.0) return 0.5;
  const double x = spec.r * tau;
  switch (spec.shape) {
    case RampShape::kTanh: return 0.5 * (1.0 + std::tanh(x));
    case RampShape::kSmoothstep: {
      const double u = clamp01(0.5 * (1.0 + x));
      return u * u * (3.0 - 2.0 * u);
    }
    case RampShape::kPiecewiseLinear: return clamp01(0.5 * (1.0 + x));
  }
  return 0.5;
}

RampedValues ramped_params_at_lambda(double lambda, const RampSpec& spec) {
  RampedValues out;
  out.lambda = lambda;
  out.vp = spec.vp_minus * (1.0 - lambda) + spec.vp_plus * lambda;
  out.shear = spec.shear_minus ? *spec.shear_minus * (1.0 - lambda) + *spec.shear_plus * lambda
                               : spec.k * out.vp;
  out.c = 2.2 * out.shear / spec.vp_minus;
  return out;
}

RampedValues ramped_params(double tau, const RampSpec& spec) {
  return ramped_params_at_lambda(ramp_value(tau, spec), spec);
}

ModelParams frozen_params_at_lambda(double lambda, const RampSpec& spec, double gamma) {
  const RampedValues rv = ramped_params_at_lambda(lambda, spec);
  ModelParams p;
  p.gamma = gamma;
  p.c = rv.c;
  p.vp = rv.vp;
  p.vp_ref = spec.vp_minus;
  return p;
}

ModelParams frozen_params(double s, const RampSpec& spec, double gamma) {
  return frozen_params_at_lambda(ramp_value(s, spec), spec, gamma);
}

FixedPointSet frozen_fixed_points(double s, const RampSpec& spec, double gamma) {
  spec.validate();
  return fixed_points(frozen_params(s, spec, gamma));
}

AugmentedState nonautonomous_field(const AugmentedState& x, const RampSpec& spec, double gamma) {
  const ModelParams p = frozen_params(x(2), spec, gamma);
  return AugmentedState(drift_v(x(0), x(1), p), drift_m(x(0), x(1), p), 1.0);
}

State storm_minus(const RampSpec& spec, double gamma) {
  spec.validate();
  const FixedPointSet fp = fixed_points(frozen_params_at_lambda(0.0, spec, gamma));
  if (!fp.has_storm()) throw NumericalError("past limit system has no stable storm state");
  return fp.storm->x;
}

RampRun simulate_ramp(const State& x0, const RampSpec& spec, double gamma,
                      const RampRunOptions& opt) {
  spec.validate();
  require(opt.dt > 0.0 && std::isfinite(opt.dt), "dt must be positive");
  require(opt.tol > 0.0, "tol must be positive");
  require(opt.settle > 0.0, "settle must be positive");
  require(opt.store_every >= 0, "store_every must be nonnegative");

  const FixedPointSet end = fixed_points(frozen_params_at_lambda(1.0, spec, gamma));
  if (!end.has_storm()) throw NumericalError("future limit system has no stable storm state");
  RampRun run;
  run.storm_plus = end.storm->x;
  run.saddle_plus = end.saddle->x;
  State x = x0;
  double min_u = (x - run.saddle_plus).norm();
  auto check = [&](const State& y, double t) {
    if (!all_finite(y)) {
      throw NumericalError("simulate_ramp: non-finite state at tau = " + std::to_string(t));
    }
    min_u = std::min(min_u, (y - run.saddle_plus).norm());
  };

  if (spec.r == 0.0) {
    run.quasi_static = true;
    run.path.t.push_back(0.0);
    run.path.x.push_back(x);
    const auto n_relax = static_cast<long>(std::ceil(opt.settle / opt.dt));
    const double h = opt.settle / n_relax;
    for (int i = 0; i <= 100; ++i) {
      const double lambda = i / 100.0;
      const ModelParams p = frozen_params_at_lambda(lambda, spec, gamma);
      auto field = [&](double, const State& y) { return vector_field(y, p); };
      for (long k = 0; k < n_relax; ++k) {
        x = rk4_step(field, 0.0, x, h);
        check(x, lambda);
      }
      run.path.t.push_back(lambda);
      run.path.x.push_back(x);
    }
  } else {
    run.tau0 = opt.tau0 ? *opt.tau0 : -20.0 / spec.r;
    run.tau_f = opt.tau_f ? *opt.tau_f : 200.0 / spec.r + opt.settle;
    require(ramp_value(run.tau0, spec) < 1e-6, "tau0 must satisfy Lambda(tau0) < 1e-6");
    require(run.tau_f > run.tau0, "tau_f must exceed tau0");
    const auto n = static_cast<long>(std::ceil((run.tau_f - run.tau0) / opt.dt));
    const double h = (run.tau_f - run.tau0) / n;
    const double g = gamma;
    auto field = [&](double tau, const State& y) -> State {
      const RampedValues rv = ramped_params(tau, spec);
      const double rho = rv.vp / spec.vp_minus;
      const double m3 = y(1) * y(1) * y(1);
      return State((1.0 - g) * rho * rho * m3 - (1.0 - g * m3) * y(0) * y(0),
                   (1.0 - y(1)) * y(0) - rv.c * y(1));
    };
    run.path.t.push_back(run.tau0);
    run.path.x.push_back(x);
    for (long k = 0; k < n; ++k) {
      const double tau = run.tau0 + k * h;
      x = rk4_step(field, tau, x, h);
      check(x, tau + h);
      const bool last = k + 1 == n;
      if (last || (opt.store_every > 0 && (k + 1) % opt.store_every == 0)) {
        run.path.t.push_back(last ? run.tau_f : run.tau0 + (k + 1) * h);
        run.path.x.push_back(x);
      }
    }
  }
  run.final_state = x;
  run.min_distance_to_saddle = min_u;
  run.distance_to_storm = (x - run.storm_plus).norm();
  run.distance_to_origin = x.norm();
  if (run.distance_to_storm < opt.tol) {
    run.verdict = TipVerdict::kTracked;
  } else if (run.distance_to_origin < opt.tol) {
    run.verdict = TipVerdict::kTippedToO;
  } else {
    run.verdict = TipVerdict::kUndetermined;
  }
  return run;
}

namespace {

struct Verdict {
  TipVerdict verdict;
  int doublings;
};

Verdict verdict_with_retry(const State& x0, const RampSpec& spec, double gamma,
                           const RampRunOptions& base) {
  RampRunOptions o = base;
  o.store_every = 0;
  for (int d = 0; d <= 3; ++d) {
    o.settle = base.settle * std::ldexp(1.0, d);
    if (base.tau_f) o.tau_f = *base.tau_f + (o.settle - base.settle);
    const RampRun run = simulate_ramp(x0, spec, gamma, o);
    if (run.verdict != TipVerdict::kUndetermined) return {run.verdict, d};
  }
  return {TipVerdict::kUndetermined, 3};
}

}  // namespace

CriticalRate critical_rate(const RampSpec& spec_template, double gamma, double r_lo,
                           double r_hi, double tol, const RampRunOptions& opt) {
  spec_template.validate();
  require(r_lo > 0.0 && r_hi > r_lo, "critical_rate needs 0 < r_lo < r_hi");
  require(tol > 0.0, "tol must be positive");
  const State x0 = storm_minus(spec_template, gamma);
  RampSpec spec = spec_template;
  CriticalRate out{r_lo, r_hi, 0, 0};

  spec.r = r_lo;
  const Verdict lo = verdict_with_retry(x0, spec, gamma, opt);
  spec.r = r_hi;
  const Verdict hi = verdict_with_retry(x0, spec, gamma, opt);
  out.settle_doublings += lo.doublings + hi.doublings;
  if (lo.verdict != TipVerdict::kTracked || hi.verdict != TipVerdict::kTippedToO) {
    throw ConfigError("critical_rate bracket must be tracked at r_lo and tipped at r_hi (got " +
                      std::string(to_string(lo.verdict)) + ", " +
                      std::string(to_string(hi.verdict)) + ")");
  }
  while (out.r_hi - out.r_lo >= tol) {
    const double mid = 0.5 * (out.r_lo + out.r_hi);
    if (mid <= out.r_lo || mid >= out.r_hi) break;
    spec.r = mid;
    const Verdict v = verdict_with_retry(x0, spec, gamma, opt);
    out.settle_doublings += v.doublings;
    ++out.iterations;
    if (v.verdict == TipVerdict::kUndetermined) {
      throw NonConvergence("critical_rate: undetermined verdict after settling retries", mid);
    }
    (v.verdict == TipVerdict::kTracked ? out.r_lo : out.r_hi) = mid;
  }
  return out;
}

double BoxCheck::min_closed_form_margin() const {
  return *std::min_element(closed_form_margin, closed_form_margin + 4);
}

double BoxCheck::min_sampled_margin() const {
  return *std::min_element(sampled_margin, sampled_margin + 4);
}

BoxCheck check_invariant_box(const InvariantBox& box, double vp, double vp_ref, double c,
                             double gamma, int samples) {
  require(box.a1 < box.b1 && box.a2 < box.b2, "box needs a1 < b1 and a2 < b2");
  require(vp > 0.0 && vp_ref > 0.0, "velocities must be positive");
  require(samples >= 2, "need at least two samples per side");
  const double rho = vp / vp_ref;
  auto K = [&](double x) { return (1.0 - gamma) * rho * rho + gamma * x * x; };
  const double a1 = box.a1, b1 = box.b1, a2 = box.a2, b2 = box.b2;

  BoxCheck out{};
  out.closed_form_invariant = a2 > std::cbrt(a1 * a1 / K(a1)) && a2 < a1 / (a1 + c) &&
                              b2 < std::cbrt(b1 * b1 / K(b1)) && b2 > b1 / (b1 + c);
  out.closed_form_margin[0] = a2 * a2 * a2 * K(a1) - a1 * a1;
  out.closed_form_margin[1] = a1 - (a1 + c) * a2;
  out.closed_form_margin[2] = b1 * b1 - b2 * b2 * b2 * K(b1);
  out.closed_form_margin[3] = (b1 + c) * b2 - b1;

  ModelParams p;
  p.gamma = gamma;
  p.c = c;
  p.vp = vp;
  p.vp_ref = vp_ref;
  for (double& m : out.sampled_margin) m = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) {
    const double t = static_cast<double>(i) / (samples - 1);
    const double m = a2 + t * (b2 - a2);
    const double v = a1 + t * (b1 - a1);
    out.sampled_margin[0] = std::min(out.sampled_margin[0], drift_v(a1, m, p));
    out.sampled_margin[1] = std::min(out.sampled_margin[1], drift_m(v, a2, p));
    out.sampled_margin[2] = std::min(out.sampled_margin[2], -drift_v(b1, m, p));
    out.sampled_margin[3] = std::min(out.sampled_margin[3], -drift_m(v, b2, p));
  }
  out.sampled_invariant = out.min_sampled_margin() > 0.0;
  return out;
}

std::vector<ProbeResult> nonincreasing_no_tip_probe(const RampSpec& spec, double gamma,
                                                    const std::vector<double>& rates,
                                                    const RampRunOptions& opt) {
  const State x0 = storm_minus(spec, gamma);
  std::vector<ProbeResult> out;
  for (double r : rates) {
    RampSpec s = spec;
    s.r = r;
    out.push_back({r, verdict_with_retry(x0, s, gamma, opt).verdict});
  }
  return out;
}

}  // namespace tctip
