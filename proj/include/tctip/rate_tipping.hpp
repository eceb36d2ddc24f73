#ifndef TCTIP_RATE_TIPPING_HPP
#define TCTIP_RATE_TIPPING_HPP

// Parameter ramps and the nonautonomous model. Velocities are scaled by the
// past limit V_p^- throughout, so
//
//   dv/dtau = (1 - gamma) (V_p(s) / V_p^-)^2 m^3 - (1 - gamma m^3) v^2
//   dm/dtau = (1 - m) v - c(s) m,       c(s) = 2.2 S(s) / V_p^-
//   ds/dtau = 1
//
// where S(s) is the dimensional shear. With the coupled ramp S = k V_p the
// frozen systems are all rescalings of the autonomous model at c = 2.2 k.

#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "tctip/model.hpp"

namespace tctip {

enum class RampShape { kTanh, kSmoothstep, kPiecewiseLinear };
std::string_view to_string(RampShape s);
RampShape ramp_shape_from_string(std::string_view s);

struct RampSpec {
  double r = 0.03;
  RampShape shape = RampShape::kTanh;
  double vp_minus = 10.0;
  double vp_plus = 100.0;
  double k = 0.13;  // S = k V_p unless both shear limits are given
  std::optional<double> shear_minus;
  std::optional<double> shear_plus;

  void validate() const;
};

// Lambda_r(tau). Default shape 0.5 (1 + tanh(r tau)); r = 0 gives 0.5.
double ramp_value(double tau, const RampSpec& spec);

struct RampedValues {
  double lambda;
  double vp;     // V_p(tau)
  double shear;  // S(tau)
  double c;      // 2.2 S(tau) / V_p^-, the shear entering dm/dtau
};
RampedValues ramped_params(double tau, const RampSpec& spec);
RampedValues ramped_params_at_lambda(double lambda, const RampSpec& spec);

// Frozen autonomous system at ramp time s (or at a given Lambda).
ModelParams frozen_params(double s, const RampSpec& spec, double gamma);
ModelParams frozen_params_at_lambda(double lambda, const RampSpec& spec, double gamma);
FixedPointSet frozen_fixed_points(double s, const RampSpec& spec, double gamma);

using AugmentedState = Eigen::Vector3d;  // (v, m, s)
AugmentedState nonautonomous_field(const AugmentedState& x, const RampSpec& spec, double gamma);

enum class TipVerdict { kTracked, kTippedToO, kUndetermined };
std::string_view to_string(TipVerdict v);

struct RampRunOptions {
  std::optional<double> tau0;  // default -20 / r
  std::optional<double> tau_f;  // default 200 / r + settle
  double settle = 500.0;
  double dt = 0.01;
  double tol = 1e-3;
  int store_every = 10;  // path decimation; 0 stores only the endpoints
};

struct RampRun {
  Path path;  // t holds tau, x holds (v, m)
  TipVerdict verdict = TipVerdict::kUndetermined;
  State final_state = State::Zero();
  State storm_plus = State::Zero();
  State saddle_plus = State::Zero();
  double distance_to_storm = 0.0;
  double distance_to_origin = 0.0;
  double min_distance_to_saddle = 0.0;  // over the stored and unstored steps
  double tau0 = 0.0, tau_f = 0.0;
  bool quasi_static = false;
};

// Integrates the augmented system with RK4 from x0 at tau0 to tau_f. Requires
// Lambda(tau0) < 1e-6. For r = 0 the quasi-static limit is computed instead:
// the frozen system is relaxed for `settle` time units at each Lambda on a
// grid of 101 values from 0 to 1, starting from x0.
RampRun simulate_ramp(const State& x0, const RampSpec& spec, double gamma,
                      const RampRunOptions& opt = {});

// Past stable storm state S^- in V_p^- units.
State storm_minus(const RampSpec& spec, double gamma);

struct CriticalRate {
  double r_lo;  // tracked
  double r_hi;  // tipped
  int iterations;
  int settle_doublings;  // total retries caused by undetermined verdicts
};

// Bisection on r from S^-, tracked at r_lo and tipped at r_hi, until
// r_hi - r_lo < tol. An undetermined verdict is retried with the settling
// horizon doubled, up to three times.
CriticalRate critical_rate(const RampSpec& spec_template, double gamma, double r_lo,
                           double r_hi, double tol, const RampRunOptions& opt = {});

struct InvariantBox {
  double a1, b1;  // v-bounds
  double a2, b2;  // m-bounds
};

struct BoxCheck {
  bool closed_form_invariant;
  bool sampled_invariant;
  // Per side, the minimum inward normal component of the field
  // (side 1: v = a1, side 2: m = a2, side 3: v = b1, side 4: m = b2).
  double closed_form_margin[4];
  double sampled_margin[4];
  double min_closed_form_margin() const;
  double min_sampled_margin() const;
};

// c is the shear entering dm/dtau, rho = vp / vp_ref.
BoxCheck check_invariant_box(const InvariantBox& box, double vp, double vp_ref, double c,
                             double gamma, int samples = 2001);

struct ProbeResult {
  double r;
  TipVerdict verdict;
};

// Runs simulate_ramp from S^- for each rate, doubling the settling horizon up
// to three times on an undetermined verdict. Intended for ramps where V_p or
// the shear is nonincreasing, where no tipping is expected.
std::vector<ProbeResult> nonincreasing_no_tip_probe(const RampSpec& spec, double gamma,
                                                    const std::vector<double>& rates,
                                                    const RampRunOptions& opt = {});

}  // namespace tctip

#endif  // TCTIP_RATE_TIPPING_HPP
