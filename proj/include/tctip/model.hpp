#ifndef TCTIP_MODEL_HPP
#define TCTIP_MODEL_HPP

// Dimensionless two-variable tropical-cyclone model
//
//   dv/dt = f(v, m) = (1 - gamma) rho^2 m^3 - (1 - gamma m^3) v^2
//   dm/dt = g(v, m) = (1 - m) v - c m
//
// v is tangential wind speed in units of a reference potential velocity, m is
// inner-core moisture. rho = vp / vp_ref is 1 for the autonomous model and
// differs from 1 only for frozen snapshots of a parameter ramp.

#include <complex>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace tctip {

template <typename Scalar>
using StateT = Eigen::Matrix<Scalar, 2, 1>;
using State = StateT<double>;

struct ModelParams {
  double gamma = 0.43;
  double c = 0.286;
  // Maximum potential velocity and the velocity used for nondimensionalizing.
  // Both optional; when either is absent rho() is 1.
  std::optional<double> vp;
  std::optional<double> vp_ref;

  double rho() const {
    if (!vp || !vp_ref) return 1.0;
    return *vp / *vp_ref;
  }
  // Throws ConfigError unless 0 < gamma < 1, c > 0 and velocities are positive.
  void validate() const;
};

struct DimensionalParams {
  double cd_over_h = 1.0;  // surface drag over boundary-layer depth [1/length]
  double shear_s = 1.3;    // environmental wind shear S [velocity]
  double vp = 10.0;        // maximum potential velocity V_p [velocity]
  double gamma = 0.43;
  void validate() const;
};

struct Nondimensionalization {
  ModelParams params;
  double time_scale;      // d(tau)/dt = (C_d / 2h) V_p
  double velocity_scale;  // V = velocity_scale * v
};

// c = 2.2 S / V_p. Does not validate the result, so S = 0 maps to c = 0.
Nondimensionalization nondimensionalize(const DimensionalParams& d);

// V_p^2 = V_p0^2 / (1 - gamma).
double vp_from_vp0(double vp0, double gamma);

// Right-hand side of the dimensional model (dV/dt, dm/dt).
State dimensional_rates(double V, double m, const DimensionalParams& d);

template <typename Scalar>
Scalar drift_v(const Scalar& v, const Scalar& m, const ModelParams& p) {
  const Scalar gamma(p.gamma);
  const Scalar rho(p.rho());
  const Scalar m3 = m * m * m;
  return (Scalar(1) - gamma) * rho * rho * m3 - (Scalar(1) - gamma * m3) * v * v;
}

template <typename Scalar>
Scalar drift_m(const Scalar& v, const Scalar& m, const ModelParams& p) {
  return (Scalar(1) - m) * v - Scalar(p.c) * m;
}

template <typename Derived>
StateT<typename Derived::Scalar> vector_field(const Eigen::MatrixBase<Derived>& x,
                                              const ModelParams& p) {
  using Scalar = typename Derived::Scalar;
  return StateT<Scalar>(drift_v<Scalar>(x(0), x(1), p), drift_m<Scalar>(x(0), x(1), p));
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 2, 2> jacobian(const Eigen::MatrixBase<Derived>& x,
                                                       const ModelParams& p) {
  using Scalar = typename Derived::Scalar;
  const Scalar v = x(0), m = x(1);
  const Scalar gamma(p.gamma);
  const Scalar rho2(p.rho() * p.rho());
  const Scalar m2 = m * m;
  Eigen::Matrix<Scalar, 2, 2> j;
  j(0, 0) = Scalar(-2) * v * (Scalar(1) - gamma * m2 * m);
  j(0, 1) = Scalar(3) * (Scalar(1) - gamma) * rho2 * m2 + Scalar(3) * gamma * m2 * v * v;
  j(1, 0) = Scalar(1) - m;
  j(1, 1) = -v - Scalar(p.c);
  return j;
}

// Equilibria with v > 0 are roots of this cubic paired with m = v / (v + c).
template <typename Scalar>
Scalar cubic_p(const Scalar& v, const ModelParams& p) {
  const Scalar gamma(p.gamma);
  const Scalar rho(p.rho());
  const Scalar w = v + Scalar(p.c);
  return (Scalar(1) - gamma) * rho * rho * v + gamma * v * v * v - w * w * w;
}

// Location of the local maximum of cubic_p; nonpositive when p has no
// positive critical point.
double cubic_critical_point(const ModelParams& p);

enum class Stability {
  kStableNode,
  kStableFocus,
  kSaddle,
  kUnstableNode,
  kUnstableFocus,
  kNonhyperbolicStable,
  kDegenerate,
};
std::string_view to_string(Stability s);

struct Equilibrium {
  State x = State::Zero();
  Eigen::Matrix2d jacobian = Eigen::Matrix2d::Zero();
  Eigen::Vector2cd eigenvalues = Eigen::Vector2cd::Zero();
  Stability stability = Stability::kDegenerate;
};

enum class EquilibriumStatus {
  kOriginOnly,       // storm state absent
  kSaddleNode,       // double root: saddle and storm coincide
  kThreeEquilibria,  // O, U, S
};
std::string_view to_string(EquilibriumStatus s);

struct FixedPointSet {
  Equilibrium origin;
  std::optional<Equilibrium> saddle;  // U
  std::optional<Equilibrium> storm;   // S
  EquilibriumStatus status = EquilibriumStatus::kOriginOnly;
  double peak_value = 0.0;  // cubic_p at its local maximum (or p(0) if none)

  bool has_storm() const { return status == EquilibriumStatus::kThreeEquilibria; }
};

// Roots of the cubic are split at its local maximum and refined by bisection
// to machine precision. A peak value within kDoubleRootTolerance of zero is
// reported as a saddle-node.
inline constexpr double kDoubleRootTolerance = 1e-10;
FixedPointSet fixed_points(const ModelParams& p);

Equilibrium classify_equilibrium(const State& x, const ModelParams& p);

// Critical shear c* at which the storm state is born, for the given gamma.
// Bisection in c on [1e-6 rho, rho]; throws NumericalError if the sign of the
// peak value does not change over the bracket.
double saddle_node_locus(double gamma, double rho = 1.0);

struct AsymptoticEquilibria {
  State saddle;
  State storm;
};

// Two-term small-c expansions of U and S. The storm-state v-coefficient is
// taken as -(3/2)(1 - gamma); see storm_expansion_consistent for the
// coefficient that actually follows from balancing the cubic.
AsymptoticEquilibria asymptotic_fixed_points(const ModelParams& p);

// S ~ (1 - 3c / (2 (1 - gamma)), 1 - c). Converges at second order in c.
State storm_expansion_consistent(const ModelParams& p);

// Polynomial approximation m = h(v) of the center manifold at the origin of
// the autonomous system. order is 3 or 5.
template <typename Scalar>
struct CenterManifoldCoefficients {
  Scalar a1, a3, a4, a5;
};

template <typename Scalar>
CenterManifoldCoefficients<Scalar> center_manifold_coefficients(const ModelParams& p) {
  const Scalar g(p.gamma);
  const Scalar c(p.c);
  const Scalar c2 = c * c;
  const Scalar c4 = c2 * c2;
  const Scalar c5 = c4 * c;
  const Scalar c6 = c5 * c;
  const Scalar c9 = c6 * c2 * c;
  CenterManifoldCoefficients<Scalar> k;
  k.a1 = Scalar(1) / c;
  k.a3 = (g - Scalar(1)) / c5;
  k.a4 = Scalar(2) * (g - Scalar(1)) / c6;
  k.a5 = (Scalar(6) - Scalar(6) * c2 - Scalar(12) * g + Scalar(6) * c2 * g - c4 * g +
          Scalar(6) * g * g) /
         c9;
  return k;
}

void check_center_manifold_order(int order, const ModelParams& p);

template <typename Scalar>
Scalar center_manifold(const Scalar& v, const ModelParams& p, int order = 5) {
  check_center_manifold_order(order, p);
  const auto k = center_manifold_coefficients<Scalar>(p);
  const Scalar v2 = v * v;
  Scalar h = k.a1 * v + k.a3 * v2 * v;
  if (order == 5) h += k.a4 * v2 * v2 + k.a5 * v2 * v2 * v;
  return h;
}

template <typename Scalar>
Scalar center_manifold_slope(const Scalar& v, const ModelParams& p, int order = 5) {
  check_center_manifold_order(order, p);
  const auto k = center_manifold_coefficients<Scalar>(p);
  const Scalar v2 = v * v;
  Scalar dh = k.a1 + Scalar(3) * k.a3 * v2;
  if (order == 5) dh += Scalar(4) * k.a4 * v2 * v + Scalar(5) * k.a5 * v2 * v2;
  return dh;
}

// Invariance defect h'(v) f(v, h(v)) - g(v, h(v)); O(v^(order+1)).
template <typename Scalar>
Scalar center_manifold_residual(const Scalar& v, const ModelParams& p, int order = 5) {
  const Scalar h = center_manifold(v, p, order);
  return center_manifold_slope(v, p, order) * drift_v(v, h, p) - drift_m(v, h, p);
}

// Reduced flow on the center manifold, -v^2 + O(v^3).
template <typename Scalar>
Scalar origin_center_dynamics(const Scalar& v, const ModelParams& p) {
  return drift_v(v, center_manifold(v, p, 5), p);
}

struct Path {
  std::vector<double> t;
  std::vector<State> x;
};

// Fixed-step RK4 from t = 0 to t_final. The last step is shortened when dt does
// not divide t_final. Throws NumericalError on a non-finite state.
Path integrate_ode(const State& x0, const ModelParams& p, double t_final, double dt);

}  // namespace tctip

#endif  // TCTIP_MODEL_HPP
