#include "tctip/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "tctip/errors.hpp"
#include "tctip/ode.hpp"

namespace tctip {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

// Bisection on [lo, hi] with a sign change, run until the midpoint is no
// longer representable strictly between the endpoints.
template <typename Fn>
double bisect(Fn fn, double lo, double hi) {
  double flo = fn(lo);
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = fn(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

ModelParams with_rho(double gamma, double c, double rho) {
  ModelParams p;
  p.gamma = gamma;
  p.c = c;
  if (rho != 1.0) {
    p.vp = rho;
    p.vp_ref = 1.0;
  }
  return p;
}

}  // namespace

void ModelParams::validate() const {
  require(std::isfinite(gamma) && gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
  require(std::isfinite(c) && c > 0.0, "c must be positive");
  if (vp) require(std::isfinite(*vp) && *vp > 0.0, "vp must be positive");
  if (vp_ref) require(std::isfinite(*vp_ref) && *vp_ref > 0.0, "vp_ref must be positive");
}

void DimensionalParams::validate() const {
  require(std::isfinite(cd_over_h) && cd_over_h > 0.0, "cd_over_h must be positive");
  require(std::isfinite(shear_s) && shear_s > 0.0, "shear_s must be positive");
  require(std::isfinite(vp) && vp > 0.0, "vp must be positive");
  require(std::isfinite(gamma) && gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
}

Nondimensionalization nondimensionalize(const DimensionalParams& d) {
  require(std::isfinite(d.cd_over_h) && d.cd_over_h > 0.0, "cd_over_h must be positive");
  require(std::isfinite(d.shear_s) && d.shear_s >= 0.0, "shear_s must be nonnegative");
  require(std::isfinite(d.vp) && d.vp > 0.0, "vp must be positive");
  require(std::isfinite(d.gamma) && d.gamma > 0.0 && d.gamma < 1.0, "gamma must lie in (0, 1)");
  Nondimensionalization out;
  out.params.gamma = d.gamma;
  out.params.c = 2.2 * d.shear_s / d.vp;
  out.params.vp = d.vp;
  out.params.vp_ref = d.vp;
  out.time_scale = 0.5 * d.cd_over_h * d.vp;
  out.velocity_scale = d.vp;
  return out;
}

double vp_from_vp0(double vp0, double gamma) {
  require(vp0 > 0.0, "vp0 must be positive");
  require(gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0, 1)");
  return vp0 / std::sqrt(1.0 - gamma);
}

State dimensional_rates(double V, double m, const DimensionalParams& d) {
  const double k = 0.5 * d.cd_over_h;
  const double m3 = m * m * m;
  return State(k * ((1.0 - d.gamma) * d.vp * d.vp * m3 - (1.0 - d.gamma * m3) * V * V),
               k * ((1.0 - m) * V - 2.2 * d.shear_s * m));
}

double cubic_critical_point(const ModelParams& p) {
  const double g = p.gamma, c = p.c, rho = p.rho();
  const double a = 1.0 - g;
  return (-c + std::sqrt(a * a * rho * rho / 3.0 + g * c * c)) / a;
}

std::string_view to_string(Stability s) {
  switch (s) {
    case Stability::kStableNode: return "stable-node";
    case Stability::kStableFocus: return "stable-focus";
    case Stability::kSaddle: return "saddle";
    case Stability::kUnstableNode: return "unstable-node";
    case Stability::kUnstableFocus: return "unstable-focus";
    case Stability::kNonhyperbolicStable: return "nonhyperbolic-stable";
    case Stability::kDegenerate: return "degenerate";
  }
  return "unknown";
}

std::string_view to_string(EquilibriumStatus s) {
  switch (s) {
    case EquilibriumStatus::kOriginOnly: return "storm-state-absent";
    case EquilibriumStatus::kSaddleNode: return "saddle-node";
    case EquilibriumStatus::kThreeEquilibria: return "three-equilibria";
  }
  return "unknown";
}

Equilibrium classify_equilibrium(const State& x, const ModelParams& p) {
  Equilibrium e;
  e.x = x;
  e.jacobian = jacobian(x, p);
  Eigen::EigenSolver<Eigen::Matrix2d> es(e.jacobian, false);
  e.eigenvalues = es.eigenvalues();
  const double tr = e.jacobian.trace();
  const double det = e.jacobian.determinant();
  const double scale = e.jacobian.cwiseAbs().maxCoeff();
  const double eps = 1e-14 * (scale * scale + 1e-300);
  if (std::abs(det) <= eps) {
    e.stability = Stability::kDegenerate;
  } else if (det < 0.0) {
    e.stability = Stability::kSaddle;
  } else {
    const bool focus = tr * tr - 4.0 * det < 0.0;
    if (tr < 0.0) {
      e.stability = focus ? Stability::kStableFocus : Stability::kStableNode;
    } else if (tr > 0.0) {
      e.stability = focus ? Stability::kUnstableFocus : Stability::kUnstableNode;
    } else {
      e.stability = Stability::kDegenerate;
    }
  }
  return e;
}

FixedPointSet fixed_points(const ModelParams& p) {
  p.validate();
  FixedPointSet out;
  out.origin = classify_equilibrium(State::Zero(), p);
  // Zero eigenvalue at O; stability follows from the reduced flow -v^2 on the
  // center manifold restricted to v >= 0.
  out.origin.stability = Stability::kNonhyperbolicStable;

  const double vstar = cubic_critical_point(p);
  if (!(vstar > 0.0)) {
    out.status = EquilibriumStatus::kOriginOnly;
    out.peak_value = cubic_p(0.0, p);
    return out;
  }
  out.peak_value = cubic_p(vstar, p);
  auto pair = [&](double v) { return State(v, v / (v + p.c)); };
  if (std::abs(out.peak_value) <= kDoubleRootTolerance) {
    out.status = EquilibriumStatus::kSaddleNode;
    Equilibrium e = classify_equilibrium(pair(vstar), p);
    e.stability = Stability::kDegenerate;
    out.saddle = e;
    out.storm = e;
    return out;
  }
  if (out.peak_value < 0.0) {
    out.status = EquilibriumStatus::kOriginOnly;
    return out;
  }
  // Positive roots are below rho because p(rho) = rho^3 - (rho + c)^3 < 0.
  const double vmax = p.rho();
  if (!(vstar < vmax)) throw NumericalError("cubic maximum lies outside (0, rho)");
  auto q = [&](double v) { return cubic_p(v, p); };
  const double vu = bisect(q, 0.0, vstar);
  const double vs = bisect(q, vstar, vmax);
  out.saddle = classify_equilibrium(pair(vu), p);
  out.storm = classify_equilibrium(pair(vs), p);
  out.status = EquilibriumStatus::kThreeEquilibria;
  return out;
}

double saddle_node_locus(double gamma, double rho) {
  require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
  require(rho > 0.0, "rho must be positive");
  auto phi = [&](double c) {
    const ModelParams p = with_rho(gamma, c, rho);
    const double vstar = cubic_critical_point(p);
    return vstar > 0.0 ? cubic_p(vstar, p) : -c * c * c;
  };
  const double lo = 1e-6 * rho, hi = rho;
  const double flo = phi(lo), fhi = phi(hi);
  if (!(flo > 0.0 && fhi < 0.0)) {
    throw NumericalError("saddle-node locus: no sign change of p(v*) on the c bracket");
  }
  return bisect(phi, lo, hi);
}

AsymptoticEquilibria asymptotic_fixed_points(const ModelParams& p) {
  const double c = p.c, a = 1.0 - p.gamma;
  const double c2 = c * c, c3 = c2 * c;
  AsymptoticEquilibria out;
  out.saddle = State(c3 / a + 3.0 * c3 * c2 / (a * a), c2 / a + 2.0 * c2 * c2 / (a * a));
  out.storm = State(1.0 - 1.5 * a * c, 1.0 - c);
  return out;
}

State storm_expansion_consistent(const ModelParams& p) {
  return State(1.0 - 1.5 * p.c / (1.0 - p.gamma), 1.0 - p.c);
}

void check_center_manifold_order(int order, const ModelParams& p) {
  require(order == 3 || order == 5, "center manifold order must be 3 or 5");
  require(p.rho() == 1.0, "center manifold expansion assumes vp == vp_ref");
}

Path integrate_ode(const State& x0, const ModelParams& p, double t_final, double dt) {
  require(dt > 0.0 && std::isfinite(dt), "dt must be positive");
  require(t_final >= 0.0 && std::isfinite(t_final), "t_final must be nonnegative");
  auto field = [&](double, const State& x) { return vector_field(x, p); };
  const auto n_full = static_cast<long long>(std::floor(t_final / dt));
  Path path;
  path.t.reserve(n_full + 2);
  path.x.reserve(n_full + 2);
  path.t.push_back(0.0);
  path.x.push_back(x0);
  State x = x0;
  long long k = 0;
  double t = 0.0;
  while (t < t_final) {
    const double t_next = std::min(t_final, static_cast<double>(k + 1) * dt);
    const double h = t_next - t;
    if (h <= 0.0) break;
    x = rk4_step(field, t, x, h);
    if (!all_finite(x)) {
      throw NumericalError("integrate_ode: non-finite state at t = " + std::to_string(t_next));
    }
    t = t_next;
    ++k;
    path.t.push_back(t);
    path.x.push_back(x);
  }
  return path;
}

}  // namespace tctip
