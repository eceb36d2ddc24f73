#ifndef TCTIP_ODE_HPP
#define TCTIP_ODE_HPP

#include <cmath>

#include <Eigen/Core>

namespace tctip {

// One classical fourth-order Runge-Kutta step for x' = field(t, x).
// Works for any fixed-size Eigen vector.
template <typename Vec, typename Field>
Vec rk4_step(const Field& field, double t, const Vec& x, double h) {
  const Vec k1 = field(t, x);
  const Vec k2 = field(t + 0.5 * h, (x + 0.5 * h * k1).eval());
  const Vec k3 = field(t + 0.5 * h, (x + 0.5 * h * k2).eval());
  const Vec k4 = field(t + h, (x + h * k3).eval());
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x(i))) return false;
  }
  return true;
}

}  // namespace tctip

#endif  // TCTIP_ODE_HPP
