#include <cmath>
#include <random>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <doctest.h>

#include "oracles.hpp"
#include "tctip/errors.hpp"
#include "tctip/model.hpp"

using namespace tctip;
using mp50 = boost::multiprecision::cpp_bin_float_50;

namespace {

ModelParams params(double gamma, double c) {
  ModelParams p;
  p.gamma = gamma;
  p.c = c;
  return p;
}

double residual_exponent(const ModelParams& p, int order, double v1, double v2) {
  const mp50 r1 = abs(center_manifold_residual(mp50(v1), p, order));
  const mp50 r2 = abs(center_manifold_residual(mp50(v2), p, order));
  return static_cast<double>(log(r1 / r2) / log(mp50(v1) / mp50(v2)));
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("vector field point values") {
  const auto p = params(0.43, 0.286);
  CHECK(vector_field(State(0, 0), p).norm() == 0.0);
  const State f1 = vector_field(State(1, 1), p);
  CHECK(f1(0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(f1(1) == doctest::Approx(-0.286));
  const State f = vector_field(State(0.5, 0.5), p);
  CHECK(f(0) == doctest::Approx(0.57 * 0.125 - (1 - 0.43 * 0.125) * 0.25).epsilon(1e-14));
  CHECK(f(1) == doctest::Approx(0.25 - 0.143).epsilon(1e-14));
}

TEST_CASE("jacobian matches central differences") {
  const auto p = params(0.43, 0.286);
  const Eigen::Matrix2d j0 = jacobian(State(0, 0), p);
  CHECK(j0(0, 0) == 0.0);
  CHECK(j0(0, 1) == 0.0);
  CHECK(j0(1, 0) == 1.0);
  CHECK(j0(1, 1) == -0.286);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.2, 1.3);
  for (int i = 0; i < 500; ++i) {
    ModelParams q = params(0.05 + 0.9 * (u(rng) + 0.2) / 1.5, 0.01 + 0.5 * (u(rng) + 0.2) / 1.5);
    const State x(u(rng), u(rng));
    const Eigen::Matrix2d j = jacobian(x, q);
    Eigen::Matrix2d fd;
    const double h = 1e-6;
    for (int k = 0; k < 2; ++k) {
      State e = State::Zero();
      e(k) = h;
      fd.col(k) = (vector_field(State(x + e), q) - vector_field(State(x - e), q)) / (2 * h);
    }
    const double err = (j - fd).norm() / std::max(1.0, j.norm());
    CHECK(err <= 1e-6);
  }
}

TEST_CASE("cubic p") {
  const auto p = params(0.43, 0.286);
  CHECK(cubic_p(0.0, p) == doctest::Approx(-0.286 * 0.286 * 0.286));
  CHECK(cubic_p(0.5, p) ==
        doctest::Approx(0.57 * 0.5 + 0.43 * 0.125 - 0.786 * 0.786 * 0.786).epsilon(1e-14));
  // For v >= 1 the cubic is dominated by -(1 - gamma) v^3 - ... and stays negative.
  for (double v = 1.0; v < 1e3; v *= 1.5) CHECK(cubic_p(v, p) < 0.0);
}

TEST_CASE("fixed points at the reference parameters") {
  for (double c : {0.286, 0.22}) {
    const auto p = params(0.43, c);
    const auto fp = fixed_points(p);
    REQUIRE(fp.status == EquilibriumStatus::kThreeEquilibria);
    REQUIRE(fp.saddle);
    REQUIRE(fp.storm);
    CHECK(fp.origin.stability == Stability::kNonhyperbolicStable);
    CHECK(fp.saddle->stability == Stability::kSaddle);
    CHECK((fp.storm->stability == Stability::kStableNode ||
           fp.storm->stability == Stability::kStableFocus));
    CHECK(fp.storm->eigenvalues.real().maxCoeff() < 0.0);
    CHECK(0.0 < fp.saddle->x(0));
    CHECK(fp.saddle->x(0) < fp.storm->x(0));
    for (const auto* e : {&*fp.saddle, &*fp.storm}) {
      CHECK(vector_field(e->x, p).norm() <= 1e-10);
    }
    auto q = [&](double v) { return cubic_p(v, p); };
    const auto roots = oracle::geometric_grid_roots(q, 1e-12, 1.0);
    REQUIRE(roots.size() == 2);
    CHECK(std::abs(roots[0] - fp.saddle->x(0)) <= 1e-10);
    CHECK(std::abs(roots[1] - fp.storm->x(0)) <= 1e-10);
  }
}

TEST_CASE("fixed points reference values at c = 0.286") {
  const auto fp = fixed_points(params(0.43, 0.286));
  CHECK(fp.saddle->x(0) == doctest::Approx(0.10060950021186083).epsilon(1e-12));
  CHECK(fp.saddle->x(1) == doctest::Approx(0.26023545763031464).epsilon(1e-12));
  CHECK(fp.storm->x(0) == doctest::Approx(0.22304390458655834).epsilon(1e-12));
  CHECK(fp.storm->x(1) == doctest::Approx(0.43816241109440834).epsilon(1e-12));
}

TEST_CASE("large shear leaves only the origin") {
  const auto fp = fixed_points(params(0.43, 0.6));
  CHECK(fp.status == EquilibriumStatus::kOriginOnly);
  CHECK_FALSE(fp.saddle);
  CHECK_FALSE(fp.storm);
}

TEST_CASE("root count is 0 or 2 over random parameters") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int three = 0;
  for (int i = 0; i < 1000; ++i) {
    double g = u(rng), c = u(rng);
    if (g <= 0.0 || c <= 0.0) continue;
    const auto p = params(g, c);
    const auto fp = fixed_points(p);
    auto q = [&](double v) { return cubic_p(v, p); };
    const auto roots = oracle::geometric_grid_roots(q, 1e-12, 1.0, 4000);
    if (std::abs(fp.peak_value) < 1e-8) continue;
    CHECK((roots.size() == 0 || roots.size() == 2));
    CHECK(roots.size() == (fp.has_storm() ? 2u : 0u));
    CHECK(static_cast<bool>(fp.saddle) == static_cast<bool>(fp.storm));
    if (fp.has_storm()) ++three;
  }
  CHECK(three > 0);
}

TEST_CASE("saddle-node locus") {
  const double cstar = saddle_node_locus(0.43);
  // Oracle: maximize p numerically, then bisect in c.
  auto peak = [](double c) {
    const auto p = params(0.43, c);
    auto q = [&](double v) { return cubic_p(v, p); };
    return q(oracle::golden_max(q, 0.0, 1.0));
  };
  const double cref = oracle::bisect(peak, 1e-6, 1.0, 1e-14);
  CHECK(std::abs(cstar - cref) <= 1e-9);
  CHECK(fixed_points(params(0.43, cstar)).status == EquilibriumStatus::kSaddleNode);
  CHECK(fixed_points(params(0.43, cstar - 1e-8)).status == EquilibriumStatus::kThreeEquilibria);
  CHECK(fixed_points(params(0.43, cstar + 1e-8)).status == EquilibriumStatus::kOriginOnly);
}

TEST_CASE("asymptotic expansions") {
  const auto a = asymptotic_fixed_points(params(0.43, 0.0));
  CHECK(a.saddle.norm() == 0.0);
  CHECK(a.storm(0) == 1.0);
  CHECK(a.storm(1) == 1.0);
  CHECK(asymptotic_fixed_points(params(0.43, 0.286)).storm(1) == doctest::Approx(0.714));

  const double cs[3] = {0.02, 0.05, 0.1};
  double eu_v[3], eu_m[3], es_printed[3], es_consistent[3];
  for (int i = 0; i < 3; ++i) {
    const auto p = params(0.43, cs[i]);
    const auto fp = fixed_points(p);
    const auto ap = asymptotic_fixed_points(p);
    eu_v[i] = std::abs(ap.saddle(0) - fp.saddle->x(0));
    eu_m[i] = std::abs(ap.saddle(1) - fp.saddle->x(1));
    es_printed[i] = std::abs(ap.storm(0) - fp.storm->x(0));
    es_consistent[i] = std::abs(storm_expansion_consistent(p)(0) - fp.storm->x(0));
  }
  for (int i = 1; i < 3; ++i) {
    CHECK(oracle::slope(cs[i - 1], eu_v[i - 1], cs[i], eu_v[i]) >= 5.0);
    CHECK(oracle::slope(cs[i - 1], eu_m[i - 1], cs[i], eu_m[i]) >= 4.0);
    CHECK(oracle::slope(cs[i - 1], es_consistent[i - 1], cs[i], es_consistent[i]) > 1.8);
    CHECK(oracle::slope(cs[i - 1], es_printed[i - 1], cs[i], es_printed[i]) < 1.2);
  }
}

TEST_CASE("center manifold") {
  const auto p = params(0.43, 0.286);
  CHECK(center_manifold(0.0, p, 3) == 0.0);
  CHECK(center_manifold(0.0, p, 5) == 0.0);
  for (double v : {1e-3, 0.01, 0.03}) {
    const double c = 0.286;
    CHECK(center_manifold(v, p, 3) ==
          doctest::Approx(v / c - (1 - 0.43) / std::pow(c, 5) * v * v * v).epsilon(1e-14));
  }
  CHECK_THROWS_AS(center_manifold(0.1, p, 4), ConfigError);
}

TEST_CASE("center manifold residual orders") {
  for (double c : {0.5, 1.0}) {
    const auto p = params(0.43, c);
    CHECK(residual_exponent(p, 3, 1e-2, 1e-3) >= 3.8);
    CHECK(residual_exponent(p, 5, 1e-2, 1e-3) >= 5.8);
  }
  // At c = 0.286 the v^4 term of the order-3 defect is only dominant below v ~ 1e-2.
  const auto p = params(0.43, 0.286);
  CHECK(residual_exponent(p, 3, 1e-3, 1e-4) >= 3.8);
  CHECK(residual_exponent(p, 5, 1e-2, 1e-3) >= 5.8);
}

TEST_CASE("reduced flow at the origin") {
  const auto p = params(0.43, 0.286);
  CHECK(origin_center_dynamics(0.0, p) == 0.0);
  const double v = 1e-3;
  CHECK(std::abs(origin_center_dynamics(v, p) + v * v) / (v * v) < 0.1);
  for (int i = 1; i <= 1000; ++i) CHECK(origin_center_dynamics(1e-2 * i / 1000.0, p) < 0.0);
}

TEST_CASE("nondimensionalize") {
  DimensionalParams d;
  d.shear_s = 1.3;
  d.vp = 10.0;
  d.cd_over_h = 2.0;
  const auto nd = nondimensionalize(d);
  CHECK(nd.params.c == doctest::Approx(0.286).epsilon(1e-15));
  CHECK(nd.params.rho() == 1.0);
  CHECK(nd.time_scale == doctest::Approx(10.0));
  d.shear_s = 0.0;
  CHECK(nondimensionalize(d).params.c == 0.0);
  // Saturated core recovers the single-variable model.
  const auto p = params(0.43, 0.286);
  for (double v : {0.0, 0.3, 0.9, 1.2}) {
    CHECK(drift_v(v, 1.0, p) == doctest::Approx((1 - 0.43) * (1 - v * v)).epsilon(1e-14));
  }
  // Dimensional rates scale to the dimensionless field.
  d.shear_s = 1.3;
  const State r = dimensional_rates(0.4 * d.vp, 0.3, d);
  const State f = vector_field(State(0.4, 0.3), p);
  CHECK(r(0) / (nd.time_scale * d.vp) == doctest::Approx(f(0)).epsilon(1e-13));
  CHECK(r(1) / nd.time_scale == doctest::Approx(f(1)).epsilon(1e-13));
  CHECK(vp_from_vp0(1.0, 0.75) == doctest::Approx(2.0));
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(fixed_points(params(1.2, 0.2)), ConfigError);
  CHECK_THROWS_AS(fixed_points(params(0.4, -0.1)), ConfigError);
  ModelParams p = params(0.4, 0.2);
  p.vp = -1.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("boundary inflow on the unit square") {
  const auto p = params(0.43, 0.286);
  for (int i = 0; i <= 1000; ++i) {
    const double s = i / 1000.0;
    CHECK(drift_v(0.0, s, p) >= 0.0);
    CHECK(drift_v(1.0, s, p) <= 0.0);
    CHECK(drift_m(s, 0.0, p) >= 0.0);
    CHECK(drift_m(s, 1.0, p) <= 0.0);
  }
}

TEST_CASE("integrate_ode") {
  const auto p = params(0.43, 0.286);
  const auto o = integrate_ode(State::Zero(), p, 100.0, 0.1);
  CHECK(o.x.back().norm() == 0.0);
  CHECK(o.t.size() == o.x.size());
  CHECK(o.t.back() == doctest::Approx(100.0));

  const State s = fixed_points(p).storm->x;
  const auto back = integrate_ode(State(s + State(0.02, -0.03)), p, 800.0, 0.1);
  CHECK((back.x.back() - s).norm() < 1e-6);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const auto path = integrate_ode(State(u(rng), u(rng)), p, 50.0, 0.05);
    for (const auto& x : path.x) {
      CHECK(x(0) >= 0.0);
      CHECK(x(1) >= 0.0);
    }
  }

  const State x0(0.4, 0.5);
  const double T = 5.0;
  const State e1 = integrate_ode(x0, p, T, 0.2).x.back();
  const State e2 = integrate_ode(x0, p, T, 0.1).x.back();
  const State e3 = integrate_ode(x0, p, T, 0.05).x.back();
  const double rate = std::log2((e1 - e2).norm() / (e2 - e3).norm());
  CHECK(rate > 3.5);
  CHECK(rate < 4.5);
  CHECK_THROWS_AS(integrate_ode(x0, p, 1.0, 0.0), ConfigError);
}

}  // TEST_SUITE
