#include "tctip/action.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tctip/errors.hpp"
#include "tctip/manifolds.hpp"
#include "tctip/ode.hpp"

namespace tctip {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

void require_unit_rho(const ModelParams& p, const char* who) {
  require(p.rho() == 1.0, std::string(who) + " is derived for rho = 1");
}

// Derivative stencil shared by the action and its gradient.
std::vector<State> path_derivative(const TransitionPath& path) {
  const std::size_t n = path.size();
  const double h = path.h();
  const auto& x = path.psi;
  std::vector<State> d(n);
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (x[i + 1] - x[i - 1]) / (2.0 * h);
  d[0] = (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * h);
  d[n - 1] = (3.0 * x[n - 1] - 4.0 * x[n - 2] + x[n - 3]) / (2.0 * h);
  return d;
}

double trapezoid_weight(std::size_t i, std::size_t n, double h) {
  return (i == 0 || i + 1 == n) ? 0.5 * h : h;
}

void check_path(const TransitionPath& path) {
  require(path.size() >= 3, "transition path needs at least 3 nodes");
  require(path.tau_f > path.tau0, "transition path needs tau_f > tau0");
}

double segment_distance(const State& x, const State& a, const State& b) {
  const State ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((x - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (x - (a + t * ab)).norm();
}

double polyline_distance(const State& x, const std::vector<State>& line) {
  if (line.size() == 1) return (x - line[0]).norm();
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < line.size(); ++k) {
    d = std::min(d, segment_distance(x, line[k], line[k + 1]));
  }
  return d;
}

// Solves (I - k L) y = rhs on interior nodes, L the unit second difference
// scaled by 1/h^2, with y = 0 at both ends. Constant coefficients.
void implicit_diffusion_solve(std::vector<double>& y, double k) {
  const std::size_t n = y.size();
  if (n == 0) return;
  const double off = -k, diag = 1.0 + 2.0 * k;
  std::vector<double> cp(n);
  cp[0] = off / diag;
  y[0] /= diag;
  for (std::size_t i = 1; i < n; ++i) {
    const double den = diag - off * cp[i - 1];
    cp[i] = off / den;
    y[i] = (y[i] - off * y[i - 1]) / den;
  }
  for (std::size_t i = n - 1; i-- > 0;) y[i] -= cp[i] * y[i + 1];
}

TransitionPath shifted(const TransitionPath& path, long k) {
  TransitionPath out = path;
  const long n = static_cast<long>(path.size());
  for (long i = 0; i < n; ++i) {
    const long src = std::clamp(i - k, 0L, n - 1);
    out.psi[i] = path.psi[src];
  }
  out.psi.front() = path.psi.front();
  out.psi.back() = path.psi.back();
  return out;
}

std::size_t nearest_node(const TransitionPath& path, const State& anchor) {
  std::size_t best = 0;
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < path.size(); ++i) {
    const double di = (path.psi[i] - anchor).norm();
    if (di < d) {
      d = di;
      best = i;
    }
  }
  return best;
}

}  // namespace

void WeightMatrix::validate() const {
  require(std::isfinite(sigma1) && sigma1 > 0.0, "sigma1 must be positive");
  require(std::isfinite(sigma2) && sigma2 > 0.0, "sigma2 must be positive");
}

TransitionPath polyline_path(const std::vector<State>& through, double tau0, double tau_f,
                             std::size_t n) {
  require(through.size() >= 2, "polyline_path needs two points");
  require(n >= through.size() && n >= 3, "polyline_path needs more nodes than points");
  require(tau_f > tau0, "polyline_path needs tau_f > tau0");
  TransitionPath out;
  out.tau0 = tau0;
  out.tau_f = tau_f;
  out.psi.resize(n);
  const std::size_t segs = through.size() - 1;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = static_cast<double>(i) * segs / static_cast<double>(n - 1);
    const std::size_t k = std::min(segs - 1, static_cast<std::size_t>(s));
    const double t = s - static_cast<double>(k);
    out.psi[i] = (1.0 - t) * through[k] + t * through[k + 1];
  }
  out.psi.back() = through.back();
  return out;
}

double action_value(const TransitionPath& path, const ModelParams& p, const WeightMatrix& w) {
  check_path(path);
  w.validate();
  const auto d = path_derivative(path);
  const Eigen::Vector2d sig = w.sigma();
  const double h = path.h();
  double a = 0.0;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const State r = d[i] - vector_field(path.psi[i], p);
    a += trapezoid_weight(i, path.size(), h) * r.dot(sig.cwiseProduct(r));
  }
  return 0.5 * a;
}

std::vector<State> action_gradient(const TransitionPath& path, const ModelParams& p,
                                   const WeightMatrix& w) {
  check_path(path);
  w.validate();
  const std::size_t n = path.size();
  const double h = path.h();
  const auto d = path_derivative(path);
  const Eigen::Vector2d sig = w.sigma();
  std::vector<State> q(n), g(n, State::Zero());
  for (std::size_t i = 0; i < n; ++i) {
    const State r = d[i] - vector_field(path.psi[i], p);
    q[i] = trapezoid_weight(i, n, h) * sig.cwiseProduct(r);
    g[i] -= jacobian(path.psi[i], p).transpose() * q[i];
  }
  const double k = 1.0 / (2.0 * h);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    g[i + 1] += k * q[i];
    g[i - 1] -= k * q[i];
  }
  g[0] += -3.0 * k * q[0];
  g[1] += 4.0 * k * q[0];
  g[2] += -k * q[0];
  g[n - 1] += 3.0 * k * q[n - 1];
  g[n - 2] += -4.0 * k * q[n - 1];
  g[n - 3] += k * q[n - 1];
  return g;
}

std::vector<State> euler_lagrange_residual(const TransitionPath& path, const ModelParams& p,
                                           const WeightMatrix& w) {
  check_path(path);
  w.validate();
  const std::size_t n = path.size();
  const double h = path.h();
  const auto& x = path.psi;
  const Eigen::Vector2d sig = w.sigma(), inv = w.sigma_inv();
  std::vector<State> res(n, State::Zero());
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const State dd = (x[i + 1] - 2.0 * x[i] + x[i - 1]) / (h * h);
    const State d = (x[i + 1] - x[i - 1]) / (2.0 * h);
    const Eigen::Matrix2d j = jacobian(x[i], p);
    const State r = d - vector_field(x[i], p);
    res[i] = dd - j * d + inv.cwiseProduct(j.transpose() * sig.cwiseProduct(r));
  }
  return res;
}

namespace {

// Buffers for one path size; evaluates the discrete action and, on request,
// its gradient with a single pass of field and Jacobian evaluations.
struct FlowWorkspace {
  std::vector<State> d, q, g;

  explicit FlowWorkspace(std::size_t n) : d(n), q(n), g(n) {}

  double evaluate(const TransitionPath& path, const ModelParams& p, const Eigen::Vector2d& sig,
                  bool gradient) {
    const std::size_t n = path.size();
    const double h = path.h();
    const auto& x = path.psi;
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (x[i + 1] - x[i - 1]) / (2.0 * h);
    d[0] = (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * h);
    d[n - 1] = (3.0 * x[n - 1] - 4.0 * x[n - 2] + x[n - 3]) / (2.0 * h);
    double a = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const State r = d[i] - vector_field(x[i], p);
      const double wi = trapezoid_weight(i, n, h);
      a += wi * r.dot(sig.cwiseProduct(r));
      if (gradient) {
        q[i] = wi * sig.cwiseProduct(r);
        g[i] = -jacobian(x[i], p).transpose() * q[i];
      }
    }
    if (gradient) {
      const double k = 1.0 / (2.0 * h);
      for (std::size_t i = 1; i + 1 < n; ++i) {
        g[i + 1] += k * q[i];
        g[i - 1] -= k * q[i];
      }
      g[0] += -3.0 * k * q[0];
      g[1] += 4.0 * k * q[0];
      g[2] += -k * q[0];
      g[n - 1] += 3.0 * k * q[n - 1];
      g[n - 2] += -4.0 * k * q[n - 1];
      g[n - 3] += k * q[n - 1];
    }
    return 0.5 * a;
  }
};

}  // namespace

MamResult mam_gradient_flow(const TransitionPath& init, const ModelParams& p,
                            const WeightMatrix& w, const MamOptions& opt,
                            std::optional<State> anchor) {
  check_path(init);
  w.validate();
  require(opt.ds > 0.0 && opt.ds_max >= opt.ds, "need 0 < ds <= ds_max");
  require(opt.tol > 0.0, "tol must be positive");
  require(opt.s_max > 0.0, "s_max must be positive");
  MamResult out;
  out.path = init;
  const std::size_t n = init.size();
  const std::size_t ni = n - 2;
  const double h = init.h();
  const Eigen::Vector2d sig = w.sigma(), inv = w.sigma_inv();
  FlowWorkspace ws(n), tw(n);  // current path, trial path
  double a = ws.evaluate(out.path, p, sig, true);
  out.action_history.push_back(a);
  double ds = opt.ds;
  std::vector<double> y0(ni), y1(ni);
  TransitionPath trial = out.path;
  long since_gauge = 0;

  while (true) {
    if (out.s >= opt.s_max || out.iterations + out.rejections >= opt.max_iterations) {
      out.path.action = a;
      throw NonConvergence("mam_gradient_flow: flow budget exhausted", a);
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const State rhs = -inv.cwiseProduct(ws.g[i]) / h;
      y0[i - 1] = ds * rhs(0);
      y1[i - 1] = ds * rhs(1);
    }
    implicit_diffusion_solve(y0, ds / (h * h));
    implicit_diffusion_solve(y1, ds / (h * h));
    for (std::size_t i = 1; i + 1 < n; ++i) {
      trial.psi[i] = out.path.psi[i] + State(y0[i - 1], y1[i - 1]);
    }
    const double an = tw.evaluate(trial, p, sig, true);
    if (!std::isfinite(an) || an > a) {
      ++out.rejections;
      ds *= 0.5;
      if (ds < 1e-14) {
        out.path.action = a;
        throw NonConvergence("mam_gradient_flow: step size underflow", a);
      }
      continue;
    }
    std::swap(out.path.psi, trial.psi);
    std::swap(ws, tw);
    const double decrement = (a - an) / ds;
    a = an;
    out.s += ds;
    ++out.iterations;
    out.action_history.push_back(a);
    out.stationarity = decrement;
    if (out.iterations >= opt.min_iterations && decrement < opt.tol) break;
    ds = std::min(ds * 1.1, opt.ds_max);

    if (anchor && opt.gauge_every > 0 && ++since_gauge >= opt.gauge_every) {
      since_gauge = 0;
      const long k = static_cast<long>((n - 1) / 2) -
                     static_cast<long>(nearest_node(out.path, *anchor));
      if (k != 0) {
        TransitionPath moved = shifted(out.path, k);
        const double am = tw.evaluate(moved, p, sig, true);
        if (am <= a) {
          out.path.psi = std::move(moved.psi);
          std::swap(ws, tw);
          a = am;
          out.action_history.back() = a;
          ++out.gauge_shifts;
        }
      }
    }
    trial.psi = out.path.psi;
  }
  out.path.action = a;
  return out;
}

MamResult minimum_action_path(const State& from, const State& to, const ModelParams& p,
                              const WeightMatrix& w, const MamDefaults& d,
                              const MamOptions& opt) {
  const auto fp = fixed_points(p);
  require(fp.status == EquilibriumStatus::kThreeEquilibria,
          "minimum_action_path needs three equilibria");
  const State u = fp.saddle->x;
  const auto init = polyline_path({from, u, to}, 0.0, d.T, d.nodes);
  return mam_gradient_flow(init, p, w, opt, u);
}

HamiltonianState hamiltonian_field(const HamiltonianState& h, const ModelParams& p,
                                   const WeightMatrix& w) {
  const State x = h.head<2>();
  const Eigen::Vector2d mom = h.tail<2>();
  HamiltonianState out;
  out.head<2>() = vector_field(x, p) + w.sigma_inv().cwiseProduct(mom);
  out.tail<2>() = -jacobian(x, p).transpose() * mom;
  return out;
}

double hamiltonian_value(const HamiltonianState& h, const ModelParams& p, const WeightMatrix& w) {
  const Eigen::Vector2d mom = h.tail<2>();
  return 0.5 * mom.dot(w.sigma_inv().cwiseProduct(mom)) +
         vector_field(State(h.head<2>()), p).dot(mom);
}

HamiltonianJacobian hamiltonian_jacobian(const HamiltonianState& h, const ModelParams& p,
                                         const WeightMatrix& w) {
  const double v = h(0), m = h(1), p1 = h(2), p2 = h(3);
  const double g = p.gamma, rho2 = p.rho() * p.rho();
  const Eigen::Matrix2d j = jacobian(State(v, m), p);
  // Second derivatives of f; g is bilinear with g_vm = -1.
  const double fvv = -2.0 * (1.0 - g * m * m * m);
  const double fvm = 6.0 * g * v * m * m;
  const double fmm = 6.0 * (1.0 - g) * rho2 * m + 6.0 * g * m * v * v;
  HamiltonianJacobian out = HamiltonianJacobian::Zero();
  out.block<2, 2>(0, 0) = j;
  out.block<2, 2>(0, 2) = w.sigma_inv().asDiagonal();
  out(2, 0) = -fvv * p1;
  out(2, 1) = -(fvm * p1 - p2);
  out(3, 0) = -(fvm * p1 - p2);
  out(3, 1) = -fmm * p1;
  out.block<2, 2>(2, 2) = -j.transpose();
  return out;
}

HamiltonianPath integrate_hamiltonian(const HamiltonianState& h0, const ModelParams& p,
                                      const WeightMatrix& w, double t_final, long n_steps) {
  require(t_final > 0.0 && n_steps > 0, "integrate_hamiltonian needs t_final > 0 and steps > 0");
  const double dt = t_final / static_cast<double>(n_steps);
  auto field = [&](double, const HamiltonianState& x) { return hamiltonian_field(x, p, w); };
  HamiltonianPath out;
  out.t.reserve(n_steps + 1);
  out.x.reserve(n_steps + 1);
  out.t.push_back(0.0);
  out.x.push_back(h0);
  HamiltonianState x = h0;
  for (long k = 1; k <= n_steps; ++k) {
    x = rk4_step(field, (k - 1) * dt, x, dt);
    if (!all_finite(x)) throw NumericalError("integrate_hamiltonian: non-finite state");
    out.t.push_back(k * dt);
    out.x.push_back(x);
  }
  return out;
}

double hamiltonian_action(const HamiltonianPath& path, const WeightMatrix& w) {
  w.validate();
  const Eigen::Vector2d inv = w.sigma_inv();
  double a = 0.0;
  for (std::size_t k = 0; k + 1 < path.x.size(); ++k) {
    const Eigen::Vector2d p0 = path.x[k].tail<2>(), p1 = path.x[k + 1].tail<2>();
    a += 0.5 * (path.t[k + 1] - path.t[k]) * (p0.dot(inv.cwiseProduct(p0)) +
                                              p1.dot(inv.cwiseProduct(p1)));
  }
  return 0.5 * a;
}

std::vector<Eigen::Vector2d> legendre_momenta(const TransitionPath& path, const ModelParams& p,
                                              const WeightMatrix& w) {
  check_path(path);
  w.validate();
  const auto d = path_derivative(path);
  std::vector<Eigen::Vector2d> out(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) {
    out[i] = w.sigma().cwiseProduct(d[i] - vector_field(path.psi[i], p));
  }
  return out;
}

GraphJet hamiltonian_center_manifold_jet(double x, double q, const ModelParams& p,
                                         const WeightMatrix& w) {
  require_unit_rho(p, "hamiltonian_center_manifold");
  const double c = p.c, g1 = 1.0 - p.gamma;
  const double s2 = w.sigma1 * w.sigma1, s4 = s2 * s2;
  const double c2 = c * c, c3 = c2 * c, c4 = c3 * c, c5 = c4 * c;
  GraphJet j;
  j.psi2 = x / c - g1 * x * x * x / c5 - s2 * q / c2 - 3.0 * s4 * q * q / c4 + 3.0 * s2 * q * x / c3;
  j.dpsi2_dpsi1 = 1.0 / c - 3.0 * g1 * x * x / c5 + 3.0 * s2 * q / c3;
  j.dpsi2_dp1 = -s2 / c2 - 6.0 * s4 * q / c4 + 3.0 * s2 * x / c3;
  j.p2 = 3.0 * g1 * s4 * q * q * q / c5 + 3.0 * g1 * q * x * x / c3;
  j.dp2_dpsi1 = 6.0 * g1 * q * x / c3;
  j.dp2_dp1 = 9.0 * g1 * s4 * q * q / c5 + 3.0 * g1 * x * x / c3;
  return j;
}

HamiltonianGraph hamiltonian_center_manifold(double psi1, double p1, const ModelParams& p,
                                             const WeightMatrix& w) {
  const GraphJet j = hamiltonian_center_manifold_jet(psi1, p1, p, w);
  return {j.psi2, j.p2};
}

Eigen::Vector2d center_manifold_invariance_residual(double psi1, double p1, const GraphJet& jet,
                                                    const ModelParams& p,
                                                    const WeightMatrix& w) {
  const HamiltonianState h(psi1, jet.psi2, p1, jet.p2);
  const HamiltonianState rate = hamiltonian_field(h, p, w);
  return {jet.dpsi2_dpsi1 * rate(0) + jet.dpsi2_dp1 * rate(2) - rate(1),
          jet.dp2_dpsi1 * rate(0) + jet.dp2_dp1 * rate(2) - rate(3)};
}

LocalMpp local_mpp(double v, const ModelParams& p, const WeightMatrix& w, MomentumBranch branch) {
  require_unit_rho(p, "local_mpp");
  w.validate();
  const double c = p.c, g1 = 1.0 - p.gamma, s2 = w.sigma1 * w.sigma1;
  const double c2 = c * c, c3 = c2 * c, c5 = c3 * c2;
  LocalMpp out;
  out.m = v / c - 2.0 * v * v / c2 - g1 * v * v * v / c5 + 6.0 * v * v * v / c3;
  out.p1 = branch == MomentumBranch::kHamiltonianZero ? 2.0 * v * v / s2 : 2.0 * v * v / c;
  out.p2 = 6.0 * g1 * v * v * v * v / (c3 * s2);
  return out;
}

ScalingLaw scaling_law_action(const ModelParams& p, const WeightMatrix& w, double r_fraction) {
  w.validate();
  require(r_fraction > 0.0 && r_fraction < 1.0, "r_fraction must lie in (0, 1)");
  const double c = p.c, s1 = w.sigma1 * w.sigma1, s2 = w.sigma2 * w.sigma2;
  const double den = c - 2.0 * s1;
  require(den > 0.0, "scaling law needs c > 2 sigma1^2");
  const double r = r_fraction, g1 = 1.0 - p.gamma;
  ScalingLaw out;
  out.ratio = std::pow(c, 7) / s1;
  out.c1 = 4.0 * r * r * r * c / (3.0 * den);
  out.c2 = 36.0 * g1 * g1 * std::pow(r, 7) * c / (7.0 * den);
  out.linear_term = out.c1 * out.ratio;
  out.quadratic_term = out.c2 * (c / s2) * out.ratio * out.ratio;
  out.action = out.linear_term + out.quadratic_term;
  return out;
}

TipTimeBound expected_tip_time_bound(const ModelParams& p, const WeightMatrix& w,
                                     double r_fraction) {
  const double a = scaling_law_action(p, w, r_fraction).action;
  return {std::exp(a), a, true};
}

MppAssembly mpp_assemble(const ModelParams& p, const WeightMatrix& w, const MppOptions& opt) {
  const auto fp = fixed_points(p);
  require(fp.status == EquilibriumStatus::kThreeEquilibria, "mpp_assemble needs three equilibria");
  require(opt.tail_dt > 0.0 && opt.tail_tol > 0.0, "tail_dt and tail_tol must be positive");
  const State s = fp.storm->x, u = fp.saddle->x;
  MppAssembly out;
  out.mam = minimum_action_path(fp.origin.x, s, p, w, opt.grid, opt.mam);
  const TransitionPath& path = out.mam.path;
  const Separatrix sep = build_separatrix(p);
  std::size_t j = 0;
  while (j < path.size() && sep.origin_side(path.psi[j])) ++j;
  if (j == path.size()) throw NumericalError("mpp_assemble: path never crosses the separatrix");
  out.min_distance_to_saddle = std::numeric_limits<double>::infinity();
  for (const auto& x : path.psi) {
    out.min_distance_to_saddle = std::min(out.min_distance_to_saddle, (x - u).norm());
  }

  out.flow_segment.tau0 = path.tau0;
  out.flow_segment.tau_f = path.tau(j);
  out.flow_segment.psi.assign(path.psi.begin(), path.psi.begin() + j + 1);
  out.flow_action =
      out.flow_segment.size() >= 3 ? action_value(out.flow_segment, p, w) : 0.0;
  out.flow_segment.action = out.flow_action;

  auto field = [&](double, const State& x) { return vector_field(x, p); };
  State x = path.psi[j];
  double t = 0.0;
  out.tail.t.push_back(t);
  out.tail.x.push_back(x);
  const long max_steps = static_cast<long>(1e6 / opt.tail_dt);
  for (long k = 0; (x - s).norm() > opt.tail_tol; ++k) {
    if (k >= max_steps) throw NumericalError("mpp_assemble: tail did not reach S");
    x = rk4_step(field, t, x, opt.tail_dt);
    t += opt.tail_dt;
    out.tail.t.push_back(t);
    out.tail.x.push_back(x);
  }
  if (out.tail.x.size() >= 3) {
    TransitionPath tp;
    tp.tau0 = 0.0;
    tp.tau_f = t;
    tp.psi = out.tail.x;
    out.tail_action = action_value(tp, p, w);
  } else {
    out.tail_action = 0.0;
  }
  out.total_action = out.flow_action + out.tail_action;

  std::vector<State> coarse;
  for (std::size_t k = 0; k < out.tail.x.size(); k += 10) coarse.push_back(out.tail.x[k]);
  coarse.push_back(out.tail.x.back());
  out.junction_mismatch = 0.0;
  for (std::size_t k = j + 1; k < path.size(); ++k) {
    out.junction_mismatch = std::max(out.junction_mismatch, polyline_distance(path.psi[k], coarse));
  }
  if (out.junction_mismatch > opt.junction_tol) {
    throw NumericalError("mpp_assemble: gradient-flow path leaves the deterministic tail by " +
                         std::to_string(out.junction_mismatch));
  }
  return out;
}

}  // namespace tctip
