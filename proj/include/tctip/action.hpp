#ifndef TCTIP_ACTION_HPP
#define TCTIP_ACTION_HPP

// Freidlin-Wentzell action, its Hamiltonian form, a gradient-flow minimum
// action solver and the local approximations near O.
//
// Sigma = diag(sigma1^-2, sigma2^-2). The rate functional is
// I = 1/2 int |psi' - F(psi)|^2_Sigma, the momentum p = Sigma (psi' - F) and
// H = 1/2 |p|^2_{Sigma^-1} + <F, p>.

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "tctip/model.hpp"

namespace tctip {

struct WeightMatrix {
  double sigma1 = 0.005;
  double sigma2 = 0.005;

  void validate() const;
  Eigen::Vector2d sigma() const {  // diagonal of Sigma
    return {1.0 / (sigma1 * sigma1), 1.0 / (sigma2 * sigma2)};
  }
  Eigen::Vector2d sigma_inv() const { return {sigma1 * sigma1, sigma2 * sigma2}; }
};

// Uniform grid on [tau0, tau_f].
struct TransitionPath {
  double tau0 = 0.0;
  double tau_f = 1.0;
  std::vector<State> psi;
  double action = 0.0;  // set by the solvers; action_value recomputes it

  std::size_t size() const { return psi.size(); }
  double h() const { return (tau_f - tau0) / static_cast<double>(psi.size() - 1); }
  double tau(std::size_t i) const { return tau0 + h() * static_cast<double>(i); }
};

// Piecewise-linear path through the given points with equal node counts per
// segment (up to rounding), n nodes in total.
TransitionPath polyline_path(const std::vector<State>& through, double tau0, double tau_f,
                             std::size_t n);

// Trapezoid rule for 1/2 |psi' - F|^2_Sigma, with centered differences inside
// and second-order one-sided differences at the ends. Needs >= 3 nodes.
double action_value(const TransitionPath& path, const ModelParams& p, const WeightMatrix& w);

// Exact gradient of action_value with respect to every node.
std::vector<State> action_gradient(const TransitionPath& path, const ModelParams& p,
                                   const WeightMatrix& w);

// psi'' - grad F psi' + Sigma^-1 grad F^T Sigma (psi' - F) by second-order
// differences at interior nodes; the end entries are zero.
std::vector<State> euler_lagrange_residual(const TransitionPath& path, const ModelParams& p,
                                           const WeightMatrix& w);

struct MamOptions {
  double s_max = 1e9;    // flow-time budget
  double ds = 1.0;       // initial flow step
  double ds_max = 1e4;
  double tol = 1e-9;     // stop when the action decrement per unit s is below tol
  int min_iterations = 100;
  int gauge_every = 100;  // 0 disables the translation gauge
  long max_iterations = 5'000'000;
};

struct MamResult {
  TransitionPath path;
  std::vector<double> action_history;  // initial value, then every accepted step
  long iterations = 0;  // accepted steps
  long rejections = 0;
  int gauge_shifts = 0;
  double s = 0.0;
  double stationarity = 0.0;  // action decrement per unit s at the last accepted step
};

// Semi-implicit gradient flow d psi / ds = -Sigma^-1 dI/dpsi / w (the discrete
// form of the flow equation): the second-difference part is implicit, the rest
// explicit. Endpoints stay fixed. A step that raises the action is retried
// with ds halved. Every gauge_every steps the path is shifted by whole nodes
// so the node nearest `anchor` sits mid-domain; the shift is kept only if the
// action does not increase. Throws NonConvergence with the last action when
// s_max or max_iterations is exhausted.
MamResult mam_gradient_flow(const TransitionPath& init, const ModelParams& p,
                            const WeightMatrix& w, const MamOptions& opt = {},
                            std::optional<State> anchor = std::nullopt);

// Default solve between two equilibria of p: T = 2000, 8001 nodes, initial
// path through U.
struct MamDefaults {
  double T = 2000.0;
  std::size_t nodes = 8001;
};
MamResult minimum_action_path(const State& from, const State& to, const ModelParams& p,
                              const WeightMatrix& w, const MamDefaults& d = {},
                              const MamOptions& opt = {});

template <typename S>
using HamiltonianStateT = Eigen::Matrix<S, 4, 1>;  // (psi1, psi2, p1, p2)
using HamiltonianState = HamiltonianStateT<double>;
using HamiltonianJacobian = Eigen::Matrix4d;

HamiltonianState hamiltonian_field(const HamiltonianState& h, const ModelParams& p,
                                   const WeightMatrix& w);
double hamiltonian_value(const HamiltonianState& h, const ModelParams& p, const WeightMatrix& w);
HamiltonianJacobian hamiltonian_jacobian(const HamiltonianState& h, const ModelParams& p,
                                         const WeightMatrix& w);

struct HamiltonianPath {
  std::vector<double> t;
  std::vector<HamiltonianState> x;
};
// RK4 with n_steps equal steps over [0, t_final].
HamiltonianPath integrate_hamiltonian(const HamiltonianState& h0, const ModelParams& p,
                                      const WeightMatrix& w, double t_final, long n_steps);

// Trapezoid rule for 1/2 |p|^2_{Sigma^-1} along the samples (equal to the rate
// functional when p = Sigma (psi' - F)).
double hamiltonian_action(const HamiltonianPath& path, const WeightMatrix& w);

// Momenta p_i = Sigma (psi'_i - F(psi_i)) with the differences of action_value.
std::vector<Eigen::Vector2d> legendre_momenta(const TransitionPath& path, const ModelParams& p,
                                              const WeightMatrix& w);

// Cubic truncation of the center manifold at (O, 0) as a graph over
// (psi1, p1), with the terms exactly as published. It omits the psi2
// coefficients of psi1^2 p1, psi1 p1^2 and p1^3, so its invariance residual is
// cubic rather than quartic.
struct HamiltonianGraph {
  double psi2;
  double p2;
};
HamiltonianGraph hamiltonian_center_manifold(double psi1, double p1, const ModelParams& p,
                                             const WeightMatrix& w);

// Residual of the invariance equations of the center manifold for a graph
// given by values and partial derivatives at (psi1, p1).
struct GraphJet {
  double psi2, dpsi2_dpsi1, dpsi2_dp1;
  double p2, dp2_dpsi1, dp2_dp1;
};
Eigen::Vector2d center_manifold_invariance_residual(double psi1, double p1, const GraphJet& jet,
                                                    const ModelParams& p, const WeightMatrix& w);
GraphJet hamiltonian_center_manifold_jet(double psi1, double p1, const ModelParams& p,
                                         const WeightMatrix& w);

// Branch of H = 0 on the center manifold used for the momentum p1.
enum class MomentumBranch {
  kHamiltonianZero,  // p1 = 2 v^2 / sigma1^2, the nontrivial root of H = 0
  kAsPrinted,        // p1 = 2 v^2 / c
};

struct LocalMpp {
  double m;
  double p1;
  double p2;
};
// m(v) = v/c - 2 v^2/c^2 - (1 - gamma) v^3/c^5 + 6 v^3/c^3,
// p2 = 6 (1 - gamma) v^4 / (c^3 sigma1^2).
LocalMpp local_mpp(double v, const ModelParams& p, const WeightMatrix& w,
                   MomentumBranch branch = MomentumBranch::kHamiltonianZero);

struct ScalingLaw {
  double action;
  double ratio;           // c^7 / sigma1^2
  double c1, c2;          // action = c1 ratio + c2 (c / sigma2^2) ratio^2
  double linear_term;     // c1 ratio
  double quadratic_term;  // c2 (c / sigma2^2) ratio^2
};
// Exact integral over v in [0, r c^3] of the lowest-order integrand
// 4 v^2 / (c sigma1^2 (c - 2 sigma1^2)) + 36 (1-gamma)^2 v^6 / (c^5 sigma1^4 sigma2^2 (c - 2 sigma1^2)).
// Needs 0 < r_fraction < 1 and c > 2 sigma1^2.
ScalingLaw scaling_law_action(const ModelParams& p, const WeightMatrix& w,
                              double r_fraction = 0.5);

struct TipTimeBound {
  double value;      // exp(action) with prefactor C = 1
  double log_value;  // the action itself
  bool log_equivalence_only = true;
};
TipTimeBound expected_tip_time_bound(const ModelParams& p, const WeightMatrix& w,
                                     double r_fraction = 0.5);

struct MppAssembly {
  TransitionPath flow_segment;  // gradient-flow nodes up to the first node past the separatrix
  Path tail;                    // deterministic flow from that node to S
  double flow_action;
  double tail_action;
  double total_action;
  double junction_mismatch;  // max distance of later flow nodes from the tail
  double min_distance_to_saddle;
  MamResult mam;
};
struct MppOptions {
  MamDefaults grid;
  MamOptions mam;
  double junction_tol = 1e-2;
  double tail_dt = 0.01;
  double tail_tol = 1e-6;  // stop the tail this close to S
};
// O -> S most probable path: gradient flow, cut at the separatrix, then the
// deterministic flow. Throws NumericalError on a junction mismatch above
// junction_tol.
MppAssembly mpp_assemble(const ModelParams& p, const WeightMatrix& w, const MppOptions& opt = {});

}  // namespace tctip

#endif  // TCTIP_ACTION_HPP
