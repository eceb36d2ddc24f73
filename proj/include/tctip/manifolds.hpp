#ifndef TCTIP_MANIFOLDS_HPP
#define TCTIP_MANIFOLDS_HPP

#include <cstdint>
#include <string_view>
#include <vector>

#include "tctip/model.hpp"

namespace tctip {

struct Box {
  double v_lo = -0.1, v_hi = 1.5;
  double m_lo = -0.1, m_hi = 1.5;

  bool contains(const State& x) const {
    return x(0) >= v_lo && x(0) <= v_hi && x(1) >= m_lo && x(1) <= m_hi;
  }
};

// [-0.1, 1.5] x [-0.1, 1.5] with the v-range multiplied by rho, so the box
// keeps the same shape relative to the equilibria of a rescaled system.
Box default_box(const ModelParams& p);

enum class ManifoldKind { kStable, kUnstable };
enum class BranchSign { kPlus, kMinus };

enum class Termination { kLeftBox, kArclength, kEquilibrium, kMaxSteps };
std::string_view to_string(Termination t);

struct ManifoldOptions {
  double eps = 1e-6;        // seed offset along the eigenvector, in [1e-8, 1e-4]
  double arclength = 10.0;  // maximum traced length
  double ds = 1e-3;         // target spacing between stored points
  double dt_max = 0.5;      // cap on the time step where the flow is slow
  double equilibrium_tol = 1e-4;  // stop within this distance of O or S
  long max_steps = 2'000'000;
  bool use_default_box = true;
  Box box;  // used when use_default_box is false
};

struct ManifoldBranch {
  ManifoldKind kind = ManifoldKind::kStable;
  BranchSign sign = BranchSign::kPlus;
  std::vector<State> points;
  double eigenvalue = 0.0;
  Eigen::Vector2d eigenvector = Eigen::Vector2d::Zero();  // unit, oriented with v > 0
  Termination termination = Termination::kMaxSteps;
  double length = 0.0;
};

// Eigenpairs of the Jacobian at U, unit eigenvectors with nonnegative v.
struct SaddleEigen {
  State saddle;
  double stable_value, unstable_value;
  Eigen::Vector2d stable_vector, unstable_vector;
};
SaddleEigen saddle_eigen(const ModelParams& p);

// Stable branches are traced by integrating the reversed field from
// U +/- eps * (stable eigenvector); unstable ones forward from
// U +/- eps * (unstable eigenvector). Steps use dt = min(dt_max, ds / |F|), so
// stored points are roughly ds apart in arclength.
ManifoldBranch saddle_manifold(const ModelParams& p, ManifoldKind kind, BranchSign sign,
                               const ManifoldOptions& opt = {});

// Stable manifold of U as one polyline from box edge through U to box edge,
// closed along the box boundary into a polygon containing O. Points inside the
// polygon are on the O side.
class Separatrix {
 public:
  Separatrix() = default;
  Separatrix(std::vector<State> polyline, const Box& box, const State& origin_side_point,
             int raster = 1024);

  const std::vector<State>& polyline() const { return polyline_; }
  const std::vector<State>& polygon() const { return polygon_; }
  const Box& box() const { return box_; }
  bool empty() const { return polygon_.empty(); }

  // Exact crossing-number test against the polygon.
  bool origin_side_exact(const State& x) const;
  // Raster lookup with exact fallback in cells the polyline passes through.
  bool origin_side(const State& x) const;
  bool covers(const State& x) const { return box_.contains(x); }

  // Euclidean distance from x to the polyline.
  double distance(const State& x) const;

 private:
  std::vector<State> polyline_;
  std::vector<State> polygon_;
  Box box_;
  int n_ = 0;
  double hv_ = 0.0, hm_ = 0.0;
  std::vector<std::uint8_t> cells_;  // 0 outside, 1 inside, 2 mixed
};

Separatrix build_separatrix(const ModelParams& p, const ManifoldOptions& opt = {});

enum class BasinLabel { kBasinO, kBasinS, kBoundary, kUnresolved };
std::string_view to_string(BasinLabel b);

struct BasinOptions {
  double t_max = 1e4;
  double tol = 1e-3;
  double dt = 0.25;
};

// Integrates forward with RK4 until the state is within tol of O or S.
// kBoundary when t_max is reached inside the tol-ball of U, kUnresolved
// otherwise. Requires three equilibria.
BasinLabel classify_basin(const State& x0, const ModelParams& p, const BasinOptions& opt = {});
BasinLabel classify_basin(const State& x0, const ModelParams& p, const FixedPointSet& fp,
                          const BasinOptions& opt);

struct BasinGrid {
  std::vector<double> v;  // lattice abscissae
  std::vector<double> m;  // lattice ordinates
  std::vector<BasinLabel> labels;  // row-major: labels[j * v.size() + i] at (v[i], m[j])

  BasinLabel at(std::size_t i, std::size_t j) const { return labels[j * v.size() + i]; }
};

// nv x nm lattice over [0, rho] x [0, 1] including the edges.
BasinGrid basin_grid(const ModelParams& p, int nv, int nm, const BasinOptions& opt = {});

}  // namespace tctip

#endif  // TCTIP_MANIFOLDS_HPP
