#include "tctip/manifolds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

#include "tctip/errors.hpp"
#include "tctip/ode.hpp"
#include "tctip/parallel.hpp"

namespace tctip {

namespace {

Eigen::Vector2d orient(Eigen::Vector2d e) {
  e.normalize();
  if (e(0) < 0.0 || (e(0) == 0.0 && e(1) < 0.0)) e = -e;
  return e;
}

// Largest t in [0, 1] with a + t (b - a) inside the box, for a inside.
State clip_to_box(const State& a, const State& b, const Box& box) {
  double t = 1.0;
  const State d = b - a;
  auto limit = [&](double lo, double hi, int k) {
    if (b(k) < lo) t = std::min(t, (lo - a(k)) / d(k));
    if (b(k) > hi) t = std::min(t, (hi - a(k)) / d(k));
  };
  limit(box.v_lo, box.v_hi, 0);
  limit(box.m_lo, box.m_hi, 1);
  State x = a + std::max(0.0, t) * d;
  x(0) = std::clamp(x(0), box.v_lo, box.v_hi);
  x(1) = std::clamp(x(1), box.m_lo, box.m_hi);
  return x;
}

// Counterclockwise perimeter coordinate of a point on the box boundary,
// starting at the (v_lo, m_lo) corner.
double perimeter_coord(const State& x, const Box& b) {
  const double w = b.v_hi - b.v_lo, h = b.m_hi - b.m_lo;
  const double d_bottom = std::abs(x(1) - b.m_lo);
  const double d_right = std::abs(x(0) - b.v_hi);
  const double d_top = std::abs(x(1) - b.m_hi);
  const double d_left = std::abs(x(0) - b.v_lo);
  const double dmin = std::min({d_bottom, d_right, d_top, d_left});
  if (dmin == d_bottom) return x(0) - b.v_lo;
  if (dmin == d_right) return w + (x(1) - b.m_lo);
  if (dmin == d_top) return w + h + (b.v_hi - x(0));
  return 2.0 * w + h + (b.m_hi - x(1));
}

bool point_in_polygon(const std::vector<State>& poly, const State& x) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const State& a = poly[i];
    const State& b = poly[j];
    if ((a(1) > x(1)) != (b(1) > x(1))) {
      const double vc = a(0) + (x(1) - a(1)) * (b(0) - a(0)) / (b(1) - a(1));
      if (x(0) < vc) inside = !inside;
    }
  }
  return inside;
}

double segment_distance(const State& x, const State& a, const State& b) {
  const State d = b - a;
  const double len2 = d.squaredNorm();
  double t = len2 > 0.0 ? (x - a).dot(d) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (x - (a + t * d)).norm();
}

}  // namespace

Box default_box(const ModelParams& p) {
  const double rho = p.rho();
  Box b;
  b.v_lo = -0.1 * rho;
  b.v_hi = 1.5 * rho;
  return b;
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::kLeftBox: return "left-box";
    case Termination::kArclength: return "arclength";
    case Termination::kEquilibrium: return "equilibrium";
    case Termination::kMaxSteps: return "max-steps";
  }
  return "unknown";
}

std::string_view to_string(BasinLabel b) {
  switch (b) {
    case BasinLabel::kBasinO: return "basin_O";
    case BasinLabel::kBasinS: return "basin_S";
    case BasinLabel::kBoundary: return "boundary";
    case BasinLabel::kUnresolved: return "unresolved";
  }
  return "unknown";
}

SaddleEigen saddle_eigen(const ModelParams& p) {
  const FixedPointSet fp = fixed_points(p);
  if (!fp.has_storm()) throw NumericalError("no saddle equilibrium at these parameters");
  Eigen::EigenSolver<Eigen::Matrix2d> es(fp.saddle->jacobian);
  const Eigen::Vector2cd lam = es.eigenvalues();
  if (std::abs(lam(0).imag()) > 0.0 || std::abs(lam(1).imag()) > 0.0 ||
      lam(0).real() * lam(1).real() >= 0.0) {
    throw NumericalError("saddle eigen-decomposition is degenerate");
  }
  const int iu = lam(0).real() > 0.0 ? 0 : 1;
  const int is = 1 - iu;
  SaddleEigen out;
  out.saddle = fp.saddle->x;
  out.unstable_value = lam(iu).real();
  out.stable_value = lam(is).real();
  out.unstable_vector = orient(es.eigenvectors().col(iu).real());
  out.stable_vector = orient(es.eigenvectors().col(is).real());
  return out;
}

ManifoldBranch saddle_manifold(const ModelParams& p, ManifoldKind kind, BranchSign sign,
                               const ManifoldOptions& opt) {
  if (!(opt.eps >= 1e-8 && opt.eps <= 1e-4)) throw ConfigError("eps must lie in [1e-8, 1e-4]");
  if (!(opt.ds > 0.0 && opt.dt_max > 0.0 && opt.arclength > 0.0)) {
    throw ConfigError("ds, dt_max and arclength must be positive");
  }
  const SaddleEigen se = saddle_eigen(p);
  const FixedPointSet fp = fixed_points(p);
  const Box box = opt.use_default_box ? default_box(p) : opt.box;

  ManifoldBranch br;
  br.kind = kind;
  br.sign = sign;
  const bool stable = kind == ManifoldKind::kStable;
  br.eigenvalue = stable ? se.stable_value : se.unstable_value;
  br.eigenvector = stable ? se.stable_vector : se.unstable_vector;
  const double s = sign == BranchSign::kPlus ? 1.0 : -1.0;
  const double dir = stable ? -1.0 : 1.0;

  auto field = [&](double, const State& x) -> State { return dir * vector_field(x, p); };
  State x = se.saddle + s * opt.eps * br.eigenvector;
  br.points.push_back(x);
  const State o = State::Zero();
  const State st = fp.storm->x;
  for (long k = 0; k < opt.max_steps; ++k) {
    const double speed = vector_field(x, p).norm();
    const double dt = speed > 0.0 ? std::min(opt.dt_max, opt.ds / speed) : opt.dt_max;
    State xn = rk4_step(field, 0.0, x, dt);
    if (!all_finite(xn)) throw NumericalError("non-finite state while tracing manifold");
    if (!box.contains(xn)) {
      xn = clip_to_box(x, xn, box);
      br.length += (xn - x).norm();
      br.points.push_back(xn);
      br.termination = Termination::kLeftBox;
      return br;
    }
    br.length += (xn - x).norm();
    br.points.push_back(xn);
    x = xn;
    if ((x - o).norm() < opt.equilibrium_tol || (x - st).norm() < opt.equilibrium_tol) {
      br.termination = Termination::kEquilibrium;
      return br;
    }
    if (br.length >= opt.arclength) {
      br.termination = Termination::kArclength;
      return br;
    }
  }
  br.termination = Termination::kMaxSteps;
  return br;
}

Separatrix::Separatrix(std::vector<State> polyline, const Box& box,
                       const State& origin_side_point, int raster)
    : polyline_(std::move(polyline)), box_(box), n_(raster) {
  if (polyline_.size() < 2) throw NumericalError("separatrix polyline needs two points");
  if (n_ < 1) throw ConfigError("raster resolution must be positive");
  const State& a = polyline_.front();
  const State& b = polyline_.back();
  const double w = box.v_hi - box.v_lo, h = box.m_hi - box.m_lo;
  const double perim = 2.0 * (w + h);
  const State corners[4] = {State(box.v_lo, box.m_lo), State(box.v_hi, box.m_lo),
                            State(box.v_hi, box.m_hi), State(box.v_lo, box.m_hi)};
  const double corner_t[4] = {0.0, w, w + h, 2.0 * w + h};
  const double ta = perimeter_coord(a, box);
  const double tb = perimeter_coord(b, box);

  // Close from b back to a along the perimeter, counterclockwise (ccw) or
  // clockwise.
  auto close = [&](bool ccw) {
    std::vector<State> poly = polyline_;
    double span = ccw ? ta - tb : tb - ta;
    if (span < 0.0) span += perim;
    std::vector<std::pair<double, State>> visited;
    for (int k = 0; k < 4; ++k) {
      double d = ccw ? corner_t[k] - tb : tb - corner_t[k];
      if (d < 0.0) d += perim;
      if (d > 0.0 && d < span) visited.emplace_back(d, corners[k]);
    }
    std::sort(visited.begin(), visited.end(),
              [](const auto& l, const auto& r) { return l.first < r.first; });
    for (const auto& [d, c] : visited) poly.push_back(c);
    return poly;
  };
  std::vector<State> ccw = close(true);
  std::vector<State> cw = close(false);
  const bool in_ccw = point_in_polygon(ccw, origin_side_point);
  const bool in_cw = point_in_polygon(cw, origin_side_point);
  if (in_ccw == in_cw) throw NumericalError("could not close separatrix polygon around O");
  polygon_ = in_ccw ? std::move(ccw) : std::move(cw);

  hv_ = w / n_;
  hm_ = h / n_;
  cells_.assign(static_cast<std::size_t>(n_) * n_, 0);
  const std::size_t np = polygon_.size();
  auto cell_of = [&](double v, double m, int& i, int& j) {
    i = std::clamp(static_cast<int>(std::floor((v - box_.v_lo) / hv_)), 0, n_ - 1);
    j = std::clamp(static_cast<int>(std::floor((m - box_.m_lo) / hm_)), 0, n_ - 1);
  };
  const double margin = 1e-12;
  for (std::size_t k = 0; k < np; ++k) {
    const State& p0 = polygon_[k];
    const State& p1 = polygon_[(k + 1) % np];
    int i0, j0, i1, j1;
    cell_of(std::min(p0(0), p1(0)) - margin, std::min(p0(1), p1(1)) - margin, i0, j0);
    cell_of(std::max(p0(0), p1(0)) + margin, std::max(p0(1), p1(1)) + margin, i1, j1);
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) cells_[static_cast<std::size_t>(j) * n_ + i] = 2;
    }
  }
  std::vector<double> xs;
  for (int j = 0; j < n_; ++j) {
    const double y = box_.m_lo + (j + 0.5) * hm_;
    xs.clear();
    for (std::size_t k = 0, l = np - 1; k < np; l = k++) {
      const State& p0 = polygon_[k];
      const State& p1 = polygon_[l];
      if ((p0(1) > y) != (p1(1) > y)) {
        xs.push_back(p0(0) + (y - p0(1)) * (p1(0) - p0(0)) / (p1(1) - p0(1)));
      }
    }
    std::sort(xs.begin(), xs.end());
    std::size_t below = 0;
    for (int i = 0; i < n_; ++i) {
      const double x = box_.v_lo + (i + 0.5) * hv_;
      while (below < xs.size() && xs[below] <= x) ++below;
      auto& cell = cells_[static_cast<std::size_t>(j) * n_ + i];
      if (cell == 2) continue;
      // Inside iff an odd number of crossings lie to the right of x.
      cell = ((xs.size() - below) % 2 == 1) ? 1 : 0;
    }
  }
}

bool Separatrix::origin_side_exact(const State& x) const { return point_in_polygon(polygon_, x); }

bool Separatrix::origin_side(const State& x) const {
  // The polygon lies inside the box.
  if (!box_.contains(x)) return false;
  const int i = std::min(n_ - 1, static_cast<int>((x(0) - box_.v_lo) / hv_));
  const int j = std::min(n_ - 1, static_cast<int>((x(1) - box_.m_lo) / hm_));
  const std::uint8_t cell = cells_[static_cast<std::size_t>(j) * n_ + i];
  if (cell == 2) return point_in_polygon(polygon_, x);
  return cell == 1;
}

double Separatrix::distance(const State& x) const {
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < polyline_.size(); ++k) {
    d = std::min(d, segment_distance(x, polyline_[k], polyline_[k + 1]));
  }
  return d;
}

Separatrix build_separatrix(const ModelParams& p, const ManifoldOptions& opt) {
  const ManifoldBranch plus = saddle_manifold(p, ManifoldKind::kStable, BranchSign::kPlus, opt);
  const ManifoldBranch minus = saddle_manifold(p, ManifoldKind::kStable, BranchSign::kMinus, opt);
  if (plus.termination != Termination::kLeftBox || minus.termination != Termination::kLeftBox) {
    throw NumericalError("stable manifold of U does not reach the bounding box");
  }
  std::vector<State> line(minus.points.rbegin(), minus.points.rend());
  line.push_back(saddle_eigen(p).saddle);
  line.insert(line.end(), plus.points.begin(), plus.points.end());
  const Box box = opt.use_default_box ? default_box(p) : opt.box;
  return Separatrix(std::move(line), box, State::Zero());
}

BasinLabel classify_basin(const State& x0, const ModelParams& p, const BasinOptions& opt) {
  return classify_basin(x0, p, fixed_points(p), opt);
}

BasinLabel classify_basin(const State& x0, const ModelParams& p, const FixedPointSet& fp,
                          const BasinOptions& opt) {
  if (!fp.has_storm()) throw NumericalError("basin classification needs three equilibria");
  if (!(opt.dt > 0.0 && opt.tol > 0.0 && opt.t_max > 0.0)) {
    throw ConfigError("t_max, tol and dt must be positive");
  }
  const State s = fp.storm->x;
  const State u = fp.saddle->x;
  auto field = [&](double, const State& x) { return vector_field(x, p); };
  State x = x0;
  const auto steps = static_cast<long>(std::ceil(opt.t_max / opt.dt));
  for (long k = 0;; ++k) {
    if (x.norm() < opt.tol) return BasinLabel::kBasinO;
    if ((x - s).norm() < opt.tol) return BasinLabel::kBasinS;
    if (k == steps) break;
    x = rk4_step(field, 0.0, x, opt.dt);
    if (!all_finite(x)) throw NumericalError("non-finite state in basin classification");
  }
  return (x - u).norm() < opt.tol ? BasinLabel::kBoundary : BasinLabel::kUnresolved;
}

BasinGrid basin_grid(const ModelParams& p, int nv, int nm, const BasinOptions& opt) {
  if (nv < 1 || nm < 1) throw ConfigError("grid resolution must be positive");
  const FixedPointSet fp = fixed_points(p);
  if (!fp.has_storm()) throw NumericalError("basin classification needs three equilibria");
  BasinGrid g;
  const double rho = p.rho();
  for (int i = 0; i < nv; ++i) g.v.push_back(nv == 1 ? 0.0 : rho * i / (nv - 1));
  for (int j = 0; j < nm; ++j) g.m.push_back(nm == 1 ? 0.0 : static_cast<double>(j) / (nm - 1));
  g.labels.assign(static_cast<std::size_t>(nv) * nm, BasinLabel::kUnresolved);
  parallel_for(static_cast<std::size_t>(nm), [&](std::size_t j) {
    for (int i = 0; i < nv; ++i) {
      g.labels[j * nv + i] = classify_basin(State(g.v[i], g.m[j]), p, fp, opt);
    }
  });
  return g;
}

}  // namespace tctip
