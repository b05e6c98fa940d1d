#pragma once

// Flatness of an evolving boundary against caloric polynomials.
//
// A frame (x0, omega, a, c) gives coordinates y = (x - x0) . tangent and
// z = (x - x0) . omega with (tangent, omega) positively oriented, and the
// polynomial P(y, t) = a y^2 / 2 + a t + c with t measured from the anchor
// time t0. The region is taken to lie below the graph (omega is the outward
// normal), so a disk of radius R has a = -1/R.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "flatflow/boundary.hpp"
#include "flatflow/mms.hpp"
#include "flatflow/nelder_mead.hpp"
#include "flatflow/spacetime.hpp"

namespace flatflow {

struct CaloricFrame {
  Vec2 x0{};
  Vec2 omega{0.0, 1.0};
  double a = 0.0;
  double c = 0.0;

  double b() const { return a; }
  Vec2 tangent() const { return {omega.y, -omega.x}; }
  double P(double y, double t) const { return 0.5 * a * y * y + b() * t + c; }
  double angle() const { return std::atan2(omega.y, omega.x); }
};

inline CaloricFrame make_frame(Vec2 x0, double angle, double a, double c) {
  return {x0, {std::cos(angle), std::sin(angle)}, a, c};
}

inline CaloricFrame make_frame(Vec2 x0, Vec2 omega, double a, double c) {
  const double n = norm(omega);
  if (!(n > 0.0) || !std::isfinite(n)) throw Error(ErrorKind::InvalidArgument, "frame direction must be nonzero");
  return {x0, (1.0 / n) * omega, a, c};
}

/// Space cylinder {|y| < rho, |z| < r1} around x0 in direction omega.
struct Cylinder {
  Vec2 x0{};
  Vec2 omega{0.0, 1.0};
  double rho = 1.0;
  double r1 = 4.0;
};

/// Default cylinder height relative to its radius.
inline constexpr double kCylinderHeight = 2.0;

inline Cylinder make_cylinder(const CaloricFrame& f, double rho, double r1) {
  if (!(rho > 0.0) || !(r1 > 0.0)) throw Error(ErrorKind::InvalidArgument, "cylinder radius and height must be positive");
  if (r1 < rho) throw Error(ErrorKind::InvalidArgument, "cylinder height below its radius");
  return {f.x0, f.omega, rho, r1};
}

inline void check_inside(const Cylinder& cyl, const Grid& g) {
  const Vec2 t{cyl.omega.y, -cyl.omega.x};
  const Vec2 lo = g.lattice_min(), hi = g.lattice_max();
  for (double sy : {-1.0, 1.0})
    for (double sz : {-1.0, 1.0}) {
      const Vec2 p = cyl.x0 + (sy * cyl.rho) * t + (sz * cyl.r1) * cyl.omega;
      if (p.x < lo.x || p.x > hi.x || p.y < lo.y || p.y > hi.y)
        throw Error(ErrorKind::CylinderOutsideDomain, "cylinder leaves the computational domain");
    }
}

/// Lambda(t_k) on a window of steps, anchored at step k0. Also carries the
/// accumulated |lambda| needed by the perturbed functions.
struct LambdaSeries {
  double h = 0.0;
  int k0 = 0;
  int k_first = 0;
  std::vector<double> values;    // Lambda(t_k), k = k_first ...
  std::vector<double> abs_tail;  // sum_{j=k+1}^{k0} |lambda_j| h for k <= k0, else -sum_{j=k0+1}^{k} |lambda_j| h

  double t0() const { return k0 * h; }
  int k_last() const { return k_first + static_cast<int>(values.size()) - 1; }
  double at(int k) const {
    if (k < k_first || k > k_last()) throw Error(ErrorKind::OffLattice, "step outside the multiplier window");
    return values[static_cast<std::size_t>(k - k_first)];
  }
  double abs_integral(int k) const {
    if (k < k_first || k > k_last()) throw Error(ErrorKind::OffLattice, "step outside the multiplier window");
    return abs_tail[static_cast<std::size_t>(k - k_first)];
  }
};

/// Lambda from per-step multipliers lambda[k] (entry 0 unused): the step
/// k - 1 -> k contributes lambda[k] h.
inline LambdaSeries lambda_accumulate(std::span<const double> lambda, double h, int k0) {
  if (k0 < 0 || k0 >= static_cast<int>(lambda.size())) throw Error(ErrorKind::OffLattice, "anchor step outside the series");
  LambdaSeries s;
  s.h = h;
  s.k0 = k0;
  s.k_first = 0;
  const std::size_t n = lambda.size();
  s.values.assign(n, 0.0);
  s.abs_tail.assign(n, 0.0);
  for (int k = k0 + 1; k < static_cast<int>(n); ++k) {
    s.values[k] = s.values[k - 1] + lambda[k] * h;
    s.abs_tail[k] = s.abs_tail[k - 1] - std::abs(lambda[k]) * h;
  }
  for (int k = k0 - 1; k >= 0; --k) {
    s.values[k] = s.values[k + 1] - lambda[k + 1] * h;
    s.abs_tail[k] = s.abs_tail[k + 1] + std::abs(lambda[k + 1]) * h;
  }
  return s;
}

inline LambdaSeries lambda_accumulate(const FlowTrace& trace, double t0) {
  const double q = t0 / trace.h;
  const double k0 = std::round(q);
  if (std::abs(q - k0) > 1e-9 * std::max(1.0, std::abs(q)))
    throw Error(ErrorKind::OffLattice, "anchor time is not a step time");
  std::vector<double> lambda;
  lambda.reserve(trace.records.size());
  for (const FlowRecord& r : trace.records) lambda.push_back(r.lambda);
  return lambda_accumulate(lambda, trace.h, static_cast<int>(k0));
}

/// One time slice of boundary loops at step `step`.
struct TimeSlice {
  int step = 0;
  std::span<const Contour> boundary;
};

/// Steps with t_k in (t_k0 - r^2, t_k0].
struct ExcessWindow {
  Grid grid{};
  double h = 0.0;
  int k0 = 0;
  std::vector<TimeSlice> slices;
};

inline ExcessWindow make_window(const FlowTrace& trace, int k0, double r) {
  if (k0 < 0 || k0 > trace.last_step()) throw Error(ErrorKind::OffLattice, "anchor step outside the trace");
  const int k_min = static_cast<int>(std::floor(k0 - r * r / trace.h + 1e-9)) + 1;
  if (k_min < 0) throw Error(ErrorKind::InvalidArgument, "window starts before the trace");
  ExcessWindow w{trace.grid, trace.h, k0, {}};
  for (int k = k_min; k <= k0; ++k) w.slices.push_back({k, trace.boundaries[static_cast<std::size_t>(k)]});
  return w;
}

namespace detail {

struct Crossing {
  double z;
  bool enter;  // moving up along the fiber enters the region
};

// Crossings of every loop with the fibers y = ys[m], bucketed per fiber.
inline std::vector<std::vector<Crossing>> fiber_crossings(std::span<const Contour> loops, Vec2 x0, Vec2 omega,
                                                          const std::vector<double>& ys) {
  const Vec2 tan{omega.y, -omega.x};
  std::vector<std::vector<Crossing>> out(ys.size());
  if (ys.empty()) return out;
  const double y_lo = ys.front(), y_hi = ys.back();
  const double dy = ys.size() > 1 ? (y_hi - y_lo) / static_cast<double>(ys.size() - 1) : 1.0;
  for (const Contour& c : loops) {
    const std::size_t n = c.size();
    std::vector<double> cy(n), cz(n);
    for (std::size_t k = 0; k < n; ++k) {
      const Vec2 d = c[k] - x0;
      cy[k] = dot(d, tan);
      cz[k] = dot(d, omega);
    }
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t k1 = (k + 1) % n;
      const double ya = cy[k], yb = cy[k1];
      if (ya == yb) continue;
      const double lo = std::min(ya, yb), hi = std::max(ya, yb);
      if (hi < y_lo || lo > y_hi) continue;
      int m0 = ys.size() > 1 ? static_cast<int>(std::ceil((lo - y_lo) / dy)) - 1 : 0;
      int m1 = ys.size() > 1 ? static_cast<int>(std::floor((hi - y_lo) / dy)) + 1 : 0;
      m0 = std::max(m0, 0);
      m1 = std::min(m1, static_cast<int>(ys.size()) - 1);
      for (int m = m0; m <= m1; ++m) {
        const double y = ys[static_cast<std::size_t>(m)];
        // Half-open in y so a fiber through a vertex sees one crossing.
        if (!(y >= lo && y < hi)) continue;
        const double u = (y - ya) / (yb - ya);
        out[static_cast<std::size_t>(m)].push_back({cz[k] + u * (cz[k1] - cz[k]), yb > ya});
      }
    }
  }
  for (auto& f : out) std::sort(f.begin(), f.end(), [](const Crossing& l, const Crossing& r) { return l.z < r.z; });
  return out;
}

// sup |z - q| over the part of (-r1, r1) where membership in the region
// differs from z < q.
inline double fiber_defect(const std::vector<Crossing>& cr, double q, double r1) {
  std::vector<double> cuts{-r1, r1, std::clamp(q, -r1, r1)};
  for (const Crossing& c : cr)
    if (c.z > -r1 && c.z < r1) cuts.push_back(c.z);
  std::sort(cuts.begin(), cuts.end());
  double best = 0.0;
  std::size_t next = 0;  // first crossing above the current point
  bool inside = false;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = cuts[i], hi = cuts[i + 1];
    if (!(hi > lo)) continue;
    const double mid = 0.5 * (lo + hi);
    while (next < cr.size() && cr[next].z < mid) ++next;
    inside = next > 0 ? cr[next - 1].enter : (next < cr.size() ? !cr[next].enter : false);
    const bool below = mid < q;
    if (inside != below) best = std::max({best, std::abs(lo - q), std::abs(hi - q)});
  }
  return best;
}

// Fibers at m * step, |m * step| < rho. Anchoring the lattice at the axis
// makes a narrower cylinder sample a subset of a wider one's fibers.
inline std::vector<double> fiber_positions(double rho, double step) {
  const int m = std::max(0, static_cast<int>(std::ceil(rho / step)) - 1);
  std::vector<double> ys;
  ys.reserve(static_cast<std::size_t>(2 * m + 1));
  for (int i = -m; i <= m; ++i) ys.push_back(i * step);
  return ys;
}

}  // namespace detail

/// Fiber spacing used for excess and sub/supergraph sampling, relative to the
/// grid spacing.
inline constexpr double kFiberSpacing = 0.5;

/// Excess of one slice: t_rel = t - t0 and Lambda = Lambda(t).
inline double slice_excess(std::span<const Contour> boundary, const CaloricFrame& f, double rho, double r1,
                           double t_rel, double lambda_shift, double spacing) {
  const auto ys = detail::fiber_positions(rho, kFiberSpacing * spacing);
  const auto cr = detail::fiber_crossings(boundary, f.x0, f.omega, ys);
  double best = 0.0;
  for (std::size_t m = 0; m < ys.size(); ++m)
    best = std::max(best, detail::fiber_defect(cr[m], f.P(ys[m], t_rel) + lambda_shift, r1));
  return best;
}

/// Maximum over the window of the slice excess.
inline double excess(const ExcessWindow& window, const CaloricFrame& f, double rho, double r1, const LambdaSeries& lambda) {
  check_inside(make_cylinder(f, rho, r1), window.grid);
  double drift = 0.0;
  for (const TimeSlice& s : window.slices) drift = std::max(drift, std::abs(lambda.at(s.step)));
  if (drift > 0.5 * r1) throw Error(ErrorKind::InvalidArgument, "cylinder too short for the multiplier drift");
  double best = 0.0;
  for (const TimeSlice& s : window.slices) {
    const double t_rel = (s.step - lambda.k0) * window.h;
    best = std::max(best, slice_excess(s.boundary, f, rho, r1, t_rel, lambda.at(s.step), window.grid.spacing));
  }
  return best;
}

/// Lowest and highest boundary heights over each fiber of the cylinder base.
struct Subgraphs {
  std::vector<double> y;  // fiber positions
  std::vector<double> u_minus;
  std::vector<double> u_plus;
};

inline Subgraphs subgraphs(std::span<const Contour> boundary, const Cylinder& cyl, std::size_t n_base) {
  if (n_base < 2) throw Error(ErrorKind::InvalidArgument, "need at least two base samples");
  Subgraphs s;
  const double half = cyl.rho * (1.0 - 1e-9);
  for (std::size_t m = 0; m < n_base; ++m) s.y.push_back(-half + 2.0 * half * static_cast<double>(m) / static_cast<double>(n_base - 1));
  const auto cr = detail::fiber_crossings(boundary, cyl.x0, cyl.omega, s.y);
  for (std::size_t m = 0; m < n_base; ++m) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& c : cr[m])
      if (c.z > -cyl.r1 && c.z < cyl.r1) {
        lo = std::min(lo, c.z);
        hi = std::max(hi, c.z);
      }
    if (!(lo <= hi)) throw Error(ErrorKind::EmptyFiber, "a cylinder fiber misses the boundary");
    s.u_minus.push_back(lo);
    s.u_plus.push_back(hi);
  }
  return s;
}

/// Rescaled sub- and supergraph functions on B_1 x (-1, 0].
struct RescaledPair {
  SpaceTimeField<1> minus;
  SpaceTimeField<1> plus;
};

/// v_r^± from the window's sub/supergraphs:
///   v(y, t_k) = (u(r y, t_k) - P(r y, t_k - t0) - Lambda(t_k)) / r^{2 + alpha}
/// with t_k = (k - k0) h / r^2.
inline RescaledPair rescale_v(const ExcessWindow& window, const CaloricFrame& f, double r, double r1,
                              const LambdaSeries& lambda, double alpha, std::size_t n_base) {
  if (window.slices.empty()) throw Error(ErrorKind::InvalidArgument, "empty window");
  const Cylinder cyl = make_cylinder(f, r, r1);
  const double scale = std::pow(r, 2.0 + alpha);
  const BaseLattice<1> base = BaseLattice<1>::centered(static_cast<int>(n_base), 1.0 - 1e-9);
  const int k_first = window.slices.front().step - window.k0;
  const int count = static_cast<int>(window.slices.size());
  RescaledPair out{SpaceTimeField<1>(base, window.h / (r * r), k_first, count),
                   SpaceTimeField<1>(base, window.h / (r * r), k_first, count)};
  for (const TimeSlice& s : window.slices) {
    const Subgraphs sg = subgraphs(s.boundary, cyl, n_base);
    const int k = s.step - window.k0;
    const double t_rel = k * window.h;
    for (std::size_t m = 0; m < n_base; ++m) {
      const double shift = f.P(sg.y[m], t_rel) + lambda.at(s.step);
      out.minus.at(m, k) = (sg.u_minus[m] - shift) / scale;
      out.plus.at(m, k) = (sg.u_plus[m] - shift) / scale;
    }
  }
  return out;
}

/// w_r^- = v_r^- - r^{-2 alpha} int |lambda|,  w_r^+ = v_r^+ + r^{-2 alpha} int |lambda|,
/// with the integral over [t_k, t0] of the shifted multiplier.
inline RescaledPair perturb_w(const RescaledPair& v, const LambdaSeries& lambda, double r, double alpha) {
  RescaledPair w = v;
  const double weight = std::pow(r, -2.0 * alpha);
  for (int k = v.minus.k_first(); k <= v.minus.k_last(); ++k) {
    const double acc = weight * lambda.abs_integral(lambda.k0 + k);
    for (std::size_t m = 0; m < v.minus.base().size(); ++m) {
      w.minus.at(m, k) -= acc;
      w.plus.at(m, k) += acc;
    }
  }
  return w;
}

/// sup v^+ - inf v^- over lattice samples of Q_rho^-(y, t).
inline double oscillation(const RescaledPair& v, double y, double t, double rho) {
  if (!(rho > 0.0) || std::abs(y) + rho > 1.0 + 1e-12 || t - rho * rho < -1.0 - 1e-12 || t > 1e-12)
    throw Error(ErrorKind::InvalidArgument, "subcylinder not inside Q_1^-");
  double sup = -std::numeric_limits<double>::infinity(), inf = std::numeric_limits<double>::infinity();
  const auto& base = v.plus.base();
  for (int k = v.plus.k_first(); k <= v.plus.k_last(); ++k) {
    const double tk = v.plus.time(k);
    if (!(tk > t - rho * rho - 1e-12 && tk <= t + 1e-12)) continue;
    for (std::size_t m = 0; m < base.size(); ++m) {
      if (std::abs(base.point(m)[0] - y) >= rho) continue;
      sup = std::max(sup, v.plus.at(m, k));
      inf = std::min(inf, v.minus.at(m, k));
    }
  }
  if (!(sup >= inf)) throw Error(ErrorKind::InvalidArgument, "subcylinder contains no lattice samples");
  return sup - inf;
}

struct FrameFit {
  CaloricFrame frame;
  double excess = 0.0;
  int evaluations = 0;
};

/// Frame budget for the derivative-free excess minimisation.
inline constexpr int kFrameFitEvaluations = 400;

/// Closest point of the loops to p and the outward normal there.
inline std::pair<Vec2, Vec2> nearest_boundary_point(std::span<const Contour> loops, Vec2 p) {
  double best = std::numeric_limits<double>::infinity();
  Vec2 q{}, nrm{0.0, 1.0};
  for (const Contour& c : loops) {
    const std::size_t n = c.size();
    for (std::size_t k = 0; k < n; ++k) {
      const Vec2 a = c[k], b = c[(k + 1) % n];
      const Vec2 f = closest_on_segment(p, a, b);
      const double d = norm(p - f);
      if (d < best) {
        best = d;
        q = f;
        const Vec2 e = b - a;
        const double len = norm(e);
        nrm = len > 0 ? Vec2{e.y / len, -e.x / len} : c.normals()[k];
      }
    }
  }
  return {q, nrm};
}

/// Osculating frame at x0 on the last slice: omega the outward normal,
/// a = -kappa, c = 0.
inline CaloricFrame osculating_frame(std::span<const Contour> loops, Vec2 x0, double spacing) {
  const auto [q, nrm] = nearest_boundary_point(loops, x0);
  double kappa = 0.0, best = std::numeric_limits<double>::infinity();
  for (const Contour& c : loops) {
    if (c.size() < 16) continue;
    const CurvatureProfile prof = curvature_profile(c, spacing);
    for (std::size_t k = 0; k < c.size(); ++k) {
      const double d = norm(c[k] - q);
      if (d < best) {
        best = d;
        kappa = prof.kappa[k];
      }
    }
  }
  return make_frame(x0, nrm, -kappa, 0.0);
}

namespace detail {

// No radius floor here; decay_probe admits scales down to c0 sqrt(h).
inline FrameFit refine_frame(const ExcessWindow& window, const CaloricFrame& seed, double r, double r1,
                             const LambdaSeries& lambda, int max_evals) {
  const double s = window.grid.spacing;
  check_inside(make_cylinder(seed, r, r1), window.grid);
  auto objective = [&](const std::vector<double>& x) {
    const CaloricFrame f = make_frame(seed.x0, x[0], x[1], x[2]);
    return excess(window, f, r, r1, lambda);
  };
  const double da = std::max(0.25 * std::abs(seed.a), 0.1 / r);
  const SimplexResult res =
      simplex_minimize(objective, {seed.angle(), seed.a, seed.c}, {0.05 * s / r + 1e-3, da, 0.5 * s}, max_evals);
  return {make_frame(seed.x0, res.x[0], res.x[1], res.x[2]), res.value, res.evaluations};
}

}  // namespace detail

/// Minimises the window excess over (angle of omega, a, c) from `seed`.
inline FrameFit fit_frame(const ExcessWindow& window, const CaloricFrame& seed, double r, double r1,
                          const LambdaSeries& lambda, int max_evals = kFrameFitEvaluations) {
  if (r < 4.0 * window.grid.spacing) throw Error(ErrorKind::InvalidArgument, "cylinder radius below 4 grid spacings");
  return detail::refine_frame(window, seed, r, r1, lambda, max_evals);
}

/// Fit from the osculating frame of the window's last slice.
inline FrameFit fit_frame(const ExcessWindow& window, Vec2 x0, double r, double r1, const LambdaSeries& lambda,
                          int max_evals = kFrameFitEvaluations) {
  if (window.slices.empty()) throw Error(ErrorKind::InvalidArgument, "empty window");
  const CaloricFrame seed = osculating_frame(window.slices.back().boundary, x0, window.grid.spacing);
  return fit_frame(window, seed, r, r1, lambda, max_evals);
}

struct DecayLevel {
  double r = 0.0;
  CaloricFrame frame;
  double excess = 0.0;
  double excess_ratio = 0.0;  // excess / r^{2+alpha}
  // Differences to the next level, NaN on the last one.
  double dA = std::numeric_limits<double>::quiet_NaN();
  double domega = std::numeric_limits<double>::quiet_NaN();
  double dc = std::numeric_limits<double>::quiet_NaN();
};

struct DecayOptions {
  double c0 = 1.0;       // scales below c0 sqrt(h) are refused
  double r1 = 0.0;       // cylinder height, 0 -> kCylinderHeight * r
  int max_evals = kFrameFitEvaluations;
};

/// Frames refitted at r_j = sigma^j r, j = 0..depth, all anchored at t0 and
/// x0 (snapped to the boundary at t0). The height r1 is fixed across levels.
inline std::vector<DecayLevel> decay_probe(const FlowTrace& trace, Vec2 x0, double t0, double r, double sigma,
                                           double alpha, int depth, const DecayOptions& opt = {}) {
  if (!(sigma > 0.0 && sigma < 1.0)) throw Error(ErrorKind::InvalidArgument, "sigma must lie in (0, 1)");
  if (depth < 0) throw Error(ErrorKind::InvalidArgument, "negative depth");
  const double cutoff = opt.c0 * std::sqrt(trace.h);
  for (int j = 0; j <= depth; ++j)
    if (std::pow(sigma, j) * r < cutoff * (1.0 - 1e-9))
      throw Error(ErrorKind::ScaleBelowParabolicCutoff,
                  "scale " + std::to_string(std::pow(sigma, j) * r) + " below c0 sqrt(h) = " + std::to_string(cutoff));
  const LambdaSeries lambda = lambda_accumulate(trace, t0);
  const int k0 = lambda.k0;
  const double r1 = opt.r1 > 0.0 ? opt.r1 : kCylinderHeight * r;
  const auto& last = trace.boundaries[static_cast<std::size_t>(k0)];
  const Vec2 anchor = nearest_boundary_point(last, x0).first;
  CaloricFrame seed = osculating_frame(last, anchor, trace.grid.spacing);

  std::vector<DecayLevel> out;
  for (int j = 0; j <= depth; ++j) {
    const double rj = std::pow(sigma, j) * r;
    const ExcessWindow win = make_window(trace, k0, rj);
    const FrameFit fit = detail::refine_frame(win, seed, rj, r1, lambda, opt.max_evals);
    out.push_back({rj, fit.frame, fit.excess, fit.excess / std::pow(rj, 2.0 + alpha)});
    seed = fit.frame;
  }
  for (std::size_t j = 0; j + 1 < out.size(); ++j) {
    const double rj = out[j].r;
    out[j].dA = std::abs(out[j].frame.a - out[j + 1].frame.a) / std::pow(rj, alpha);
    out[j].domega = norm(out[j].frame.omega - out[j + 1].frame.omega) / std::pow(rj, 1.0 + alpha);
    out[j].dc = std::abs(out[j].frame.c - out[j + 1].frame.c) / std::pow(rj, 2.0 + alpha);
  }
  return out;
}

}  // namespace flatflow
