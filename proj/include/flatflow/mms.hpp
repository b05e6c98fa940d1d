#pragma once

// Volume-constrained minimizing movements. One step minimises
//
//   P(F) + (1/h) int_F d_E     subject to |F| = v
//
// through the level-set equivalence with the total-variation proximal problem:
// every sub-level set {w <= s} of the ROF solution w with datum d_E and
// weight h minimises P(F) + (1/h) int_F (d_E - s). Bisection on s enforces the
// volume, and the multiplier is s / h.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <vector>

#include "flatflow/boundary.hpp"
#include "flatflow/rof.hpp"
#include "flatflow/signed_distance.hpp"

namespace flatflow {

enum class FlowMode { Constrained, Unconstrained };

inline const char* to_string(FlowMode m) { return m == FlowMode::Constrained ? "constrained" : "unconstrained"; }

struct StepOptions {
  double vol_tol = 1e-6;
  double rof_tol = 1e-6;
  int rof_max_iter = 20000;
  double tau_over_theta = 0.07;
  /// Warm start for the proximal solve (previous w already shifted, previous p).
  std::optional<GridField> warm_w;
  std::optional<DualField> warm_p;
};

struct StepResult {
  Region next;
  double lambda = 0.0;
  double threshold = 0.0;
  GridField w;
  DualField p;
  /// Signed distance of the region the step started from.
  GridField distance;
  double tie_measure = 0.0;
  double solver_gap = 0.0;
  double solver_energy = 0.0;
  int solver_iterations = 0;
};

/// Smallest admissible time step on a grid: the boundary must be able to move
/// at least two cells per step.
inline double min_time_step(const Grid& g) { return 4.0 * g.spacing * g.spacing; }

inline void check_resolution(const Grid& g, double h) {
  if (!(h >= min_time_step(g) * (1.0 - 1e-12)))
    throw Error(ErrorKind::ResolutionViolation,
                "time step " + std::to_string(h) + " below (2 spacing)^2 = " + std::to_string(min_time_step(g)));
}

inline StepResult mms_step(const Region& E, double h, double v, FlowMode mode, const StepOptions& options = {}) {
  const Grid& g = E.grid();
  check_resolution(g, h);
  const double min_area = 9.0 * g.cell_area();
  if (E.empty() || E.area() < min_area) throw Error(ErrorKind::Vanished, "region fell below 9 cells");
  if (mode == FlowMode::Constrained && !(v > 0.0)) throw Error(ErrorKind::InvalidArgument, "target volume must be positive");

  StepResult out;
  out.distance = signed_distance(E);
  RofOptions ro;
  ro.tau_over_theta = options.tau_over_theta;
  ro.warm_w = options.warm_w;
  ro.warm_p = options.warm_p;
  RofSolution sol = rof_solve({out.distance, h}, options.rof_tol, options.rof_max_iter, std::move(ro));
  out.solver_gap = sol.gap;
  out.solver_energy = sol.primal_energy;
  out.solver_iterations = sol.iterations;

  double s_star = 0.0;
  if (mode == FlowMode::Constrained) {
    double lo = sol.w.min(), hi = sol.w.max();
    double a_lo = sublevel_area(sol.w, lo), a_hi = sublevel_area(sol.w, hi);
    if (a_hi < v) throw Error(ErrorKind::InvalidArgument, "target volume exceeds the computational domain");
    const double target_tol = 1e-2 * options.vol_tol * v;
    s_star = hi;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      const double a = sublevel_area(sol.w, mid);
      if (std::abs(a - v) <= target_tol) {
        s_star = mid;
        lo = hi = mid;
        break;
      }
      if (a < v) {
        lo = mid;
        a_lo = a;
      } else {
        hi = mid;
        a_hi = a;
      }
      s_star = std::abs(a_lo - v) <= std::abs(a_hi - v) ? lo : hi;
    }
  }
  out.threshold = s_star;
  out.lambda = s_star / h;

  // Cells sitting on the threshold plateau.
  const double tie_eps = 1e-12 * (1.0 + std::abs(s_star));
  std::size_t ties = 0;
  for (double wv : sol.w.values()) ties += std::abs(wv - s_star) <= tie_eps ? 1 : 0;
  out.tie_measure = static_cast<double>(ties) * g.cell_area();

  GridField level(g);
  for (std::size_t k = 0; k < level.size(); ++k) level[k] = sol.w[k] - s_star;
  out.next = Region(std::move(level));
  if (out.next.empty() || out.next.area() < min_area) throw Error(ErrorKind::Vanished, "region fell below 9 cells");
  if (mode == FlowMode::Constrained && std::abs(out.next.area() - v) > options.vol_tol * v)
    throw Error(ErrorKind::NonFinite, "volume constraint missed: tie region at the threshold");
  out.w = std::move(sol.w);
  out.p = std::move(sol.p);
  return out;
}

/// Curvature data over all diagnostic loops of a region.
struct BoundaryCurvature {
  std::vector<CurvatureProfile> profiles;  // one per diagnostic contour
  double mean = 0.0;
  double length = 0.0;
  double l2_deviation = 0.0;
  /// max over loops of | int kappa ds - 2 pi | / (2 pi)
  double gauss_bonnet_error = 0.0;
  double abs_p99 = 0.0;
};

inline BoundaryCurvature boundary_curvature(std::span<const Contour> contours, double spacing) {
  BoundaryCurvature out;
  double integral = 0.0;
  std::vector<double> magnitudes;
  for (const Contour& c : contours) {
    if (c.size() < 16) continue;
    out.profiles.push_back(curvature_profile(c, spacing));
    const CurvatureProfile& p = out.profiles.back();
    integral += p.integral;
    out.length += p.length;
    // Holes are clockwise and carry total curvature -2 pi.
    const double expected = c.signed_area() >= 0 ? 2.0 * std::numbers::pi : -2.0 * std::numbers::pi;
    out.gauss_bonnet_error = std::max(out.gauss_bonnet_error, std::abs(p.integral - expected) / (2.0 * std::numbers::pi));
    for (double k : p.kappa) magnitudes.push_back(std::abs(k));
  }
  if (out.length > 0) out.mean = integral / out.length;
  double dev = 0.0;
  std::size_t idx = 0;
  for (const Contour& c : contours) {
    if (c.size() < 16) continue;
    const CurvatureProfile& p = out.profiles[idx++];
    const auto& w = c.arclength_weights();
    for (std::size_t k = 0; k < c.size(); ++k) dev += (p.kappa[k] - out.mean) * (p.kappa[k] - out.mean) * w[k];
  }
  out.l2_deviation = std::sqrt(dev);
  if (!magnitudes.empty()) {
    const std::size_t q = std::min(magnitudes.size() - 1, static_cast<std::size_t>(0.99 * magnitudes.size()));
    std::nth_element(magnitudes.begin(), magnitudes.begin() + static_cast<std::ptrdiff_t>(q), magnitudes.end());
    out.abs_p99 = magnitudes[q];
  }
  return out;
}

/// Per-vertex Euler-Lagrange residual | d_E(x)/h + kappa(x) - lambda | on the
/// boundary of the step's result, over all diagnostic loops.
inline std::vector<double> el_residual(const StepResult& result, double h, const BoundaryCurvature& curvature) {
  std::vector<double> out;
  std::size_t idx = 0;
  for (const Contour& c : result.next.diagnostic_contours()) {
    if (c.size() < 16) continue;
    const CurvatureProfile& p = curvature.profiles[idx++];
    for (std::size_t k = 0; k < c.size(); ++k)
      out.push_back(std::abs(result.distance.interpolate(c[k]) / h + p.kappa[k] - result.lambda));
  }
  return out;
}

inline std::vector<double> el_residual(const StepResult& result, double h) {
  const auto curv = boundary_curvature(result.next.diagnostic_contours(), result.next.grid().spacing);
  return el_residual(result, h, curv);
}

struct LambdaEstimates {
  double threshold = 0.0;  // s* / h
  double boundary = 0.0;   // length-weighted mean of d_E/h + kappa on the new boundary
};

inline LambdaEstimates lambda_cross_check(const StepResult& result, double h) {
  const auto curv = boundary_curvature(result.next.diagnostic_contours(), result.next.grid().spacing);
  LambdaEstimates out;
  out.threshold = result.threshold / h;
  double acc = 0.0, len = 0.0;
  std::size_t idx = 0;
  for (const Contour& c : result.next.diagnostic_contours()) {
    if (c.size() < 16) continue;
    const CurvatureProfile& p = curv.profiles[idx++];
    const auto& w = c.arclength_weights();
    for (std::size_t k = 0; k < c.size(); ++k) {
      acc += w[k] * (result.distance.interpolate(c[k]) / h + p.kappa[k]);
      len += w[k];
    }
  }
  out.boundary = len > 0 ? acc / len : 0.0;
  return out;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  return m;
}

/// One row of the flow trace. Step 0 is the initial set; it carries no
/// multiplier, solver data or residuals (recorded as 0, 0 and NaN).
struct FlowRecord {
  int step = 0;
  double t = 0.0;
  double lambda = 0.0;
  double area = 0.0;
  double perimeter = 0.0;
  double kappa_dev = 0.0;
  double kappa_lambda_dev = 0.0;
  double hausdorff = 0.0;
  double el_residual_median = 0.0;
  int n_contours = 0;
  double tie_measure = 0.0;
  double solver_gap = 0.0;
  double solver_energy = 0.0;
  int solver_iters = 0;
  // Extra per-step measurements.
  double max_step_distance = 0.0;  // max over the new boundary of |d_{previous}|
  double kappa_abs_p99 = 0.0;
  double gauss_bonnet_error = 0.0;
  double kappa_mean = 0.0;
};

struct FlowTrace {
  double h = 0.0;
  double v = 0.0;
  FlowMode mode = FlowMode::Constrained;
  Grid grid{};
  std::vector<FlowRecord> records;
  /// Boundary loops of every step (all loops, as extracted).
  std::vector<std::vector<Contour>> boundaries;
  /// Full region snapshots keyed by step.
  std::map<int, Region> snapshots;
  bool truncated = false;
  std::string stop_reason;

  std::size_t size() const { return records.size(); }
  int last_step() const { return records.empty() ? -1 : records.back().step; }
};

struct FlowOptions {
  StepOptions step{};
  int snapshot_stride = 10;
  /// Every one of the final `snapshot_tail` steps is also kept.
  int snapshot_tail = 64;
  bool warm_start = true;
  std::function<void(const FlowRecord&)> on_step;
};

namespace detail {

inline FlowRecord measure(const Region& region, double v, FlowMode mode, int step, double h,
                          const BoundaryCurvature& curv) {
  FlowRecord rec;
  rec.step = step;
  rec.t = step * h;
  rec.area = region.area();
  rec.perimeter = region.perimeter();
  rec.n_contours = static_cast<int>(region.contours().size());
  const auto& diag = region.diagnostic_contours();
  rec.kappa_dev = curv.l2_deviation;
  rec.kappa_abs_p99 = curv.abs_p99;
  rec.gauss_bonnet_error = curv.gauss_bonnet_error;
  rec.kappa_mean = curv.mean;
  const double disk_area = mode == FlowMode::Constrained ? v : region.area();
  rec.hausdorff = diag.empty() ? std::numeric_limits<double>::quiet_NaN() : hausdorff_to_disk(diag, disk_area).value;
  rec.kappa_lambda_dev = std::numeric_limits<double>::quiet_NaN();
  rec.el_residual_median = std::numeric_limits<double>::quiet_NaN();
  return rec;
}

}  // namespace detail

inline FlowTrace run_flow(const Region& E0, double h, int steps, double v, FlowMode mode, const FlowOptions& options = {}) {
  check_resolution(E0.grid(), h);
  if (steps < 0) throw Error(ErrorKind::InvalidArgument, "negative step count");
  FlowTrace trace;
  trace.h = h;
  trace.v = mode == FlowMode::Constrained ? v : E0.area();
  trace.mode = mode;
  trace.grid = E0.grid();
  const double spacing = E0.grid().spacing;

  auto keep_snapshot = [&](int k) {
    return (options.snapshot_stride > 0 && k % options.snapshot_stride == 0) || k > steps - options.snapshot_tail ||
           k == steps;
  };

  trace.records.push_back(
      detail::measure(E0, trace.v, mode, 0, h, boundary_curvature(E0.diagnostic_contours(), spacing)));
  trace.boundaries.push_back(E0.contours());
  if (keep_snapshot(0)) trace.snapshots.emplace(0, E0);
  if (options.on_step) options.on_step(trace.records.back());

  Region current = E0;
  StepOptions so = options.step;
  for (int k = 1; k <= steps; ++k) {
    StepResult res;
    try {
      res = mms_step(current, h, v, mode, so);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Vanished) throw;
      trace.truncated = true;
      trace.stop_reason = e.what();
      break;
    }
    const auto curv = boundary_curvature(res.next.diagnostic_contours(), spacing);
    FlowRecord rec = detail::measure(res.next, trace.v, mode, k, h, curv);
    rec.lambda = res.lambda;
    rec.tie_measure = res.tie_measure;
    rec.solver_gap = res.solver_gap;
    rec.solver_energy = res.solver_energy;
    rec.solver_iters = res.solver_iterations;
    double dev = 0.0;
    std::size_t idx = 0;
    for (const Contour& c : res.next.diagnostic_contours()) {
      if (c.size() < 16) continue;
      dev += std::pow(l2_deviation_from(c, curv.profiles[idx++], res.lambda), 2);
    }
    rec.kappa_lambda_dev = std::sqrt(dev);
    rec.el_residual_median = median(el_residual(res, h, curv));
    for (const Contour& c : res.next.contours())
      for (const Vec2& x : c.vertices()) rec.max_step_distance = std::max(rec.max_step_distance, std::abs(res.distance.interpolate(x)));

    trace.records.push_back(rec);
    trace.boundaries.push_back(res.next.contours());
    if (keep_snapshot(k)) trace.snapshots.emplace(k, res.next);
    if (options.on_step) options.on_step(rec);

    if (options.warm_start) {
      GridField shifted = res.w;
      shifted += -res.threshold;
      so.warm_w = std::move(shifted);
      so.warm_p = std::move(res.p);
    }
    current = std::move(res.next);
  }
  return trace;
}

}  // namespace flatflow
