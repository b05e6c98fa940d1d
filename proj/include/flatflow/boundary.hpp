#pragma once

// Boundary diagnostics on extracted contours: curvature by local circle fits,
// mean curvature and its L2 deviation, distance to the best disk, and radial
// graphs over a centre.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "flatflow/contour.hpp"
#include "flatflow/nelder_mead.hpp"
#include "flatflow/region.hpp"

namespace flatflow {

/// Closed boundary loops of {field <= level}.
inline std::vector<Contour> extract_contours(const GridField& field, double level) {
  if (!field.all_finite()) throw Error(ErrorKind::NonFinite, "field has non-finite values");
  return marching_squares(field, level);
}

struct CurvatureProfile {
  std::vector<double> kappa;
  double mean = 0.0;          // (int kappa ds) / length
  double l2_deviation = 0.0;  // || kappa - mean ||_{L2}
  double integral = 0.0;      // int kappa ds
  double length = 0.0;
};

/// Arclength window used for the circle fits.
inline double curvature_window(double perimeter, double spacing) {
  return std::max(6.0 * spacing, perimeter / 128.0);
}

namespace detail {

// Weighted algebraic circle fit with the Pratt normalisation
// B^2 + C^2 - 4AD = 1 for F = A|x|^2 + Bx + Cy + D, centred at `origin` and
// scaled by `scale`. Returns the signed curvature at `origin` for the
// orientation whose outward normal is `outward`; straight data yields 0.
inline double pratt_curvature(std::span<const Vec2> pts, std::span<const double> wts, Vec2 origin, double scale,
                              Vec2 outward) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double x = (pts[k].x - origin.x) / scale;
    const double y = (pts[k].y - origin.y) / scale;
    const Eigen::Vector4d row(x * x + y * y, x, y, 1.0);
    m.noalias() += wts[k] * row * row.transpose();
  }
  Eigen::Matrix4d n_inv = Eigen::Matrix4d::Zero();
  n_inv(0, 3) = -0.5;
  n_inv(3, 0) = -0.5;
  n_inv(1, 1) = 1.0;
  n_inv(2, 2) = 1.0;
  Eigen::EigenSolver<Eigen::Matrix4d> es(n_inv * m);
  const auto& values = es.eigenvalues();
  const auto& vectors = es.eigenvectors();
  double best = std::numeric_limits<double>::infinity();
  double kappa = 0.0;
  const double eig_floor = -1e-9 * m.norm();
  for (int c = 0; c < 4; ++c) {
    const double lam = values(c).real();
    if (std::abs(values(c).imag()) > 1e-9 * (1.0 + std::abs(lam))) continue;
    if (lam < eig_floor) continue;
    const Eigen::Vector4d a = vectors.col(c).real();
    const double constraint = a(1) * a(1) + a(2) * a(2) - 4.0 * a(0) * a(3);
    if (!(constraint > 0.0)) continue;
    if (lam < best) {
      best = lam;
      const double norm_a = a(0) / std::sqrt(constraint);
      // Gradient of F at the origin is (B, C).
      const double side = a(1) * outward.x + a(2) * outward.y;
      kappa = 2.0 * norm_a * (side >= 0 ? 1.0 : -1.0) / scale;
    }
  }
  return kappa;
}

}  // namespace detail

/// Per-vertex curvature by least-squares circle fits over a centred arclength
/// window, with the derived mean, L2 deviation and total curvature.
inline CurvatureProfile curvature_profile(const Contour& contour, double spacing, double window = 0.0) {
  const std::size_t n = contour.size();
  if (n < 16) throw Error(ErrorKind::TooFewVertices, "curvature needs at least 16 contour vertices");
  if (window <= 0.0) window = curvature_window(contour.length(), spacing);
  const double half = 0.5 * window;
  const auto& v = contour.vertices();
  const auto& w = contour.arclength_weights();
  std::vector<double> seg(n);
  for (std::size_t k = 0; k < n; ++k) seg[k] = norm(v[(k + 1) % n] - v[k]);

  CurvatureProfile out;
  out.kappa.resize(n);
  std::vector<Vec2> pts;
  std::vector<double> wts;
  const auto sn = static_cast<std::ptrdiff_t>(n);
  for (std::size_t k = 0; k < n; ++k) {
    pts.clear();
    wts.clear();
    pts.push_back(v[k]);
    wts.push_back(w[k]);
    // Walk forwards and backwards until the window half-length is used up,
    // keeping at least two neighbours on each side.
    double acc = 0.0;
    for (std::ptrdiff_t s = 1; s < sn / 2; ++s) {
      acc += seg[static_cast<std::size_t>((static_cast<std::ptrdiff_t>(k) + s - 1) % sn)];
      if (acc > half && s > 2) break;
      pts.push_back(contour.wrap(static_cast<std::ptrdiff_t>(k) + s));
      wts.push_back(w[static_cast<std::size_t>((static_cast<std::ptrdiff_t>(k) + s) % sn)]);
    }
    acc = 0.0;
    for (std::ptrdiff_t s = 1; s < sn / 2; ++s) {
      const std::ptrdiff_t idx = ((static_cast<std::ptrdiff_t>(k) - s) % sn + sn) % sn;
      acc += seg[static_cast<std::size_t>(idx)];
      if (acc > half && s > 2) break;
      pts.push_back(v[static_cast<std::size_t>(idx)]);
      wts.push_back(w[static_cast<std::size_t>(idx)]);
    }
    out.kappa[k] = detail::pratt_curvature(pts, wts, v[k], window, contour.normals()[k]);
  }
  out.length = contour.length();
  for (std::size_t k = 0; k < n; ++k) out.integral += out.kappa[k] * w[k];
  out.mean = out.integral / out.length;
  double dev = 0.0;
  for (std::size_t k = 0; k < n; ++k) dev += (out.kappa[k] - out.mean) * (out.kappa[k] - out.mean) * w[k];
  out.l2_deviation = std::sqrt(dev);
  return out;
}

/// || kappa - value ||_{L2} over the contour.
inline double l2_deviation_from(const Contour& contour, const CurvatureProfile& profile, double value) {
  double acc = 0.0;
  const auto& w = contour.arclength_weights();
  for (std::size_t k = 0; k < contour.size(); ++k) acc += (profile.kappa[k] - value) * (profile.kappa[k] - value) * w[k];
  return std::sqrt(acc);
}

struct DiskFit {
  Vec2 center{};
  double value = 0.0;
};

/// Area centroid of a set of oriented loops.
inline Vec2 area_centroid(std::span<const Contour> contours) {
  double a = 0.0;
  Vec2 m{};
  for (const Contour& c : contours) {
    const std::size_t n = c.size();
    const Vec2 ref = c[0];
    for (std::size_t k = 0; k < n; ++k) {
      const Vec2 p = c[k] - ref, q = c[(k + 1) % n] - ref;
      const double cr = cross(p, q);
      a += 0.5 * cr;
      m += (cr / 6.0) * (p + q) + 0.5 * cr * ref;
    }
  }
  if (a == 0.0) return contours.empty() ? Vec2{} : contours[0].centroid();
  return (1.0 / a) * m;
}

/// Distance from the contour vertices to the best circle of area `v`: the
/// centre minimises max_k | |x_k - c| - r | with r = sqrt(v / pi). Several
/// contours are treated as one union.
inline DiskFit hausdorff_to_disk(std::span<const Contour> contours, double v, int max_evals = 200) {
  if (contours.empty()) throw Error(ErrorKind::InvalidArgument, "no contour to compare against a disk");
  const double r = std::sqrt(v / std::numbers::pi);
  auto objective = [&](const std::vector<double>& c) {
    double worst = 0.0;
    for (const Contour& contour : contours)
      for (const Vec2& p : contour.vertices()) worst = std::max(worst, std::abs(std::hypot(p.x - c[0], p.y - c[1]) - r));
    return worst;
  };
  const Vec2 c0 = area_centroid(contours);
  const double step = 0.05 * r;
  const SimplexResult best = simplex_minimize(objective, {c0.x, c0.y}, {step, step}, max_evals);
  return {{best.x[0], best.x[1]}, best.value};
}

inline DiskFit hausdorff_to_disk(const Contour& contour, double v, int max_evals = 200) {
  return hausdorff_to_disk(std::span<const Contour>(&contour, 1), v, max_evals);
}

/// Samples of g on the unit circle with boundary = {center + (r + g(theta)) e(theta)}.
/// `r` defaults to the radius of the disk with the contour's area.
inline std::vector<double> radial_graph(const Contour& contour, Vec2 center, double r = -1.0, int n_theta = 512) {
  if (r < 0.0) r = std::sqrt(std::abs(contour.signed_area()) / std::numbers::pi);
  const std::size_t n = contour.size();
  std::vector<double> g(static_cast<std::size_t>(n_theta));
  for (int m = 0; m < n_theta; ++m) {
    const double th = 2.0 * std::numbers::pi * m / n_theta;
    const Vec2 dir{std::cos(th), std::sin(th)};
    int hits = 0;
    double radius = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const Vec2 a = contour[k] - center, b = contour[(k + 1) % n] - center;
      const Vec2 e = b - a;
      const double den = cross(dir, e);
      if (den == 0.0) continue;
      // center + t dir = a + u e
      const double t = cross(a, e) / den;
      const double u = cross(a, dir) / den;
      if (u >= 0.0 && u < 1.0 && t > 0.0) {
        ++hits;
        radius = t;
      }
    }
    if (hits != 1) throw Error(ErrorKind::NotStarShaped, "ray meets the contour " + std::to_string(hits) + " times");
    g[static_cast<std::size_t>(m)] = radius - r;
  }
  return g;
}

}  // namespace flatflow
