#pragma once

// Signed Euclidean distance to the interpolated boundary of a region.
//
// Cells within a few spacings of the contour get the exact distance to the
// polyline. Everywhere else an exact separable squared-distance transform over
// the near-contour cells finds the closest seed cell, and the distance is
// measured to that seed's closest contour point.

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "flatflow/region.hpp"

namespace flatflow {

namespace detail {

// 1D lower envelope of parabolas (Felzenszwalb & Huttenlocher). `f` holds the
// sampled squared distances; on return `d` holds the transform and `arg` the
// minimising sample.
inline void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& arg,
                   std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  constexpr double inf = std::numeric_limits<double>::infinity();
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == inf) continue;
    while (k >= 0) {
      const int p = v[k];
      const double s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (s <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = k == 0 ? -inf : ((f[q] + double(q) * q) - (f[v[k - 1]] + double(v[k - 1]) * v[k - 1])) /
                                 (2.0 * (q - v[k - 1]));
    z[k + 1] = inf;
  }
  if (k < 0) {
    std::fill(d.begin(), d.end(), inf);
    std::fill(arg.begin(), arg.end(), -1);
    return;
  }
  int m = 0;
  for (int q = 0; q < n; ++q) {
    while (z[m + 1] < q) ++m;
    const int p = v[m];
    d[q] = double(q - p) * (q - p) + f[p];
    arg[q] = p;
  }
}

}  // namespace detail

/// Width of the exactly evaluated band around the contour, in cells.
inline constexpr int kExactDistanceBand = 3;
inline constexpr int kSeedScan = 3;

inline GridField signed_distance(const Region& region) {
  if (region.empty()) throw Error(ErrorKind::EmptyRegion, "signed distance of an empty region");
  if (region.full()) throw Error(ErrorKind::FullRegion, "signed distance of the full domain");
  const Grid& g = region.grid();
  const int nx = g.nx, ny = g.ny;
  const double s = g.spacing;
  constexpr double inf = std::numeric_limits<double>::infinity();

  std::vector<double> exact(g.size(), inf);
  // Segment that owns each exactly evaluated cell's foot point.
  std::vector<std::pair<int, int>> owner(g.size(), {-1, -1});
  const auto& loops = region.contours();
  for (std::size_t ci = 0; ci < loops.size(); ++ci) {
    const Contour& c = loops[ci];
    const std::size_t n = c.size();
    for (std::size_t k = 0; k < n; ++k) {
      const Vec2 a = c[k], b = c[(k + 1) % n];
      const Vec2 la = g.to_lattice(a), lb = g.to_lattice(b);
      const int i0 = std::max(0, static_cast<int>(std::floor(std::min(la.x, lb.x))) - kExactDistanceBand);
      const int i1 = std::min(nx - 1, static_cast<int>(std::ceil(std::max(la.x, lb.x))) + kExactDistanceBand);
      const int j0 = std::max(0, static_cast<int>(std::floor(std::min(la.y, lb.y))) - kExactDistanceBand);
      const int j1 = std::min(ny - 1, static_cast<int>(std::ceil(std::max(la.y, lb.y))) + kExactDistanceBand);
      for (int j = j0; j <= j1; ++j) {
        for (int i = i0; i <= i1; ++i) {
          const Vec2 p = g.point(i, j);
          const Vec2 q = closest_on_segment(p, a, b);
          const double dd = norm(p - q);
          const std::size_t idx = g.index(i, j);
          if (dd < exact[idx]) {
            exact[idx] = dd;
            owner[idx] = {static_cast<int>(ci), static_cast<int>(k)};
          }
        }
      }
    }
  }

  // Seeds: cells adjacent to the boundary.
  std::vector<double> col_d(g.size(), inf);
  std::vector<int> col_arg(g.size(), -1);
  {
    std::vector<double> f(ny), d(ny), z(ny + 1);
    std::vector<int> arg(ny), v(ny);
    for (int i = 0; i < nx; ++i) {
      for (int j = 0; j < ny; ++j) f[j] = exact[g.index(i, j)] <= s * (1.0 + 1e-9) ? 0.0 : inf;
      detail::edt_1d(f, d, arg, v, z);
      for (int j = 0; j < ny; ++j) {
        col_d[g.index(i, j)] = d[j];
        col_arg[g.index(i, j)] = arg[j];
      }
    }
  }

  GridField out(g);
  std::vector<double> f(nx), d(nx), z(nx + 1);
  std::vector<int> arg(nx), v(nx);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) f[i] = col_d[g.index(i, j)];
    detail::edt_1d(f, d, arg, v, z);
    for (int i = 0; i < nx; ++i) {
      const std::size_t idx = g.index(i, j);
      double dist = exact[idx];
      if (!(dist <= kExactDistanceBand * s)) {
        const int si = arg[i];
        const int sj = si >= 0 ? col_arg[g.index(si, j)] : -1;
        if (si < 0 || sj < 0) throw Error(ErrorKind::EmptyRegion, "no boundary seeds for distance transform");
        // The nearest seed cell need not own the nearest boundary point; scan
        // the seeds around it and their segments' neighbours.
        const Vec2 p = g.point(i, j);
        for (int b = std::max(0, sj - kSeedScan); b <= std::min(ny - 1, sj + kSeedScan); ++b)
          for (int a = std::max(0, si - kSeedScan); a <= std::min(nx - 1, si + kSeedScan); ++a) {
            const std::size_t q = g.index(a, b);
            if (!(exact[q] <= s * (1.0 + 1e-9))) continue;
            const Contour& c = loops[static_cast<std::size_t>(owner[q].first)];
            const std::size_t n = c.size(), k = static_cast<std::size_t>(owner[q].second);
            for (std::size_t m : {k + n - 1, k, k + 1})
              dist = std::min(dist, norm(p - closest_on_segment(p, c[m % n], c[(m + 1) % n])));
          }
      }
      out[idx] = region.indicator()[idx] ? -dist : dist;
    }
  }
  return out;
}

}  // namespace flatflow
