#pragma once

// Uniform cell-centred grids and real-valued fields on them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "flatflow/error.hpp"

namespace flatflow {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double norm2(Vec2 a) { return a.x * a.x + a.y * a.y; }
/// Rotation by +90 degrees.
inline Vec2 perp(Vec2 a) { return {-a.y, a.x}; }

/// Closest point to `p` on the segment [a, b].
inline Vec2 closest_on_segment(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = norm2(ab);
  if (len2 == 0.0) return a;
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return a + t * ab;
}

/// A uniform grid of square cells. Cell (i, j) has its centre at
/// origin + spacing * (i, j); i runs along x and is the fastest index.
struct Grid {
  int nx = 0;
  int ny = 0;
  double spacing = 1.0;
  Vec2 origin{};

  Grid() = default;
  Grid(int nx_, int ny_, double spacing_, Vec2 origin_)
      : nx(nx_), ny(ny_), spacing(spacing_), origin(origin_) {
    if (nx < 8 || ny < 8) throw Error(ErrorKind::InvalidArgument, "grid needs at least 8x8 cells");
    if (!(spacing > 0.0) || !std::isfinite(spacing))
      throw Error(ErrorKind::InvalidArgument, "grid spacing must be positive");
    if (!std::isfinite(origin.x) || !std::isfinite(origin.y))
      throw Error(ErrorKind::InvalidArgument, "grid origin must be finite");
  }

  /// Square grid of n x n cells covering [lo, hi]^2 edge to edge.
  static Grid square(int n, double lo, double hi) {
    const double s = (hi - lo) / n;
    return Grid(n, n, s, {lo + 0.5 * s, lo + 0.5 * s});
  }

  std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(i);
  }
  Vec2 point(int i, int j) const { return {origin.x + spacing * i, origin.y + spacing * j}; }
  Vec2 point(std::size_t k) const { return point(static_cast<int>(k % nx), static_cast<int>(k / nx)); }
  /// Continuous lattice coordinates of a world point (cell centres are integers).
  Vec2 to_lattice(Vec2 p) const { return {(p.x - origin.x) / spacing, (p.y - origin.y) / spacing}; }
  double cell_area() const { return spacing * spacing; }

  /// World-space box spanned by the cell centres.
  Vec2 lattice_min() const { return origin; }
  Vec2 lattice_max() const { return point(nx - 1, ny - 1); }

  friend bool operator==(const Grid&, const Grid&) = default;
};

/// One finite real per cell.
class GridField {
 public:
  GridField() = default;
  explicit GridField(const Grid& grid, double fill = 0.0) : grid_(grid), values_(grid.size(), fill) {}
  GridField(const Grid& grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size())
      throw Error(ErrorKind::InvalidArgument, "value count does not match grid");
  }

  template <class F>
  static GridField sample(const Grid& grid, F&& f) {
    GridField out(grid);
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i) out(i, j) = f(grid.point(i, j));
    return out;
  }

  const Grid& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(int i, int j) { return values_[grid_.index(i, j)]; }
  double operator()(int i, int j) const { return values_[grid_.index(i, j)]; }
  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }
  double min() const { return *std::min_element(values_.begin(), values_.end()); }
  double max() const { return *std::max_element(values_.begin(), values_.end()); }

  /// Bilinear interpolation at a world point; clamps to the lattice box.
  double interpolate(Vec2 p) const {
    const Vec2 q = grid_.to_lattice(p);
    const double fx = std::clamp(q.x, 0.0, static_cast<double>(grid_.nx - 1));
    const double fy = std::clamp(q.y, 0.0, static_cast<double>(grid_.ny - 1));
    const int i = std::min(static_cast<int>(fx), grid_.nx - 2);
    const int j = std::min(static_cast<int>(fy), grid_.ny - 2);
    const double tx = fx - i;
    const double ty = fy - j;
    const GridField& f = *this;
    return (1 - ty) * ((1 - tx) * f(i, j) + tx * f(i + 1, j)) + ty * ((1 - tx) * f(i, j + 1) + tx * f(i + 1, j + 1));
  }

  GridField& operator+=(double c) {
    for (double& v : values_) v += c;
    return *this;
  }

 private:
  Grid grid_{};
  std::vector<double> values_;
};

}  // namespace flatflow
