#pragma once

// Marching-squares extraction of sub-level set boundaries on the cell-centre
// lattice. Nodes with value <= level are inside. Each boundary vertex sits on
// a lattice edge at the linearly interpolated crossing; contours are oriented
// with the inside on the left (outer boundaries counter-clockwise).

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "flatflow/grid.hpp"

namespace flatflow {

/// A simple closed polyline with derived per-vertex measures.
class Contour {
 public:
  Contour() = default;
  explicit Contour(std::vector<Vec2> vertices) : vertices_(std::move(vertices)) { derive(); }

  const std::vector<Vec2>& vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }
  const Vec2& operator[](std::size_t k) const { return vertices_[k]; }
  const Vec2& wrap(std::ptrdiff_t k) const {
    const auto n = static_cast<std::ptrdiff_t>(vertices_.size());
    return vertices_[static_cast<std::size_t>(((k % n) + n) % n)];
  }

  /// Half the length of the two incident edges; sums to the perimeter.
  const std::vector<double>& arclength_weights() const { return weights_; }
  /// Unit outward normals (right of the direction of travel).
  const std::vector<Vec2>& normals() const { return normals_; }

  double length() const { return length_; }
  /// Signed shoelace area; positive for counter-clockwise loops.
  double signed_area() const { return signed_area_; }
  Vec2 centroid() const {
    Vec2 c{};
    for (const Vec2& v : vertices_) c += v;
    return (1.0 / static_cast<double>(vertices_.size())) * c;
  }

 private:
  void derive() {
    const std::size_t n = vertices_.size();
    weights_.assign(n, 0.0);
    normals_.assign(n, Vec2{});
    length_ = 0.0;
    signed_area_ = 0.0;
    if (n == 0) return;
    const Vec2 ref = vertices_[0];
    for (std::size_t k = 0; k < n; ++k) {
      const Vec2 a = vertices_[k];
      const Vec2 b = vertices_[(k + 1) % n];
      const double len = norm(b - a);
      length_ += len;
      weights_[k] += 0.5 * len;
      weights_[(k + 1) % n] += 0.5 * len;
      signed_area_ += 0.5 * cross(a - ref, b - ref);
    }
    for (std::size_t k = 0; k < n; ++k) {
      const Vec2 t = vertices_[(k + 1) % n] - vertices_[(k + n - 1) % n];
      const double len = norm(t);
      normals_[k] = len > 0 ? Vec2{t.y / len, -t.x / len} : Vec2{};
    }
  }

  std::vector<Vec2> vertices_;
  std::vector<double> weights_;
  std::vector<Vec2> normals_;
  double length_ = 0.0;
  double signed_area_ = 0.0;
};

namespace detail {

// Corners c0..c3 = (i,j), (i+1,j), (i+1,j+1), (i,j+1); edge e_k joins c_k and
// c_{k+1}. Emits oriented segments as pairs of local edge numbers.
template <class Emit>
inline void cell_segments(const std::array<double, 4>& f, double level, Emit&& emit) {
  const bool in0 = f[0] <= level, in1 = f[1] <= level, in2 = f[2] <= level, in3 = f[3] <= level;
  const int mask = (in0 ? 1 : 0) | (in1 ? 2 : 0) | (in2 ? 4 : 0) | (in3 ? 8 : 0);
  if (mask == 0 || mask == 15) return;
  // Cutting off corner k joins edges (k+3)%4 and k. The orientation is fixed
  // later from the inside node, so only the pairing matters here.
  auto corner = [&](int k) { emit((k + 3) % 4, k); };
  switch (mask) {
    case 1: case 14: corner(0); break;
    case 2: case 13: corner(1); break;
    case 4: case 11: corner(2); break;
    case 8: case 7: corner(3); break;
    case 3: case 12: emit(3, 1); break;
    case 6: case 9: emit(0, 2); break;
    case 5: case 10: {
      const bool centre_in = 0.25 * (f[0] + f[1] + f[2] + f[3]) <= level;
      // centre inside: the inside corners connect, so cut off the outside ones
      const bool cut_inside = !centre_in;
      for (int k = 0; k < 4; ++k) {
        const bool in = (mask >> k) & 1;
        if (in == cut_inside) corner(k);
      }
      break;
    }
    default: break;
  }
}

struct LatticeEdge {
  int i0, j0, i1, j1;
};

inline LatticeEdge local_edge(int i, int j, int e) {
  switch (e) {
    case 0: return {i, j, i + 1, j};
    case 1: return {i + 1, j, i + 1, j + 1};
    case 2: return {i + 1, j + 1, i, j + 1};
    default: return {i, j + 1, i, j};
  }
}

}  // namespace detail

/// Area of the marching-squares polygon of {f <= level}, accumulated per cell
/// without linking loops. Matches the shoelace area of marching_squares().
inline double sublevel_area(const GridField& f, double level) {
  const Grid& g = f.grid();
  double total = 0.0;
  for (int j = 0; j + 1 < g.ny; ++j) {
    double row = 0.0;
    for (int i = 0; i + 1 < g.nx; ++i) {
      const std::array<double, 4> c{f(i, j), f(i + 1, j), f(i + 1, j + 1), f(i, j + 1)};
      const bool in0 = c[0] <= level, in1 = c[1] <= level, in2 = c[2] <= level, in3 = c[3] <= level;
      if (in0 && in1 && in2 && in3) {
        row += 1.0;
        continue;
      }
      if (!(in0 || in1 || in2 || in3)) continue;
      // Inside polygon of this cell in local unit coordinates.
      static constexpr std::array<std::array<double, 2>, 4> kCorner{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};
      std::array<std::array<double, 2>, 8> poly{};
      int n = 0;
      for (int k = 0; k < 4; ++k) {
        const int k1 = (k + 1) % 4;
        const bool ink = c[k] <= level, ink1 = c[k1] <= level;
        if (ink) poly[n++] = kCorner[k];
        if (ink != ink1) {
          const double t = (level - c[k]) / (c[k1] - c[k]);
          poly[n++] = {kCorner[k][0] + t * (kCorner[k1][0] - kCorner[k][0]),
                       kCorner[k][1] + t * (kCorner[k1][1] - kCorner[k][1])};
        }
      }
      double a = 0.0;
      for (int k = 0; k < n; ++k) {
        const auto& p = poly[k];
        const auto& q = poly[(k + 1) % n];
        a += p[0] * q[1] - p[1] * q[0];
      }
      a *= 0.5;
      const int mask = (in0 ? 1 : 0) | (in1 ? 2 : 0) | (in2 ? 4 : 0) | (in3 ? 8 : 0);
      if (mask == 5 || mask == 10) {
        // Saddle: the walk above joins the inside corners; when the centre is
        // outside they are separate, so remove the connecting strip.
        const bool centre_in = 0.25 * (c[0] + c[1] + c[2] + c[3]) <= level;
        if (!centre_in) {
          // Area of the two cut-off inside triangles only.
          a = 0.0;
          for (int k = 0; k < 4; ++k) {
            if (!(c[k] <= level)) continue;
            const int kp = (k + 3) % 4, kn = (k + 1) % 4;
            const double tn = (level - c[k]) / (c[kn] - c[k]);
            const double tp = (level - c[k]) / (c[kp] - c[k]);
            a += 0.5 * tn * tp;
          }
        }
      }
      row += a;
    }
    total += row;
  }
  return total * g.cell_area();
}

/// Closed boundary loops of {f <= level}. Throws BoundaryClipped when the level
/// set reaches the lattice border (an open chain).
inline std::vector<Contour> marching_squares(const GridField& f, double level) {
  const Grid& g = f.grid();
  const int nx = g.nx, ny = g.ny;
  const std::size_t n_h = static_cast<std::size_t>(nx - 1) * static_cast<std::size_t>(ny);
  const std::size_t n_edges = n_h + static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny - 1);
  auto edge_id = [&](const detail::LatticeEdge& e) -> std::size_t {
    if (e.j0 == e.j1) return static_cast<std::size_t>(e.j0) * (nx - 1) + std::min(e.i0, e.i1);
    return n_h + static_cast<std::size_t>(std::min(e.j0, e.j1)) * nx + e.i0;
  };
  std::vector<std::int64_t> next(n_edges, -1);
  std::vector<unsigned char> has_prev(n_edges, 0);
  std::vector<Vec2> pos(n_edges);
  std::vector<std::size_t> starts;

  auto crossing = [&](const detail::LatticeEdge& e, Vec2& inside_node) {
    const double fa = f(e.i0, e.j0), fb = f(e.i1, e.j1);
    const double t = (level - fa) / (fb - fa);
    const Vec2 a = g.point(e.i0, e.j0), b = g.point(e.i1, e.j1);
    inside_node = fa <= level ? a : b;
    return a + t * (b - a);
  };

  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      const std::array<double, 4> c{f(i, j), f(i + 1, j), f(i + 1, j + 1), f(i, j + 1)};
      detail::cell_segments(c, level, [&](int ea, int eb) {
        const auto la = detail::local_edge(i, j, ea);
        const auto lb = detail::local_edge(i, j, eb);
        Vec2 in_a{}, in_b{};
        const Vec2 pa = crossing(la, in_a);
        const Vec2 pb = crossing(lb, in_b);
        std::size_t ida = edge_id(la), idb = edge_id(lb);
        pos[ida] = pa;
        pos[idb] = pb;
        // Inside must lie to the left of a -> b.
        Vec2 dir = pb - pa;
        double side = cross(dir, in_a - pa) + cross(dir, in_b - pb);
        if (side < 0) std::swap(ida, idb);
        next[ida] = static_cast<std::int64_t>(idb);
        has_prev[idb] = 1;
        starts.push_back(ida);
      });
    }
  }

  std::vector<Contour> loops;
  std::vector<unsigned char> visited(n_edges, 0);
  const double merge_tol = 1e-10 * g.spacing;
  for (std::size_t s : starts) {
    if (visited[s]) continue;
    std::vector<Vec2> verts;
    std::size_t e = s;
    while (true) {
      if (visited[e]) {
        if (e != s) throw Error(ErrorKind::BoundaryClipped, "contour chain merges into another loop");
        break;
      }
      visited[e] = 1;
      if (verts.empty() || norm(pos[e] - verts.back()) > merge_tol) verts.push_back(pos[e]);
      if (next[e] < 0) throw Error(ErrorKind::BoundaryClipped, "level set exits the computational domain");
      e = static_cast<std::size_t>(next[e]);
    }
    while (verts.size() > 1 && norm(verts.front() - verts.back()) <= merge_tol) verts.pop_back();
    if (verts.size() >= 3) loops.emplace_back(std::move(verts));
  }
  for (std::size_t s : starts)
    if (!has_prev[s]) throw Error(ErrorKind::BoundaryClipped, "level set exits the computational domain");
  return loops;
}

}  // namespace flatflow
