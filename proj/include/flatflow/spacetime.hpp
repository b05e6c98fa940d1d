#pragma once

// Functions sampled on a uniform spatial lattice times a uniform time lattice
// t_k = k * dt. The spatial base is one- or two-dimensional.

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "flatflow/error.hpp"

namespace flatflow {

template <int Dim>
using Point = std::array<double, Dim>;

template <int Dim>
inline double dist2(const Point<Dim>& a, const Point<Dim>& b) {
  double s = 0.0;
  for (int d = 0; d < Dim; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return s;
}

/// Uniform lattice lo + dy * m on each axis, n points per axis.
template <int Dim>
struct BaseLattice {
  std::array<int, Dim> n{};
  Point<Dim> lo{};
  double dy = 1.0;

  std::size_t size() const {
    std::size_t s = 1;
    for (int d = 0; d < Dim; ++d) s *= static_cast<std::size_t>(n[d]);
    return s;
  }
  std::array<int, Dim> unravel(std::size_t idx) const {
    std::array<int, Dim> m{};
    for (int d = 0; d < Dim; ++d) {
      m[d] = static_cast<int>(idx % static_cast<std::size_t>(n[d]));
      idx /= static_cast<std::size_t>(n[d]);
    }
    return m;
  }
  std::size_t ravel(const std::array<int, Dim>& m) const {
    std::size_t idx = 0;
    for (int d = Dim - 1; d >= 0; --d) idx = idx * static_cast<std::size_t>(n[d]) + static_cast<std::size_t>(m[d]);
    return idx;
  }
  Point<Dim> point(std::size_t idx) const {
    const auto m = unravel(idx);
    Point<Dim> p{};
    for (int d = 0; d < Dim; ++d) p[d] = lo[d] + dy * m[d];
    return p;
  }
  /// Measure of the lattice cell around one sample.
  double cell_measure() const { return std::pow(dy, Dim); }

  /// Symmetric lattice of n points per axis spanning [-half, half].
  static BaseLattice centered(int n_axis, double half) {
    if (n_axis < 2 || !(half > 0.0)) throw Error(ErrorKind::InvalidArgument, "degenerate base lattice");
    BaseLattice b;
    b.n.fill(n_axis);
    b.lo.fill(-half);
    b.dy = 2.0 * half / (n_axis - 1);
    return b;
  }
};

template <int Dim>
class SpaceTimeField {
 public:
  SpaceTimeField() = default;
  /// Slices k_first .. k_first + slices - 1 at times k * dt.
  SpaceTimeField(BaseLattice<Dim> base, double dt, int k_first, int slices)
      : base_(base), dt_(dt), k_first_(k_first), slices_(slices), values_(base.size() * static_cast<std::size_t>(slices), 0.0) {
    if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "time step must be positive");
    if (slices < 1) throw Error(ErrorKind::InvalidArgument, "need at least one time slice");
  }

  const BaseLattice<Dim>& base() const { return base_; }
  double dt() const { return dt_; }
  int k_first() const { return k_first_; }
  int k_last() const { return k_first_ + slices_ - 1; }
  int slices() const { return slices_; }
  double time(int k) const { return k * dt_; }

  double& at(std::size_t idx, int k) { return values_[slot(idx, k)]; }
  double at(std::size_t idx, int k) const { return values_[slot(idx, k)]; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool all_finite() const {
    for (double v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  template <class F>
  static SpaceTimeField sample(BaseLattice<Dim> base, double dt, int k_first, int slices, F&& f) {
    SpaceTimeField out(base, dt, k_first, slices);
    for (int k = out.k_first(); k <= out.k_last(); ++k)
      for (std::size_t i = 0; i < base.size(); ++i) out.at(i, k) = f(base.point(i), out.time(k));
    return out;
  }

 private:
  std::size_t slot(std::size_t idx, int k) const {
    return static_cast<std::size_t>(k - k_first_) * base_.size() + idx;
  }

  BaseLattice<Dim> base_{};
  double dt_ = 1.0;
  int k_first_ = 0;
  int slices_ = 0;
  std::vector<double> values_;
};

}  // namespace flatflow
