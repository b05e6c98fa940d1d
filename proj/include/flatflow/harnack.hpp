#pragma once

// Parabola contact analysis for discrete-in-time functions.
//
//   p_{xi,tau;a}(x, t) = a (t - tau) - (a/2) |x - xi|^2
//
// A test function touches w from below at (y, t_k) when it lies below w at
// every earlier slice of the window and the minimum of w - p over slice k is
// nonpositive and attained at y. Touching is only ever tested on lattice
// times.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "flatflow/spacetime.hpp"

namespace flatflow {

template <int Dim>
struct Parabola {
  Point<Dim> xi{};
  double tau = 0.0;
  double a = 1.0;

  double operator()(const Point<Dim>& x, double t) const { return a * (t - tau) - 0.5 * a * dist2<Dim>(x, xi); }
};

template <int Dim>
inline Parabola<Dim> make_parabola(const Point<Dim>& xi, double tau, double a) {
  if (!(a > 0.0)) throw Error(ErrorKind::InvalidArgument, "parabola slope must be positive");
  return {xi, tau, a};
}

/// The parabola equal to p1 + p2.
template <int Dim>
inline Parabola<Dim> parabola_sum(const Parabola<Dim>& p1, const Parabola<Dim>& p2) {
  Parabola<Dim> s;
  s.a = p1.a + p2.a;
  const double w1 = p1.a / s.a, w2 = p2.a / s.a;
  double n1 = 0.0, n2 = 0.0, n = 0.0;
  for (int d = 0; d < Dim; ++d) {
    s.xi[d] = w1 * p1.xi[d] + w2 * p2.xi[d];
    n1 += p1.xi[d] * p1.xi[d];
    n2 += p2.xi[d] * p2.xi[d];
    n += s.xi[d] * s.xi[d];
  }
  s.tau = w1 * p1.tau + w2 * p2.tau + 0.5 * w1 * n1 + 0.5 * w2 * n2 - 0.5 * n;
  return s;
}

/// Closed range of slice indices.
struct SliceWindow {
  int k_begin = 0;
  int k_end = 0;
};

template <int Dim>
inline SliceWindow full_window(const SpaceTimeField<Dim>& w) {
  return {w.k_first(), w.k_last()};
}

namespace detail {

template <int Dim>
inline void check_window(const SpaceTimeField<Dim>& w, SliceWindow win) {
  if (win.k_begin > win.k_end || win.k_begin < w.k_first() || win.k_end > w.k_last())
    throw Error(ErrorKind::InvalidArgument, "slice window outside the field");
}

// Minimum of w - p over slice k and the samples attaining it within tol.
template <int Dim>
inline double slice_gap(const SpaceTimeField<Dim>& w, const Parabola<Dim>& p, int k, double tol,
                        std::vector<std::size_t>* argmins) {
  const auto& base = w.base();
  const double t = w.time(k);
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < base.size(); ++i) m = std::min(m, w.at(i, k) - p(base.point(i), t));
  if (argmins) {
    argmins->clear();
    for (std::size_t i = 0; i < base.size(); ++i)
      if (w.at(i, k) - p(base.point(i), t) <= m + tol) argmins->push_back(i);
  }
  return m;
}

}  // namespace detail

struct Contact {
  int k = 0;
  std::size_t index = 0;  // first tying sample in lattice order
  std::vector<std::size_t> ties;
  bool tie = false;
};

template <int Dim>
struct TouchResult {
  /// Touching of p itself; empty when p stays strictly below w.
  std::optional<Contact> contact;
  /// Smallest c with w - (p + c) >= 0 on the window, and where p + c touches.
  double shift = 0.0;
  Contact shifted;
};

template <int Dim>
inline TouchResult<Dim> touches_from_below(const SpaceTimeField<Dim>& w, const Parabola<Dim>& p, SliceWindow win,
                                           double tol = 1e-12) {
  detail::check_window(w, win);
  std::vector<double> gaps;
  for (int k = win.k_begin; k <= win.k_end; ++k) gaps.push_back(detail::slice_gap(w, p, k, 0.0, nullptr));

  TouchResult<Dim> out;
  std::vector<std::size_t> arg;
  for (int k = win.k_begin; k <= win.k_end; ++k) {
    const double m = gaps[static_cast<std::size_t>(k - win.k_begin)];
    if (m <= tol) {
      detail::slice_gap(w, p, k, tol, &arg);
      out.contact = Contact{k, arg.front(), arg, arg.size() > 1};
      break;
    }
  }

  out.shift = *std::min_element(gaps.begin(), gaps.end());
  int attaining = 0;
  int first = win.k_end;
  for (int k = win.k_end; k >= win.k_begin; --k)
    if (gaps[static_cast<std::size_t>(k - win.k_begin)] <= out.shift + tol) {
      first = k;
      ++attaining;
    }
  detail::slice_gap(w, p, first, tol, &arg);
  out.shifted = Contact{first, arg.front(), arg, arg.size() > 1 || attaining > 1};
  return out;
}

template <int Dim>
struct ContactRecord {
  Point<Dim> xi{};
  double tau = 0.0;
  double a = 0.0;
  std::size_t index = 0;
  int k = 0;
  bool tie = false;
  double shift = 0.0;  // w - p at the contact, within tolerance of 0
};

/// Contact points on the space-time lattice. A lattice contact (y_i, t_k)
/// stands for the cell around y_i times [t_k, t_{k+1}).
template <int Dim>
class ContactSet {
 public:
  ContactSet(BaseLattice<Dim> base, double dt, SliceWindow win)
      : base_(base), dt_(dt), win_(win), mask_(base.size() * static_cast<std::size_t>(win.k_end - win.k_begin + 1), 0) {}

  void add(const ContactRecord<Dim>& rec) {
    records_.push_back(rec);
    mask_[slot(rec.index, rec.k)] = 1;
  }
  bool has(std::size_t index, int k) const {
    if (k < win_.k_begin || k > win_.k_end) return false;
    return mask_[slot(index, k)] != 0;
  }
  /// Membership of a space-time point: nearest base sample, slice containing t.
  bool contains(const Point<Dim>& x, double t) const {
    std::array<int, Dim> m{};
    for (int d = 0; d < Dim; ++d) {
      m[d] = static_cast<int>(std::lround((x[d] - base_.lo[d]) / base_.dy));
      if (m[d] < 0 || m[d] >= base_.n[d]) return false;
    }
    const int k = static_cast<int>(std::floor(t / dt_ + 1e-9));
    return has(base_.ravel(m), k);
  }
  std::size_t cell_count() const {
    std::size_t c = 0;
    for (auto v : mask_) c += v;
    return c;
  }
  /// |A| = dt * (spatial measure) summed over slices.
  double measure() const { return static_cast<double>(cell_count()) * base_.cell_measure() * dt_; }
  bool empty() const { return cell_count() == 0; }
  const std::vector<ContactRecord<Dim>>& records() const { return records_; }
  const BaseLattice<Dim>& base() const { return base_; }
  double dt() const { return dt_; }
  SliceWindow window() const { return win_; }

 private:
  std::size_t slot(std::size_t index, int k) const {
    return static_cast<std::size_t>(k - win_.k_begin) * base_.size() + index;
  }

  BaseLattice<Dim> base_;
  double dt_;
  SliceWindow win_;
  std::vector<unsigned char> mask_;
  std::vector<ContactRecord<Dim>> records_;
};

/// Adds every contact of the unshifted parabola p to `set`.
template <int Dim>
inline void add_contacts(ContactSet<Dim>& set, const SpaceTimeField<Dim>& w, const Parabola<Dim>& p, SliceWindow win,
                         double tol = 1e-12) {
  std::vector<std::size_t> arg;
  for (int k = win.k_begin; k <= win.k_end; ++k) {
    const double m = detail::slice_gap(w, p, k, tol, &arg);
    if (m <= tol)
      for (std::size_t i : arg) set.add({p.xi, p.tau, p.a, i, k, arg.size() > 1, w.at(i, k) - p(w.base().point(i), w.time(k))});
    // Later slices need w >= p on this one.
    if (m < -tol) break;
  }
}

/// A(a; G) for a finite set of centers.
template <int Dim>
inline ContactSet<Dim> contact_set(double a, const std::vector<std::pair<Point<Dim>, double>>& centers,
                                   const SpaceTimeField<Dim>& w, SliceWindow win, double tol = 1e-12) {
  detail::check_window(w, win);
  ContactSet<Dim> set(w.base(), w.dt(), win);
  for (const auto& [xi, tau] : centers) add_contacts(set, w, make_parabola<Dim>(xi, tau, a), win, tol);
  return set;
}

/// Axis-aligned box of parabola centers.
template <int Dim>
struct CenterBox {
  Point<Dim> xi_lo{};
  Point<Dim> xi_hi{};
  double tau_lo = 0.0;
  double tau_hi = 0.0;

  double measure() const {
    double m = tau_hi - tau_lo;
    for (int d = 0; d < Dim; ++d) m *= xi_hi[d] - xi_lo[d];
    return m;
  }
};

namespace detail {

inline double radical_inverse(std::size_t i, unsigned base) {
  double f = 1.0, r = 0.0;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

}  // namespace detail

/// Halton points in the box, skipping the origin of the sequence.
template <int Dim>
inline std::vector<std::pair<Point<Dim>, double>> halton_centers(const CenterBox<Dim>& box, std::size_t n) {
  static constexpr unsigned primes[] = {2, 3, 5, 7};
  std::vector<std::pair<Point<Dim>, double>> out;
  out.reserve(n);
  for (std::size_t i = 1; i <= n; ++i) {
    Point<Dim> xi{};
    for (int d = 0; d < Dim; ++d)
      xi[d] = box.xi_lo[d] + (box.xi_hi[d] - box.xi_lo[d]) * detail::radical_inverse(i, primes[d]);
    const double tau = box.tau_lo + (box.tau_hi - box.tau_lo) * detail::radical_inverse(i, primes[Dim]);
    out.emplace_back(xi, tau);
  }
  return out;
}

/// Smallest second difference along any axis over the window.
template <int Dim>
inline double min_second_difference(const SpaceTimeField<Dim>& w, SliceWindow win) {
  const auto& base = w.base();
  double lo = std::numeric_limits<double>::infinity();
  for (int k = win.k_begin; k <= win.k_end; ++k)
    for (std::size_t i = 0; i < base.size(); ++i) {
      const auto m = base.unravel(i);
      for (int d = 0; d < Dim; ++d) {
        if (m[d] == 0 || m[d] + 1 >= base.n[d]) continue;
        auto up = m, dn = m;
        ++up[d];
        --dn[d];
        const double dd = (w.at(base.ravel(up), k) - 2.0 * w.at(i, k) + w.at(base.ravel(dn), k)) / (base.dy * base.dy);
        lo = std::min(lo, dd);
      }
    }
  return lo;
}

template <int Dim>
struct AbpResult {
  double ratio = 0.0;  // |G| / |A(a;G)|
  double g_measure = 0.0;
  double contact_measure = 0.0;
  std::size_t centers = 0;
  std::size_t touching_centers = 0;
  /// Spatial Hessian of w stays above -a on the window.
  bool in_regime = true;
  /// Every contact lies in Q_{7/8}^-.
  bool inside_seven_eighths = true;
  ContactSet<Dim> contacts;
};

template <int Dim>
inline AbpResult<Dim> abp_ratio(double a, const CenterBox<Dim>& box, const SpaceTimeField<Dim>& w, SliceWindow win,
                                std::size_t n_samples) {
  const auto centers = halton_centers(box, n_samples);
  ContactSet<Dim> set = contact_set<Dim>(a, centers, w, win);
  if (set.empty()) throw Error(ErrorKind::EmptyContactSet, "no parabola of the sampled centers touches w");
  AbpResult<Dim> out{0.0, box.measure(), set.measure(), centers.size(), 0, true, true, std::move(set)};
  out.ratio = out.g_measure / out.contact_measure;
  out.in_regime = min_second_difference(w, win) >= -a;
  for (const auto& rec : out.contacts.records()) {
    const auto x = w.base().point(rec.index);
    if (std::sqrt(dist2<Dim>(x, Point<Dim>{})) >= 7.0 / 8.0 || w.time(rec.k) <= -49.0 / 64.0)
      out.inside_seven_eighths = false;
  }
  for (std::size_t r = 0; r < out.contacts.records().size(); ++r) {
    const auto& rec = out.contacts.records()[r];
    if (r == 0 || rec.xi != out.contacts.records()[r - 1].xi || rec.tau != out.contacts.records()[r - 1].tau)
      ++out.touching_centers;
  }
  return out;
}

/// | grad_h w(x, t_k) + a (x - xi) | with central differences; NaN on the
/// lattice boundary.
template <int Dim>
inline double gradient_mismatch(const SpaceTimeField<Dim>& w, const ContactRecord<Dim>& rec) {
  const auto& base = w.base();
  const auto m = base.unravel(rec.index);
  const auto x = base.point(rec.index);
  double acc = 0.0;
  for (int d = 0; d < Dim; ++d) {
    if (m[d] == 0 || m[d] + 1 >= base.n[d]) return std::numeric_limits<double>::quiet_NaN();
    auto up = m, dn = m;
    ++up[d];
    --dn[d];
    const double g = (w.at(base.ravel(up), rec.k) - w.at(base.ravel(dn), rec.k)) / (2.0 * base.dy);
    const double e = g + rec.a * (x[d] - rec.xi[d]);
    acc += e * e;
  }
  return std::sqrt(acc);
}

/// |A ∩ Q| / |Q| for Q = Q_rho^-(y, t) = B_rho(y) x (t - rho^2, t], both
/// measured by lattice cells of the set's window.
template <int Dim>
inline double contact_density(const ContactSet<Dim>& set, const Point<Dim>& y, double t, double rho) {
  const auto& base = set.base();
  const SliceWindow win = set.window();
  std::size_t inside = 0, hit = 0;
  for (int k = win.k_begin; k <= win.k_end; ++k) {
    const double tk = k * set.dt();
    if (!(tk > t - rho * rho - 1e-12 && tk <= t + 1e-12)) continue;
    for (std::size_t i = 0; i < base.size(); ++i) {
      if (dist2<Dim>(base.point(i), y) >= rho * rho) continue;
      ++inside;
      hit += set.has(i, k) ? 1 : 0;
    }
  }
  return inside == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(inside);
}

/// Contact density in Q_{rho/16}^-(y, t - 3 rho^2 / 4), the shifted cylinder
/// used when propagating one contact into a measure estimate.
template <int Dim>
inline double shifted_cylinder_density(const ContactSet<Dim>& set, const Point<Dim>& y, double t, double rho) {
  return contact_density<Dim>(set, y, t - 0.75 * rho * rho, rho / 16.0);
}

struct SyntheticFieldOptions {
  int n_base = 64;
  int slices = 64;
  double a = 2.0;
  /// After normalisation |w| <= value_cap and |w_y| <= slope_cap.
  double value_cap = 0.4;
  double slope_cap = 0.6;
};

/// A 1D space-time field on [-1, 1] x (-1, 0]: a caloric quadratic, decaying
/// caloric Fourier modes and time-independent convex bumps, rescaled so that
/// parabolas of slope `a` centred in the standard box all touch inside the
/// window. The spatial Hessian stays within [-0.2, 1.7] before rescaling.
inline SpaceTimeField<1> synthetic_supersolution(std::uint64_t seed, const SyntheticFieldOptions& opt = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double beta = 0.5 * unit(rng);
  struct Mode {
    double amp, nu, phase;
  };
  std::vector<Mode> modes;
  for (int m = 0; m < 3; ++m) {
    const double nu = 1.0 + 2.0 * unit(rng);
    modes.push_back({(2.0 * unit(rng) - 1.0) * 0.2 / (3.0 * nu * nu), nu, 2.0 * std::numbers::pi * unit(rng)});
  }
  struct Bump {
    double gamma, s, c;
  };
  std::vector<Bump> bumps;
  for (int j = 0; j < 2; ++j) {
    const double s = 0.2 + 0.3 * unit(rng);
    bumps.push_back({0.5 * s * unit(rng), s, 2.0 * unit(rng) - 1.0});
  }
  const auto base = BaseLattice<1>::centered(opt.n_base, 1.0);
  const double dt = 1.0 / opt.slices;
  auto raw = SpaceTimeField<1>::sample(base, dt, -(opt.slices - 1), opt.slices, [&](Point<1> p, double t) {
    const double y = p[0];
    double v = beta * (0.5 * y * y + t);
    for (const Mode& m : modes) v += m.amp * std::exp(-m.nu * m.nu * (t + 1.0)) * std::cos(m.nu * y + m.phase);
    for (const Bump& b : bumps) v += b.gamma * (std::hypot(b.s, y - b.c) - b.s);
    return v;
  });
  double mean = 0.0;
  for (double v : raw.values()) mean += v;
  mean /= static_cast<double>(raw.values().size());
  double vmax = 0.0, gmax = 0.0;
  for (int k = raw.k_first(); k <= raw.k_last(); ++k)
    for (std::size_t i = 0; i < base.size(); ++i) {
      vmax = std::max(vmax, std::abs(raw.at(i, k) - mean));
      if (i + 1 < base.size()) gmax = std::max(gmax, std::abs(raw.at(i + 1, k) - raw.at(i, k)) / base.dy);
    }
  const double scale = std::min({1.0, opt.value_cap / std::max(vmax, 1e-300), opt.slope_cap / std::max(gmax, 1e-300)});
  for (double& v : raw.values()) v = scale * (v - mean);
  return raw;
}

/// Standard center box for synthetic studies: xi in [-1/2, 1/2], tau in [-3/4, -1/4].
inline CenterBox<1> standard_center_box() { return {{-0.5}, {0.5}, -0.75, -0.25}; }

}  // namespace flatflow
