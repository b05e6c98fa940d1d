#pragma once

// A priori estimate reports and the good/bad time sets of a flow trace.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "flatflow/mms.hpp"

namespace flatflow {

/// Finite union of closed intervals of positive length, sorted and disjoint.
/// Touching intervals are merged; degenerate ones are dropped.
class IntervalSet {
 public:
  using Interval = std::pair<double, double>;

  IntervalSet() = default;
  explicit IntervalSet(std::vector<Interval> parts) : parts_(std::move(parts)) { normalize(); }

  static IntervalSet single(double a, double b) { return IntervalSet({{a, b}}); }

  const std::vector<Interval>& intervals() const { return parts_; }
  bool empty() const { return parts_.empty(); }
  std::size_t size() const { return parts_.size(); }

  double measure() const {
    double m = 0.0;
    for (const auto& [a, b] : parts_) m += b - a;
    return m;
  }

  bool contains(double x) const {
    auto it = std::upper_bound(parts_.begin(), parts_.end(), x, [](double v, const Interval& i) { return v < i.first; });
    if (it == parts_.begin()) return false;
    --it;
    return x <= it->second;
  }

  /// |(-inf, x] ∩ this|
  double measure_below(double x) const {
    double m = 0.0;
    for (const auto& [a, b] : parts_) {
      if (x <= a) break;
      m += std::min(x, b) - a;
    }
    return m;
  }

  /// |[lo, hi] ∩ this|, zero when hi <= lo.
  double measure_between(double lo, double hi) const { return hi > lo ? measure_below(hi) - measure_below(lo) : 0.0; }

  IntervalSet unite(const IntervalSet& o) const {
    std::vector<Interval> all = parts_;
    all.insert(all.end(), o.parts_.begin(), o.parts_.end());
    return IntervalSet(std::move(all));
  }

  IntervalSet intersect(const IntervalSet& o) const {
    std::vector<Interval> out;
    std::size_t i = 0, j = 0;
    while (i < parts_.size() && j < o.parts_.size()) {
      const double lo = std::max(parts_[i].first, o.parts_[j].first);
      const double hi = std::min(parts_[i].second, o.parts_[j].second);
      if (hi > lo) out.emplace_back(lo, hi);
      (parts_[i].second < o.parts_[j].second) ? ++i : ++j;
    }
    return IntervalSet(std::move(out));
  }

  IntervalSet clip(double lo, double hi) const { return intersect(single(lo, hi)); }

  bool operator==(const IntervalSet&) const = default;

 private:
  void normalize() {
    std::erase_if(parts_, [](const Interval& i) { return !(i.second > i.first); });
    std::sort(parts_.begin(), parts_.end());
    std::vector<Interval> merged;
    for (const Interval& i : parts_) {
      if (!merged.empty() && i.first <= merged.back().second)
        merged.back().second = std::max(merged.back().second, i.second);
      else
        merged.push_back(i);
    }
    parts_ = std::move(merged);
  }

  std::vector<Interval> parts_;
};

namespace detail {

// {x in [lo, hi] : F(x) >= 0} for F linear between consecutive `knots`.
template <class F>
void nonnegative_part(F&& f, double lo, double hi, std::vector<double> knots, std::vector<IntervalSet::Interval>& out) {
  if (!(hi > lo)) return;
  std::erase_if(knots, [&](double k) { return !(k > lo && k < hi); });
  knots.push_back(lo);
  knots.push_back(hi);
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double p = knots[i], q = knots[i + 1];
    const double fp = f(p), fq = f(q);
    if (fp >= 0.0 && fq >= 0.0) {
      out.emplace_back(p, q);
    } else if (fp >= 0.0) {
      out.emplace_back(p, p + (q - p) * fp / (fp - fq));
    } else if (fq >= 0.0) {
      out.emplace_back(q - (q - p) * fq / (fq - fp), q);
    }
  }
}

}  // namespace detail

/// {x : sup_{L in (0,1)} |[x - L, x] ∩ gamma| / L >= theta}, up to null sets.
///
/// Off gamma the ratio only increases along pieces where x - L runs through
/// gamma, so the sup is attained at L = x - a_i (a_i a left endpoint) or in
/// the limit L -> 1. Both conditions are piecewise linear in x.
inline IntervalSet density_set(const IntervalSet& gamma, double theta) {
  if (!(theta > 0.0)) throw Error(ErrorKind::InvalidArgument, "density threshold must be positive");
  if (gamma.empty() || theta > 1.0) return {};
  std::vector<double> ends;
  for (const auto& [a, b] : gamma.intervals()) {
    ends.push_back(a);
    ends.push_back(b);
  }
  std::vector<IntervalSet::Interval> out = gamma.intervals();
  for (const auto& [a, b] : gamma.intervals()) {
    auto g = [&, a = a](double x) { return gamma.measure_between(a, x) - theta * (x - a); };
    detail::nonnegative_part(g, a, a + 1.0, ends, out);
  }
  std::vector<double> knots = ends;
  for (double e : ends) knots.push_back(e + 1.0);
  auto full = [&](double x) { return gamma.measure_between(x - 1.0, x) - theta; };
  detail::nonnegative_part(full, gamma.intervals().front().first, gamma.intervals().back().second + 1.0, knots, out);
  return IntervalSet(std::move(out));
}

/// The density set at threshold sqrt|gamma|.
inline IntervalSet maximal_density_set(const IntervalSet& gamma) {
  const double m = gamma.measure();
  if (!(m > 0.0 && m < 1.0)) throw Error(ErrorKind::MeasureOutOfRange, "need 0 < |Gamma| < 1, got " + std::to_string(m));
  return density_set(gamma, std::sqrt(m));
}

/// End of the time covered by the trace: the last step holds on [t_K, t_K + h).
inline double trace_end(const FlowTrace& trace) {
  if (trace.records.empty()) throw Error(ErrorKind::InvalidArgument, "empty trace");
  return trace.records.back().t + trace.h;
}

/// Union of step intervals [t_k, t_{k+1}] whose record satisfies `pred`.
template <class Pred>
IntervalSet step_set(const FlowTrace& trace, Pred&& pred) {
  std::vector<IntervalSet::Interval> parts;
  for (const FlowRecord& r : trace.records)
    if (pred(r)) parts.emplace_back(r.t, r.t + trace.h);
  return IntervalSet(std::move(parts));
}

struct GoodTimes {
  IntervalSet gamma;
  IntervalSet sigma;
};

/// Gamma_T: times in [T, T_end] whose curvature deviation is at least eps0.
/// Sigma_T: times t >= T + 1 where Gamma_T has density >= sqrt|Gamma_T| at
/// some scale below one.
inline GoodTimes good_times(const FlowTrace& trace, double T, double eps0) {
  const double t_end = trace_end(trace);
  if (T < trace.records.front().t || T > t_end) throw Error(ErrorKind::InvalidArgument, "T outside the trace");
  GoodTimes g;
  g.gamma = step_set(trace, [&](const FlowRecord& r) { return r.kappa_dev >= eps0; }).clip(T, t_end);
  if (g.gamma.empty()) return g;
  g.sigma = density_set(g.gamma, std::sqrt(g.gamma.measure())).clip(T + 1.0, t_end);
  return g;
}

/// inf_{L in (0,1)} |[t0 - L, t0] ∩ good| / L. The ratio falls only while
/// t0 - L crosses a gap, so the inf sits at a right endpoint or at a limit.
inline double lower_density(const IntervalSet& good, double t0) {
  std::vector<double> ratios;
  ratios.push_back(good.measure_between(t0 - 1.0, t0));
  // L -> 0: full density iff [t0 - eps, t0] lies in the set.
  bool left_full = false;
  for (const auto& [a, b] : good.intervals())
    if (a < t0 && t0 <= b) left_full = true;
  ratios.push_back(left_full ? 1.0 : 0.0);
  for (const auto& [a, b] : good.intervals())
    if (b > t0 - 1.0 && b < t0) ratios.push_back(good.measure_between(b, t0) / (t0 - b));
  return *std::min_element(ratios.begin(), ratios.end());
}

struct PlanarCondition {
  double perimeter = 0.0;  // P(E(t0 - 1))
  double radius = 0.0;     // |E| = |B_r|
  double perimeter_bound = 0.0;
  double density = 0.0;    // inf-density of {kappa_dev <= eps0} at t0
  bool perimeter_ok = false;
  bool density_ok = false;
  bool holds() const { return perimeter_ok && density_ok; }
};

inline PlanarCondition planar_condition(const FlowTrace& trace, double t0, double eps0, double delta0) {
  const double t_start = trace.records.front().t;
  if (t0 - 1.0 < t_start - 1e-12 || t0 > trace_end(trace)) throw Error(ErrorKind::InvalidArgument, "need [t0 - 1, t0] inside the trace");
  const int k = std::clamp(static_cast<int>(std::floor((t0 - 1.0 - t_start) / trace.h + 1e-9)), 0,
                           static_cast<int>(trace.records.size()) - 1);
  const FlowRecord& rec = trace.records[static_cast<std::size_t>(k)];
  PlanarCondition pc;
  pc.perimeter = rec.perimeter;
  pc.radius = std::sqrt(rec.area / std::numbers::pi);
  pc.perimeter_bound = (2.0 * std::numbers::pi * std::numbers::sqrt2 - delta0) * pc.radius;
  pc.perimeter_ok = pc.perimeter <= pc.perimeter_bound;
  const IntervalSet good = step_set(trace, [&](const FlowRecord& r) { return r.kappa_dev <= eps0; });
  pc.density = lower_density(good, t0);
  pc.density_ok = pc.density >= 1.0 - eps0;
  return pc;
}

/// Uniform hash of polyline segments for nearest-distance queries.
class SegmentIndex {
 public:
  SegmentIndex(std::span<const Contour> loops, double cell) : cell_(cell) {
    if (!(cell > 0.0)) throw Error(ErrorKind::InvalidArgument, "index cell must be positive");
    for (const Contour& c : loops) {
      const std::size_t n = c.size();
      for (std::size_t k = 0; k < n; ++k) {
        const Vec2 a = c[k], b = c[(k + 1) % n];
        const std::size_t id = segs_.size();
        segs_.push_back({a, b});
        const auto [i0, j0] = key(Vec2{std::min(a.x, b.x), std::min(a.y, b.y)});
        const auto [i1, j1] = key(Vec2{std::max(a.x, b.x), std::max(a.y, b.y)});
        for (long i = i0; i <= i1; ++i)
          for (long j = j0; j <= j1; ++j) buckets_[pack(i, j)].push_back(id);
      }
    }
  }

  bool empty() const { return segs_.empty(); }

  /// Euclidean distance from p to the nearest segment.
  double distance(Vec2 p) const {
    if (segs_.empty()) return std::numeric_limits<double>::infinity();
    const auto [ci, cj] = key(p);
    double best = std::numeric_limits<double>::infinity();
    for (long ring = 0;; ++ring) {
      for (long i = ci - ring; i <= ci + ring; ++i)
        for (long j = cj - ring; j <= cj + ring; ++j) {
          if (std::max(std::abs(i - ci), std::abs(j - cj)) != ring) continue;
          auto it = buckets_.find(pack(i, j));
          if (it == buckets_.end()) continue;
          for (std::size_t id : it->second) best = std::min(best, norm(p - closest_on_segment(p, segs_[id].first, segs_[id].second)));
        }
      // Every unvisited bucket is at least ring * cell away.
      if (best <= ring * cell_) return best;
      if (ring > max_ring_) return brute(p);
    }
  }

 private:
  std::pair<long, long> key(Vec2 p) const {
    return {static_cast<long>(std::floor(p.x / cell_)), static_cast<long>(std::floor(p.y / cell_))};
  }
  static long long pack(long i, long j) { return (static_cast<long long>(i) << 32) ^ static_cast<long long>(static_cast<unsigned>(j)); }
  double brute(Vec2 p) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [a, b] : segs_) best = std::min(best, norm(p - closest_on_segment(p, a, b)));
    return best;
  }

  double cell_;
  long max_ring_ = 64;
  std::vector<std::pair<Vec2, Vec2>> segs_;
  std::unordered_map<long long, std::vector<std::size_t>> buckets_;
};

/// Largest distance from a vertex of `next` to the loops of `prev`.
inline double max_boundary_distance(std::span<const Contour> prev, std::span<const Contour> next, double cell) {
  const SegmentIndex index(prev, cell);
  double m = 0.0;
  for (const Contour& c : next)
    for (const Vec2& x : c.vertices()) m = std::max(m, index.distance(x));
  return m;
}

struct AprioriWindow {
  double t1 = 0.0, t2 = 0.0;
  double dissipation = 0.0;       // sum h |kappa - lambda|^2
  double perimeter_drop = 0.0;    // P(t1) - P(t2)
  double dissipation_ratio = 0.0; // NaN when the perimeter did not drop
  double lambda_energy = 0.0;     // sum h lambda^2 / (t2 - t1 + 1)
};

struct AprioriReport {
  std::vector<double> step_distance_ratio;  // per step k >= 1: max |d_{E_{k-1}}| over dE_k / sqrt(h)
  double max_distance_ratio = 0.0;
  double dissipation = 0.0;
  double perimeter_drop = 0.0;
  double dissipation_ratio = std::numeric_limits<double>::quiet_NaN();
  double kappa_p99_scaled = 0.0;            // max_k p99|kappa| sqrt(h)
  std::vector<AprioriWindow> windows;
  bool single_step = false;
};

/// Windows are consecutive spans of `window` time units.
inline AprioriReport apriori_report(const FlowTrace& trace, double window = 1.0) {
  if (!(window > 0.0)) throw Error(ErrorKind::InvalidArgument, "window length must be positive");
  AprioriReport rep;
  const auto& recs = trace.records;
  if (recs.size() < 2) {
    rep.single_step = true;
    return rep;
  }
  if (trace.boundaries.size() != recs.size()) throw Error(ErrorKind::InvalidArgument, "trace lacks per-step boundaries");
  const double sqrt_h = std::sqrt(trace.h);
  const double cell = 2.0 * trace.grid.spacing;
  for (std::size_t k = 1; k < recs.size(); ++k) {
    const double d = max_boundary_distance(trace.boundaries[k - 1], trace.boundaries[k], cell) / sqrt_h;
    rep.step_distance_ratio.push_back(d);
    rep.max_distance_ratio = std::max(rep.max_distance_ratio, d);
    rep.dissipation += trace.h * recs[k].kappa_lambda_dev * recs[k].kappa_lambda_dev;
  }
  for (const FlowRecord& r : recs) rep.kappa_p99_scaled = std::max(rep.kappa_p99_scaled, r.kappa_abs_p99 * sqrt_h);
  rep.perimeter_drop = recs.front().perimeter - recs.back().perimeter;
  if (rep.perimeter_drop > 0.0) rep.dissipation_ratio = rep.dissipation / rep.perimeter_drop;

  // Step k contributes to the window holding (t_{k-1}, t_k].
  const double t_start = recs.front().t;
  std::size_t k = 1;
  for (double t1 = t_start; k < recs.size(); t1 += window) {
    const double t2 = t1 + window;
    AprioriWindow w{t1, t2};
    const std::size_t k_begin = k;
    for (; k < recs.size() && recs[k].t <= t2 + 1e-9 * trace.h; ++k) {
      w.dissipation += trace.h * recs[k].kappa_lambda_dev * recs[k].kappa_lambda_dev;
      w.lambda_energy += trace.h * recs[k].lambda * recs[k].lambda;
    }
    if (k == k_begin) continue;
    w.t2 = recs[k - 1].t;
    w.perimeter_drop = recs[k_begin - 1].perimeter - recs[k - 1].perimeter;
    w.dissipation_ratio = w.perimeter_drop > 0.0 ? w.dissipation / w.perimeter_drop : std::numeric_limits<double>::quiet_NaN();
    w.lambda_energy /= (w.t2 - w.t1 + 1.0);
    rep.windows.push_back(w);
  }
  return rep;
}

}  // namespace flatflow
