// Acceptance run: twelve criteria, one PASS/FAIL line each. Exit status is
// the number of failing criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "flatflow/scenario.hpp"
#include "support/taut_string.hpp"

using namespace flatflow;

namespace {

constexpr double kPi = std::numbers::pi;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string format(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Exact distance to a set of polylines through a bucket grid. Rings are
// searched outward until the best distance found is shorter than the ring.
class PolylineDistance {
 public:
  PolylineDistance(const std::vector<Contour>& loops, double cell) : cell_(cell) {
    for (const Contour& c : loops)
      for (std::size_t k = 0; k < c.size(); ++k) {
        const Vec2 a = c[k], b = c[(k + 1) % c.size()];
        const std::size_t id = segs_.size();
        segs_.push_back({a, b});
        for (long i = key(std::min(a.x, b.x)); i <= key(std::max(a.x, b.x)); ++i)
          for (long j = key(std::min(a.y, b.y)); j <= key(std::max(a.y, b.y)); ++j) buckets_[pack(i, j)].push_back(id);
      }
  }

  double operator()(Vec2 p) const {
    const long ci = key(p.x), cj = key(p.y);
    double best = std::numeric_limits<double>::infinity();
    for (long ring = 0; ring < 1 << 20; ++ring) {
      for (long i = ci - ring; i <= ci + ring; ++i)
        for (long j = cj - ring; j <= cj + ring; ++j) {
          if (std::max(std::abs(i - ci), std::abs(j - cj)) != ring) continue;
          const auto it = buckets_.find(pack(i, j));
          if (it == buckets_.end()) continue;
          for (std::size_t id : it->second)
            best = std::min(best, norm(p - closest_on_segment(p, segs_[id].first, segs_[id].second)));
        }
      // Every segment not yet visited lies at least ring * cell away.
      if (best <= static_cast<double>(ring) * cell_) return best;
    }
    return best;
  }

 private:
  long key(double v) const { return static_cast<long>(std::floor(v / cell_)); }
  static long long pack(long i, long j) { return (static_cast<long long>(i) << 32) ^ (j & 0xffffffffLL); }

  double cell_;
  std::vector<std::pair<Vec2, Vec2>> segs_;
  std::unordered_map<long long, std::vector<std::size_t>> buckets_;
};

double one_sided(const std::vector<Contour>& from, const PolylineDistance& to) {
  double h = 0.0;
  for (const Contour& c : from)
    for (const Vec2& x : c.vertices()) h = std::max(h, to(x));
  return h;
}

// Shoelace centroid of the enclosed region.
Vec2 centroid(const std::vector<Contour>& loops) {
  double a = 0.0, cx = 0.0, cy = 0.0;
  for (const Contour& c : loops)
    for (std::size_t k = 0; k < c.size(); ++k) {
      const Vec2 p = c[k], q = c[(k + 1) % c.size()];
      const double cr = p.x * q.y - q.x * p.y;
      a += cr;
      cx += (p.x + q.x) * cr;
      cy += (p.y + q.y) * cr;
    }
  return {cx / (3.0 * a), cy / (3.0 * a)};
}

struct Run {
  std::string name;
  FlowTrace trace;
  double seconds = 0.0;
};

Run run(const std::string& name, int n, double h_over_s2, int steps, FlowMode mode, std::function<double(Vec2)> phi) {
  const Grid g = Grid::square(n, -2, 2);
  const Region e0(GridField::sample(g, phi));
  const double h = h_over_s2 * g.spacing * g.spacing;
  const auto t0 = std::chrono::steady_clock::now();
  Run r{name, run_flow(e0, h, steps, kPi, mode), 0.0};
  r.seconds = seconds_since(t0);
  std::fprintf(stderr, "[run] %-12s %4d^2  %5zu records  %.1f s\n", name.c_str(), n, r.trace.records.size(), r.seconds);
  return r;
}

double ellipse_level(Vec2 p) { return std::hypot(p.x / std::numbers::sqrt2, p.y * std::numbers::sqrt2) - 1.0; }

// Square of area pi; its corners saturate the a priori distance bound.
double square_level(Vec2 p) { return std::max(std::abs(p.x), std::abs(p.y)) - 0.5 * std::sqrt(kPi); }

struct Criterion {
  int id;
  const char* name;
  bool pass;
  std::string detail;
};

std::vector<Criterion> results;

void report(int id, const char* name, bool pass, const std::string& detail) {
  results.push_back({id, name, pass, detail});
  std::printf("%s  %2d  %-26s %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
}

}  // namespace

int main() {
  const Run disk = run("disk", 256, 4.0, 200, FlowMode::Constrained, [](Vec2 p) { return norm(p) - 1.0; });
  const Run shrink = run("shrink", 256, 4.0, 420, FlowMode::Unconstrained, [](Vec2 p) { return norm(p) - 1.0; });
  // 400 steps at h = 4 spacing^2 reach t = 1.56 on 128^2.
  const Run relax = run("ellipse128", 128, 4.0, 400, FlowMode::Constrained, ellipse_level);
  const Run ell = run("ellipse256", 256, 4.0, 400, FlowMode::Constrained, ellipse_level);
  // Same h / spacing^2 on the doubled grid, so h is quartered; same final time.
  const Run ell2 = run("ellipse512", 512, 4.0, 1600, FlowMode::Constrained, ellipse_level);
  const Run sq = run("square256", 256, 4.0, 16, FlowMode::Constrained, square_level);
  const Run sq2 = run("square512", 512, 4.0, 64, FlowMode::Constrained, square_level);
  const std::vector<const Run*> all{&disk, &shrink, &relax, &ell, &ell2, &sq, &sq2};

  // 1. Volume conservation on every constrained step.
  {
    double worst = 0.0;
    std::size_t steps = 0;
    for (const Run* r : all) {
      if (r->trace.mode != FlowMode::Constrained) continue;
      for (std::size_t k = 1; k < r->trace.records.size(); ++k, ++steps)
        worst = std::max(worst, std::abs(r->trace.records[k].area - kPi) / kPi);
    }
    report(1, "volume conservation", worst <= 1e-6, format("max |E_k - v|/v = %.2e over %zu steps (tol 1e-6)", worst, steps));
  }

  // 2. Stationary disk.
  {
    const FlowTrace& tr = disk.trace;
    const double s = tr.grid.spacing;
    const PolylineDistance to0(tr.boundaries.front(), 4 * s);
    double drift = 0.0, lam = 0.0;
    for (std::size_t k = 1; k < tr.records.size(); ++k) {
      const PolylineDistance tok(tr.boundaries[k], 4 * s);
      drift = std::max({drift, one_sided(tr.boundaries[k], to0), one_sided(tr.boundaries.front(), tok)});
      lam = std::max(lam, std::abs(tr.records[k].lambda - 1.0));
    }
    const bool ok = drift <= 2 * s && lam <= 0.05 && disk.seconds <= 300 && tr.records.size() == 201;
    report(2, "stationary disk", ok,
           format("drift %.3f spacing (tol 2), max|lambda-1| %.4f (tol 0.05), %.0f s (budget 300)", drift / s, lam,
                  disk.seconds));
  }

  // 3. Unconstrained circle against r_{k+1} = (r_k + sqrt(r_k^2 - 4h)) / 2.
  {
    const FlowTrace& tr = shrink.trace;
    const double s = tr.grid.spacing;
    double r = 1.0, worst = 0.0;
    std::size_t checked = 0;
    bool reached = false;
    for (std::size_t k = 1; k < tr.records.size(); ++k) {
      r = 0.5 * (r + std::sqrt(r * r - 4.0 * tr.h));
      if (r < 0.5) {
        reached = true;
        break;
      }
      worst = std::max(worst, std::abs(std::sqrt(tr.records[k].area / kPi) - r));
      ++checked;
    }
    const bool ok = reached && worst <= 2 * s && shrink.seconds <= 300;
    report(3, "shrinking circle", ok,
           format("max radius error %.3f spacing over %zu steps to r = 1/2 (tol 2), %.0f s (budget 300)", worst / s,
                  checked, shrink.seconds));
  }

  // 4. Ellipse relaxing to a disk.
  {
    const FlowTrace& tr = relax.trace;
    const auto& rec = tr.records;
    double worst_rise = -1.0;
    for (std::size_t k = 11; k < rec.size(); ++k)
      worst_rise = std::max(worst_rise, (rec[k].perimeter - rec[k - 1].perimeter) / rec[k - 1].perimeter);
    // Distance to the unit disk (area v = pi) about the region's centroid.
    const double R = 1.0;
    std::vector<double> xs, ys;
    const std::size_t K = rec.size() - 1, lo = K / 4, hi = 3 * K / 4;
    for (std::size_t k = lo; k <= hi; ++k) {
      const Vec2 c = centroid(tr.boundaries[k]);
      double d = 0.0;
      for (const Contour& loop : tr.boundaries[k])
        for (const Vec2& x : loop.vertices()) d = std::max(d, std::abs(norm(x - c) - R));
      xs.push_back(rec[k].t);
      ys.push_back(std::log(d));
    }
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i] / n;
      my += ys[i] / n;
    }
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxx += (xs[i] - mx) * (xs[i] - mx);
      sxy += (xs[i] - mx) * (ys[i] - my);
      syy += (ys[i] - my) * (ys[i] - my);
    }
    const double slope = sxy / sxx, r2 = sxy * sxy / (sxx * syy);
    const double kd0 = rec.front().kappa_dev, kd1 = rec.back().kappa_dev;
    const bool ok = worst_rise <= 1e-3 && slope < 0 && r2 >= 0.9 && kd1 <= 0.1 * kd0 && relax.seconds <= 600;
    report(4, "ellipse to disk", ok,
           format("max perimeter rise %.2e (tol 1e-3); log-hausdorff slope %.3f, R^2 %.4f (tol 0.9); "
                  "kappa dev %.4f -> %.4f (ratio %.4f, tol 0.1); %.0f s (budget 600)",
                  worst_rise, slope, r2, kd0, kd1, kd1 / kd0, relax.seconds));
  }

  // 5. Dissipation constant across resolutions.
  auto dissipation_constant = [](const FlowTrace& tr) {
    double d = 0.0;
    for (std::size_t k = 1; k < tr.records.size(); ++k) d += tr.h * tr.records[k].kappa_lambda_dev * tr.records[k].kappa_lambda_dev;
    return d / (tr.records.front().perimeter - tr.records.back().perimeter);
  };
  {
    const double c1 = dissipation_constant(ell.trace), c2 = dissipation_constant(ell2.trace);
    const double change = std::abs(c2 / c1 - 1.0);
    const double secs = ell.seconds + ell2.seconds;
    const bool ok = std::isfinite(c1) && std::isfinite(c2) && change <= 0.2 && secs <= 1800;
    report(5, "dissipation", ok,
           format("C = %.4f (256^2) vs %.4f (512^2), change %.1f%% (tol 20%%), %.0f s (budget 1800)", c1, c2,
                  100 * change, secs));
  }

  // 6. A priori distance bound under h -> h/4 at fixed h / spacing^2.
  auto apriori_max = [](const FlowTrace& tr) {
    double m = 0.0;
    for (std::size_t k = 1; k < tr.boundaries.size(); ++k) {
      const PolylineDistance prev(tr.boundaries[k - 1], 4 * tr.grid.spacing);
      m = std::max(m, one_sided(tr.boundaries[k], prev));
    }
    return m / std::sqrt(tr.h);
  };
  {
    // Smooth data moves by O(h) per step, so there |d|/sqrt(h) = O(sqrt(h))
    // and halves under h -> h/4; the ellipse pair is reported for reference.
    // The bound is sharp on the corner layer of the square, which is tested.
    const double m1 = apriori_max(sq.trace), m2 = apriori_max(sq2.trace);
    const double e1 = apriori_max(ell.trace), e2 = apriori_max(ell2.trace);
    double lib = 0.0;
    for (const FlowRecord& r : sq2.trace.records) lib = std::max(lib, r.max_step_distance / std::sqrt(sq2.trace.h));
    const double change = std::abs(m2 / m1 - 1.0);
    const double secs = sq.seconds + sq2.seconds;
    const bool ok = std::isfinite(m1) && std::isfinite(m2) && change <= 0.3 && secs <= 1800;
    report(6, "a priori distance", ok,
           format("square: max |d|/sqrt(h) = %.4f (h) vs %.4f (h/4; interpolated %.4f), change %.1f%% (tol 30%%), %.0f s; "
                  "smooth ellipse for reference: %.4f vs %.4f",
                  m1, m2, lib, 100 * change, secs, e1, e2));
  }

  // 7. Gauss-Bonnet on every contour of every run.
  {
    double worst = 0.0;
    std::size_t n = 0, bad = 0;
    std::string where;
    for (const Run* r : all) {
      double run_worst = 0.0;
      int at = 0;
      for (const FlowRecord& rec : r->trace.records) {
        if (rec.gauss_bonnet_error > run_worst) run_worst = rec.gauss_bonnet_error, at = rec.step;
        if (rec.gauss_bonnet_error > 0.02) ++bad;
        ++n;
      }
      worst = std::max(worst, run_worst);
      where += format("; %s %.4f at step %d", r->name.c_str(), run_worst, at);
    }
    report(7, "gauss-bonnet", worst <= 0.02,
           format("max |int kappa - 2 pi|/(2 pi) = %.4f over %zu steps, %zu above tol 0.02%s", worst, n, bad, where.c_str()));
  }

  // 8. Proximal solver: duality gaps of every step, taut-string agreement.
  {
    double worst_gap = 0.0;
    std::size_t steps = 0;
    for (const Run* r : all)
      for (std::size_t k = 1; k < r->trace.records.size(); ++k, ++steps) {
        const FlowRecord& rec = r->trace.records[k];
        worst_gap = std::max(worst_gap, rec.solver_gap / (1.0 + std::abs(rec.solver_energy)));
      }
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(2024);
    const Grid g(96, 8, 1.0 / 32, {0.0, 0.0});
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const auto f = oracle::random_profile(rng, g.nx);
      const double lambda = 0.05 + 0.05 * (trial % 5);
      const RofSolution s = rof_solve({oracle::extrude(g, f), lambda * g.spacing}, 1e-13, 400000);
      const auto ref = oracle::taut_string(f, lambda);
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) worst = std::max(worst, std::abs(s.w(i, j) - ref[static_cast<std::size_t>(i)]));
    }
    const double secs = seconds_since(t0);
    const bool ok = worst_gap <= 1e-6 && worst <= 1e-4 && secs <= 120;
    report(8, "proximal solver", ok,
           format("max gap/(1+E) = %.2e over %zu steps (tol 1e-6); taut-string error %.2e (tol 1e-4), %.0f s", worst_gap,
                  steps, worst, secs));
  }

  // 9. Maximal-density sets.
  {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0, worst_incl = 0.0;
    int trials = 0;
    while (trials < 1000) {
      const int n = 1 + static_cast<int>(rng() % 8);
      const double target = std::exp(std::log(1e-4) + u(rng) * (std::log(0.9) - std::log(1e-4)));
      std::vector<double> w(static_cast<std::size_t>(n));
      double tot = 0.0;
      for (double& x : w) tot += (x = u(rng) + 1e-3);
      std::vector<IntervalSet::Interval> parts;
      double pos = 0.0;
      for (int i = 0; i < n; ++i) {
        pos += 2.0 * u(rng);
        const double len = w[static_cast<std::size_t>(i)] / tot * target;
        parts.emplace_back(pos, pos + len);
        pos += len;
      }
      const IntervalSet gamma(std::move(parts));
      const double m = gamma.measure();
      if (!(m > 1e-4 && m < 0.9)) continue;
      ++trials;
      const IntervalSet sigma = maximal_density_set(gamma);
      worst = std::max(worst, sigma.measure() / std::sqrt(m));
      worst_incl = std::max(worst_incl, m - sigma.intersect(gamma).measure());
    }
    // Right of [0, s] the ratio is s / x at the best scale L = x, so the set is [0, sqrt(s)].
    double closed = 0.0;
    for (double s : {1e-4, 0.01, 0.09, 0.3, 0.5, 0.81}) {
      const IntervalSet sigma = maximal_density_set(IntervalSet::single(0.0, s));
      if (sigma.size() != 1) {
        closed = std::numeric_limits<double>::infinity();
        continue;
      }
      closed = std::max({closed, std::abs(sigma.intervals()[0].first), std::abs(sigma.intervals()[0].second - std::sqrt(s))});
    }
    const double secs = seconds_since(t0);
    const bool ok = worst <= 20.0 && worst_incl <= 1e-12 && closed <= 1e-12 && secs <= 60;
    report(9, "maximal density", ok,
           format("max |Sigma|/sqrt|Gamma| = %.3f over %d trials (tol 20); closed-form error %.1e; %.1f s", worst, trials,
                  closed, secs));
  }

  // 10. Contact-set measure ratio on synthetic supersolutions.
  {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0, worst_grad = 0.0, worst_touch = 0.0;
    int empty = 0, persistence = 0, regime = 0;
    std::size_t edge = 0;
    for (int t = 0; t < 50; ++t) {
      const SpaceTimeField<1> w = synthetic_supersolution(1000 + static_cast<std::uint64_t>(t));
      std::optional<AbpResult<1>> found;
      try {
        found.emplace(abp_ratio<1>(2.0, standard_center_box(), w, full_window(w), 4096));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::EmptyContactSet) throw;
        ++empty;
        continue;
      }
      const AbpResult<1>& res = *found;
      worst = std::max(worst, res.ratio);
      regime += res.in_regime ? 0 : 1;
      for (const auto& rec : res.contacts.records()) {
        const Point<1> x = w.base().point(rec.index);
        for (double f : {0.0, 0.25, 0.5, 0.75, 0.999})
          if (!res.contacts.contains(x, w.time(rec.k) + f * w.dt())) ++persistence;
        // The parabola lies below w on earlier slices and meets it here.
        const Parabola<1> p{rec.xi, rec.tau, rec.a};
        for (int k = w.k_first(); k < rec.k; ++k)
          for (std::size_t i = 0; i < w.base().size(); ++i)
            worst_touch = std::max(worst_touch, p(w.base().point(i), w.time(k)) - w.at(i, k));
        worst_touch = std::max(worst_touch, w.at(rec.index, rec.k) - p(x, w.time(rec.k)));
        const double gm = gradient_mismatch(w, rec);
        if (std::isnan(gm)) {
          ++edge;
          continue;
        }
        worst_grad = std::max(worst_grad, gm / (2.0 * w.base().dy * rec.a));
      }
    }
    const double secs = seconds_since(t0);
    const bool ok = worst <= 10.0 && persistence == 0 && worst_grad <= 1.0 && worst_touch <= 1e-12 && secs <= 300;
    report(10, "contact-set ratio", ok,
           format("max |G|/|A| = %.3f (tol 10), %d empty, %d outside regime; gradient mismatch %.3f of 2 dy a; "
                  "touching defect %.1e; %d persistence failures; %zu edge contacts; %.0f s",
                  worst, empty, regime, worst_grad, worst_touch, persistence, edge, secs));
  }

  // 11 and 12 share the late-time window of the relaxation run.
  {
    const auto t0 = std::chrono::steady_clock::now();
    const FlowTrace& tr = relax.trace;
    const double r = 8.0 * tr.grid.spacing, alpha = 0.1;
    const double tend = tr.records.back().t;
    const Vec2 c = centroid(tr.boundaries.back());
    double first = 0.0, ratio = 0.0, osc_secs = 0.0;
    bool monotone = true;
    double gamma_min = std::numeric_limits<double>::infinity();
    std::string osc_detail;
    for (int j = 0; j < 5; ++j) {
      const double th = 2.0 * kPi * j / 5.0;
      const Vec2 x0 = c + Vec2{std::cos(th), std::sin(th)};
      const auto levels = decay_probe(tr, x0, tend, r, 0.5, alpha, 2);
      first = std::max(first, levels.front().excess / std::pow(r, 2.0 + alpha));
      for (const DecayLevel& l : levels) ratio = std::max(ratio, l.excess_ratio);
      const auto t1 = std::chrono::steady_clock::now();
      const LambdaSeries lam = lambda_accumulate(tr, tend);
      const ExcessWindow win = make_window(tr, lam.k0, r);
      const RescaledPair v = rescale_v(win, levels.front().frame, r, kCylinderHeight * r, lam, alpha, kRescaledBase);
      const OscillationTrend trend = oscillation_trend(v);
      osc_secs += seconds_since(t1);
      monotone = monotone && trend.monotone;
      gamma_min = std::min(gamma_min, trend.gamma);
      osc_detail += format("%s%.3g/%.3g/%.3g", j ? " " : "", trend.osc[0], trend.osc[1], trend.osc[2]);
    }
    const double secs = seconds_since(t0) - osc_secs;
    report(11, "excess probe", first <= 1.0 && ratio <= 1.0 && secs <= 600,
           format("5 boundary points, r = 8 spacing: max excess/r^2.1 = %.4f, max ratio over two halvings %.4f (tol 1), %.0f s",
                  first, ratio, secs));
    report(12, "oscillation trend", monotone && gamma_min > 0.0 && osc_secs <= 300,
           format("osc at rho 1/2,1/4,1/8: %s; non-increasing %s; min fitted exponent %.3f (need > 0)", osc_detail.c_str(),
                  monotone ? "yes" : "no", gamma_min));
  }

  int failed = 0;
  for (const Criterion& c : results) failed += c.pass ? 0 : 1;
  std::printf("%zu criteria, %d failed\n", results.size(), failed);
  return failed;
}
