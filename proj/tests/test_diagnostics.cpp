#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "flatflow/diagnostics.hpp"

using namespace flatflow;

namespace {

IntervalSet random_union(std::mt19937_64& rng, double total_cap) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 1 + static_cast<int>(rng() % 8);
  std::vector<IntervalSet::Interval> parts;
  const double span = 0.5 + 4.0 * u(rng);
  for (int i = 0; i < n; ++i) {
    const double a = span * u(rng);
    parts.emplace_back(a, a + total_cap / n * u(rng));
  }
  return IntervalSet(std::move(parts));
}

// sup over L on a uniform scan of (0, 1).
double scanned_density(const IntervalSet& g, double x, int resolution) {
  double best = 0.0;
  for (int j = 1; j < resolution; ++j) {
    const double L = static_cast<double>(j) / resolution;
    best = std::max(best, g.measure_between(x - L, x) / L);
  }
  return best;
}

double scanned_lower_density(const IntervalSet& g, double x, int resolution) {
  double best = 1.0;
  for (int j = 1; j < resolution; ++j) {
    const double L = static_cast<double>(j) / resolution;
    best = std::min(best, g.measure_between(x - L, x) / L);
  }
  return best;
}

FlowTrace synthetic_trace(const std::vector<double>& kappa_dev, double h) {
  FlowTrace tr;
  tr.h = h;
  tr.grid = Grid::square(64, -2, 2);
  for (std::size_t k = 0; k < kappa_dev.size(); ++k) {
    FlowRecord r;
    r.step = static_cast<int>(k);
    r.t = static_cast<double>(k) * h;
    r.kappa_dev = kappa_dev[k];
    r.area = std::numbers::pi;
    r.perimeter = 2 * std::numbers::pi;
    tr.records.push_back(r);
  }
  return tr;
}

}  // namespace

TEST(IntervalSet, NormalisesAndMeasures) {
  const IntervalSet s({{3, 4}, {0, 1}, {0.5, 2}, {5, 5}, {4, 4.5}});
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.intervals()[0], (IntervalSet::Interval{0, 2}));
  EXPECT_EQ(s.intervals()[1], (IntervalSet::Interval{3, 4.5}));
  EXPECT_EQ(s.measure(), 3.5);
  EXPECT_TRUE(s.contains(2.0));
  EXPECT_FALSE(s.contains(2.5));
  EXPECT_EQ(s.measure_below(3.5), 2.5);
  EXPECT_EQ(s.measure_between(1, 4), 2.0);
  EXPECT_EQ(s.measure_between(4, 1), 0.0);
}

TEST(IntervalSet, InclusionExclusionOnDyadicEndpoints) {
  std::mt19937_64 rng(3);
  const double h = 1.0 / 64;
  for (int trial = 0; trial < 200; ++trial) {
    auto make = [&] {
      std::vector<IntervalSet::Interval> parts;
      for (int i = 0; i < 5; ++i) {
        const double a = h * static_cast<double>(rng() % 256);
        parts.emplace_back(a, a + h * static_cast<double>(1 + rng() % 20));
      }
      return IntervalSet(std::move(parts));
    };
    const IntervalSet a = make(), b = make();
    EXPECT_EQ(a.unite(b).measure() + a.intersect(b).measure(), a.measure() + b.measure());
    EXPECT_EQ(a.intersect(b), b.intersect(a));
    EXPECT_EQ(a.unite(b), b.unite(a));
  }
}

TEST(DensitySet, SingleIntervalClosedForm) {
  // Right of [0, s] the best scale is L = x, giving ratio s / x >= sqrt(s)
  // exactly for x <= sqrt(s); so Sigma = [0, sqrt(s)].
  for (double s : {0.01, 0.09, 0.25, 0.5}) {
    const IntervalSet sigma = maximal_density_set(IntervalSet::single(0, s));
    ASSERT_EQ(sigma.size(), 1u);
    EXPECT_NEAR(sigma.intervals()[0].first, 0.0, 1e-15);
    EXPECT_NEAR(sigma.intervals()[0].second, std::sqrt(s), 1e-12);
    EXPECT_LE(sigma.measure(), 3 * std::sqrt(s));
  }
}

TEST(DensitySet, AgreesWithBruteForceScan) {
  std::mt19937_64 rng(5);
  const int res = 10000;
  for (int trial = 0; trial < 6; ++trial) {
    const IntervalSet gamma = random_union(rng, 0.3);
    const double theta = std::sqrt(gamma.measure());
    const IntervalSet sigma = density_set(gamma, theta);
    const double lo = gamma.intervals().front().first - 0.1, hi = gamma.intervals().back().second + 1.1;
    int disagreements = 0, samples = 0;
    for (double x = lo; x <= hi; x += 1e-3, ++samples) {
      const double d = scanned_density(gamma, x, res);
      const bool exact = sigma.contains(x);
      // The scan underestimates the sup by at most one scale step. Points of
      // gamma sit in sigma through L -> 0, below the smallest scanned scale.
      if (d >= theta && !exact) ++disagreements;
      if (exact && !gamma.contains(x) && d < theta - 2e-3) ++disagreements;
    }
    EXPECT_EQ(disagreements, 0) << "trial " << trial << " of " << samples;
  }
}

TEST(DensitySet, LemmaEnvelopeOverRandomUnions) {
  std::mt19937_64 rng(1000);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const IntervalSet gamma = random_union(rng, 0.9);
    const double m = gamma.measure();
    if (!(m > 0.0 && m < 1.0)) continue;
    const IntervalSet sigma = maximal_density_set(gamma);
    worst = std::max(worst, sigma.measure() / std::sqrt(m));
    EXPECT_LE(sigma.measure(), 20 * std::sqrt(m));
    EXPECT_LE(gamma.measure() - sigma.intersect(gamma).measure(), 1e-12);
  }
  RecordProperty("worst_ratio", std::to_string(worst));
}

TEST(DensitySet, MeasureOutOfRange) {
  for (const IntervalSet& g : {IntervalSet{}, IntervalSet::single(0, 1.0), IntervalSet({{0, 0.6}, {2, 2.5}})}) {
    try {
      maximal_density_set(g);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::MeasureOutOfRange);
    }
  }
}

TEST(DensitySet, MonotoneInGammaAtFixedThreshold) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const IntervalSet g = random_union(rng, 0.4);
    const IntervalSet bigger = g.unite(random_union(rng, 0.3));
    for (double theta : {0.2, 0.5, 0.8}) {
      const IntervalSet a = density_set(g, theta), b = density_set(bigger, theta);
      EXPECT_LE(a.measure() - a.intersect(b).measure(), 1e-12);
    }
  }
}

TEST(GoodTimes, LowDeviationGivesEmptySets) {
  const FlowTrace tr = synthetic_trace(std::vector<double>(400, 0.01), 0.01);
  const GoodTimes g = good_times(tr, 0.0, 0.05);
  EXPECT_TRUE(g.gamma.empty());
  EXPECT_TRUE(g.sigma.empty());
  const GoodTimes huge = good_times(synthetic_trace(std::vector<double>(400, 5.0), 0.01), 0.0, 1e300);
  EXPECT_TRUE(huge.gamma.empty());
  EXPECT_TRUE(huge.sigma.empty());
}

TEST(GoodTimes, BadStepsFormGammaAndSigmaIsClipped) {
  std::vector<double> dev(400, 0.01);
  for (int k = 150; k < 160; ++k) dev[static_cast<std::size_t>(k)] = 0.2;
  const double h = 0.01;
  const FlowTrace tr = synthetic_trace(dev, h);
  const GoodTimes g = good_times(tr, 0.5, 0.05);
  ASSERT_EQ(g.gamma.size(), 1u);
  EXPECT_NEAR(g.gamma.intervals()[0].first, 1.5, 1e-12);
  EXPECT_NEAR(g.gamma.intervals()[0].second, 1.6, 1e-12);
  EXPECT_NEAR(trace_end(tr), 4.0, 1e-12);
  // Unclipped this would be [1.5, 1.5 + sqrt(0.1)]; Sigma starts at T + 1.
  ASSERT_EQ(g.sigma.size(), 1u);
  EXPECT_NEAR(g.sigma.intervals()[0].first, 1.5, 1e-12);
  EXPECT_NEAR(g.sigma.intervals()[0].second, 1.5 + std::sqrt(0.1), 1e-9);
  // From T = 1 the density set ends before T + 1.
  EXPECT_TRUE(good_times(tr, 1.0, 0.05).sigma.empty());
}

TEST(LowerDensity, AgreesWithScan) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const IntervalSet good = random_union(rng, 2.0);
    const double t0 = good.intervals().back().second * std::uniform_real_distribution<double>(0.2, 1.2)(rng);
    const double exact = lower_density(good, t0);
    const double scan = scanned_lower_density(good, t0, 20000);
    EXPECT_LE(exact, scan + 1e-12);
    EXPECT_GE(exact, scan - 1e-3);
  }
}

TEST(PlanarCondition, DiskPassesAndTwoDisksFail) {
  std::vector<double> dev(300, 0.01);
  FlowTrace tr = synthetic_trace(dev, 0.01);
  const PlanarCondition ok = planar_condition(tr, 2.5, 0.05, 0.1);
  EXPECT_TRUE(ok.perimeter_ok);
  EXPECT_TRUE(ok.density_ok);
  EXPECT_NEAR(ok.radius, 1.0, 1e-12);
  EXPECT_NEAR(ok.density, 1.0, 1e-12);
  // Two disks of half the area each carry perimeter 2 sqrt(2) pi r.
  for (FlowRecord& r : tr.records) r.perimeter = 2 * std::sqrt(2.0) * std::numbers::pi;
  EXPECT_FALSE(planar_condition(tr, 2.5, 0.05, 0.1).perimeter_ok);
  // A bad stretch right before t0 spoils the density.
  for (int k = 240; k < 250; ++k) tr.records[static_cast<std::size_t>(k)].kappa_dev = 1.0;
  EXPECT_FALSE(planar_condition(tr, 2.5, 0.05, 0.1).density_ok);
}

TEST(SegmentIndex, MatchesBruteForceDistance) {
  const Grid g = Grid::square(128, -2, 2);
  const Region r(GridField::sample(g, [](Vec2 p) { return norm(p) - (1.0 + 0.3 * std::cos(5 * std::atan2(p.y, p.x))); }));
  const SegmentIndex idx(r.contours(), 2 * g.spacing);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-2.5, 2.5);
  for (int i = 0; i < 500; ++i) {
    const Vec2 p{u(rng), u(rng)};
    double best = std::numeric_limits<double>::infinity();
    for (const Contour& c : r.contours())
      for (std::size_t k = 0; k < c.size(); ++k)
        best = std::min(best, norm(p - closest_on_segment(p, c[k], c[(k + 1) % c.size()])));
    EXPECT_NEAR(idx.distance(p), best, 1e-14);
  }
}

TEST(Apriori, SingleStepTraceIsFlagged) {
  const FlowTrace tr = synthetic_trace({0.0}, 0.01);
  const AprioriReport rep = apriori_report(tr);
  EXPECT_TRUE(rep.single_step);
  EXPECT_TRUE(rep.windows.empty());
  EXPECT_TRUE(rep.step_distance_ratio.empty());
}

TEST(Apriori, StationaryDiskBarelyMoves) {
  const Grid g = Grid::square(64, -2, 2);
  const Region E(GridField::sample(g, [](Vec2 p) { return norm(p) - 1.0; }));
  const double h = min_time_step(g);
  const FlowTrace tr = run_flow(E, h, 12, std::numbers::pi, FlowMode::Constrained);
  const AprioriReport rep = apriori_report(tr, 0.01);
  EXPECT_LE(rep.max_distance_ratio, g.spacing / std::sqrt(h));
  EXPECT_LE(std::abs(rep.perimeter_drop), 1e-2 * tr.records.front().perimeter);
  EXPECT_LE(rep.dissipation, 1e-2);
  ASSERT_FALSE(rep.windows.empty());
  for (const AprioriWindow& w : rep.windows) EXPECT_GT(w.lambda_energy, 0.0);
}
