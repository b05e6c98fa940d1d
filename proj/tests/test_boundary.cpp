#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "flatflow/boundary.hpp"

using namespace flatflow;

namespace {

constexpr double kPi = std::numbers::pi;

Contour polygon(int n, auto&& radius, Vec2 c = {}) {
  std::vector<Vec2> v;
  for (int k = 0; k < n; ++k) {
    const double th = 2 * kPi * k / n;
    v.push_back(c + radius(th) * Vec2{std::cos(th), std::sin(th)});
  }
  return Contour(std::move(v));
}

Contour sole_contour(const GridField& f) {
  const auto loops = extract_contours(f, 0.0);
  EXPECT_EQ(loops.size(), 1u);
  return loops.front();
}

// Length-weighted rms of kappa - 1/R on a gridded circle.
double rms_curvature_error(int n, double R) {
  const Grid g = Grid::square(n, -2, 2);
  const Contour c = sole_contour(GridField::sample(g, [&](Vec2 p) { return norm(p - Vec2{0.013, -0.021}) - R; }));
  const CurvatureProfile prof = curvature_profile(c, g.spacing);
  const auto& w = c.arclength_weights();
  double acc = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) acc += w[k] * std::pow(prof.kappa[k] - 1.0 / R, 2);
  return std::sqrt(acc / c.length());
}

}  // namespace

TEST(ExtractContours, DiskAreaAndOrientation) {
  const Grid g = Grid::square(128, -2, 2);
  const auto loops = extract_contours(GridField::sample(g, [](Vec2 p) { return norm(p) - 0.7; }), 0.0);
  ASSERT_EQ(loops.size(), 1u);
  EXPECT_GT(loops[0].signed_area(), 0.0);
  EXPECT_NEAR(loops[0].signed_area(), kPi * 0.49, 0.005 * kPi * 0.49);
  double wsum = 0.0;
  for (double w : loops[0].arclength_weights()) wsum += w;
  EXPECT_NEAR(wsum, loops[0].length(), 1e-12);
}

TEST(ExtractContours, ConstantFieldHasNoContour) {
  const Grid g = Grid::square(32, -1, 1);
  EXPECT_TRUE(extract_contours(GridField(g, 1.0), 0.0).empty());
}

TEST(ExtractContours, SaddleLeavesTheDomain) {
  const Grid g = Grid::square(32, -1, 1);
  try {
    extract_contours(GridField::sample(g, [](Vec2 p) { return p.x * p.y; }), 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BoundaryClipped);
  }
}

TEST(ExtractContours, HoleIsClockwise) {
  const Grid g = Grid::square(128, -2, 2);
  const auto loops = extract_contours(GridField::sample(g, [](Vec2 p) { return std::abs(norm(p) - 1.0) - 0.4; }), 0.0);
  ASSERT_EQ(loops.size(), 2u);
  int ccw = 0, cw = 0;
  for (const Contour& c : loops) (c.signed_area() > 0 ? ccw : cw) += 1;
  EXPECT_EQ(ccw, 1);
  EXPECT_EQ(cw, 1);
  double area = 0.0;
  for (const Contour& c : loops) area += c.signed_area();
  EXPECT_NEAR(area, kPi * (1.4 * 1.4 - 0.6 * 0.6), 0.01 * kPi * (1.4 * 1.4 - 0.6 * 0.6));
}

TEST(Curvature, CircleOf256Vertices) {
  const double R = 0.8;
  const Contour c = polygon(256, [&](double) { return R; }, {0.2, -0.3});
  const CurvatureProfile p = curvature_profile(c, 2 * kPi * R / 256);
  for (double k : p.kappa) EXPECT_NEAR(k, 1.25, 0.0125);
  EXPECT_LE(p.l2_deviation, 0.01);
  EXPECT_NEAR(p.integral, 2 * kPi, 0.01 * 2 * kPi);
  EXPECT_NEAR(p.mean, 2 * kPi / p.length, 0.02 * 2 * kPi / p.length);
}

TEST(Curvature, ReversedCircleHasNegativeCurvature) {
  std::vector<Vec2> v;
  for (int k = 0; k < 128; ++k) v.push_back(Vec2{std::cos(-2 * kPi * k / 128), std::sin(-2 * kPi * k / 128)});
  const CurvatureProfile p = curvature_profile(Contour(std::move(v)), 2 * kPi / 128);
  EXPECT_NEAR(p.integral, -2 * kPi, 0.01 * 2 * kPi);
}

TEST(Curvature, TooFewVertices) {
  const Contour c = polygon(12, [](double) { return 1.0; });
  try {
    curvature_profile(c, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooFewVertices);
  }
}

TEST(Curvature, EllipseCurvatureRatio) {
  const Grid g = Grid::square(512, -2, 2);
  const double a = std::sqrt(2.0), b = 1.0 / std::sqrt(2.0);
  const Contour c = sole_contour(GridField::sample(g, [&](Vec2 p) { return std::hypot(p.x / a, p.y / b) - 1.0; }));
  const CurvatureProfile p = curvature_profile(c, g.spacing);
  const auto [lo, hi] = std::minmax_element(p.kappa.begin(), p.kappa.end());
  EXPECT_NEAR(*hi / *lo, std::pow(a / b, 3), 0.05 * std::pow(a / b, 3));
  EXPECT_NEAR(*hi, a / (b * b), 0.05 * a / (b * b));
  EXPECT_NEAR(*lo, b / (a * a), 0.05 * b / (a * a));
}

TEST(Curvature, GaussBonnetOnSmoothShapes) {
  const Grid g = Grid::square(256, -2, 2);
  for (auto f : {+[](Vec2 p) { return std::hypot(p.x / 1.5, p.y / 0.6) - 1.0; },
                 +[](Vec2 p) { return norm(p) - (1.0 + 0.25 * std::cos(5 * std::atan2(p.y, p.x))); },
                 +[](Vec2 p) { return std::pow(std::pow(std::abs(p.x), 4) + std::pow(std::abs(p.y), 4), 0.25) - 1.2; }}) {
    for (const Contour& c : extract_contours(GridField::sample(g, f), 0.0)) {
      const CurvatureProfile p = curvature_profile(c, g.spacing);
      EXPECT_NEAR(p.integral, 2 * kPi, 0.02 * 2 * kPi);
      EXPECT_NEAR(p.mean, 2 * kPi / c.length(), 0.02 * 2 * kPi / c.length());
    }
  }
}

TEST(Curvature, ErrorStaysBoundedUnderRefinement) {
  // The fit window scales with the spacing, so vertex noise of order
  // spacing^2 over a window of order spacing leaves an O(1) floor: the
  // relative error plateaus near 1% rather than converging.
  for (double R : {0.9, 0.6}) {
    std::string report;
    for (int n : {64, 128, 256}) {
      const double e = rms_curvature_error(n, R);
      report += std::to_string(e) + " ";
      EXPECT_LE(e, 0.015 / R) << n;
    }
    RecordProperty("kappa_rms_error_R" + std::to_string(R), report);
  }
}

TEST(HausdorffToDisk, RecoversCentredCircle) {
  const Grid g = Grid::square(128, -2, 2);
  const Contour c = sole_contour(GridField::sample(g, [](Vec2 p) { return norm(p - Vec2{0.3, -0.1}) - 0.9; }));
  const DiskFit fit = hausdorff_to_disk(c, kPi * 0.81);
  EXPECT_LE(norm(fit.center - Vec2{0.3, -0.1}), g.spacing);
  EXPECT_LE(fit.value, g.spacing);
}

TEST(HausdorffToDisk, EllipseOfAreaPi) {
  const double a = std::sqrt(2.0);
  const Contour c = polygon(2048, [&](double th) { return 1.0 / std::hypot(std::cos(th) / a, std::sin(th) * a); });
  const DiskFit fit = hausdorff_to_disk(c, kPi);
  EXPECT_NEAR(fit.value, a - 1.0, 0.02 * (a - 1.0));
}

TEST(HausdorffToDisk, RigidMotionInvariance) {
  const Grid g = Grid::square(256, -2, 2);
  auto shape = [](double angle, Vec2 shift) {
    return [=](Vec2 p) {
      const Vec2 q = p - shift;
      const double x = std::cos(angle) * q.x + std::sin(angle) * q.y;
      const double y = -std::sin(angle) * q.x + std::cos(angle) * q.y;
      return std::hypot(x / 1.2, y / 0.7) - 1.0;
    };
  };
  const Contour a = sole_contour(GridField::sample(g, shape(0.0, {0, 0})));
  const Contour b = sole_contour(GridField::sample(g, shape(0.7, {0.21, -0.33})));
  EXPECT_NEAR(hausdorff_to_disk(a, kPi * 1.2 * 0.7).value, hausdorff_to_disk(b, kPi * 1.2 * 0.7).value, 2 * g.spacing);
}

TEST(HausdorffToDisk, UnionOfTwoLoopsReflectsTheFartherOne) {
  const Contour near = polygon(256, [](double) { return 0.5; }, {-1, 0});
  const Contour far = polygon(256, [](double) { return 0.5; }, {1, 0});
  const std::vector<Contour> both{near, far};
  const DiskFit alone = hausdorff_to_disk(near, kPi * 0.25);
  const DiskFit joint = hausdorff_to_disk(both, kPi * 0.25);
  EXPECT_LE(alone.value, 1e-3);
  EXPECT_GT(joint.value, 0.9);
}

TEST(RadialGraph, CentredCircleIsFlat) {
  const Grid g = Grid::square(128, -2, 2);
  const Contour c = sole_contour(GridField::sample(g, [](Vec2 p) { return norm(p) - 1.0; }));
  const auto gr = radial_graph(c, {0, 0}, 1.0);
  ASSERT_EQ(gr.size(), 512u);
  for (double v : gr) EXPECT_NEAR(v, 0.0, g.spacing);
}

TEST(RadialGraph, RecoversFourierPerturbation) {
  const Grid g = Grid::square(256, -2, 2);
  const Contour c = sole_contour(GridField::sample(g, [](Vec2 p) { return norm(p) - (1.0 + 0.05 * std::cos(3 * std::atan2(p.y, p.x))); }));
  const auto gr = radial_graph(c, {0, 0}, 1.0);
  for (std::size_t m = 0; m < gr.size(); ++m)
    EXPECT_NEAR(gr[m], 0.05 * std::cos(3 * 2 * kPi * static_cast<double>(m) / 512), 2 * g.spacing);
}

TEST(RadialGraph, DumbbellIsNotStarShaped) {
  const Grid g = Grid::square(256, -2, 2);
  const GridField f = GridField::sample(g, [](Vec2 p) {
    const double lobes = std::min(norm(p - Vec2{-0.9, 0}), norm(p - Vec2{0.9, 0})) - 0.6;
    const double neck = std::max(std::abs(p.y) - 0.15, std::abs(p.x) - 0.9);
    return std::min(lobes, neck);
  });
  const Contour c = sole_contour(f);
  try {
    radial_graph(c, {-0.9, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotStarShaped);
  }
}
