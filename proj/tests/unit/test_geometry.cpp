#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"
#include "torsion/error.hpp"
#include "torsion/geometry.hpp"

using namespace torsion;
using testutil::disc256;
using testutil::unit_square;

TEST(SupportVector, RejectsNonPositiveAndNonConvex) {
  EXPECT_THROW(SupportVector({1.0, 0.0, 1.0, 1.0}), InvalidInput);
  std::vector<double> h(64, 1.0);
  h[3] = 1.5;
  EXPECT_THROW(SupportVector{h}, InvalidInput);
  EXPECT_THROW(SupportVector({1.0, 1.0}), InvalidInput);
}

TEST(PolygonFromSupport, CircumscribedNgonArea) {
  const ConvexPolygon p = polygon_from_support(SupportVector(std::vector<double>(256, 1.0)));
  EXPECT_EQ(p.size(), 256u);
  EXPECT_NEAR(polygon_area(p.vertices()), oracle::ngon_area(256), 1e-12);
  EXPECT_NEAR(polygon_area(p.vertices()), 3.14175, 1e-5);
}

TEST(PolygonFromSupport, SquareFromFourAngles) {
  const ConvexPolygon p = polygon_from_support(SupportVector({0.5, 0.5, 0.5, 0.5}));
  ASSERT_EQ(p.size(), 4u);
  const Vec2 expect[4] = {{0.5, 0.5}, {-0.5, 0.5}, {-0.5, -0.5}, {0.5, -0.5}};
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(p[i].x, expect[i].x, 1e-15);
    EXPECT_NEAR(p[i].y, expect[i].y, 1e-15);
  }
}

TEST(PolygonFromSupport, Homogeneous) {
  const ConvexPolygon one = polygon_from_support(SupportVector(std::vector<double>(32, 1.0)));
  for (double r : {0.25, 3.0, 17.5}) {
    const ConvexPolygon p = polygon_from_support(SupportVector(std::vector<double>(32, r)));
    ASSERT_EQ(p.size(), one.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      EXPECT_NEAR(p[i].x, r * one[i].x, 1e-14 * r);
      EXPECT_NEAR(p[i].y, r * one[i].y, 1e-14 * r);
    }
  }
}

TEST(PolygonFromSupport, MergesConcurrentSupportLines) {
  // square support sampled at 8 angles: diagonal lines pass through corners
  std::vector<double> h(8);
  for (int i = 0; i < 8; ++i) {
    const double t = 2.0 * oracle::pi * i / 8;
    h[i] = 0.5 * (std::abs(std::cos(t)) + std::abs(std::sin(t)));
  }
  const ConvexPolygon p = polygon_from_support(SupportVector(h));
  EXPECT_EQ(p.size(), 4u);
  EXPECT_NEAR(polygon_area(p.vertices()), 1.0, 1e-12);
}

TEST(ProjectToConvex, ValidInputIsFixedPoint) {
  const std::vector<double> h(64, 1.0);
  const SupportVector sv = project_to_convex(h);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_EQ(sv[i], 1.0);
}

TEST(ProjectToConvex, LowersBump) {
  std::vector<double> h(64, 1.0);
  h[0] = 1.5;
  const SupportVector sv = project_to_convex(h);
  EXPECT_LT(sv[0], 1.5);
  EXPECT_LE(SupportVector::convexity_violation(sv.values()), 1e-12);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_LE(sv[i], h[i]);
}

TEST(ProjectToConvex, IdempotentBitwise) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> h(64);
    for (double& v : h) v = u(rng);
    const SupportVector a = project_to_convex(h);
    const SupportVector b = project_to_convex(std::vector<double>(a.values().begin(), a.values().end()));
    for (std::size_t i = 0; i < 64; ++i) ASSERT_EQ(a[i], b[i]);
  }
}

TEST(ProjectToConvex, RejectsShortOrNonPositive) {
  EXPECT_THROW(project_to_convex(std::vector<double>(4, 1.0)), InvalidInput);
  EXPECT_THROW(project_to_convex(std::vector<double>(16, -1.0)), InvalidInput);
}

TEST(Measures, UnitSquare) {
  const GeoMeasures g = measures(unit_square());
  EXPECT_NEAR(g.area, 1.0, 1e-15);
  EXPECT_NEAR(g.perimeter, 4.0, 1e-15);
  EXPECT_NEAR(g.diameter, std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(g.inradius, 0.5, 1e-12);
  EXPECT_NEAR(g.incenter.x, 0.5, 1e-12);
  EXPECT_NEAR(g.incenter.y, 0.5, 1e-12);
}

TEST(Measures, CircumscribedNgon) {
  const GeoMeasures g = measures(disc256());
  EXPECT_NEAR(g.area, oracle::ngon_area(256), 1e-12);
  EXPECT_NEAR(g.perimeter, oracle::ngon_perimeter(256), 1e-12);
  EXPECT_NEAR(g.perimeter, 6.28350, 1e-5);
  EXPECT_NEAR(g.inradius, 1.0, 1e-12);
}

TEST(Measures, ThreeByOneRectangle) {
  const GeoMeasures g = measures(rectangle(3.0, 1.0));
  EXPECT_NEAR(g.area, 3.0, 1e-14);
  EXPECT_NEAR(g.perimeter, 8.0, 1e-14);
  EXPECT_NEAR(g.diameter, std::sqrt(10.0), 1e-14);
  EXPECT_NEAR(g.inradius, 0.5, 1e-12);
}

TEST(Scale, Examples) {
  EXPECT_NEAR(measures(scale(unit_square(), 2.0)).area, 4.0, 1e-14);
  const ConvexPolygon p = unit_square();
  const ConvexPolygon q = scale(p, 1.0);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], q[i]);
  EXPECT_NEAR(measures(scale(disc256(), 0.5)).inradius, 0.5, 1e-12);
  EXPECT_THROW(scale(p, 0.0), InvalidInput);
}

TEST(Hausdorff, Examples) {
  EXPECT_EQ(hausdorff_distance(unit_square(), unit_square()), 0.0);
  EXPECT_NEAR(hausdorff_distance(rectangle(1, 1), rectangle(2, 2)), std::sqrt(2.0) / 2.0, 1e-14);
  EXPECT_NEAR(hausdorff_distance(unit_square(), translate(unit_square(), {0.3, 0.0})), 0.3, 1e-14);
}

TEST(DetectSegments, SquareSides) {
  const SegmentReport r = detect_segments(unit_square(), 0.01, 0.0);
  ASSERT_EQ(r.segments.size(), 4u);
  for (const Segment& s : r.segments) EXPECT_NEAR(s.length, 1.0, 1e-14);
  EXPECT_NEAR(r.longest_length, 1.0, 1e-14);
}

TEST(DetectSegments, RegularPolygonHasNone) {
  const SegmentReport r = detect_segments(disc256(), 0.01, 0.5);
  EXPECT_TRUE(r.segments.empty());
  EXPECT_FALSE(r.longest.has_value());
}

TEST(DetectSegments, StadiumFlatSides) {
  const ConvexPolygon p = polygon_from_support(SupportVector(testutil::stadium_h(512)));
  const SegmentReport r = detect_segments(p, 0.25 * 2.0 * oracle::pi / 512, 0.05 * measures(p).diameter);
  ASSERT_EQ(r.segments.size(), 2u);
  std::vector<double> dirs;
  for (const Segment& s : r.segments) {
    EXPECT_NEAR(s.length, 1.0, 0.01);
    dirs.push_back(s.direction);
  }
  std::sort(dirs.begin(), dirs.end());
  EXPECT_NEAR(dirs[0], 0.0, 1e-9);
  EXPECT_NEAR(dirs[1], oracle::pi, 1e-9);
}

TEST(DetectCorners, Examples) {
  const CornerReport sq = detect_corners(unit_square(), 0.1);
  ASSERT_EQ(sq.corners.size(), 4u);
  for (const Corner& c : sq.corners) EXPECT_NEAR(c.exterior_angle, oracle::pi / 2, 1e-14);

  const CornerReport ng = detect_corners(disc256(), 0.1);
  EXPECT_TRUE(ng.corners.empty());
  EXPECT_NEAR(ng.max_exterior_angle, 2.0 * oracle::pi / 256, 1e-10);

  const ConvexPolygon st = polygon_from_support(SupportVector(testutil::stadium_h(512)));
  EXPECT_TRUE(detect_corners(st, 0.1).corners.empty());
}

TEST(ConvexPolygon, RejectsClockwiseAndCollinear) {
  EXPECT_THROW(ConvexPolygon({{0, 0}, {0, 1}, {1, 0}}), InvalidInput);
  EXPECT_THROW(ConvexPolygon({{0, 0}, {0.5, 0}, {1, 0}, {0, 1}}), InvalidInput);
  EXPECT_NO_THROW(ConvexPolygon({{0, 0}, {0.5, 0}, {1, 0}, {0, 1}}, true));
  EXPECT_THROW(ConvexPolygon({{0, 0}, {1, 0}}), InvalidInput);
}

TEST(ConvexHull, DropsInteriorAndCollinear) {
  const auto h = convex_hull({{0, 0}, {1, 0}, {0.5, 0}, {1, 1}, {0, 1}, {0.5, 0.5}});
  EXPECT_EQ(h.size(), 4u);
}

// Randomized properties over support-generated shapes.
class GeometryProperties : public ::testing::Test {
 protected:
  std::mt19937_64 rng{2024};
  ConvexPolygon random_polygon(int n = 64) {
    return polygon_from_support(project_to_convex(testutil::random_support(rng, n)));
  }
};

TEST_F(GeometryProperties, ScaleLaw) {
  for (int trial = 0; trial < 40; ++trial) {
    const ConvexPolygon p = random_polygon();
    const GeoMeasures g = measures(p);
    for (double t : {0.3, 2.5}) {
      const GeoMeasures s = measures(scale(p, t));
      EXPECT_NEAR(s.area, t * t * g.area, 1e-12 * t * t * g.area);
      EXPECT_NEAR(s.perimeter, t * g.perimeter, 1e-12 * t * g.perimeter);
      EXPECT_NEAR(s.diameter, t * g.diameter, 1e-12 * t * g.diameter);
      EXPECT_NEAR(s.inradius, t * g.inradius, 1e-12 * t * g.inradius);
    }
  }
}

TEST_F(GeometryProperties, IsoperimetricChain) {
  for (int trial = 0; trial < 60; ++trial) {
    const GeoMeasures g = measures(random_polygon());
    EXPECT_GE(g.perimeter, 2.0 * g.diameter);
    EXPECT_LE(g.inradius, 2.0 * g.area / g.perimeter * (1.0 + 1e-12));
    EXPECT_GT(g.inradius, 0.0);
  }
}

TEST_F(GeometryProperties, HausdorffIsAMetric) {
  for (int trial = 0; trial < 30; ++trial) {
    const ConvexPolygon a = random_polygon(), b = random_polygon(), c = random_polygon();
    const double ab = hausdorff_distance(a, b), ba = hausdorff_distance(b, a);
    EXPECT_EQ(ab, ba);
    EXPECT_LE(hausdorff_distance(a, c), ab + hausdorff_distance(b, c) + 1e-12);
    EXPECT_EQ(hausdorff_distance(a, a), 0.0);
  }
}

TEST_F(GeometryProperties, ExteriorAnglesSumToTwoPi) {
  for (int trial = 0; trial < 60; ++trial) {
    const CornerReport r = detect_corners(random_polygon(trial % 2 ? 64 : 256), 0.1);
    EXPECT_NEAR(r.angle_sum, 2.0 * oracle::pi, 1e-9);
    for (const Corner& c : r.corners) {
      EXPECT_GE(c.exterior_angle, 0.0);
      EXPECT_LT(c.exterior_angle, oracle::pi);
    }
  }
}

TEST_F(GeometryProperties, ProjectedSupportGivesConvexPolygon) {
  std::uniform_real_distribution<double> u(0.2, 2.0);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<double> h(32);
    for (double& v : h) v = u(rng);
    const SupportVector sv = project_to_convex(h);
    EXPECT_LE(SupportVector::convexity_violation(sv.values()), SupportVector::convexity_tolerance(sv.values()));
    EXPECT_NO_THROW(polygon_from_support(sv));
  }
}

TEST_F(GeometryProperties, SampledSupportReproducesPolygon) {
  for (int trial = 0; trial < 20; ++trial) {
    const ConvexPolygon p = random_polygon(64);
    const std::vector<double> h = sample_support(p, 64);
    const ConvexPolygon q = polygon_from_support(SupportVector(h));
    EXPECT_LT(hausdorff_distance(p, q), 1e-10);
  }
}
