#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>
#include <sstream>

#include "test_util.hpp"
#include "torsion/error.hpp"
#include "torsion/io.hpp"
#include "torsion/mesh.hpp"

using namespace torsion;
using testutil::disc256;
using testutil::unit_square;

namespace {

constexpr double kTwentyDeg = 20.0 * oracle::pi / 180.0;

std::size_t edge_count(const TriMesh& m) {
  std::set<std::pair<int, int>> e;
  for (const auto& t : m.triangles)
    for (int k = 0; k < 3; ++k) e.insert(std::minmax(t[k], t[(k + 1) % 3]));
  return e.size();
}

double area_sum(const TriMesh& m) {
  double a = 0.0;
  for (std::size_t t = 0; t < m.triangle_count(); ++t) a += m.triangle_area(t);
  return a;
}

}  // namespace

TEST(Triangulate, UniformSquareContract) {
  const TriMesh m = triangulate(unit_square(), 0.1, 0.0);
  const MeshQuality q = quality(m);
  EXPECT_LE(q.max_element_diameter, 0.15);
  EXPECT_GE(q.min_angle, kTwentyDeg * (1.0 - 1e-9));
  EXPECT_EQ(validate_mesh(m), "");
}

TEST(Triangulate, FinerTargetGivesMoreNodes) {
  EXPECT_GT(triangulate(unit_square(), 0.05, 0.5).node_count(), triangulate(unit_square(), 0.1, 0.5).node_count());
}

TEST(Triangulate, GradedBoundarySpacing) {
  const TriMesh m = triangulate(disc256(), 0.05, 0.5);
  for (const BoundaryEdge& e : m.boundary_edges) EXPECT_LE(distance(m.nodes[e.a], m.nodes[e.b]), 0.0375 + 1e-12);
}

TEST(Triangulate, RejectsBadParameters) {
  EXPECT_THROW(triangulate(unit_square(), 0.0, 0.5), InvalidInput);
  EXPECT_THROW(triangulate(unit_square(), 2.0, 0.5), InvalidInput);
  EXPECT_THROW(triangulate(unit_square(), 0.1, 1.5), InvalidInput);
  const ConvexPolygon sliver({{0, 0}, {1, 0}, {1, 1e-12}});
  EXPECT_THROW(triangulate(sliver, 0.1, 0.5), InvalidInput);
}

TEST(Triangulate, Deterministic) {
  const TriMesh a = triangulate(disc256(), 0.08, 0.5);
  const TriMesh b = triangulate(disc256(), 0.08, 0.5);
  ASSERT_EQ(a.node_count(), b.node_count());
  ASSERT_EQ(a.triangles, b.triangles);
  for (std::size_t i = 0; i < a.node_count(); ++i) ASSERT_EQ(a.nodes[i], b.nodes[i]);
}

TEST(Triangulate, SizeGrowsSlowlyAwayFromBoundary) {
  const TriMesh m = triangulate(disc256(), 0.05, 1.0);
  // neighbouring triangles differ in size by at most a factor of two
  std::map<std::pair<int, int>, std::vector<int>> by_edge;
  for (int t = 0; t < static_cast<int>(m.triangle_count()); ++t)
    for (int k = 0; k < 3; ++k) by_edge[std::minmax(m.triangles[t][k], m.triangles[t][(k + 1) % 3])].push_back(t);
  auto longest = [&](int t) {
    double l = 0.0;
    for (int k = 0; k < 3; ++k) l = std::max(l, distance(m.nodes[m.triangles[t][k]], m.nodes[m.triangles[t][(k + 1) % 3]]));
    return l;
  };
  double worst = 1.0;
  for (const auto& [e, ts] : by_edge)
    if (ts.size() == 2) worst = std::max({worst, longest(ts[0]) / longest(ts[1]), longest(ts[1]) / longest(ts[0])});
  EXPECT_LE(worst, 2.0);
}

TEST(Refine, SplitsEveryTriangleInFour) {
  const TriMesh m = triangulate(unit_square(), 0.2, 0.5);
  const TriMesh r = refine(m);
  EXPECT_EQ(r.triangle_count(), 4 * m.triangle_count());
  for (std::size_t i = 0; i < m.node_count(); ++i) EXPECT_EQ(r.nodes[i], m.nodes[i]);
  EXPECT_DOUBLE_EQ(r.h_target, 0.5 * m.h_target);
  EXPECT_EQ(validate_mesh(r), "");
}

TEST(Refine, TwiceQuartersElementSize) {
  const TriMesh m = triangulate(unit_square(), 0.2, 0.0);
  EXPECT_LE(quality(refine(refine(m))).max_element_diameter, quality(m).max_element_diameter / 4.0 + 1e-12);
}

TEST(Refine, BoundaryMidpointsStayOnPolygon) {
  const TriMesh r = refine(triangulate(disc256(), 0.2, 0.5));
  EXPECT_EQ(validate_mesh(r), "");
  EXPECT_NEAR(area_sum(r), oracle::ngon_area(256), 1e-10 * oracle::ngon_area(256));
}

TEST(Quality, TwoTriangleSquare) {
  TriMesh m;
  m.nodes = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  m.triangles = {{0, 1, 2}, {0, 2, 3}};
  m.boundary_nodes = {0, 1, 2, 3};
  m.boundary_edges = {{0, 1, 0}, {1, 2, 1}, {2, 3, 2}, {3, 0, 3}};
  m.polygon = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  m.h_target = 1.5;
  EXPECT_NEAR(quality(m).min_angle, oracle::pi / 4, 1e-15);
  EXPECT_NEAR(quality(refine(m)).min_angle, quality(m).min_angle, 1e-12);
  EXPECT_EQ(validate_mesh(m), "");
}

TEST(Mesh, EulerRelationAndArea) {
  for (const ConvexPolygon& p : {unit_square(), disc256(), rectangle(3, 1)}) {
    const TriMesh m = triangulate(p, 0.07 * measures(p).diameter, 0.5);
    const long v = static_cast<long>(m.node_count()), e = static_cast<long>(edge_count(m)),
               f = static_cast<long>(m.triangle_count());
    EXPECT_EQ(v - e + f, 1);
    const double a = measures(p).area;
    EXPECT_NEAR(area_sum(m), a, 1e-10 * a);
  }
}

TEST(Mesh, ScaleKeepsTopology) {
  const TriMesh m = triangulate(unit_square(), 0.1, 0.5);
  const TriMesh s = scale_mesh(m, 3.0);
  EXPECT_EQ(s.triangles, m.triangles);
  EXPECT_DOUBLE_EQ(s.h_target, 3.0 * m.h_target);
  for (std::size_t i = 0; i < m.node_count(); ++i) EXPECT_EQ(s.nodes[i], m.nodes[i] * 3.0);
}

TEST(Mesh, DumpRoundTrip) {
  const TriMesh m = triangulate(unit_square(), 0.2, 0.5);
  std::stringstream ss;
  write_mesh(ss, m);
  const TriMesh r = read_mesh(ss);
  EXPECT_EQ(r.triangles, m.triangles);
  ASSERT_EQ(r.node_count(), m.node_count());
  for (std::size_t i = 0; i < m.node_count(); ++i) EXPECT_EQ(r.nodes[i], m.nodes[i]);
}

TEST(TriangleLocator, FindsContainingTriangle) {
  const TriMesh m = triangulate(disc256(), 0.1, 0.5);
  const TriangleLocator loc(m);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.99, 0.99);
  for (int i = 0; i < 500; ++i) {
    const Vec2 p{u(rng), u(rng)};
    const auto hit = loc.locate(m, p);
    if (norm(p) < 0.99) {
      ASSERT_TRUE(hit.has_value());
      const auto& t = m.triangles[hit->triangle];
      const Vec2 q = m.nodes[t[0]] * hit->bary[0] + m.nodes[t[1]] * hit->bary[1] + m.nodes[t[2]] * hit->bary[2];
      EXPECT_NEAR(q.x, p.x, 1e-12);
      EXPECT_NEAR(q.y, p.y, 1e-12);
    }
  }
  EXPECT_FALSE(loc.locate(m, {1.5, 0.0}).has_value());
}

// Random convex shapes at several sizes: structural contract always holds.
TEST(MeshProperties, RandomShapes) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 25; ++trial) {
    const ConvexPolygon p = polygon_from_support(project_to_convex(testutil::random_support(rng, trial % 3 ? 64 : 128)));
    const double h = measures(p).diameter / (15.0 + 5.0 * (trial % 4));
    const TriMesh m = triangulate(p, h, 0.5 * (trial % 3));
    ASSERT_EQ(validate_mesh(m), "") << "trial " << trial;
    const MeshQuality q = quality(m);
    EXPECT_GE(q.min_angle, kTwentyDeg * (1.0 - 1e-9));
    EXPECT_LE(q.max_element_diameter, 1.5 * h);
    for (std::size_t t = 0; t < m.triangle_count(); ++t) EXPECT_GT(m.triangle_area(t), 0.0);
  }
}
