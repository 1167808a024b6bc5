#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace torsion {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  constexpr Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr bool operator==(const Vec2&) const = default;
};

constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }
constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::sqrt(a.x * a.x + a.y * a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }
inline Vec2 unit_direction(double theta) { return {std::cos(theta), std::sin(theta)}; }
/// Twice the signed area of triangle (a, b, c); positive when counterclockwise.
constexpr double orient(Vec2 a, Vec2 b, Vec2 c) { return cross(b - a, c - a); }

/// Support values h_i of a convex body sampled at the uniform angles
/// theta_i = 2*pi*i/n. Construction validates positivity and the discrete
/// convexity inequality h_{i-1} + h_{i+1} >= 2 h_i cos(2*pi/n).
class SupportVector {
 public:
  explicit SupportVector(std::vector<double> h);

  std::size_t size() const { return h_.size(); }
  double operator[](std::size_t i) const { return h_[i]; }
  std::span<const double> values() const { return h_; }
  double angle(std::size_t i) const {
    return 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(h_.size());
  }
  /// Largest violation of the convexity inequality (0 when valid).
  static double convexity_violation(std::span<const double> h);
  /// Tolerance used to accept the convexity inequality: 1e-12 * max|h|.
  static double convexity_tolerance(std::span<const double> h);

 private:
  std::vector<double> h_;
};

/// Counterclockwise convex polygon. Consecutive edges turn left; collinear
/// vertices are only accepted when keep_collinear is set.
class ConvexPolygon {
 public:
  explicit ConvexPolygon(std::vector<Vec2> vertices, bool keep_collinear = false);

  std::size_t size() const { return v_.size(); }
  const Vec2& operator[](std::size_t i) const { return v_[i]; }
  std::span<const Vec2> vertices() const { return v_; }
  Vec2 edge(std::size_t i) const { return v_[(i + 1) % v_.size()] - v_[i]; }
  /// Outward unit normal of edge i (from vertex i to vertex i+1).
  Vec2 outward_normal(std::size_t i) const;
  bool keeps_collinear() const { return keep_collinear_; }

  bool contains(Vec2 p, double tol = 0.0) const;
  /// Distance from an interior point to the boundary (min over edge lines).
  /// Negative outside.
  double signed_distance_inside(Vec2 p) const;
  /// Euclidean distance from any point to the closed polygon (0 inside).
  double distance_to_set(Vec2 p) const;
  double support(Vec2 direction) const;

 private:
  std::vector<Vec2> v_;
  bool keep_collinear_ = false;
};

struct GeoMeasures {
  double area = 0.0;
  double perimeter = 0.0;
  double diameter = 0.0;
  double inradius = 0.0;
  Vec2 incenter;
};

struct Segment {
  std::size_t start = 0;  ///< vertex index where the flat run starts
  std::size_t end = 0;    ///< vertex index where it ends (cyclic)
  double length = 0.0;    ///< chord length start -> end
  double direction = 0.0; ///< angle of the chord in [0, 2*pi)
};

struct SegmentReport {
  std::vector<Segment> segments;
  double longest_length = 0.0;
  std::optional<std::size_t> longest;  ///< index into segments
};

struct Corner {
  std::size_t vertex = 0;
  double exterior_angle = 0.0;
};

struct CornerReport {
  std::vector<Corner> corners;  ///< sorted by exterior angle, descending
  double max_exterior_angle = 0.0;
  double angle_sum = 0.0;       ///< sum over all vertices; 2*pi for a closed curve
};

ConvexPolygon polygon_from_support(const SupportVector& sv);
SupportVector project_to_convex(std::span<const double> h_raw);
/// Support values of a polygon at n uniform angles.
std::vector<double> sample_support(const ConvexPolygon& p, std::size_t n);

GeoMeasures measures(const ConvexPolygon& p);
double polygon_area(std::span<const Vec2> ring);
double polygon_perimeter(std::span<const Vec2> ring);
ConvexPolygon scale(const ConvexPolygon& p, double t);
ConvexPolygon translate(const ConvexPolygon& p, Vec2 offset);
double hausdorff_distance(const ConvexPolygon& p, const ConvexPolygon& q);

/// Exterior (turning) angle at every vertex, in [0, pi).
std::vector<double> exterior_angles(const ConvexPolygon& p);
SegmentReport detect_segments(const ConvexPolygon& p, double turn_tol, double min_len);
CornerReport detect_corners(const ConvexPolygon& p, double angle_tol);

/// Convex hull of an arbitrary point set, counterclockwise, collinear points dropped.
std::vector<Vec2> convex_hull(std::vector<Vec2> pts);

/// Circumscribed regular n-gon with inradius r (support h = r at n angles).
ConvexPolygon regular_polygon(std::size_t n, double r = 1.0);
ConvexPolygon rectangle(double width, double height, Vec2 center = {});

}  // namespace torsion
