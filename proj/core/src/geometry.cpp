#include "torsion/geometry.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "torsion/error.hpp"

namespace torsion {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double max_abs(std::span<const double> h) {
  double m = 0.0;
  for (double v : h) m = std::max(m, std::abs(v));
  return m;
}

double extent_squared(std::span<const Vec2> v) {
  double s = 0.0;
  for (const Vec2& p : v) s = std::max(s, dot(p, p));
  return std::max(s, std::numeric_limits<double>::min());
}

// Largest inscribed disc of a convex polygon as the linear program
//   maximize r  subject to  n_k . c + r <= b_k  for every edge k,
// solved with a compact (Tucker) simplex tableau and Bland's rule. The origin
// is shifted to the vertex centroid so that c = 0, r = 0 is a feasible basis.
struct InscribedDisc {
  Vec2 center;
  double radius = 0.0;
};

InscribedDisc largest_inscribed_disc(const ConvexPolygon& p) {
  const std::size_t m = p.size();
  constexpr std::size_t nv = 5;  // c+x, c+y, c-x, c-y, r
  Vec2 c0;
  for (const Vec2& v : p.vertices()) c0 += v;
  c0 = c0 / static_cast<double>(m);

  std::vector<double> a(m * nv), rhs(m);
  std::vector<int> row_var(m), col_var(nv);
  std::vector<double> obj(nv, 0.0);
  obj[4] = 1.0;
  double z0 = 0.0;
  for (std::size_t j = 0; j < nv; ++j) col_var[j] = static_cast<int>(j);
  for (std::size_t k = 0; k < m; ++k) {
    const Vec2 n = p.outward_normal(k);
    rhs[k] = dot(n, p[k] - c0);
    double* row = &a[k * nv];
    row[0] = n.x;
    row[1] = n.y;
    row[2] = -n.x;
    row[3] = -n.y;
    row[4] = 1.0;
    row_var[k] = static_cast<int>(nv + k);
  }

  const double eps = 1e-13;
  for (std::size_t iter = 0; iter < 50 * (m + nv); ++iter) {
    int enter = -1;
    for (std::size_t j = 0; j < nv; ++j)
      if (obj[j] > eps && (enter < 0 || col_var[j] < col_var[enter])) enter = static_cast<int>(j);
    if (enter < 0) break;

    int leave = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
      const double aij = a[i * nv + enter];
      if (aij <= eps) continue;
      const double ratio = rhs[i] / aij;
      const double tie = 1e-15 * std::max(1.0, std::abs(best_ratio));
      if (leave < 0 || ratio < best_ratio - tie ||
          (ratio <= best_ratio + tie && row_var[i] < row_var[leave])) {
        best_ratio = ratio;
        leave = static_cast<int>(i);
      }
    }
    if (leave < 0) throw NumericalError("inscribed disc program is unbounded");

    const std::size_t r = static_cast<std::size_t>(leave);
    const std::size_t e = static_cast<std::size_t>(enter);
    const double piv = a[r * nv + e];
    double* prow = &a[r * nv];
    for (std::size_t j = 0; j < nv; ++j)
      if (j != e) prow[j] /= piv;
    rhs[r] /= piv;
    prow[e] = 1.0 / piv;
    for (std::size_t i = 0; i < m; ++i) {
      if (i == r) continue;
      double* row = &a[i * nv];
      const double f = row[e];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < nv; ++j)
        if (j != e) row[j] -= f * prow[j];
      rhs[i] -= f * rhs[r];
      row[e] = -f * prow[e];
    }
    const double fo = obj[e];
    for (std::size_t j = 0; j < nv; ++j)
      if (j != e) obj[j] -= fo * prow[j];
    z0 += fo * rhs[r];
    obj[e] = -fo * prow[e];
    std::swap(row_var[r], col_var[e]);
  }

  double vars[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < m; ++i)
    if (row_var[i] < 4) vars[row_var[i]] = rhs[i];
  return {c0 + Vec2{vars[0] - vars[2], vars[1] - vars[3]}, z0};
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, a + ab * t);
}

}  // namespace

// ---------------------------------------------------------------- SupportVector

double SupportVector::convexity_tolerance(std::span<const double> h) { return 1e-12 * max_abs(h); }

double SupportVector::convexity_violation(std::span<const double> h) {
  const std::size_t n = h.size();
  const double c = std::cos(kTwoPi / static_cast<double>(n));
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lhs = h[(i + n - 1) % n] + h[(i + 1) % n] - 2.0 * h[i] * c;
    worst = std::max(worst, -lhs);
  }
  return worst;
}

SupportVector::SupportVector(std::vector<double> h) : h_(std::move(h)) {
  if (h_.size() < 3) throw InvalidInput("support vector needs at least 3 angles");
  for (double v : h_)
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidInput("support values must be finite and positive");
  if (convexity_violation(h_) > convexity_tolerance(h_))
    throw InvalidInput("support vector violates the discrete convexity inequality");
}

SupportVector project_to_convex(std::span<const double> h_raw) {
  const std::size_t n = h_raw.size();
  if (n < 8) throw InvalidInput("project_to_convex needs n >= 8");
  if (std::none_of(h_raw.begin(), h_raw.end(), [](double v) { return v > 0.0; }))
    throw InvalidInput("project_to_convex needs at least one positive value");

  std::vector<double> h(h_raw.begin(), h_raw.end());
  const double c2 = 2.0 * std::cos(kTwoPi / static_cast<double>(n));
  bool converged = false;
  for (int sweep = 0; sweep < 10000 && !converged; ++sweep) {
    // same test as the SupportVector constructor, so valid input is untouched
    const double tol = SupportVector::convexity_tolerance(h);
    converged = true;
    for (std::size_t i = 0; i < n; ++i) {
      const double nb = h[(i + n - 1) % n] + h[(i + 1) % n];
      if (nb - c2 * h[i] < -tol) {
        h[i] = nb / c2;
        converged = false;
      }
    }
  }
  if (!converged) throw NumericalError("convexity repair did not reach a fixed point");
  for (double v : h)
    if (!(v > 0.0)) throw NumericalError("convexity repair produced a non-positive support value");
  return SupportVector(std::move(h));
}

std::vector<double> sample_support(const ConvexPolygon& p, std::size_t n) {
  std::vector<double> h(n);
  for (std::size_t i = 0; i < n; ++i)
    h[i] = p.support(unit_direction(kTwoPi * static_cast<double>(i) / static_cast<double>(n)));
  return h;
}

// ---------------------------------------------------------------- ConvexPolygon

ConvexPolygon::ConvexPolygon(std::vector<Vec2> vertices, bool keep_collinear)
    : v_(std::move(vertices)), keep_collinear_(keep_collinear) {
  const std::size_t n = v_.size();
  if (n < 3) throw InvalidInput("polygon needs at least 3 vertices");
  const double tol = 1e-14 * extent_squared(v_);
  double turning = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = v_[(i + n - 1) % n];
    const Vec2& b = v_[i];
    const Vec2& c = v_[(i + 1) % n];
    if (!std::isfinite(b.x) || !std::isfinite(b.y)) throw InvalidInput("polygon vertex is not finite");
    if (b == c) throw InvalidInput("polygon has repeated consecutive vertices");
    const double cr = orient(a, b, c);
    if (keep_collinear ? cr < -tol : cr <= 0.0)
      throw InvalidInput("polygon is not strictly convex and counterclockwise at vertex " + std::to_string(i));
    turning += std::atan2(cross(b - a, c - b), dot(b - a, c - b));
  }
  if (std::abs(turning - kTwoPi) > 1e-6) throw InvalidInput("polygon boundary winds more than once");
}

Vec2 ConvexPolygon::outward_normal(std::size_t i) const {
  const Vec2 e = edge(i);
  const double len = norm(e);
  return {e.y / len, -e.x / len};
}

bool ConvexPolygon::contains(Vec2 p, double tol) const {
  for (std::size_t i = 0; i < v_.size(); ++i) {
    const Vec2 e = edge(i);
    if (cross(e, p - v_[i]) < -tol * norm(e)) return false;
  }
  return true;
}

double ConvexPolygon::signed_distance_inside(Vec2 p) const {
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v_.size(); ++i) {
    const Vec2 e = edge(i);
    d = std::min(d, cross(e, p - v_[i]) / norm(e));
  }
  return d;
}

double ConvexPolygon::distance_to_set(Vec2 p) const {
  if (contains(p)) return 0.0;
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v_.size(); ++i)
    d = std::min(d, point_segment_distance(p, v_[i], v_[(i + 1) % v_.size()]));
  return d;
}

double ConvexPolygon::support(Vec2 direction) const {
  double s = -std::numeric_limits<double>::infinity();
  for (const Vec2& v : v_) s = std::max(s, dot(v, direction));
  return s;
}

// ---------------------------------------------------------------- constructions

ConvexPolygon polygon_from_support(const SupportVector& sv) {
  const std::size_t n = sv.size();
  std::vector<double> cs(n), sn(n);
  for (std::size_t i = 0; i < n; ++i) {
    cs[i] = std::cos(sv.angle(i));
    sn[i] = std::sin(sv.angle(i));
  }
  const double dtheta = kTwoPi / static_cast<double>(n);
  auto gap = [&](std::size_t a, std::size_t b) {
    return dtheta * static_cast<double>((b + n - a) % n == 0 ? n : (b + n - a) % n);
  };
  // Edge length of line k between its active neighbours a and b.
  auto edge_length = [&](std::size_t a, std::size_t k, std::size_t b) {
    const double al = gap(a, k), be = gap(k, b);
    if (!(al < std::numbers::pi && be < std::numbers::pi)) return std::numeric_limits<double>::infinity();
    return (sv[b] - sv[k] * std::cos(be)) / std::sin(be) + (sv[a] - sv[k] * std::cos(al)) / std::sin(al);
  };

  // Drop supporting lines that do not contribute an edge of positive length
  // (the convexity inequality is tight up to rounding there).
  std::vector<std::size_t> prev(n), next(n);
  for (std::size_t i = 0; i < n; ++i) {
    prev[i] = (i + n - 1) % n;
    next[i] = (i + 1) % n;
  }
  const double len_tol = 1e-9 * max_abs(sv.values());
  std::vector<char> alive(n, 1);
  std::size_t count = n;
  std::vector<std::size_t> work(n);
  for (std::size_t i = 0; i < n; ++i) work[i] = n - 1 - i;
  while (!work.empty() && count > 3) {
    const std::size_t k = work.back();
    work.pop_back();
    if (!alive[k] || edge_length(prev[k], k, next[k]) > len_tol) continue;
    alive[k] = 0;
    --count;
    next[prev[k]] = next[k];
    prev[next[k]] = prev[k];
    work.push_back(prev[k]);
    work.push_back(next[k]);
  }

  std::size_t first = 0;
  while (!alive[first]) ++first;
  std::vector<Vec2> verts;
  verts.reserve(count);
  std::size_t k = first;
  do {
    const std::size_t b = next[k];
    const double d = std::sin(gap(k, b));
    if (!(gap(k, b) < std::numbers::pi) || !(d > 0.0)) throw NumericalError("support lines do not bound a polygon");
    verts.push_back({(sv[k] * sn[b] - sv[b] * sn[k]) / d, (cs[k] * sv[b] - cs[b] * sv[k]) / d});
    k = b;
  } while (k != first);
  return ConvexPolygon(std::move(verts));
}

ConvexPolygon regular_polygon(std::size_t n, double r) {
  return polygon_from_support(SupportVector(std::vector<double>(n, r)));
}

ConvexPolygon rectangle(double width, double height, Vec2 center) {
  const double hw = 0.5 * width, hh = 0.5 * height;
  return ConvexPolygon({center + Vec2{-hw, -hh}, center + Vec2{hw, -hh}, center + Vec2{hw, hh},
                        center + Vec2{-hw, hh}});
}

ConvexPolygon scale(const ConvexPolygon& p, double t) {
  if (!(t > 0.0)) throw InvalidInput("scale factor must be positive");
  std::vector<Vec2> v(p.vertices().begin(), p.vertices().end());
  for (Vec2& x : v) x = x * t;
  return ConvexPolygon(std::move(v), p.keeps_collinear());
}

ConvexPolygon translate(const ConvexPolygon& p, Vec2 offset) {
  std::vector<Vec2> v(p.vertices().begin(), p.vertices().end());
  for (Vec2& x : v) x += offset;
  return ConvexPolygon(std::move(v), p.keeps_collinear());
}

// ---------------------------------------------------------------- measures

double polygon_area(std::span<const Vec2> ring) {
  double a = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) a += cross(ring[i], ring[(i + 1) % ring.size()]);
  return 0.5 * a;
}

double polygon_perimeter(std::span<const Vec2> ring) {
  double s = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) s += distance(ring[i], ring[(i + 1) % ring.size()]);
  return s;
}

GeoMeasures measures(const ConvexPolygon& p) {
  GeoMeasures g;
  g.area = polygon_area(p.vertices());
  g.perimeter = polygon_perimeter(p.vertices());
  double d2 = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = i + 1; j < p.size(); ++j) {
      const Vec2 d = p[i] - p[j];
      d2 = std::max(d2, dot(d, d));
    }
  g.diameter = std::sqrt(d2);
  const InscribedDisc disc = largest_inscribed_disc(p);
  g.inradius = disc.radius;
  g.incenter = disc.center;
  return g;
}

double hausdorff_distance(const ConvexPolygon& p, const ConvexPolygon& q) {
  // dist(., K) is convex for convex K, so each directed distance is attained
  // at a vertex.
  double d = 0.0;
  for (const Vec2& v : p.vertices()) d = std::max(d, q.distance_to_set(v));
  for (const Vec2& v : q.vertices()) d = std::max(d, p.distance_to_set(v));
  return d;
}

// ---------------------------------------------------------------- structure

std::vector<double> exterior_angles(const ConvexPolygon& p) {
  const std::size_t n = p.size();
  std::vector<double> ext(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 ein = p[i] - p[(i + n - 1) % n];
    const Vec2 eout = p[(i + 1) % n] - p[i];
    ext[i] = std::atan2(cross(ein, eout), dot(ein, eout));
  }
  return ext;
}

SegmentReport detect_segments(const ConvexPolygon& p, double turn_tol, double min_len) {
  if (!(turn_tol > 0.0)) throw InvalidInput("turn_tol must be positive");
  const std::vector<double> ext = exterior_angles(p);
  const std::size_t n = p.size();
  std::vector<std::size_t> breaks;
  for (std::size_t i = 0; i < n; ++i)
    if (ext[i] > turn_tol) breaks.push_back(i);

  SegmentReport report;
  if (breaks.size() < 2) return report;
  for (std::size_t k = 0; k < breaks.size(); ++k) {
    const std::size_t s = breaks[k];
    const std::size_t e = breaks[(k + 1) % breaks.size()];
    const Vec2 chord = p[e] - p[s];
    const double len = norm(chord);
    if (len < min_len) continue;
    double dir = std::atan2(chord.y, chord.x);
    if (dir < 0.0) dir += kTwoPi;
    if (dir >= kTwoPi) dir = 0.0;  // -0 and tiny negative angles round up to 2 pi
    report.segments.push_back({s, e, len, dir});
    if (len > report.longest_length) {
      report.longest_length = len;
      report.longest = report.segments.size() - 1;
    }
  }
  return report;
}

CornerReport detect_corners(const ConvexPolygon& p, double angle_tol) {
  const std::vector<double> ext = exterior_angles(p);
  CornerReport report;
  for (std::size_t i = 0; i < ext.size(); ++i) {
    report.angle_sum += ext[i];
    report.max_exterior_angle = std::max(report.max_exterior_angle, ext[i]);
    if (ext[i] > angle_tol) report.corners.push_back({i, ext[i]});
  }
  std::stable_sort(report.corners.begin(), report.corners.end(),
                   [](const Corner& a, const Corner& b) { return a.exterior_angle > b.exterior_angle; });
  return report;
}

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](Vec2 a, Vec2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && orient(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && orient(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

}  // namespace torsion
