#include "torsion/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <utility>

#include "torsion/error.hpp"

namespace torsion {

namespace {

double incircle(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;
  const double ad = adx * adx + ady * ady;
  const double bd = bdx * bdx + bdy * bdy;
  const double cd = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

Vec2 circumcenter(Vec2 a, Vec2 b, Vec2 c) {
  const Vec2 ab = b - a, ac = c - a;
  const double d = 2.0 * cross(ab, ac);
  const double ab2 = dot(ab, ab), ac2 = dot(ac, ac);
  return a + Vec2{(ac.y * ab2 - ab.y * ac2) / d, (ab.x * ac2 - ac.x * ab2) / d};
}

/// Smallest interior angle of triangle abc and the index (0..2) of its apex,
/// which sits opposite the shortest edge.
std::pair<double, int> min_angle(Vec2 a, Vec2 b, Vec2 c) {
  const Vec2 p[3] = {a, b, c};
  const double l2[3] = {dot(c - b, c - b), dot(a - c, a - c), dot(b - a, b - a)};
  const int apex = l2[0] <= l2[1] ? (l2[0] <= l2[2] ? 0 : 2) : (l2[1] <= l2[2] ? 1 : 2);
  const Vec2 u = p[(apex + 1) % 3] - p[apex];
  const Vec2 v = p[(apex + 2) % 3] - p[apex];
  return {std::atan2(std::abs(cross(u, v)), dot(u, v)), apex};
}

double longest_edge_sq(Vec2 a, Vec2 b, Vec2 c) {
  return std::max({dot(b - a, b - a), dot(c - b, c - b), dot(a - c, a - c)});
}

// Incremental constrained Delaunay triangulation of a convex polygon. Every
// domain boundary edge is a hull edge, so the only constraints are the hull
// edges (neighbour -1); cavities never cross them.
class Triangulator {
 public:
  struct Tri {
    std::array<int, 3> v{};
    std::array<int, 3> nb{-1, -1, -1};   // across the edge opposite v[k]
    std::array<int, 3> tag{-1, -1, -1};  // polygon edge id for hull edges
    bool alive = true;
  };

  std::vector<Vec2> pts;
  std::vector<Tri> tris;
  std::vector<int> corner_of;  // polygon vertex id for input corners, else -1
  std::vector<double> corner_angle;

  void init_from_ring(const std::vector<Vec2>& ring, const std::vector<int>& seg_tag, Vec2 center);
  int insert(Vec2 p, int start, int split_tri = -1, int split_k = -1);
  void flip_to_delaunay();
  void refine(double min_angle_rad, double size_limit, std::size_t max_inserts);
  void smooth(int passes);
  TriMesh extract(double h_target, std::vector<Vec2> polygon) const;

  struct Location {
    int tri = -1;
    int outside_edge = -1;  // >= 0 when p lies beyond hull edge of tri
  };
  Location locate(Vec2 p, int start) const;
  std::size_t live_count() const { return tris.size() - free_.size(); }
  int last_created() const { return made_.empty() ? 0 : made_.front(); }

 private:
  std::vector<int> free_;
  std::vector<int> made_;  // triangles created by the latest insert()

  int new_tri() {
    if (!free_.empty()) {
      const int t = free_.back();
      free_.pop_back();
      tris[t] = Tri{};
      return t;
    }
    tris.emplace_back();
    return static_cast<int>(tris.size()) - 1;
  }
  void kill(int t) {
    tris[t].alive = false;
    free_.push_back(t);
  }
  int edge_index(int t, int a, int b) const {
    // index k whose opposite edge is (a, b) in ccw order
    const Tri& T = tris[t];
    for (int k = 0; k < 3; ++k)
      if (T.v[(k + 1) % 3] == a && T.v[(k + 2) % 3] == b) return k;
    return -1;
  }
  void relink(int outside, int a, int b, int new_t) {
    if (outside < 0) return;
    const int k = edge_index(outside, b, a);
    if (k < 0) throw NumericalError("triangulation adjacency is inconsistent");
    tris[outside].nb[k] = new_t;
  }
  bool flip_if_needed(int t, int k, std::vector<std::pair<int, int>>& stack);
  std::vector<int> cavity(Vec2 p, int start) const;
  bool is_bad(int t, double min_angle_rad, double size_limit) const;
};

void Triangulator::init_from_ring(const std::vector<Vec2>& ring, const std::vector<int>& seg_tag, Vec2 center) {
  // Fan from a strictly interior point, then flip to Delaunay. The ring may
  // contain collinear points, which rules out plain ear clipping.
  pts = ring;
  const int n = static_cast<int>(ring.size());
  const int cv = n;
  pts.push_back(center);
  corner_of.push_back(-1);
  corner_angle.push_back(0.0);
  tris.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    Tri& T = tris[i];
    T.v = {i, j, cv};
    if (!(orient(pts[i], pts[j], center) > 0.0)) throw InvalidInput("polygon boundary is degenerate");
    T.nb = {(i + 1) % n, (i + n - 1) % n, -1};
    T.tag = {-1, -1, seg_tag[i]};
  }
  flip_to_delaunay();
}

bool Triangulator::flip_if_needed(int t, int k, std::vector<std::pair<int, int>>& stack) {
  Tri& T = tris[t];
  const int n = T.nb[k];
  if (n < 0 || !T.alive) return false;
  const int a = T.v[k], b = T.v[(k + 1) % 3], c = T.v[(k + 2) % 3];
  const int j = edge_index(n, c, b);
  if (j < 0) return false;
  const int d = tris[n].v[j];
  const double ic = incircle(pts[a], pts[b], pts[c], pts[d]);
  // relative guard against flip cycles on nearly cocircular quads
  const double mag = dot(pts[a] - pts[d], pts[a] - pts[d]) * dot(pts[b] - pts[c], pts[b] - pts[c]);
  if (ic <= 1e-11 * mag) return false;
  if (orient(pts[a], pts[b], pts[d]) <= 0.0 || orient(pts[a], pts[d], pts[c]) <= 0.0) return false;

  const int t_ca = T.nb[(k + 1) % 3], tag_ca = T.tag[(k + 1) % 3];
  const int t_ab = T.nb[(k + 2) % 3], tag_ab = T.tag[(k + 2) % 3];
  Tri& N = tris[n];
  // N = (d, c, b) up to rotation starting at index j
  const int n_bd = N.nb[(j + 1) % 3], tag_bd = N.tag[(j + 1) % 3];  // opposite c: edge (b, d)
  const int n_dc = N.nb[(j + 2) % 3], tag_dc = N.tag[(j + 2) % 3];  // opposite b: edge (d, c)

  T.v = {a, b, d};
  T.nb = {n_bd, n, t_ab};
  T.tag = {tag_bd, -1, tag_ab};
  N.v = {a, d, c};
  N.nb = {n_dc, t_ca, t};
  N.tag = {tag_dc, tag_ca, -1};
  if (n_bd >= 0) tris[n_bd].nb[edge_index(n_bd, d, b)] = t;
  if (t_ca >= 0) tris[t_ca].nb[edge_index(t_ca, a, c)] = n;
  stack.push_back({t, 0});
  stack.push_back({t, 2});
  stack.push_back({n, 0});
  stack.push_back({n, 1});
  return true;
}

void Triangulator::flip_to_delaunay() {
  std::vector<std::pair<int, int>> stack;
  for (int t = static_cast<int>(tris.size()) - 1; t >= 0; --t)
    if (tris[t].alive)
      for (int k = 2; k >= 0; --k) stack.push_back({t, k});
  std::size_t flips = 0;
  const std::size_t cap = 200 * (tris.size() + 10);
  while (!stack.empty()) {
    const auto [t, k] = stack.back();
    stack.pop_back();
    if (flip_if_needed(t, k, stack) && ++flips > cap) throw NumericalError("edge flipping did not terminate");
  }
}

Triangulator::Location Triangulator::locate(Vec2 p, int start) const {
  int t = (start >= 0 && start < static_cast<int>(tris.size()) && tris[start].alive) ? start : -1;
  if (t < 0)
    for (int i = 0; i < static_cast<int>(tris.size()); ++i)
      if (tris[i].alive) {
        t = i;
        break;
      }
  const std::size_t cap = 4 * tris.size() + 64;
  for (std::size_t step = 0; step < cap; ++step) {
    const Tri& T = tris[t];
    int move = -1;
    for (int r = 0; r < 3; ++r) {
      const int k = static_cast<int>((r + step) % 3);
      if (orient(pts[T.v[(k + 1) % 3]], pts[T.v[(k + 2) % 3]], p) < 0.0) {
        move = k;
        break;
      }
    }
    if (move < 0) return {t, -1};
    if (T.nb[move] < 0) return {t, move};
    t = T.nb[move];
  }
  // Fallback scan. Walks cycle when p sits on an edge and rounding makes it
  // look outside both neighbours, so take the triangle that contains p best.
  int best_in = -1;
  double best_margin = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(tris.size()); ++i) {
    const Tri& T = tris[i];
    if (!T.alive) continue;
    double margin = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k) {
      const Vec2 a = pts[T.v[(k + 1) % 3]], b = pts[T.v[(k + 2) % 3]];
      margin = std::min(margin, orient(a, b, p) / dot(b - a, b - a));
    }
    if (margin > best_margin) {
      best_margin = margin;
      best_in = i;
    }
  }
  if (best_in >= 0 && best_margin > -1e-12) return {best_in, -1};
  // Outside the hull: report the nearest hull edge that p lies beyond.
  Location best;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(tris.size()); ++i) {
    const Tri& T = tris[i];
    if (!T.alive) continue;
    for (int k = 0; k < 3; ++k) {
      if (T.nb[k] >= 0) continue;
      const Vec2 a = pts[T.v[(k + 1) % 3]], b = pts[T.v[(k + 2) % 3]];
      if (orient(a, b, p) >= 0.0) continue;
      const Vec2 d = b - a;
      const double s = std::clamp(dot(p - a, d) / dot(d, d), 0.0, 1.0);
      const double dist = distance(p, a + d * s);
      if (dist < best_d) {
        best_d = dist;
        best = {i, k};
      }
    }
  }
  if (best.tri >= 0) return best;
  throw NumericalError("point location failed");
}

std::vector<int> Triangulator::cavity(Vec2 p, int start) const {
  std::vector<int> cav{start};
  std::vector<int> stack{start};
  while (!stack.empty()) {
    const int t = stack.back();
    stack.pop_back();
    for (int k = 0; k < 3; ++k) {
      const int n = tris[t].nb[k];
      if (n < 0 || std::find(cav.begin(), cav.end(), n) != cav.end()) continue;
      const Tri& N = tris[n];
      if (incircle(pts[N.v[0]], pts[N.v[1]], pts[N.v[2]], p) > 0.0) {
        cav.push_back(n);
        stack.push_back(n);
      }
    }
  }
  return cav;
}

int Triangulator::insert(Vec2 p, int start, int split_tri, int split_k) {
  std::vector<int> cav = cavity(p, start);
  const int split_a = split_tri >= 0 ? tris[split_tri].v[(split_k + 1) % 3] : -1;
  const int split_b = split_tri >= 0 ? tris[split_tri].v[(split_k + 2) % 3] : -1;
  const int split_tag = split_tri >= 0 ? tris[split_tri].tag[split_k] : -1;

  struct Rim {
    int a, b, outside, tag;
  };
  std::vector<Rim> rim;
  // Shrink the cavity until it is star-shaped from p.
  for (int guard = 0;; ++guard) {
    rim.clear();
    int bad = -1;
    for (int t : cav) {
      for (int k = 0; k < 3; ++k) {
        const int n = tris[t].nb[k];
        if (n >= 0 && std::find(cav.begin(), cav.end(), n) != cav.end()) continue;
        const int a = tris[t].v[(k + 1) % 3], b = tris[t].v[(k + 2) % 3];
        if (a == split_a && b == split_b) continue;
        if (orient(pts[a], pts[b], p) <= 0.0 && t != start && bad < 0) bad = t;
        rim.push_back({a, b, n, tris[t].tag[k]});
      }
    }
    if (bad < 0) break;
    cav.erase(std::find(cav.begin(), cav.end(), bad));
    if (guard > 1000) throw NumericalError("cavity repair failed");
  }
  for (const Rim& r : rim)
    if (orient(pts[r.a], pts[r.b], p) <= 0.0) throw NumericalError("inserted point is not visible from its cavity");

  const int pv = static_cast<int>(pts.size());
  pts.push_back(p);
  corner_of.push_back(-1);
  corner_angle.push_back(0.0);
  for (int t : cav) kill(t);

  std::vector<int>& made = made_;
  made.assign(rim.size(), -1);
  for (std::size_t i = 0; i < rim.size(); ++i) {
    const int t = new_tri();
    made[i] = t;
    tris[t].v = {rim[i].a, rim[i].b, pv};
    tris[t].nb[2] = rim[i].outside;
    tris[t].tag[2] = rim[i].tag;
    relink(rim[i].outside, rim[i].a, rim[i].b, t);
  }
  for (std::size_t i = 0; i < rim.size(); ++i) {
    const int t = made[i];
    // opposite a: edge (b, p) -> triangle whose rim starts at b
    // opposite b: edge (p, a) -> triangle whose rim ends at a
    int opp_a = -1, opp_b = -1;
    for (std::size_t j = 0; j < rim.size(); ++j) {
      if (rim[j].a == rim[i].b) opp_a = made[j];
      if (rim[j].b == rim[i].a) opp_b = made[j];
    }
    tris[t].nb[0] = opp_a;
    tris[t].nb[1] = opp_b;
    if (opp_a < 0) tris[t].tag[0] = split_tag;
    if (opp_b < 0) tris[t].tag[1] = split_tag;
  }
  return pv;
}

bool Triangulator::is_bad(int t, double min_angle_rad, double size_limit) const {
  const Tri& T = tris[t];
  const Vec2 a = pts[T.v[0]], b = pts[T.v[1]], c = pts[T.v[2]];
  if (longest_edge_sq(a, b, c) > size_limit * size_limit) return true;
  const auto [ang, apex] = min_angle(a, b, c);
  if (ang >= min_angle_rad) return false;
  // An input corner sharper than the target cannot be improved.
  const int v = T.v[apex];
  if (corner_of[v] >= 0 && ang >= corner_angle[v] - 1e-9) return false;
  return true;
}

void Triangulator::refine(double min_angle_rad, double size_limit, std::size_t max_inserts) {
  std::deque<int> tri_queue;
  std::deque<std::pair<int, int>> seg_queue;
  for (int t = 0; t < static_cast<int>(tris.size()); ++t) {
    if (!tris[t].alive) continue;
    tri_queue.push_back(t);
    for (int k = 0; k < 3; ++k)
      if (tris[t].nb[k] < 0) seg_queue.push_back({t, k});
  }

  auto encroached = [&](int t, int k) {
    const Tri& T = tris[t];
    const Vec2 a = pts[T.v[(k + 1) % 3]], b = pts[T.v[(k + 2) % 3]], o = pts[T.v[k]];
    return dot(a - o, b - o) < 0.0;  // opposite angle obtuse
  };

  auto tracked_insert = [&](Vec2 p, int start, int st, int sk) {
    insert(p, start, st, sk);
    for (int t : made_)
      if (tris[t].alive) {
        tri_queue.push_back(t);
        for (int k = 0; k < 3; ++k)
          if (tris[t].nb[k] < 0) seg_queue.push_back({t, k});
      }
  };

  std::size_t inserted = 0;
  auto split_segment = [&](int t, int k) {
    const Tri& T = tris[t];
    const Vec2 a = pts[T.v[(k + 1) % 3]], b = pts[T.v[(k + 2) % 3]];
    tracked_insert((a + b) * 0.5, t, t, k);
    ++inserted;
  };

  while (true) {
    if (inserted > max_inserts) throw NumericalError("mesh refinement did not terminate");
    if (!seg_queue.empty()) {
      const auto [t, k] = seg_queue.front();
      seg_queue.pop_front();
      if (!tris[t].alive || tris[t].nb[k] >= 0) continue;
      if (encroached(t, k)) split_segment(t, k);
      continue;
    }
    if (tri_queue.empty()) break;
    const int t = tri_queue.front();
    tri_queue.pop_front();
    if (!tris[t].alive || !is_bad(t, min_angle_rad, size_limit)) continue;
    const Tri& T = tris[t];
    const Vec2 c = circumcenter(pts[T.v[0]], pts[T.v[1]], pts[T.v[2]]);
    const Location loc = locate(c, t);
    if (loc.outside_edge >= 0) {
      split_segment(loc.tri, loc.outside_edge);
      tri_queue.push_back(t);
      continue;
    }
    // Any hull edge on the cavity rim whose diametral circle holds c is split instead.
    const std::vector<int> cav = cavity(c, loc.tri);
    int enc_t = -1, enc_k = -1;
    for (int ct : cav) {
      for (int k = 0; k < 3 && enc_t < 0; ++k) {
        if (tris[ct].nb[k] >= 0) continue;
        const Vec2 a = pts[tris[ct].v[(k + 1) % 3]], b = pts[tris[ct].v[(k + 2) % 3]];
        if (dot(a - c, b - c) < 0.0) {
          enc_t = ct;
          enc_k = k;
        }
      }
      if (enc_t >= 0) break;
    }
    if (enc_t >= 0) {
      split_segment(enc_t, enc_k);
      tri_queue.push_back(t);
      continue;
    }
    tracked_insert(c, loc.tri, -1, -1);
    ++inserted;
  }
}

void Triangulator::smooth(int passes) {
  const int np = static_cast<int>(pts.size());
  std::vector<char> fixed(np, 0);
  for (const Tri& T : tris) {
    if (!T.alive) continue;
    for (int k = 0; k < 3; ++k)
      if (T.nb[k] < 0) {
        fixed[T.v[(k + 1) % 3]] = 1;
        fixed[T.v[(k + 2) % 3]] = 1;
      }
  }
  for (int pass = 0; pass < passes; ++pass) {
    // node -> incident triangles (CSR)
    std::vector<int> start(np + 1, 0);
    for (const Tri& T : tris)
      if (T.alive)
        for (int v : T.v) ++start[v + 1];
    for (int i = 0; i < np; ++i) start[i + 1] += start[i];
    std::vector<int> items(start[np]);
    std::vector<int> fill(start.begin(), start.end() - 1);
    for (int t = 0; t < static_cast<int>(tris.size()); ++t)
      if (tris[t].alive)
        for (int v : tris[t].v) items[fill[v]++] = t;

    for (int i = 0; i < np; ++i) {
      if (fixed[i] || start[i] == start[i + 1]) continue;
      Vec2 acc;
      double wsum = 0.0;
      for (int s = start[i]; s < start[i + 1]; ++s) {
        const Tri& T = tris[items[s]];
        const Vec2 a = pts[T.v[0]], b = pts[T.v[1]], c = pts[T.v[2]];
        const double area = 0.5 * orient(a, b, c);
        acc += circumcenter(a, b, c) * area;
        wsum += area;
      }
      const Vec2 target = acc / wsum;
      const Vec2 old = pts[i];
      pts[i] = target;
      bool ok = true;
      for (int s = start[i]; s < start[i + 1] && ok; ++s) {
        const Tri& T = tris[items[s]];
        const Vec2 a = pts[T.v[0]], b = pts[T.v[1]], c = pts[T.v[2]];
        ok = orient(a, b, c) > 1e-6 * longest_edge_sq(a, b, c);
      }
      if (!ok) pts[i] = old;
    }
    flip_to_delaunay();
  }
}

TriMesh Triangulator::extract(double h_target, std::vector<Vec2> polygon) const {
  TriMesh m;
  m.h_target = h_target;
  m.polygon = std::move(polygon);
  m.nodes = pts;
  std::vector<char> is_b(pts.size(), 0);
  for (const Tri& T : tris) {
    if (!T.alive) continue;
    m.triangles.push_back(T.v);
    for (int k = 0; k < 3; ++k)
      if (T.nb[k] < 0) {
        const int a = T.v[(k + 1) % 3], b = T.v[(k + 2) % 3];
        m.boundary_edges.push_back({a, b, T.tag[k]});
        is_b[a] = is_b[b] = 1;
      }
  }
  for (int i = 0; i < static_cast<int>(pts.size()); ++i)
    if (is_b[i]) m.boundary_nodes.push_back(i);
  std::sort(m.boundary_edges.begin(), m.boundary_edges.end(),
            [](const BoundaryEdge& x, const BoundaryEdge& y) { return x.a < y.a || (x.a == y.a && x.b < y.b); });
  return m;
}

}  // namespace

// ---------------------------------------------------------------- TriMesh

double TriMesh::triangle_area(std::size_t t) const {
  const auto& tri = triangles[t];
  return 0.5 * orient(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
}

std::vector<char> TriMesh::boundary_mask() const {
  std::vector<char> mask(nodes.size(), 0);
  for (int b : boundary_nodes) mask[b] = 1;
  return mask;
}

TriMesh triangulate(const ConvexPolygon& p, double h_target, double grading, const MeshOptions& opts) {
  const GeoMeasures g = measures(p);
  if (!(h_target > 0.0) || !(h_target < g.diameter))
    throw InvalidInput("h_target must lie in (0, diameter)");
  if (!(grading >= 0.0 && grading <= 1.0)) throw InvalidInput("grading must lie in [0, 1]");
  if (g.area < 1e-10 * g.diameter * g.diameter) throw InvalidInput("polygon is degenerate (near-zero area)");

  const double hb = h_target * (1.0 - 0.5 * grading);
  std::vector<Vec2> ring;
  std::vector<int> seg_tag;
  std::vector<int> ring_corner;
  std::vector<double> ring_corner_angle;
  const std::vector<double> ext = exterior_angles(p);
  for (std::size_t k = 0; k < p.size(); ++k) {
    const Vec2 a = p[k];
    const Vec2 e = p.edge(k);
    const int segs = std::max(1, static_cast<int>(std::ceil(norm(e) / hb - 1e-9)));
    for (int j = 0; j < segs; ++j) {
      ring.push_back(j == 0 ? a : a + e * (static_cast<double>(j) / segs));
      seg_tag.push_back(static_cast<int>(k));
      ring_corner.push_back(j == 0 ? static_cast<int>(k) : -1);
      ring_corner_angle.push_back(j == 0 ? std::numbers::pi - ext[k] : 0.0);
    }
  }

  Triangulator tr;
  tr.corner_of = ring_corner;
  tr.corner_angle = ring_corner_angle;
  tr.init_from_ring(ring, seg_tag, g.incenter);

  // Interior seeds: equilateral lattice of spacing h_target anchored at the
  // incenter, kept away from the boundary so that no boundary segment starts
  // out encroached.
  const double s = h_target;
  const double row = s * std::sqrt(3.0) / 2.0;
  double xmin = p[0].x, xmax = p[0].x, ymin = p[0].y, ymax = p[0].y;
  for (const Vec2& v : p.vertices()) {
    xmin = std::min(xmin, v.x);
    xmax = std::max(xmax, v.x);
    ymin = std::min(ymin, v.y);
    ymax = std::max(ymax, v.y);
  }
  const Vec2 anchor = g.incenter;
  const long j0 = static_cast<long>(std::floor((ymin - anchor.y) / row)) - 1;
  const long j1 = static_cast<long>(std::ceil((ymax - anchor.y) / row)) + 1;
  const double clearance = 0.6 * std::max(hb, 0.75 * s);
  // Per row, the admissible x range is the polygon shrunk by the clearance:
  // n_k . q <= c_k - clearance for every edge with outward normal n_k.
  std::vector<Vec2> nrm(p.size());
  std::vector<double> off(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    nrm[k] = p.outward_normal(k);
    off[k] = dot(nrm[k], p[k]) - clearance;
  }
  int last = 0;
  for (long j = j0; j <= j1; ++j) {
    const double y = anchor.y + static_cast<double>(j) * row;
    double lo = xmin, hi = xmax;
    for (std::size_t k = 0; k < p.size() && lo <= hi; ++k) {
      const double rhs = off[k] - nrm[k].y * y;
      if (nrm[k].x > 1e-14)
        hi = std::min(hi, rhs / nrm[k].x);
      else if (nrm[k].x < -1e-14)
        lo = std::max(lo, rhs / nrm[k].x);
      else if (rhs < 0.0)
        hi = lo - 1.0;
    }
    if (lo > hi) continue;
    const double shift = (j % 2 == 0) ? 0.0 : 0.5 * s;
    const long i0 = static_cast<long>(std::ceil((lo - anchor.x - shift) / s));
    const long i1 = static_cast<long>(std::floor((hi - anchor.x - shift) / s));
    for (long i = i0; i <= i1; ++i) {
      const Vec2 q{anchor.x + shift + static_cast<double>(i) * s, y};
      if (i == 0 && j == 0) continue;  // the anchor itself seeded the fan
      const auto loc = tr.locate(q, last);
      if (loc.outside_edge >= 0) continue;
      tr.insert(q, loc.tri);
      last = tr.last_created();
    }
  }

  const double min_ang = opts.min_angle_deg * std::numbers::pi / 180.0;
  const double size_limit = 1.3 * h_target;
  const std::size_t cap = 50 * (tr.pts.size() + 1000);
  tr.refine(min_ang * (1.0 + 1e-6), size_limit, cap);
  if (opts.smoothing_passes > 0) {
    tr.smooth(opts.smoothing_passes);
    tr.refine(min_ang * (1.0 + 1e-6), size_limit, cap);
  }

  std::vector<Vec2> poly(p.vertices().begin(), p.vertices().end());
  return tr.extract(h_target, std::move(poly));
}

TriMesh refine(const TriMesh& m) {
  TriMesh r;
  r.h_target = 0.5 * m.h_target;
  r.polygon = m.polygon;
  r.nodes = m.nodes;
  std::map<std::pair<int, int>, int> mid;
  auto midpoint = [&](int a, int b) {
    const auto key = std::minmax(a, b);
    auto it = mid.find(key);
    if (it != mid.end()) return it->second;
    const int id = static_cast<int>(r.nodes.size());
    r.nodes.push_back((m.nodes[a] + m.nodes[b]) * 0.5);
    mid.emplace(key, id);
    return id;
  };
  r.triangles.reserve(4 * m.triangles.size());
  for (const auto& t : m.triangles) {
    const int ab = midpoint(t[0], t[1]), bc = midpoint(t[1], t[2]), ca = midpoint(t[2], t[0]);
    r.triangles.push_back({t[0], ab, ca});
    r.triangles.push_back({ab, t[1], bc});
    r.triangles.push_back({ca, bc, t[2]});
    r.triangles.push_back({ab, bc, ca});
  }
  const std::size_t np = m.polygon.size();
  for (const BoundaryEdge& e : m.boundary_edges) {
    const int md = mid.at(std::minmax(e.a, e.b));
    if (np >= 3) {
      const Vec2 a = m.polygon[static_cast<std::size_t>(e.polygon_edge)];
      const Vec2 b = m.polygon[(static_cast<std::size_t>(e.polygon_edge) + 1) % np];
      const Vec2 d = b - a;
      r.nodes[md] = a + d * (dot(r.nodes[md] - a, d) / dot(d, d));
    }
    r.boundary_edges.push_back({e.a, md, e.polygon_edge});
    r.boundary_edges.push_back({md, e.b, e.polygon_edge});
  }
  std::vector<char> is_b(r.nodes.size(), 0);
  for (const BoundaryEdge& e : r.boundary_edges) is_b[e.a] = is_b[e.b] = 1;
  for (int i = 0; i < static_cast<int>(r.nodes.size()); ++i)
    if (is_b[i]) r.boundary_nodes.push_back(i);
  return r;
}

MeshQuality quality(const TriMesh& m) {
  MeshQuality q;
  q.node_count = m.nodes.size();
  q.triangle_count = m.triangles.size();
  q.min_angle = std::numeric_limits<double>::infinity();
  for (const auto& t : m.triangles) {
    const Vec2 a = m.nodes[t[0]], b = m.nodes[t[1]], c = m.nodes[t[2]];
    q.min_angle = std::min(q.min_angle, min_angle(a, b, c).first);
    q.max_element_diameter = std::max(q.max_element_diameter, std::sqrt(longest_edge_sq(a, b, c)));
  }
  return q;
}

TriMesh scale_mesh(const TriMesh& m, double t) {
  if (!(t > 0.0)) throw InvalidInput("scale factor must be positive");
  TriMesh r = m;
  for (Vec2& v : r.nodes) v = v * t;
  for (Vec2& v : r.polygon) v = v * t;
  r.h_target *= t;
  return r;
}

std::string validate_mesh(const TriMesh& m) {
  std::ostringstream err;
  std::map<std::pair<int, int>, int> uses;
  double area = 0.0;
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const auto& tri = m.triangles[t];
    for (int v : tri)
      if (v < 0 || v >= static_cast<int>(m.nodes.size())) return "triangle references a missing node";
    const double a = m.triangle_area(t);
    if (!(a > 0.0)) {
      err << "triangle " << t << " has non-positive area";
      return err.str();
    }
    area += a;
    for (int k = 0; k < 3; ++k) ++uses[{tri[k], tri[(k + 1) % 3]}];
  }
  std::size_t boundary = 0;
  for (const auto& [e, count] : uses) {
    if (count != 1) return "directed edge used more than once";
    if (!uses.count({e.second, e.first})) ++boundary;
  }
  if (boundary != m.boundary_edges.size()) return "boundary edge list does not match the triangulation";
  const std::size_t np = m.polygon.size();
  double scale = 0.0;
  for (const Vec2& v : m.polygon) scale = std::max(scale, norm(v));
  for (const BoundaryEdge& e : m.boundary_edges) {
    if (!uses.count({e.a, e.b})) return "boundary edge is not a triangle edge";
    if (np < 3) continue;
    const Vec2 a = m.polygon[static_cast<std::size_t>(e.polygon_edge)];
    const Vec2 b = m.polygon[(static_cast<std::size_t>(e.polygon_edge) + 1) % np];
    const Vec2 d = (b - a) / norm(b - a);
    for (int v : {e.a, e.b})
      if (std::abs(cross(d, m.nodes[v] - a)) > 1e-12 * std::max(1.0, scale))
        return "boundary node is off the polygon boundary";
  }
  if (np >= 3) {
    const double pa = polygon_area(m.polygon);
    if (std::abs(area - pa) > 1e-10 * pa) return "triangle areas do not sum to the polygon area";
  }
  return {};
}

// ---------------------------------------------------------------- TriangleLocator

TriangleLocator::TriangleLocator(const TriMesh& m) {
  Vec2 hi = m.nodes.empty() ? Vec2{} : m.nodes[0];
  lo_ = hi;
  for (const Vec2& v : m.nodes) {
    lo_ = {std::min(lo_.x, v.x), std::min(lo_.y, v.y)};
    hi = {std::max(hi.x, v.x), std::max(hi.y, v.y)};
  }
  const double w = std::max(hi.x - lo_.x, 1e-300), h = std::max(hi.y - lo_.y, 1e-300);
  const double cells = std::max(1.0, static_cast<double>(m.triangles.size()) / 2.0);
  cell_ = std::sqrt(w * h / cells);
  nx_ = std::max(1, static_cast<int>(std::ceil(w / cell_)));
  ny_ = std::max(1, static_cast<int>(std::ceil(h / cell_)));
  const std::size_t nc = static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_);
  std::vector<int> count(nc + 1, 0);
  auto cell_range = [&](const std::array<int, 3>& t, int& x0, int& x1, int& y0, int& y1) {
    double ax = m.nodes[t[0]].x, bx = ax, ay = m.nodes[t[0]].y, by = ay;
    for (int v : t) {
      ax = std::min(ax, m.nodes[v].x);
      bx = std::max(bx, m.nodes[v].x);
      ay = std::min(ay, m.nodes[v].y);
      by = std::max(by, m.nodes[v].y);
    }
    x0 = std::clamp(static_cast<int>((ax - lo_.x) / cell_), 0, nx_ - 1);
    x1 = std::clamp(static_cast<int>((bx - lo_.x) / cell_), 0, nx_ - 1);
    y0 = std::clamp(static_cast<int>((ay - lo_.y) / cell_), 0, ny_ - 1);
    y1 = std::clamp(static_cast<int>((by - lo_.y) / cell_), 0, ny_ - 1);
  };
  for (const auto& t : m.triangles) {
    int x0, x1, y0, y1;
    cell_range(t, x0, x1, y0, y1);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) ++count[static_cast<std::size_t>(y) * nx_ + x + 1];
  }
  for (std::size_t c = 0; c < nc; ++c) count[c + 1] += count[c];
  cell_start_ = count;
  cell_items_.assign(static_cast<std::size_t>(count[nc]), 0);
  std::vector<int> fill(count.begin(), count.end() - 1);
  for (int ti = 0; ti < static_cast<int>(m.triangles.size()); ++ti) {
    int x0, x1, y0, y1;
    cell_range(m.triangles[ti], x0, x1, y0, y1);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) cell_items_[fill[static_cast<std::size_t>(y) * nx_ + x]++] = ti;
  }
}

std::optional<TriangleLocator::Hit> TriangleLocator::locate(const TriMesh& m, Vec2 p, double tol) const {
  const int x = static_cast<int>(std::floor((p.x - lo_.x) / cell_));
  const int y = static_cast<int>(std::floor((p.y - lo_.y) / cell_));
  if (x < -1 || y < -1 || x > nx_ || y > ny_) return std::nullopt;
  const std::size_t c = static_cast<std::size_t>(std::clamp(y, 0, ny_ - 1)) * nx_ + std::clamp(x, 0, nx_ - 1);
  std::optional<Hit> best;
  double best_min = -std::numeric_limits<double>::infinity();
  for (int s = cell_start_[c]; s < cell_start_[c + 1]; ++s) {
    const int ti = cell_items_[s];
    const auto& t = m.triangles[ti];
    const Vec2 a = m.nodes[t[0]], b = m.nodes[t[1]], cc = m.nodes[t[2]];
    const double area2 = orient(a, b, cc);
    const std::array<double, 3> bary{orient(b, cc, p) / area2, orient(cc, a, p) / area2, orient(a, b, p) / area2};
    const double mn = std::min({bary[0], bary[1], bary[2]});
    if (mn >= 0.0) return Hit{ti, bary};
    if (mn >= -tol && mn > best_min) {
      best_min = mn;
      best = Hit{ti, bary};
    }
  }
  return best;
}

}  // namespace torsion
