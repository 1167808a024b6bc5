#include "torsion/fem.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <unordered_map>

#include "torsion/error.hpp"

namespace torsion {

namespace {

using SpMat = Eigen::SparseMatrix<double>;

/// Local P1 stiffness for triangle (a, b, c): grad phi_k = (b_k, c_k) / (2A).
struct LocalP1 {
  double area;
  std::array<double, 3> bx, by;
};

LocalP1 local_p1(Vec2 a, Vec2 b, Vec2 c) {
  LocalP1 l;
  l.area = 0.5 * orient(a, b, c);
  const Vec2 p[3] = {a, b, c};
  for (int k = 0; k < 3; ++k) {
    const Vec2 q = p[(k + 1) % 3], r = p[(k + 2) % 3];
    l.bx[k] = q.y - r.y;
    l.by[k] = r.x - q.x;
  }
  return l;
}

}  // namespace

std::optional<double> TorsionSolution::value_at(Vec2 p) const {
  if (!locator) return std::nullopt;
  const auto hit = locator->locate(mesh, p);
  if (!hit) return std::nullopt;
  const auto& t = mesh.triangles[static_cast<std::size_t>(hit->triangle)];
  return hit->bary[0] * u[t[0]] + hit->bary[1] * u[t[1]] + hit->bary[2] * u[t[2]];
}

TorsionSolution solve_torsion(const TriMesh& m, const SolverOptions& opts) {
  const std::size_t n = m.nodes.size();
  const std::vector<char> on_boundary = m.boundary_mask();
  std::vector<int> dof(n, -1);
  int ndof = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (!on_boundary[i]) dof[i] = ndof++;
  if (ndof == 0) throw NumericalError("mesh has no interior nodes");

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(m.triangles.size() * 9);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(ndof);
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const auto& tri = m.triangles[t];
    const LocalP1 l = local_p1(m.nodes[tri[0]], m.nodes[tri[1]], m.nodes[tri[2]]);
    if (!(l.area > 0.0)) throw NumericalError("mesh contains an inverted or degenerate triangle");
    for (int i = 0; i < 3; ++i) {
      const int di = dof[tri[i]];
      if (di < 0) continue;
      rhs[di] += l.area / 3.0;
      for (int j = 0; j < 3; ++j) {
        const int dj = dof[tri[j]];
        if (dj < 0) continue;
        trip.emplace_back(di, dj, (l.bx[i] * l.bx[j] + l.by[i] * l.by[j]) / (4.0 * l.area));
      }
    }
  }
  SpMat K(ndof, ndof);
  K.setFromTriplets(trip.begin(), trip.end());

  Eigen::VectorXd x;
  if (static_cast<std::size_t>(ndof) <= opts.direct_limit) {
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt(K);
    if (ldlt.info() != Eigen::Success) throw NumericalError("stiffness factorization failed");
    if (ldlt.vectorD().minCoeff() <= 0.0) throw NumericalError("stiffness matrix is not positive definite");
    x = ldlt.solve(rhs);
    // one step of iterative refinement keeps the residual well under 1e-10
    const Eigen::VectorXd r = rhs - K * x;
    x += ldlt.solve(r);
  } else {
    Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
    cg.setTolerance(opts.cg_tolerance);
    cg.setMaxIterations(opts.cg_max_iterations);
    cg.compute(K);
    x = cg.solve(rhs);
    if (cg.info() != Eigen::Success) throw NumericalError("conjugate gradient did not converge");
  }
  const double rel = (rhs - K * x).norm() / rhs.norm();
  if (!(rel <= 1e-10)) throw NumericalError("linear solve residual above 1e-10");

  TorsionSolution sol;
  sol.mesh = m;
  sol.relative_residual = rel;
  sol.u.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (dof[i] >= 0) sol.u[i] = x[dof[i]];
  sol.grad.resize(m.triangles.size());
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const auto& tri = m.triangles[t];
    const LocalP1 l = local_p1(m.nodes[tri[0]], m.nodes[tri[1]], m.nodes[tri[2]]);
    Vec2 g;
    for (int k = 0; k < 3; ++k) g += Vec2{l.bx[k], l.by[k]} * sol.u[tri[k]];
    sol.grad[t] = g / (2.0 * l.area);
  }
  sol.u_max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    if (sol.u[i] > sol.u_max) {
      sol.u_max = sol.u[i];
      sol.u_argmax_node = static_cast<int>(i);
    }
  sol.u_argmax = m.nodes[static_cast<std::size_t>(sol.u_argmax_node)];
  sol.locator = std::make_shared<TriangleLocator>(sol.mesh);
  return sol;
}

BoundaryGradientProfile boundary_gradient(const TorsionSolution& sol, const ConvexPolygon& p, int n_samples,
                                          const std::vector<double>& delta_factors) {
  if (n_samples < 1) throw InvalidInput("n_samples must be positive");
  if (delta_factors.size() < 2) throw InvalidInput("at least two probe depths are required");
  for (std::size_t i = 0; i < delta_factors.size(); ++i) {
    if (!(delta_factors[i] > 0.0)) throw InvalidInput("probe depths must be positive");
    if (i > 0 && !(delta_factors[i] < delta_factors[i - 1]))
      throw InvalidInput("probe depths must be strictly decreasing");
  }
  if (delta_factors.back() < 2.0) throw InvalidInput("smallest probe depth must be at least two element sizes");

  // Mesh boundary segments grouped by polygon edge, sorted along the edge.
  const std::size_t ne = p.size();
  std::vector<std::vector<std::pair<double, double>>> spans(ne);  // (t_begin, t_end) along edge
  for (const BoundaryEdge& e : sol.mesh.boundary_edges) {
    const std::size_t k = static_cast<std::size_t>(e.polygon_edge);
    if (k >= ne) throw InvalidInput("mesh does not belong to this polygon");
    const Vec2 d = p.edge(k);
    const double l2 = dot(d, d);
    const double ta = dot(sol.mesh.nodes[e.a] - p[k], d) / l2;
    const double tb = dot(sol.mesh.nodes[e.b] - p[k], d) / l2;
    spans[k].push_back({std::min(ta, tb), std::max(ta, tb)});
  }
  for (auto& s : spans) std::sort(s.begin(), s.end());
  auto local_length = [&](std::size_t k, double t) {
    const auto& s = spans[k];
    if (s.empty()) return norm(p.edge(k));
    auto it = std::upper_bound(s.begin(), s.end(), std::make_pair(t, std::numeric_limits<double>::infinity()));
    if (it != s.begin()) --it;
    return (it->second - it->first) * norm(p.edge(k));
  };

  const double perimeter = polygon_perimeter(p.vertices());
  BoundaryGradientProfile prof;
  prof.samples.reserve(static_cast<std::size_t>(n_samples));
  std::size_t edge = 0;
  double edge_start = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    // half-step offset: on a regular n-gon with n samples they land on edge
    // midpoints rather than on the vertices, where the gradient dips to zero
    const double arc = perimeter * (static_cast<double>(s) + 0.5) / static_cast<double>(n_samples);
    while (edge + 1 < ne && arc >= edge_start + norm(p.edge(edge))) {
      edge_start += norm(p.edge(edge));
      ++edge;
    }
    const double len = norm(p.edge(edge));
    const double t = std::clamp((arc - edge_start) / len, 0.0, 1.0);
    ProbeSample sample;
    sample.z = p[edge] + p.edge(edge) * t;
    double ell = local_length(edge, t);
    if (t == 0.0) {
      const std::size_t prev = (edge + ne - 1) % ne;
      const Vec2 nb = (p.outward_normal(prev) + p.outward_normal(edge)) * -1.0;
      sample.normal = nb / norm(nb);
      ell = std::max(ell, local_length(prev, 1.0));
    } else {
      sample.normal = p.outward_normal(edge) * -1.0;
    }

    // Near an acute corner the deepest probe can leave through a neighbouring
    // edge; shrink the depths for this sample so that it stays inside. Exits
    // through any farther edge mean the depths are too large for the domain.
    double room = std::numeric_limits<double>::infinity();
    for (std::size_t off : {ne - 2, ne - 1, std::size_t{1}}) {
      if (off == ne - 2 && t != 0.0) continue;  // only a vertex sample borders edge - 2
      const std::size_t k = (edge + off) % ne;
      const Vec2 n = p.outward_normal(k);
      const double nd = dot(n, sample.normal);
      if (nd > 1e-12) room = std::min(room, dot(n, p[k] - sample.z) / nd);
    }
    if (delta_factors.front() * ell > 0.9 * room) ell = 0.9 * room / delta_factors.front();

    std::vector<std::pair<double, double>> valid;  // (delta, ratio)
    for (double f : delta_factors) {
      const double delta = f * ell;
      const Vec2 q = sample.z + sample.normal * delta;
      if (!p.contains(q)) continue;
      const auto val = sol.value_at(q);
      if (!val) continue;
      valid.push_back({delta, *val / delta});
    }
    if (valid.size() < 2) throw NumericalError("fewer than two valid probe depths at a boundary sample");
    const auto [d1, r1] = valid[valid.size() - 2];
    const auto [d2, r2] = valid[valid.size() - 1];
    sample.g = std::max(0.0, (d1 * r2 - d2 * r1) / (d1 - d2));
    sample.g_smallest = r2;
    if (prof.samples.empty() || sample.g > prof.g_max) {
      prof.g_max = sample.g;
      prof.z_max = sample.z;
      prof.argmax = prof.samples.size();
    }
    prof.samples.push_back(sample);
  }
  return prof;
}

GradientSup sup_gradient(const TorsionSolution& sol, const BoundaryGradientProfile& profile, double tol_fraction) {
  GradientSup s;
  s.boundary_max = profile.g_max;
  for (std::size_t t = 0; t < sol.grad.size(); ++t) {
    const double g = norm(sol.grad[t]);
    if (g > s.element_max) {
      s.element_max = g;
      const auto& tri = sol.mesh.triangles[t];
      s.element_max_at = (sol.mesh.nodes[tri[0]] + sol.mesh.nodes[tri[1]] + sol.mesh.nodes[tri[2]]) / 3.0;
    }
  }
  if (s.boundary_max >= s.element_max) {
    s.g_max = s.boundary_max;
    s.z_max = profile.z_max;
  } else {
    s.g_max = s.element_max;
    s.z_max = s.element_max_at;
  }
  s.max_on_boundary = s.boundary_max >= s.element_max - tol_fraction * s.g_max;
  return s;
}

GradientSup sup_gradient(const TorsionSolution& sol, const ConvexPolygon& p, int n_samples) {
  return sup_gradient(sol, boundary_gradient(sol, p, n_samples));
}

LevelCurve superlevel_curve(const TorsionSolution& sol, double c) {
  if (!(c > 0.0 && c < sol.u_max)) throw InvalidInput("level must lie strictly between 0 and u_max");
  const TriMesh& m = sol.mesh;
  using Key = std::pair<int, int>;
  std::map<Key, Vec2> point;
  std::map<Key, Key> next;
  auto crossing = [&](int i, int j) {
    const Key key = std::minmax(i, j);
    auto it = point.find(key);
    if (it == point.end()) {
      const int lo = sol.u[key.first] < c ? key.first : key.second;
      const int hi = lo == key.first ? key.second : key.first;
      const double t = (c - sol.u[lo]) / (sol.u[hi] - sol.u[lo]);
      it = point.emplace(key, m.nodes[lo] + (m.nodes[hi] - m.nodes[lo]) * t).first;
    }
    return key;
  };
  for (const auto& t : m.triangles) {
    const bool above[3] = {sol.u[t[0]] >= c, sol.u[t[1]] >= c, sol.u[t[2]] >= c};
    const int count = above[0] + above[1] + above[2];
    if (count == 0 || count == 3) continue;
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3], d = t[(k + 2) % 3];
      const bool lone = (count == 1) ? above[k] : !above[k];
      if (!lone) continue;
      const Key on_ab = crossing(a, b), on_da = crossing(d, a);
      if (count == 1)
        next[on_ab] = on_da;
      else
        next[on_da] = on_ab;
      break;
    }
  }
  if (next.empty()) throw NumericalError("level curve is empty");
  LevelCurve lc;
  lc.level = c;
  const Key first = next.begin()->first;
  Key cur = first;
  do {
    lc.ring.push_back(point.at(cur));
    auto it = next.find(cur);
    if (it == next.end()) throw NumericalError("level curve is not closed");
    cur = it->second;
    if (lc.ring.size() > next.size()) throw NumericalError("level curve traversal did not close");
  } while (cur != first);
  if (lc.ring.size() != next.size()) throw NumericalError("level curve is disconnected");
  return lc;
}

double convexity_defect(const std::vector<Vec2>& ring) {
  const double area = polygon_area(ring);
  if (!(area > 0.0)) throw InvalidInput("ring must enclose positive area");
  const std::vector<Vec2> hull = convex_hull(ring);
  return (polygon_area(hull) - area) / area;
}

std::vector<int> boundary_graph_distance(const TriMesh& m) {
  const std::size_t n = m.nodes.size();
  std::vector<std::vector<int>> adj(n);
  for (const auto& t : m.triangles)
    for (int k = 0; k < 3; ++k) {
      adj[t[k]].push_back(t[(k + 1) % 3]);
      adj[t[(k + 1) % 3]].push_back(t[k]);
    }
  std::vector<int> dist(n, -1);
  std::deque<int> q;
  for (int b : m.boundary_nodes) {
    dist[b] = 0;
    q.push_back(b);
  }
  while (!q.empty()) {
    const int v = q.front();
    q.pop_front();
    for (int w : adj[v])
      if (dist[w] < 0) {
        dist[w] = dist[v] + 1;
        q.push_back(w);
      }
  }
  return dist;
}

SubharmonicityReport subharmonicity_check(const TorsionSolution& sol, double tol_sub) {
  const TriMesh& m = sol.mesh;
  const std::size_t n = m.nodes.size();
  std::vector<Vec2> gsum(n);
  std::vector<double> wsum(n, 0.0);
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const double a = m.triangle_area(t);
    for (int v : m.triangles[t]) {
      gsum[v] += sol.grad[t] * a;
      wsum[v] += a;
    }
  }
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 g = gsum[i] / wsum[i];
    f[i] = dot(g, g);
  }
  // (K f)_i and lumped mass M_i = sum |T| / 3
  std::vector<double> kf(n, 0.0), mass(n, 0.0);
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const auto& tri = m.triangles[t];
    const LocalP1 l = local_p1(m.nodes[tri[0]], m.nodes[tri[1]], m.nodes[tri[2]]);
    for (int i = 0; i < 3; ++i) {
      mass[tri[i]] += l.area / 3.0;
      for (int j = 0; j < 3; ++j)
        kf[tri[i]] += (l.bx[i] * l.bx[j] + l.by[i] * l.by[j]) / (4.0 * l.area) * f[tri[j]];
    }
  }
  const std::vector<int> dist = boundary_graph_distance(m);
  SubharmonicityReport r;
  r.min_laplacian = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (dist[i] <= 1) {
      r.boundary_adjacent_max = std::max(r.boundary_adjacent_max, f[i]);
      continue;
    }
    ++r.deep_nodes;
    r.deep_max = std::max(r.deep_max, f[i]);
    const double lap = -kf[i] / mass[i];
    r.min_laplacian = std::min(r.min_laplacian, lap);
    if (lap < -tol_sub) ++r.violations;
  }
  r.violation_fraction = r.deep_nodes ? static_cast<double>(r.violations) / static_cast<double>(r.deep_nodes) : 0.0;
  return r;
}

}  // namespace torsion
