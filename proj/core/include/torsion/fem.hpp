#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "torsion/geometry.hpp"
#include "torsion/mesh.hpp"

namespace torsion {

struct SolverOptions {
  /// Above this many unknowns the solver switches from sparse LDL^T to
  /// diagonally preconditioned conjugate gradients.
  std::size_t direct_limit = 200000;
  double cg_tolerance = 1e-10;
  int cg_max_iterations = 20000;
};

/// P1 solution of -Laplace(u) = 1 with u = 0 on the boundary.
struct TorsionSolution {
  TriMesh mesh;
  std::vector<double> u;     ///< nodal values
  std::vector<Vec2> grad;    ///< constant gradient per triangle
  double u_max = 0.0;
  int u_argmax_node = -1;
  Vec2 u_argmax;
  double relative_residual = 0.0;
  std::shared_ptr<const TriangleLocator> locator;

  /// P1 interpolation of u at p; nullopt outside the mesh.
  std::optional<double> value_at(Vec2 p) const;
};

struct ProbeSample {
  Vec2 z;
  Vec2 normal;  ///< inner unit normal
  double g = 0.0;           ///< Richardson-extrapolated boundary gradient
  double g_smallest = 0.0;  ///< single-delta ratio at the smallest probe depth
};

struct BoundaryGradientProfile {
  std::vector<ProbeSample> samples;
  double g_max = 0.0;
  Vec2 z_max;
  std::size_t argmax = 0;
};

struct GradientSup {
  double g_max = 0.0;
  Vec2 z_max;
  double boundary_max = 0.0;  ///< (a) probe profile maximum
  double element_max = 0.0;   ///< (b) largest per-triangle |grad u|
  Vec2 element_max_at;        ///< centroid of that triangle
  bool max_on_boundary = false;
};

struct LevelCurve {
  double level = 0.0;
  std::vector<Vec2> ring;  ///< closed counterclockwise polyline (not forced convex)
};

struct SubharmonicityReport {
  double violation_fraction = 0.0;
  std::size_t deep_nodes = 0;       ///< interior nodes at graph distance >= 2
  std::size_t violations = 0;
  double min_laplacian = 0.0;
  double deep_max = 0.0;            ///< max nodal |grad u|^2 over deep nodes
  double boundary_adjacent_max = 0.0;
};

TorsionSolution solve_torsion(const TriMesh& m, const SolverOptions& opts = {});

/// Inward delta-probe of the boundary gradient. delta_factors are multiples
/// of the local boundary edge length, strictly decreasing.
BoundaryGradientProfile boundary_gradient(const TorsionSolution& sol, const ConvexPolygon& p, int n_samples,
                                          const std::vector<double>& delta_factors = {8.0, 4.0});

GradientSup sup_gradient(const TorsionSolution& sol, const BoundaryGradientProfile& profile,
                         double tol_fraction = 1e-3);
GradientSup sup_gradient(const TorsionSolution& sol, const ConvexPolygon& p, int n_samples = 256);

LevelCurve superlevel_curve(const TorsionSolution& sol, double c);
/// (hull area - curve area) / curve area; zero iff the ring is convex.
double convexity_defect(const std::vector<Vec2>& ring);

SubharmonicityReport subharmonicity_check(const TorsionSolution& sol, double tol_sub = 0.1);

/// Graph distance of every node from the boundary node set.
std::vector<int> boundary_graph_distance(const TriMesh& m);

}  // namespace torsion
