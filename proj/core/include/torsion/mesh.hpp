#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "torsion/geometry.hpp"

namespace torsion {

struct BoundaryEdge {
  int a = 0;             ///< tail node (domain on the left of a -> b)
  int b = 0;             ///< head node
  int polygon_edge = 0;  ///< index of the polygon edge the segment lies on
};

/// Conforming triangulation of a convex polygon with tagged boundary.
struct TriMesh {
  std::vector<Vec2> nodes;
  std::vector<std::array<int, 3>> triangles;  ///< counterclockwise
  std::vector<int> boundary_nodes;            ///< ascending
  std::vector<BoundaryEdge> boundary_edges;
  double h_target = 0.0;
  std::vector<Vec2> polygon;  ///< vertices of the meshed polygon

  std::size_t node_count() const { return nodes.size(); }
  std::size_t triangle_count() const { return triangles.size(); }
  double triangle_area(std::size_t t) const;
  /// 1 for boundary nodes, 0 otherwise.
  std::vector<char> boundary_mask() const;
};

struct MeshQuality {
  double min_angle = 0.0;             ///< radians
  double max_element_diameter = 0.0;  ///< longest edge
  std::size_t node_count = 0;
  std::size_t triangle_count = 0;
};

struct MeshOptions {
  double min_angle_deg = 20.0;
  /// Passes of optimal-Delaunay node smoothing after refinement.
  int smoothing_passes = 6;
};

/// Quality triangulation of a convex polygon. Boundary spacing is
/// h_target * (1 - 0.5 * grading); interior elements target h_target.
TriMesh triangulate(const ConvexPolygon& p, double h_target, double grading, const MeshOptions& opts = {});
/// Uniform 1 -> 4 midpoint refinement; old nodes keep their indices.
TriMesh refine(const TriMesh& m);
MeshQuality quality(const TriMesh& m);
/// Multiply every node coordinate by t (same topology).
TriMesh scale_mesh(const TriMesh& m, double t);
/// Structural validation; returns an empty string when the mesh is valid.
std::string validate_mesh(const TriMesh& m);

/// Bucket-grid point location over a mesh. The grid does not keep a
/// reference; queries take the mesh it was built from.
class TriangleLocator {
 public:
  explicit TriangleLocator(const TriMesh& m);

  struct Hit {
    int triangle = -1;
    std::array<double, 3> bary{};
  };
  /// Triangle containing p (barycentric tolerance tol); nullopt outside.
  std::optional<Hit> locate(const TriMesh& m, Vec2 p, double tol = 1e-10) const;

 private:
  Vec2 lo_;
  double cell_ = 1.0;
  int nx_ = 1, ny_ = 1;
  std::vector<int> cell_start_;
  std::vector<int> cell_items_;
};

}  // namespace torsion
