#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "torsion/fem.hpp"
#include "torsion/geometry.hpp"
#include "torsion/mesh.hpp"

namespace torsion {

struct EvalParams {
  /// Mesh size as a fraction of the diameter; ignored when h_abs is set.
  double h_rel = 1.0 / 150.0;
  std::optional<double> h_abs;
  double grading = 0.5;
  int n_samples = 256;
  std::vector<double> deltas{8.0, 4.0};
  MeshOptions mesh;

  double h_for(const GeoMeasures& g) const { return h_abs ? *h_abs : h_rel * g.diameter; }
};

struct FunctionalReport {
  std::string shape_id;
  GeoMeasures measures;
  double g_max = 0.0;
  Vec2 g_max_location;
  bool max_on_boundary = false;
  double J = 0.0;
  double JP = 0.0;
  double h_target = 0.0;
  double grading = 0.0;
  int n_samples = 0;
  std::vector<double> deltas;
  std::size_t node_count = 0;
  bool bounds_ok = false;
};

/// Everything computed on the way to a report, for callers that also need
/// the field (rendering, invariant checks).
struct Evaluation {
  FunctionalReport report;
  TorsionSolution solution;
  BoundaryGradientProfile profile;
};

/// Slack on the inradius bound g_max <= r(Omega) granted to discretization.
inline constexpr double kInradiusSlack = 1.02;

Evaluation evaluate(const ConvexPolygon& p, const EvalParams& params = {}, std::string shape_id = {});
/// Same, on a caller-supplied mesh of p (used for node-scaled comparisons).
Evaluation evaluate(const ConvexPolygon& p, const TriMesh& mesh, const EvalParams& params = {},
                    std::string shape_id = {});

/// Triangulate, solve, probe and reduce to J and JP. Throws BoundViolation
/// when g_max exceeds the inradius bound.
FunctionalReport eval_functionals(const ConvexPolygon& p, const EvalParams& params = {}, std::string shape_id = {});
FunctionalReport eval_functionals(const ConvexPolygon& p, const TriMesh& mesh, const EvalParams& params = {},
                                  std::string shape_id = {});

/// g_max <= 1.02 r and r <= 2|Omega|/P (1 + 1e-9).
bool check_upper_bound(const FunctionalReport& r);

nlohmann::ordered_json to_json(const GeoMeasures& g);
nlohmann::ordered_json to_json(const FunctionalReport& r);

}  // namespace torsion
