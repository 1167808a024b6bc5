#include "torsion/functionals.hpp"

#include <cmath>

#include "torsion/error.hpp"

namespace torsion {

namespace {

Evaluation finish(const ConvexPolygon& p, const GeoMeasures& g, TorsionSolution sol, const EvalParams& params,
                  std::string shape_id) {
  Evaluation ev;
  ev.profile = boundary_gradient(sol, p, params.n_samples, params.deltas);
  const GradientSup sup = sup_gradient(sol, ev.profile);

  FunctionalReport& r = ev.report;
  r.shape_id = std::move(shape_id);
  r.measures = g;
  r.g_max = sup.g_max;
  r.g_max_location = sup.z_max;
  r.max_on_boundary = sup.max_on_boundary;
  r.J = sup.g_max / std::sqrt(g.area);
  r.JP = sup.g_max / g.perimeter;
  r.h_target = sol.mesh.h_target;
  r.grading = params.grading;
  r.n_samples = params.n_samples;
  r.deltas = params.deltas;
  r.node_count = sol.mesh.node_count();
  r.bounds_ok = r.g_max <= kInradiusSlack * g.inradius;
  if (!r.bounds_ok)
    throw BoundViolation("gradient sup " + std::to_string(r.g_max) + " exceeds 1.02 x inradius " +
                         std::to_string(g.inradius));
  ev.solution = std::move(sol);
  return ev;
}

}  // namespace

Evaluation evaluate(const ConvexPolygon& p, const EvalParams& params, std::string shape_id) {
  const GeoMeasures g = measures(p);
  const TriMesh mesh = triangulate(p, params.h_for(g), params.grading, params.mesh);
  return finish(p, g, solve_torsion(mesh), params, std::move(shape_id));
}

Evaluation evaluate(const ConvexPolygon& p, const TriMesh& mesh, const EvalParams& params, std::string shape_id) {
  const GeoMeasures g = measures(p);
  return finish(p, g, solve_torsion(mesh), params, std::move(shape_id));
}

FunctionalReport eval_functionals(const ConvexPolygon& p, const EvalParams& params, std::string shape_id) {
  return evaluate(p, params, std::move(shape_id)).report;
}

FunctionalReport eval_functionals(const ConvexPolygon& p, const TriMesh& mesh, const EvalParams& params,
                                  std::string shape_id) {
  return evaluate(p, mesh, params, std::move(shape_id)).report;
}

bool check_upper_bound(const FunctionalReport& r) {
  const GeoMeasures& g = r.measures;
  return r.g_max <= kInradiusSlack * g.inradius && g.inradius <= 2.0 * g.area / g.perimeter * (1.0 + 1e-9);
}

nlohmann::ordered_json to_json(const GeoMeasures& g) {
  nlohmann::ordered_json j;
  j["area"] = g.area;
  j["perimeter"] = g.perimeter;
  j["diameter"] = g.diameter;
  j["inradius"] = g.inradius;
  j["incenter"] = {g.incenter.x, g.incenter.y};
  return j;
}

nlohmann::ordered_json to_json(const FunctionalReport& r) {
  nlohmann::ordered_json j;
  j["shape_id"] = r.shape_id;
  j["measures"] = to_json(r.measures);
  j["g_max"] = r.g_max;
  j["g_max_location"] = {r.g_max_location.x, r.g_max_location.y};
  j["max_on_boundary"] = r.max_on_boundary;
  j["J"] = r.J;
  j["JP"] = r.JP;
  j["solver_params"] = {{"h_target", r.h_target},
                        {"grading", r.grading},
                        {"n_samples", r.n_samples},
                        {"deltas", r.deltas},
                        {"node_count", r.node_count}};
  j["bounds_ok"] = r.bounds_ok;
  return j;
}

}  // namespace torsion
