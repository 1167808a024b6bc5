// Acceptance suite: one PASS/FAIL line per criterion, artifacts under --out.

#include <CLI11.hpp>
#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "torsion/error.hpp"
#include "torsion/fem.hpp"
#include "torsion/functionals.hpp"
#include "torsion/io.hpp"
#include "torsion/mesh.hpp"
#include "torsion/optimizer.hpp"
#include "torsion/stochastic.hpp"

using namespace torsion;
namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool within_rel(double value, double target, double rel) { return std::abs(value - target) <= rel * std::abs(target); }

struct Shape {
  std::string name;
  ConvexPolygon polygon;
};

struct Search {
  OptConfig config;
  OptTrace trace;
  double seconds = 0.0;
};

class Suite {
 public:
  Suite(fs::path out, std::optional<int> max_evals) : out_(std::move(out)), max_evals_(max_evals) {
    fs::create_directories(out_);
  }

  Outcome disc_oracle() {
    EvalParams p;
    p.h_abs = 0.01;
    const auto t0 = std::chrono::steady_clock::now();
    const FunctionalReport r = eval_functionals(disc(), p, "disc256");
    const double secs = seconds_since(t0);
    note_bound(r);
    record("1", to_json(r));
    return {within_rel(r.J, oracle::disc_J(), 0.01) && within_rel(r.JP, oracle::disc_JP(), 0.01) && secs < 30.0,
            fmt("J %.6f (target %.6f), JP %.6f (target %.6f), %.1f s", r.J, oracle::disc_J(), r.JP, oracle::disc_JP(),
                secs)};
  }

  Outcome square_oracle() {
    const Evaluation ev = evaluate(square(), EvalParams{}, "square");
    note_bound(ev.report);
    const std::optional<double> uc = ev.solution.value_at({0.5, 0.5});
    ojson j = to_json(ev.report);
    j["u_center"] = uc ? ojson(*uc) : ojson(nullptr);
    record("2", j);
    const double g = oracle::square_g(), u = oracle::square_u(0.5, 0.5);
    const bool pass = uc && within_rel(*uc, u, 0.001) && within_rel(ev.report.g_max, g, 0.01) &&
                      within_rel(ev.report.J, g, 0.01);
    return {pass, fmt("u(center) %.6f (target %.6f), g_max %.5f, J %.5f (target %.5f)", uc.value_or(NAN), u,
                      ev.report.g_max, ev.report.J, g)};
  }

  Outcome search_J() { return search(Objective::J, 0.350, 0.365, 0.3577); }
  Outcome search_JP() { return search(Objective::JP, 0.097, 0.101, 0.0988); }

  Outcome segments() {
    Outcome o{true, ""};
    for (Objective obj : {Objective::J, Objective::JP}) {
      const Search& s = need(obj);
      const ShapeAnalysis& a = s.trace.analysis;
      const double diam = s.trace.report.measures.diameter;
      const double len = a.segments.longest ? a.segments.longest_length : 0.0;
      const double off = a.segment_gradient_offset.value_or(NAN);
      const bool pass = len >= 0.2 * diam && off >= 0.25 && off <= 0.75;
      o.pass = o.pass && pass;
      o.detail += fmt("%s%s: longest segment %.4f = %.3f diam, g_max offset %.3f", o.detail.empty() ? "" : "; ",
                      to_string(obj).c_str(), len, len / diam, off);
    }
    return o;
  }

  Outcome no_corners() {
    Outcome o{true, ""};
    const double limit = 3.0 * 2.0 * std::numbers::pi / 128.0;
    for (Objective obj : {Objective::J, Objective::JP}) {
      const Search& s = need(obj);
      const double e = s.trace.analysis.max_exterior_off_segments;
      o.pass = o.pass && s.trace.best.size() == 128 && e <= limit;
      o.detail += fmt("%s%s: %zu-gon, max exterior angle off segments %.4f (limit %.4f)",
                      o.detail.empty() ? "" : "; ", to_string(obj).c_str(), s.trace.best.size(), e, limit);
    }
    return o;
  }

  Outcome subharmonicity() {
    Outcome o{true, ""};
    for (const Shape& s : benchmark_shapes()) {
      const SubharmonicityReport r = subharmonicity_check(field(s).solution);
      o.pass = o.pass && r.violation_fraction <= 0.01;
      o.detail += fmt("%s%s %.4f of %zu", o.detail.empty() ? "violations " : ", ", s.name.c_str(),
                      r.violation_fraction, r.deep_nodes);
    }
    return o;
  }

  Outcome superlevel_convexity() {
    Outcome o{true, ""};
    for (const Shape& s : benchmark_shapes()) {
      const TorsionSolution& sol = field(s).solution;
      double worst = 0.0;
      for (double f : {0.2, 0.5, 0.8}) worst = std::max(worst, convexity_defect(superlevel_curve(sol, f * sol.u_max).ring));
      o.pass = o.pass && worst <= 1e-3;
      o.detail += fmt("%s%s %.2e", o.detail.empty() ? "worst defect " : ", ", s.name.c_str(), worst);
    }
    return o;
  }

  Outcome inradius_bound() {
    // eval throws on g_max > 1.02 r; every criterion above funnels through it
    return {bound_violations_ == 0,
            fmt("%ld bound violations; tightest g_max / inradius seen %.4f", bound_violations_, worst_bound_ratio_)};
  }

  Outcome scale_invariance() {
    Outcome o{true, ""};
    for (const Shape& s : {Shape{"disc", disc()}, Shape{"square", square()}}) {
      const EvalParams p;
      const TriMesh mesh = triangulate(s.polygon, p.h_for(measures(s.polygon)), p.grading, p.mesh);
      const FunctionalReport base = eval_functionals(s.polygon, mesh, p);
      note_bound(base);
      for (double t : {0.5, 3.0}) {
        const FunctionalReport r = eval_functionals(scale(s.polygon, t), scale_mesh(mesh, t), p);
        note_bound(r);
        const double d = std::abs(r.J - base.J);
        o.pass = o.pass && d <= 1e-10;
        o.detail += fmt("%s%s t=%g |dJ| %.1e", o.detail.empty() ? "" : ", ", s.name.c_str(), t, d);
      }
    }
    return o;
  }

  Outcome stochastic_cross_check() {
    const Search& s = need(Objective::J);
    const ConvexPolygon poly = polygon_from_support(s.trace.best);
    const TorsionSolution& coarse = field({"J-optimal", poly}).solution;
    const TorsionSolution fine = solve_torsion(refine(coarse.mesh));
    const std::vector<Vec2> pts = auto_points(poly);
    const auto cmp = compare_with_fem(poly, coarse, fine, pts, 100000, default_eps(poly), 11);
    ojson j = ojson::array();
    Outcome o{true, ""};
    for (const FemComparison& c : cmp) {
      j.push_back(to_json(c));
      o.pass = o.pass && c.agree;
      o.detail += fmt("%s%.2f", o.detail.empty() ? "|wos - fem| / tolerance " : ", ",
                      std::abs(c.wos.mean - c.fem) / c.tolerance);
    }
    record("11", j);
    return o;
  }

  Outcome bhp_window() {
    const ConvexPolygon oct = regular_polygon(8);
    const BhpRatioScan s = bhp_ratio_scan(oct, {{0.0, 0.0}, 0.3}, {1.0, 0.0}, {-1.0, 0.0}, 3, 8, 100000, 5);
    record("12", to_json(s));
    return {s.ratios.size() == 6 && s.window <= 20.0, fmt("window %.3f over depths 2^-3..2^-8 of d0", s.window)};
  }

  Outcome determinism() {
    Outcome o{true, ""};
    auto check = [&](const std::string& what, bool same) {
      o.pass = o.pass && same;
      o.detail += (o.detail.empty() ? "" : ", ") + what + (same ? " identical" : " DIFFERS");
    };
    const std::map<std::string, std::string> first = records_;
    disc_oracle();
    check("1", records_.at("1") == first.at("1"));
    square_oracle();
    check("2", records_.at("2") == first.at("2"));

    // A second full search would add another hour and a half, and a smaller
    // budget is not a valid configuration. The original configuration is
    // replayed instead and cut off after a fixed number of evaluations per
    // restart; every objective seen must match the first run bit for bit.
    // The winning shape is re-evaluated and its report compared byte for byte.
    struct Cutoff {};
    constexpr long kReplay = 300;
    for (Objective obj : {Objective::J, Objective::JP}) {
      const Search& s = need(obj);
      std::vector<HistoryEntry> seen;
      std::map<int, long> per_restart;
      try {
        optimize(s.config, [&](const HistoryEntry& e) {
          seen.push_back(e);
          if (++per_restart[e.restart] >= kReplay) throw Cutoff{};
        });
      } catch (const Cutoff&) {
      }
      bool same = per_restart.size() == static_cast<std::size_t>(s.config.restarts);
      for (const HistoryEntry& e : seen) {
        const auto it = std::find_if(s.trace.history.begin(), s.trace.history.end(), [&](const HistoryEntry& o) {
          return o.restart == e.restart && o.eval == e.eval;
        });
        same = same && it != s.trace.history.end() && it->stage == e.stage &&
               std::bit_cast<std::uint64_t>(it->objective) == std::bit_cast<std::uint64_t>(e.objective);
      }
      check(to_string(obj) + fmt(" replay (%zu evaluations)", seen.size()), same);

      FunctionalReport again = eval_functionals(polygon_from_support(s.trace.best), s.config.eval);
      again.shape_id = s.trace.report.shape_id;
      check(to_string(obj) + " best report", dump_json(to_json(again)) == dump_json(to_json(s.trace.report)));
    }
    return o;
  }

  void note_bound(const FunctionalReport& r) {
    worst_bound_ratio_ = std::max(worst_bound_ratio_, r.g_max / r.measures.inradius);
  }
  void bound_violation() { ++bound_violations_; }

  void write_summary(const ojson& lines) const {
    ojson j;
    j["version"] = version();
    j["criteria"] = lines;
    ojson rec;
    for (const auto& [k, v] : records_) rec[k] = ojson::parse(v);
    j["records"] = rec;
    write_text(out_ / "summary.json", dump_json(j));
  }

 private:
  static ConvexPolygon disc() { return regular_polygon(256); }
  static ConvexPolygon square() { return rectangle(1.0, 1.0, {0.5, 0.5}); }

  void record(const std::string& key, const ojson& j) { records_[key] = dump_json(j); }

  Outcome search(Objective obj, double lo, double hi, double reference) {
    Search s;
    s.config.objective = obj;
    s.config.n_angles = 64;
    s.config.n_angles_final = 128;
    s.config.symmetry = Symmetry::axis;
    s.config.restarts = 2;
    s.config.rng_seed = 1;
    if (max_evals_) s.config.max_evals = *max_evals_;
    const auto t0 = std::chrono::steady_clock::now();
    s.trace = optimize(s.config);
    s.seconds = seconds_since(t0);

    const fs::path dir = out_ / to_string(obj);
    fs::create_directories(dir);
    save_shape(dir / "best_shape.json", s.trace.best);
    ojson j;
    j["version"] = version();
    j["config"] = to_json(s.config);
    j["trace"] = to_json(s.trace);
    write_text(dir / "report.json", dump_json(j));
    write_text(dir / "history.csv", history_csv(s.trace.history));
    const ConvexPolygon poly = polygon_from_support(s.trace.best);
    const Evaluation& ev = field({to_string(obj) + "-optimal", poly});
    render_svg(poly, {&ev.solution, &ev.profile, &s.trace.report}, dir / "best_shape.svg");

    // every candidate passed the hard bound inside eval; the winner is logged
    note_bound(s.trace.report);
    record(obj == Objective::J ? "3" : "4", j["trace"]);
    long evals = 0, failed = 0;
    for (const RestartResult& r : s.trace.restarts) {
      evals += r.evals;
      failed += r.failed_evals;
    }
    const double best = obj == Objective::J ? s.trace.report.J : s.trace.report.JP;
    searches_[obj] = std::move(s);
    const Search& done = searches_.at(obj);
    return {best >= lo && best <= hi,
            fmt("best %s %.5f in [%.3f, %.3f] (reference %.4f); %ld evaluations, %ld failed, %.0f s",
                to_string(obj).c_str(), best, lo, hi, reference, evals, failed, done.seconds)};
  }

  const Search& need(Objective obj) const {
    const auto it = searches_.find(obj);
    if (it == searches_.end()) throw std::runtime_error("the " + to_string(obj) + " search did not complete");
    return it->second;
  }

  std::vector<Shape> benchmark_shapes() const {
    std::vector<Shape> v{{"disc", disc()}, {"square", square()}};
    for (Objective obj : {Objective::J, Objective::JP})
      v.push_back({to_string(obj) + "-optimal", polygon_from_support(need(obj).trace.best)});
    return v;
  }

  // Evaluations at the default mesh size (diameter / 150), cached by name.
  const Evaluation& field(const Shape& s) {
    auto it = fields_.find(s.name);
    if (it == fields_.end()) {
      it = fields_.emplace(s.name, evaluate(s.polygon, EvalParams{}, s.name)).first;
      note_bound(it->second.report);
    }
    return it->second;
  }

  fs::path out_;
  std::optional<int> max_evals_;
  std::map<Objective, Search> searches_;
  std::map<std::string, Evaluation> fields_;
  std::map<std::string, std::string> records_;
  long bound_violations_ = 0;
  double worst_bound_ratio_ = 0.0;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria for the torsion toolkit"};
  std::string out = "acceptance_runs";
  std::vector<int> only;
  std::optional<int> max_evals;
  app.add_option("--out", out, "artifact directory")->capture_default_str();
  app.add_option("--only", only, "run just these criteria (the searches run whenever a later one needs them)");
  app.add_option("--max-evals", max_evals, "per-stage search budget, for smoke runs only");
  CLI11_PARSE(app, argc, argv);

  Suite suite(out, max_evals);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"disc oracle", [&] { return suite.disc_oracle(); }},
      {"square oracle", [&] { return suite.square_oracle(); }},
      {"J search", [&] { return suite.search_J(); }},
      {"JP search", [&] { return suite.search_JP(); }},
      {"segment structure", [&] { return suite.segments(); }},
      {"no corners off segments", [&] { return suite.no_corners(); }},
      {"subharmonicity", [&] { return suite.subharmonicity(); }},
      {"superlevel convexity", [&] { return suite.superlevel_convexity(); }},
      {"inradius bound", [&] { return suite.inradius_bound(); }},
      {"scale invariance", [&] { return suite.scale_invariance(); }},
      {"walk-on-spheres cross-check", [&] { return suite.stochastic_cross_check(); }},
      {"boundary Harnack window", [&] { return suite.bhp_window(); }},
      {"determinism", [&] { return suite.determinism(); }},
  };

  std::set<int> selected(only.begin(), only.end());
  if (!selected.empty()) {
    // criteria 5-8, 11 and 13 read the search results
    const bool needs_search = std::any_of(selected.begin(), selected.end(), [](int c) {
      return (c >= 5 && c <= 8) || c == 11 || c == 13;
    });
    if (needs_search) selected.insert({3, 4});
    if (selected.count(13)) selected.insert({1, 2});
  }

  // the inradius bound covers everything evaluated, so it is judged last
  std::vector<int> order;
  for (int id = 1; id <= static_cast<int>(criteria.size()); ++id)
    if (id != 9) order.push_back(id);
  order.push_back(9);

  ojson lines = ojson::array();
  int failures = 0;
  for (const int id : order) {
    const std::size_t i = static_cast<std::size_t>(id) - 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const BoundViolation& e) {
      suite.bound_violation();
      o = {false, std::string("bound violation: ") + e.what()};
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    failures += o.pass ? 0 : 1;
    std::printf("%s %2d %s: %s [%.0f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str(),
                secs);
    std::fflush(stdout);
    lines.push_back({{"id", id}, {"name", criteria[i].first}, {"pass", o.pass}, {"detail", o.detail}, {"seconds", secs}});
  }
  suite.write_summary(lines);
  return failures == 0 ? 0 : 1;
}
