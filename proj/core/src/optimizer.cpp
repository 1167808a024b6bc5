#include "torsion/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <future>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>
#include <random>
#include <thread>

#include "torsion/error.hpp"

namespace torsion {

std::string to_string(Objective o) { return o == Objective::J ? "J" : "JP"; }
std::string to_string(Symmetry s) { return s == Symmetry::axis ? "axis" : "none"; }

Objective parse_objective(const std::string& s) {
  if (s == "J") return Objective::J;
  if (s == "JP") return Objective::JP;
  throw InvalidInput("objective must be J or JP, got '" + s + "'");
}

Symmetry parse_symmetry(const std::string& s) {
  if (s == "axis") return Symmetry::axis;
  if (s == "none") return Symmetry::none;
  throw InvalidInput("symmetry must be axis or none, got '" + s + "'");
}

namespace {

bool power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

void OptConfig::validate() const {
  if (!power_of_two(n_angles) || n_angles < 16) throw InvalidInput("n_angles must be a power of two >= 16");
  if (!power_of_two(n_angles_final) || n_angles_final < n_angles)
    throw InvalidInput("n_angles_final must be a power of two >= n_angles");
  for (int n = n_angles; n <= n_angles_final; n *= 2)
    if (max_evals && *max_evals != 0 && *max_evals < 100 * dimension(n))
      throw InvalidInput("max_evals must be 0 or at least 100 x dimension (" + std::to_string(100 * dimension(n)) +
                         " at n = " + std::to_string(n) + ")");
  if (max_evals && *max_evals < 0) throw InvalidInput("max_evals must be non-negative");
  if (restarts < 1) throw InvalidInput("restarts must be >= 1");
  if (!(simplex_init_scale > 0.0)) throw InvalidInput("simplex_init_scale must be positive");
  if (!(stop_tol >= 0.0)) throw InvalidInput("stop_tol must be non-negative");
  if (!start.empty() && start.size() != static_cast<std::size_t>(n_angles))
    throw InvalidInput("start support vector must have n_angles entries");
}

SupportVector upsample_support(const SupportVector& sv, std::size_t n_new) {
  const std::size_t n = sv.size();
  if (n_new != 2 * n) throw InvalidInput("upsampling must double the grid");
  const double c = std::cos(std::numbers::pi / static_cast<double>(n_new));
  std::vector<double> h(n_new);
  for (std::size_t i = 0; i < n; ++i) {
    h[2 * i] = sv[i];
    h[2 * i + 1] = 0.5 * (sv[i] + sv[(i + 1) % n]) / c;
  }
  return project_to_convex(h);
}

ShapeAnalysis analyze_shape(const SupportVector& sv, const FunctionalReport& report) {
  const ConvexPolygon poly = polygon_from_support(sv);
  const GeoMeasures g = measures(poly);
  const double step = 2.0 * std::numbers::pi / static_cast<double>(sv.size());
  ShapeAnalysis a;
  a.turn_tol = 0.25 * step;
  a.min_len = 0.05 * g.diameter;
  a.segments = detect_segments(poly, a.turn_tol, a.min_len);
  a.corners = detect_corners(poly, 3.0 * step);

  std::vector<char> endpoint(poly.size(), 0);
  for (const Segment& s : a.segments.segments) endpoint[s.start] = endpoint[s.end] = 1;
  const std::vector<double> ext = exterior_angles(poly);
  for (std::size_t i = 0; i < ext.size(); ++i)
    if (!endpoint[i]) a.max_exterior_off_segments = std::max(a.max_exterior_off_segments, ext[i]);

  if (a.segments.longest) {
    const Segment& s = a.segments.segments[*a.segments.longest];
    const Vec2 p = poly[s.start], q = poly[s.end];
    const Vec2 d = q - p;
    const double t = dot(report.g_max_location - p, d) / dot(d, d);
    a.segment_gradient_offset = std::clamp(t, 0.0, 1.0);
  }
  return a;
}

Candidate evaluate_candidate(const std::vector<double>& h_raw, Objective objective, const EvalParams& params) {
  const SupportVector sv = project_to_convex(h_raw);
  const ConvexPolygon p0 = polygon_from_support(sv);
  const double s = objective == Objective::J ? 1.0 / std::sqrt(polygon_area(p0.vertices()))
                                             : 1.0 / polygon_perimeter(p0.vertices());
  std::vector<double> hn(sv.size());
  double repair = 0.0;
  for (std::size_t i = 0; i < sv.size(); ++i) {
    hn[i] = sv[i] * s;
    repair = std::max(repair, std::abs(sv[i] - h_raw[i]) * s);
  }
  Candidate c{SupportVector(std::move(hn)), {}, repair, 0.0};
  c.report = eval_functionals(polygon_from_support(c.normalized), params);
  c.objective = (objective == Objective::J ? c.report.J : c.report.JP) - 10.0 * repair;
  return c;
}

namespace {

// Nelder-Mead with dimension-adaptive coefficients (Gao & Han), minimizing f.
class NelderMead {
 public:
  using Fn = std::function<double(const std::vector<double>&)>;

  NelderMead(Fn f, long budget, double stop_tol) : f_(std::move(f)), budget_(budget), stop_tol_(stop_tol) {}

  /// Stops on budget, on a collapsed simplex, or once the best value has not
  /// improved by stop_tol (relative) over the last 10 n evaluations.

  void run(std::vector<std::vector<double>> simplex) {
    const std::size_t n = simplex.size() - 1;
    const double dn = static_cast<double>(n);
    const double alpha = 1.0, beta = 1.0 + 2.0 / dn, gamma = 0.75 - 0.5 / dn, delta = 1.0 - 1.0 / dn;
    x_ = std::move(simplex);
    fx_.clear();
    for (const auto& v : x_) {
      if (exhausted()) return;
      fx_.push_back(eval(v));
    }
    std::vector<std::size_t> order(n + 1);
    std::vector<double> c(n), xr(n), xt(n);
    double mark = std::numeric_limits<double>::infinity();
    long mark_at = evals_;
    while (!exhausted()) {
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fx_[a] < fx_[b]; });
      const std::size_t b = order[0], s = order[n - 1], w = order[n];
      if (fx_[w] - fx_[b] <= stop_tol_ * std::abs(fx_[b])) return;
      if (fx_[b] < mark - stop_tol_ * std::abs(mark) || !std::isfinite(mark)) {
        mark = fx_[b];
        mark_at = evals_;
      } else if (evals_ - mark_at >= 10 * static_cast<long>(n)) {
        return;
      }

      std::fill(c.begin(), c.end(), 0.0);
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i) c[i] += x_[order[k]][i];
      for (double& ci : c) ci /= dn;

      auto along = [&](const std::vector<double>& from, double t, std::vector<double>& out) {
        for (std::size_t i = 0; i < n; ++i) out[i] = c[i] + t * (from[i] - c[i]);
      };
      along(x_[w], -alpha, xr);
      const double fr = eval(xr);
      if (fr < fx_[b]) {
        along(xr, beta, xt);
        if (exhausted()) return accept(w, xr, fr);
        const double fe = eval(xt);
        if (fe < fr)
          accept(w, xt, fe);
        else
          accept(w, xr, fr);
        continue;
      }
      if (fr < fx_[s]) {
        accept(w, xr, fr);
        continue;
      }
      if (exhausted()) return;
      if (fr < fx_[w]) {
        along(xr, gamma, xt);
        const double fc = eval(xt);
        if (fc <= fr) {
          accept(w, xt, fc);
          continue;
        }
      } else {
        along(x_[w], gamma, xt);
        const double fc = eval(xt);
        if (fc < fx_[w]) {
          accept(w, xt, fc);
          continue;
        }
      }
      for (std::size_t k = 1; k <= n && !exhausted(); ++k) {
        auto& v = x_[order[k]];
        for (std::size_t i = 0; i < n; ++i) v[i] = x_[b][i] + delta * (v[i] - x_[b][i]);
        fx_[order[k]] = eval(v);
      }
    }
  }

  long evals() const { return evals_; }

 private:
  Fn f_;
  long budget_;
  double stop_tol_;
  long evals_ = 0;
  std::vector<std::vector<double>> x_;
  std::vector<double> fx_;

  bool exhausted() const { return evals_ >= budget_; }
  double eval(const std::vector<double>& v) {
    ++evals_;
    const double y = f_(v);
    return std::isnan(y) ? std::numeric_limits<double>::infinity() : y;
  }
  void accept(std::size_t w, const std::vector<double>& v, double f) {
    x_[w] = v;
    fx_[w] = f;
  }
};

std::vector<double> expand(const std::vector<double>& x, int n, Symmetry sym) {
  std::vector<double> h(static_cast<std::size_t>(n));
  if (sym == Symmetry::none) {
    for (int i = 0; i < n; ++i) h[i] = std::exp(x[i]);
    return h;
  }
  for (int i = 0; i <= n / 2; ++i) h[i] = std::exp(x[i]);
  for (int i = n / 2 + 1; i < n; ++i) h[i] = h[n - i];
  return h;
}

std::vector<double> free_coordinates(const SupportVector& sv, Symmetry sym) {
  const int n = static_cast<int>(sv.size());
  const int dim = sym == Symmetry::axis ? n / 2 + 1 : n;
  std::vector<double> x(static_cast<std::size_t>(dim));
  for (int i = 0; i < dim; ++i) x[i] = std::log(sv[i]);
  return x;
}

// Simplex edges along Fourier modes of the support function rather than
// single coordinates: a lone coordinate bump leaves the convex cone almost
// immediately, while mode k stays convex up to amplitude 1 / (k^2 - 1).
template <class Uniform>
std::vector<std::vector<double>> initial_simplex(const std::vector<double>& x0, int n, Symmetry sym, double scale,
                                                 int restart, Uniform& uniform) {
  const std::size_t dim = x0.size();
  std::vector<std::vector<double>> simplex(dim + 1, x0);
  for (std::size_t m = 0; m < dim; ++m) {
    // axis: cos(k theta), k = m; none: 1, cos 1, sin 1, cos 2, sin 2, ...
    const int k = sym == Symmetry::axis ? static_cast<int>(m) : static_cast<int>((m + 1) / 2);
    const bool use_sin = sym == Symmetry::none && m % 2 == 0 && m > 0;
    double amp = k <= 1 ? scale : std::min(scale, 0.5 / (static_cast<double>(k) * k - 1.0));
    if (restart > 0) amp *= (uniform() < 0.5 ? -1.0 : 1.0) * (0.5 + uniform());
    for (std::size_t i = 0; i < dim; ++i) {
      const double theta = 2.0 * std::numbers::pi * static_cast<double>(i) / n;
      simplex[m + 1][i] += amp * (use_sin ? std::sin(k * theta) : std::cos(k * theta));
    }
  }
  return simplex;
}

struct RestartRun {
  RestartResult result;
  std::optional<Candidate> best;
  std::vector<HistoryEntry> history;
};

// Candidate ordering: higher objective, then smaller repair.
bool better(const Candidate& a, const Candidate& b) {
  if (a.objective != b.objective) return a.objective > b.objective;
  return a.repair_norm < b.repair_norm;
}

RestartRun run_restart(const OptConfig& cfg, int restart, const ProgressFn& progress, std::mutex& progress_mutex) {
  RestartRun run;
  run.result.restart = restart;
  std::mt19937_64 rng(cfg.rng_seed + static_cast<std::uint64_t>(restart));
  auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

  std::vector<double> h0 = cfg.start.empty() ? std::vector<double>(cfg.n_angles, 1.0) : cfg.start;
  SupportVector sv = project_to_convex(h0);
  long global = 0;
  int stage = 0;
  double scale = cfg.simplex_init_scale;

  auto record = [&](double objective) {
    HistoryEntry e{restart, stage, global++, objective, 0.0};
    const double prev = run.history.empty() ? -std::numeric_limits<double>::infinity() : run.history.back().best_so_far;
    e.best_so_far = std::isnan(objective) ? prev : std::max(prev, objective);
    run.history.push_back(e);
    if (progress) {
      std::lock_guard<std::mutex> lock(progress_mutex);
      progress(e);
    }
  };
  std::optional<Candidate> stage_best;  // restart point for stalled simplices
  auto consider = [&](Candidate c) {
    if (!stage_best || better(c, *stage_best)) stage_best = c;
    if (!run.best || better(c, *run.best)) run.best = std::move(c);
  };

  for (int n = cfg.n_angles; n <= cfg.n_angles_final; n *= 2, ++stage) {
    if (n > cfg.n_angles) {
      // carry the best shape of the previous stage (in normalized units)
      sv = upsample_support(run.best ? run.best->normalized : sv, static_cast<std::size_t>(n));
    }
    const long budget = cfg.evals_for(n);
    const long before = global;
    if (budget == 0) {
      if (!run.best) {
        Candidate c = evaluate_candidate(std::vector<double>(sv.values().begin(), sv.values().end()), cfg.objective,
                                         cfg.eval);
        record(c.objective);
        ++run.result.evals;
        consider(std::move(c));
      }
      run.result.stages.push_back({n, global - before, run.best->objective});
      continue;
    }

    auto f = [&](const std::vector<double>& x) -> double {
      const std::vector<double> h = expand(x, n, cfg.symmetry);
      double obj = std::numeric_limits<double>::quiet_NaN();
      try {
        Candidate c = evaluate_candidate(h, cfg.objective, cfg.eval);
        obj = c.objective;
        consider(std::move(c));
      } catch (const BoundViolation&) {
        throw;
      } catch (const Error&) {
        ++run.result.failed_evals;
      }
      record(obj);
      ++run.result.evals;
      return -obj;
    };

    // A stalled simplex is rebuilt around the best shape so far at half the
    // size (down to 1/8 of the stage's starting size) until the budget is spent.
    std::vector<double> x0 = free_coordinates(sv, cfg.symmetry);
    double cycle_scale = scale;
    stage_best.reset();
    for (long left = budget; left > 0;) {
      NelderMead nm(f, left, cfg.stop_tol);
      nm.run(initial_simplex(x0, n, cfg.symmetry, cycle_scale, restart, uniform));
      left -= nm.evals();
      if (!stage_best) throw NumericalError("no candidate could be evaluated");
      x0 = free_coordinates(stage_best->normalized, cfg.symmetry);
      cycle_scale = std::max(0.5 * cycle_scale, scale / 8.0);
    }
    run.result.stages.push_back({n, global - before, run.best->objective});
    scale *= 0.5;
  }
  run.result.best_objective = run.best->objective;
  run.result.repair_norm = run.best->repair_norm;
  run.result.best_h.assign(run.best->normalized.values().begin(), run.best->normalized.values().end());
  return run;
}

int thread_count(const OptConfig& cfg) {
  if (cfg.threads > 0) return cfg.threads;
  if (const char* env = std::getenv("TORSION_THREADS")) {
    const int t = std::atoi(env);
    if (t > 0) return t;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

OptTrace optimize(const OptConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  const int threads = thread_count(cfg);
  std::mutex progress_mutex;
  std::vector<RestartRun> runs(static_cast<std::size_t>(cfg.restarts));
  std::vector<std::exception_ptr> errors(runs.size());
  for (int first = 0; first < cfg.restarts; first += threads) {
    const int last = std::min(cfg.restarts, first + threads);
    if (last - first == 1) {
      try {
        runs[first] = run_restart(cfg, first, progress, progress_mutex);
      } catch (const BoundViolation&) {
        throw;
      } catch (...) {
        errors[first] = std::current_exception();
      }
      continue;
    }
    std::vector<std::future<RestartRun>> jobs;
    for (int r = first; r < last; ++r)
      jobs.push_back(std::async(std::launch::async, [&, r] { return run_restart(cfg, r, progress, progress_mutex); }));
    for (int r = first; r < last; ++r) {
      try {
        runs[r] = jobs[r - first].get();
      } catch (const BoundViolation&) {
        throw;
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  }

  int winner = -1;
  for (int r = 0; r < cfg.restarts; ++r) {
    const RestartRun& run = runs[r];
    if (errors[r] || !run.best || std::isnan(run.best->objective)) continue;
    if (winner < 0 || better(*run.best, *runs[winner].best)) winner = r;
  }
  if (winner < 0) {
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
    throw NumericalError("all restarts diverged");
  }

  OptTrace trace;
  trace.config = cfg;
  const Candidate& best = *runs[winner].best;
  trace.best = best.normalized;
  trace.report = best.report;
  trace.best_objective = best.objective;
  trace.best_restart = winner;
  trace.stages = runs[winner].result.stages;
  for (int r = 0; r < cfg.restarts; ++r) {
    trace.history.insert(trace.history.end(), runs[r].history.begin(), runs[r].history.end());
    trace.restarts.push_back(runs[r].result);
  }
  trace.analysis = analyze_shape(trace.best, trace.report);
  return trace;
}

}  // namespace torsion

namespace torsion {

nlohmann::ordered_json to_json(const OptConfig& c) {
  nlohmann::ordered_json j;
  j["objective"] = to_string(c.objective);
  j["n_angles"] = c.n_angles;
  j["n_angles_final"] = c.n_angles_final;
  j["symmetry"] = to_string(c.symmetry);
  j["max_evals"] = c.max_evals ? nlohmann::ordered_json(*c.max_evals) : nlohmann::ordered_json("100*dimension");
  j["restarts"] = c.restarts;
  j["simplex_init_scale"] = c.simplex_init_scale;
  j["rng_seed"] = c.rng_seed;
  j["stop_tol"] = c.stop_tol;
  j["eval"] = {{"h_rel", c.eval.h_rel},
               {"h_abs", c.eval.h_abs ? nlohmann::ordered_json(*c.eval.h_abs) : nlohmann::ordered_json(nullptr)},
               {"grading", c.eval.grading},
               {"n_samples", c.eval.n_samples},
               {"deltas", c.eval.deltas}};
  return j;
}

nlohmann::ordered_json to_json(const ShapeAnalysis& a) {
  nlohmann::ordered_json j;
  j["turn_tol"] = a.turn_tol;
  j["min_len"] = a.min_len;
  j["segments"] = nlohmann::ordered_json::array();
  for (const Segment& s : a.segments.segments)
    j["segments"].push_back({{"start", s.start}, {"end", s.end}, {"length", s.length}, {"direction", s.direction}});
  j["longest_segment_length"] = a.segments.longest_length;
  j["corners"] = nlohmann::ordered_json::array();
  for (const Corner& c : a.corners.corners)
    j["corners"].push_back({{"vertex", c.vertex}, {"exterior_angle", c.exterior_angle}});
  j["max_exterior_angle"] = a.corners.max_exterior_angle;
  j["max_exterior_off_segments"] = a.max_exterior_off_segments;
  j["segment_gradient_offset"] =
      a.segment_gradient_offset ? nlohmann::ordered_json(*a.segment_gradient_offset) : nlohmann::ordered_json(nullptr);
  return j;
}

nlohmann::ordered_json to_json(const OptTrace& t) {
  nlohmann::ordered_json j;
  j["config"] = to_json(t.config);
  j["best_objective"] = t.best_objective;
  j["best_restart"] = t.best_restart;
  j["report"] = to_json(t.report);
  j["analysis"] = to_json(t.analysis);
  j["stages"] = nlohmann::ordered_json::array();
  for (const StageRecord& s : t.stages) j["stages"].push_back({{"n_angles", s.n_angles}, {"evals", s.evals}, {"best", s.best}});
  j["restarts"] = nlohmann::ordered_json::array();
  for (const RestartResult& r : t.restarts)
    j["restarts"].push_back({{"restart", r.restart},
                             {"best_objective", r.best_objective},
                             {"repair_norm", r.repair_norm},
                             {"evals", r.evals},
                             {"failed_evals", r.failed_evals}});
  j["best_support"] = std::vector<double>(t.best.values().begin(), t.best.values().end());
  return j;
}

std::string history_csv(const std::vector<HistoryEntry>& history) {
  std::string out = "restart,stage,eval,objective,best_so_far\n";
  char buf[160];
  for (const HistoryEntry& e : history) {
    std::snprintf(buf, sizeof buf, "%d,%d,%ld,%.17g,%.17g\n", e.restart, e.stage, e.eval, e.objective, e.best_so_far);
    out += buf;
  }
  return out;
}

}  // namespace torsion
