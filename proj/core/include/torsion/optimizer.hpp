#pragma once

#include <cstdint>
#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "torsion/functionals.hpp"
#include "torsion/geometry.hpp"

namespace torsion {

enum class Objective { J, JP };
enum class Symmetry { none, axis };

std::string to_string(Objective o);
std::string to_string(Symmetry s);
Objective parse_objective(const std::string& s);
Symmetry parse_symmetry(const std::string& s);

struct OptConfig {
  Objective objective = Objective::J;
  /// First and last grid of the coarse-to-fine schedule (doubling).
  int n_angles = 64;
  int n_angles_final = 128;
  Symmetry symmetry = Symmetry::axis;
  /// Nelder-Mead evaluations per stage; unset means 100 x dimension, 0 means
  /// no search (the start shape is evaluated and returned).
  std::optional<int> max_evals;
  int restarts = 2;
  /// Initial simplex edge in log(h).
  double simplex_init_scale = 0.2;
  std::uint64_t rng_seed = 1;
  EvalParams eval;
  /// A simplex is rebuilt around the stage's best shape once its spread
  /// (f_best - f_worst) falls to stop_tol |f_best|, or once f_best has gained
  /// less than that over 10 x dimension evaluations. The stage budget still
  /// bounds the total.
  double stop_tol = 1e-7;
  /// Concurrent restarts; 0 reads TORSION_THREADS, falling back to the core count.
  int threads = 0;
  /// Starting support values on the first grid; empty means the unit disc.
  std::vector<double> start;

  /// Free coordinates at n angles.
  int dimension(int n) const { return symmetry == Symmetry::axis ? n / 2 + 1 : n; }
  int evals_for(int n) const { return max_evals ? *max_evals : 100 * dimension(n); }
  /// Throws InvalidInput on inconsistent settings.
  void validate() const;
};

struct HistoryEntry {
  int restart = 0;
  int stage = 0;
  long eval = 0;  ///< global index within the restart
  double objective = 0.0;
  double best_so_far = 0.0;
};

struct StageRecord {
  int n_angles = 0;
  long evals = 0;
  double best = 0.0;
};

struct ShapeAnalysis {
  SegmentReport segments;
  CornerReport corners;
  /// Position of the gradient maximizer along the longest segment, 0 at its
  /// start and 1 at its end; absent without a segment.
  std::optional<double> segment_gradient_offset;
  /// Largest exterior angle over vertices that are not segment endpoints.
  double max_exterior_off_segments = 0.0;
  double turn_tol = 0.0;
  double min_len = 0.0;
};

struct RestartResult {
  int restart = 0;
  std::vector<double> best_h;
  double best_objective = 0.0;
  double repair_norm = 0.0;
  long evals = 0;
  long failed_evals = 0;
  std::vector<StageRecord> stages;
};

struct OptTrace {
  OptConfig config;
  SupportVector best{std::vector<double>{1.0, 1.0, 1.0}};
  FunctionalReport report;
  double best_objective = 0.0;
  int best_restart = 0;
  std::vector<HistoryEntry> history;
  std::vector<StageRecord> stages;  ///< of the winning restart
  std::vector<RestartResult> restarts;
  ShapeAnalysis analysis;
};

/// Doubles the grid: midpoints take the neighbour average divided by
/// cos(pi / n_new), then the result is projected.
SupportVector upsample_support(const SupportVector& sv, std::size_t n_new);

/// Segment and corner structure of polygon_from_support(sv), located
/// against the report's gradient maximizer.
ShapeAnalysis analyze_shape(const SupportVector& sv, const FunctionalReport& report);

/// Candidate pipeline used by the search: projection, polygon, exact
/// normalization (area 1 for J, perimeter 1 for JP) and evaluation.
struct Candidate {
  SupportVector normalized{std::vector<double>{1.0, 1.0, 1.0}};
  FunctionalReport report;
  double repair_norm = 0.0;  ///< max |projected - raw| in normalized units
  double objective = 0.0;    ///< functional minus 10 x repair_norm
};
Candidate evaluate_candidate(const std::vector<double>& h_raw, Objective objective, const EvalParams& params);

nlohmann::ordered_json to_json(const OptConfig& c);
nlohmann::ordered_json to_json(const ShapeAnalysis& a);
/// Everything but the per-evaluation history.
nlohmann::ordered_json to_json(const OptTrace& t);
/// "restart,stage,eval,objective,best_so_far" rows.
std::string history_csv(const std::vector<HistoryEntry>& history);

using ProgressFn = std::function<void(const HistoryEntry&)>;
OptTrace optimize(const OptConfig& cfg, const ProgressFn& progress = {});

}  // namespace torsion
