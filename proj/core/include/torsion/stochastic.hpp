#pragma once

#include <array>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <span>
#include <vector>

#include "torsion/fem.hpp"
#include "torsion/geometry.hpp"

namespace torsion {

/// Philox4x32-10 counter-based generator (Salmon et al.). The stream is a
/// pure function of (key, counter), so any walk can be replayed alone.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Block generate(Block counter, Key key);
};

/// Uniform doubles in [0, 1) for one walk: key from the seed and stream,
/// counter from the walk index and a running block number.
class WalkRng {
 public:
  WalkRng(std::uint64_t seed, std::uint32_t stream, std::uint64_t walk);
  double uniform();

 private:
  Philox4x32::Key key_;
  std::uint64_t walk_;
  std::uint64_t block_ = 0;
  Philox4x32::Block buf_{};
  int used_ = 2;
};

struct Disc {
  Vec2 center;
  double radius = 0.0;
};

struct WosEstimate {
  Vec2 x;
  long walks = 0;
  double eps = 0.0;
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t seed = 0;
  double mean_steps = 0.0;
};

struct HittingEstimate {
  Vec2 x;
  Disc target;
  long walks = 0;
  double eps = 0.0;
  double p_hat = 0.0;
  double std_error = 0.0;
  std::uint64_t seed = 0;
};

struct BhpRatio {
  int k = 0;
  double depth = 0.0;
  Vec2 x;
  WosEstimate u;
  HittingEstimate h;
  double ratio = 0.0;
  double std_error = 0.0;
};

struct BhpRatioScan {
  Vec2 z;
  Vec2 normal;  ///< inner unit normal
  double d0 = 0.0;
  std::vector<BhpRatio> ratios;
  double window = 0.0;  ///< max ratio / min ratio
};

/// Default absorption shell: 1e-4 x diameter.
double default_eps(const ConvexPolygon& p);

/// Walk-on-spheres estimate of the torsion function (-Laplace u = 1): each
/// jump of radius r adds r^2/4, the mean exit time of a standard Brownian
/// motion from the disc (r^2/2) halved, which matches the PDE scaling.
/// threads = 0 reads TORSION_THREADS; results do not depend on it.
WosEstimate wos_torsion(const ConvexPolygon& p, Vec2 x, long walks, double eps, std::uint64_t seed, int threads = 0);

/// Probability that Brownian motion from x reaches the disc A before
/// leaving the polygon.
HittingEstimate hitting_probability(const ConvexPolygon& p, const Disc& a, Vec2 x, long walks, double eps,
                                    std::uint64_t seed, int threads = 0);

/// u / h along the inward normal at z for depths 2^-k d0, d0 = inradius / 2.
BhpRatioScan bhp_ratio_scan(const ConvexPolygon& p, const Disc& a, Vec2 z, Vec2 inner_normal, int k_first,
                            int k_last, long walks, std::uint64_t seed, double eps = 0.0, int threads = 0);

/// Order-independent sum: fixed binary tree over the input order.
double pairwise_sum(std::span<const double> v);

/// Five interior probe points: the incenter and the midpoints of the rays
/// from it to the boundary along +-x and +-y.
std::vector<Vec2> auto_points(const ConvexPolygon& p);

struct FemComparison {
  Vec2 x;
  double fem = 0.0;
  double fem_error = 0.0;  ///< |u_h - u_{h/2}| at x, a Richardson-type bound
  WosEstimate wos;
  double tolerance = 0.0;  ///< 3 stderr + 2 fem_error
  bool agree = false;
};

/// Compare walk-on-spheres means with a solution and its refinement.
std::vector<FemComparison> compare_with_fem(const ConvexPolygon& p, const TorsionSolution& coarse,
                                            const TorsionSolution& fine, std::span<const Vec2> points, long walks,
                                            double eps, std::uint64_t seed, int threads = 0);

nlohmann::ordered_json to_json(const WosEstimate& e);
nlohmann::ordered_json to_json(const HittingEstimate& e);
nlohmann::ordered_json to_json(const BhpRatioScan& s);
nlohmann::ordered_json to_json(const FemComparison& c);

}  // namespace torsion
