#include "torsion/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <thread>

#include "torsion/error.hpp"

namespace torsion {

Philox4x32::Block Philox4x32::generate(Block ctr, Key key) {
  constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
  constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += w0;
      key[1] += w1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

WalkRng::WalkRng(std::uint64_t seed, std::uint32_t stream, std::uint64_t walk)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32) ^ (stream * 0x9E3779B9u)},
      walk_(walk) {}

double WalkRng::uniform() {
  if (used_ == 2) {
    buf_ = Philox4x32::generate({static_cast<std::uint32_t>(walk_), static_cast<std::uint32_t>(walk_ >> 32),
                                 static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32)},
                                key_);
    ++block_;
    used_ = 0;
  }
  const std::uint64_t bits = (static_cast<std::uint64_t>(buf_[2 * used_]) << 32) | buf_[2 * used_ + 1];
  ++used_;
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

namespace {

constexpr long kMaxSteps = 1000000;

// Exact distance to the boundary from inside: min over edge lines.
class EdgeLines {
 public:
  explicit EdgeLines(const ConvexPolygon& p) {
    for (std::size_t k = 0; k < p.size(); ++k) {
      const Vec2 n = p.outward_normal(k);
      n_.push_back(n);
      c_.push_back(dot(n, p[k]));
    }
  }
  double distance(Vec2 x) const {
    double d = c_[0] - dot(n_[0], x);
    for (std::size_t k = 1; k < n_.size(); ++k) d = std::min(d, c_[k] - dot(n_[k], x));
    return d;
  }

 private:
  std::vector<Vec2> n_;
  std::vector<double> c_;
};

int resolve_threads(int threads) {
  if (threads > 0) return threads;
  if (const char* env = std::getenv("TORSION_THREADS")) {
    const int t = std::atoi(env);
    if (t > 0) return t;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

// Runs walk(i) for every i and stores the results by index, so the
// reduction order is the same for any thread count.
template <class Walk>
std::vector<double> run_walks(long walks, int threads, const Walk& walk) {
  std::vector<double> out(static_cast<std::size_t>(walks));
  const int t = std::max(1, std::min<int>(resolve_threads(threads), static_cast<int>(walks / 1000) + 1));
  auto chunk = [&](long lo, long hi) {
    for (long i = lo; i < hi; ++i) out[i] = walk(static_cast<std::uint64_t>(i));
  };
  if (t == 1) {
    chunk(0, walks);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(t);
  for (int k = 0; k < t; ++k)
    pool.emplace_back([&, k] {
      try {
        chunk(walks * k / t, walks * (k + 1) / t);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

struct MeanStd {
  double mean, std_error;
};

MeanStd reduce(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double mean = pairwise_sum(v) / n;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - mean) * (v[i] - mean);
  const double var = v.size() > 1 ? pairwise_sum(sq) / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

Vec2 jump(Vec2 x, double r, WalkRng& rng) {
  const double phi = 2.0 * std::numbers::pi * rng.uniform();
  return {x.x + r * std::cos(phi), x.y + r * std::sin(phi)};
}

void check_eps(const ConvexPolygon& p, double eps) {
  const double r = measures(p).inradius;
  if (!(eps > 0.0 && eps < 0.1 * r)) throw InvalidInput("eps must lie in (0, inradius / 10)");
}

void check_walks(long walks) {
  if (walks < 2) throw InvalidInput("at least two walks are required");
}

}  // namespace

double default_eps(const ConvexPolygon& p) { return 1e-4 * measures(p).diameter; }

WosEstimate wos_torsion(const ConvexPolygon& p, Vec2 x, long walks, double eps, std::uint64_t seed, int threads) {
  check_walks(walks);
  check_eps(p, eps);
  const EdgeLines lines(p);
  if (!(lines.distance(x) > 0.0)) throw InvalidInput("start point is not interior");

  std::vector<double> steps(static_cast<std::size_t>(walks));
  const std::vector<double> sums = run_walks(walks, threads, [&](std::uint64_t w) {
    WalkRng rng(seed, 0, w);
    Vec2 y = x;
    double sum = 0.0, comp = 0.0;  // Kahan
    long n = 0;
    for (double r = lines.distance(y); r > eps; r = lines.distance(y)) {
      if (++n > kMaxSteps) throw NumericalError("walk exceeded 1e6 steps; eps is too small");
      const double term = 0.25 * r * r - comp;
      const double t = sum + term;
      comp = (t - sum) - term;
      sum = t;
      y = jump(y, r, rng);
    }
    steps[w] = static_cast<double>(n);
    return sum;
  });
  const MeanStd ms = reduce(sums);
  WosEstimate e;
  e.x = x;
  e.walks = walks;
  e.eps = eps;
  e.mean = ms.mean;
  e.std_error = ms.std_error;
  e.seed = seed;
  e.mean_steps = pairwise_sum(steps) / static_cast<double>(walks);
  return e;
}

HittingEstimate hitting_probability(const ConvexPolygon& p, const Disc& a, Vec2 x, long walks, double eps,
                                    std::uint64_t seed, int threads) {
  check_walks(walks);
  check_eps(p, eps);
  const EdgeLines lines(p);
  if (!(a.radius > 0.0) || !(lines.distance(a.center) > a.radius))
    throw InvalidInput("target disc must lie strictly inside the polygon");
  if (!(lines.distance(x) > 0.0)) throw InvalidInput("start point is not interior");
  if (distance(x, a.center) < a.radius) throw InvalidInput("start point lies inside the target disc");

  const std::vector<double> scores = run_walks(walks, threads, [&](std::uint64_t w) {
    WalkRng rng(seed, 1, w);
    Vec2 y = x;
    for (long n = 0;; ++n) {
      if (n > kMaxSteps) throw NumericalError("walk exceeded 1e6 steps; eps is too small");
      const double d_out = lines.distance(y);
      const double d_in = distance(y, a.center) - a.radius;
      if (d_in <= eps && d_in <= d_out) return 1.0;
      if (d_out <= eps) return 0.0;
      y = jump(y, std::min(d_out, d_in), rng);
    }
  });
  const MeanStd ms = reduce(scores);
  HittingEstimate e;
  e.x = x;
  e.target = a;
  e.walks = walks;
  e.eps = eps;
  e.p_hat = ms.mean;
  e.std_error = ms.std_error;
  e.seed = seed;
  return e;
}

BhpRatioScan bhp_ratio_scan(const ConvexPolygon& p, const Disc& a, Vec2 z, Vec2 inner_normal, int k_first, int k_last,
                            long walks, std::uint64_t seed, double eps, int threads) {
  if (k_first > k_last) throw InvalidInput("empty depth range");
  for (double e : exterior_angles(p))
    if (!(e < 0.5 * std::numbers::pi)) throw InvalidInput("every exterior angle must be below pi/2");
  const double len = norm(inner_normal);
  if (!(len > 0.0)) throw InvalidInput("normal must be non-zero");
  if (eps <= 0.0) eps = default_eps(p);

  BhpRatioScan scan;
  scan.z = z;
  scan.normal = inner_normal / len;
  scan.d0 = 0.5 * measures(p).inradius;
  double lo = 0.0, hi = 0.0;
  for (int k = k_first; k <= k_last; ++k) {
    BhpRatio r;
    r.k = k;
    r.depth = std::ldexp(scan.d0, -k);
    r.x = z + scan.normal * r.depth;
    if (!p.contains(r.x) || p.signed_distance_inside(r.x) <= 0.0) throw InvalidInput("probe point leaves the domain");
    const std::uint64_t s = seed + static_cast<std::uint64_t>(k - k_first);
    r.u = wos_torsion(p, r.x, walks, eps, s, threads);
    r.h = hitting_probability(p, a, r.x, walks, eps, s, threads);
    r.ratio = r.u.mean / r.h.p_hat;
    r.std_error = std::abs(r.ratio) * std::hypot(r.u.std_error / r.u.mean, r.h.std_error / r.h.p_hat);
    lo = k == k_first ? r.ratio : std::min(lo, r.ratio);
    hi = k == k_first ? r.ratio : std::max(hi, r.ratio);
    scan.ratios.push_back(r);
  }
  scan.window = hi / lo;
  return scan;
}

std::vector<Vec2> auto_points(const ConvexPolygon& p) {
  const Vec2 c = measures(p).incenter;
  std::vector<Vec2> pts{c};
  const Vec2 dirs[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  for (Vec2 d : dirs) {
    // ray exit: smallest t with n_k . (c + t d) = c_k over edges facing d
    double t_exit = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const Vec2 n = p.outward_normal(k);
      const double nd = dot(n, d);
      if (nd > 1e-15) t_exit = std::min(t_exit, dot(n, p[k] - c) / nd);
    }
    pts.push_back(c + d * (0.5 * t_exit));
  }
  return pts;
}

std::vector<FemComparison> compare_with_fem(const ConvexPolygon& p, const TorsionSolution& coarse,
                                            const TorsionSolution& fine, std::span<const Vec2> points, long walks,
                                            double eps, std::uint64_t seed, int threads) {
  std::vector<FemComparison> out;
  std::uint64_t s = seed;
  for (Vec2 x : points) {
    const auto uc = coarse.value_at(x);
    const auto uf = fine.value_at(x);
    if (!uc || !uf) throw InvalidInput("comparison point is outside the mesh");
    FemComparison c;
    c.x = x;
    c.fem = *uf;
    c.fem_error = std::abs(*uc - *uf);
    c.wos = wos_torsion(p, x, walks, eps, s++, threads);
    c.tolerance = 3.0 * c.wos.std_error + 2.0 * c.fem_error;
    c.agree = std::abs(c.wos.mean - c.fem) <= c.tolerance;
    out.push_back(c);
  }
  return out;
}

}  // namespace torsion

namespace torsion {

namespace {
nlohmann::ordered_json point(Vec2 p) { return {p.x, p.y}; }
}  // namespace

nlohmann::ordered_json to_json(const WosEstimate& e) {
  nlohmann::ordered_json j;
  j["x"] = point(e.x);
  j["walks"] = e.walks;
  j["eps"] = e.eps;
  j["mean"] = e.mean;
  j["stderr"] = e.std_error;
  j["seed"] = e.seed;
  j["mean_steps"] = e.mean_steps;
  return j;
}

nlohmann::ordered_json to_json(const HittingEstimate& e) {
  nlohmann::ordered_json j;
  j["x"] = point(e.x);
  j["target"] = {{"center", point(e.target.center)}, {"radius", e.target.radius}};
  j["walks"] = e.walks;
  j["eps"] = e.eps;
  j["p_hat"] = e.p_hat;
  j["stderr"] = e.std_error;
  j["seed"] = e.seed;
  return j;
}

nlohmann::ordered_json to_json(const BhpRatioScan& s) {
  nlohmann::ordered_json j;
  j["z"] = point(s.z);
  j["normal"] = point(s.normal);
  j["d0"] = s.d0;
  j["ratios"] = nlohmann::ordered_json::array();
  for (const BhpRatio& r : s.ratios) {
    nlohmann::ordered_json e;
    e["k"] = r.k;
    e["depth"] = r.depth;
    e["x"] = point(r.x);
    e["u"] = to_json(r.u);
    e["h"] = to_json(r.h);
    e["ratio"] = r.ratio;
    e["stderr"] = r.std_error;
    j["ratios"].push_back(e);
  }
  j["window"] = s.window;
  return j;
}

nlohmann::ordered_json to_json(const FemComparison& c) {
  nlohmann::ordered_json j;
  j["x"] = point(c.x);
  j["fem"] = c.fem;
  j["fem_error"] = c.fem_error;
  j["wos"] = to_json(c.wos);
  j["tolerance"] = c.tolerance;
  j["agree"] = c.agree;
  return j;
}

}  // namespace torsion
