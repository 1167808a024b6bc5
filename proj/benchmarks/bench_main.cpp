#include <benchmark/benchmark.h>

#include "torsion/fem.hpp"
#include "torsion/functionals.hpp"
#include "torsion/mesh.hpp"
#include "torsion/optimizer.hpp"
#include "torsion/stochastic.hpp"

using namespace torsion;

namespace {

ConvexPolygon shape(int which) { return which == 0 ? rectangle(1.0, 1.0) : regular_polygon(256); }

void BM_Triangulate(benchmark::State& st) {
  const ConvexPolygon p = shape(static_cast<int>(st.range(0)));
  const double h = measures(p).diameter / static_cast<double>(st.range(1));
  std::size_t nodes = 0;
  for (auto _ : st) {
    const TriMesh m = triangulate(p, h, 0.5);
    nodes = m.node_count();
    benchmark::DoNotOptimize(nodes);
  }
  st.counters["nodes"] = static_cast<double>(nodes);
}
BENCHMARK(BM_Triangulate)->Args({0, 75})->Args({0, 150})->Args({1, 150})->Unit(benchmark::kMillisecond);

void BM_Solve(benchmark::State& st) {
  const ConvexPolygon p = shape(static_cast<int>(st.range(0)));
  const TriMesh m = triangulate(p, measures(p).diameter / static_cast<double>(st.range(1)), 0.5);
  for (auto _ : st) benchmark::DoNotOptimize(solve_torsion(m).u_max);
  st.counters["nodes"] = static_cast<double>(m.node_count());
}
BENCHMARK(BM_Solve)->Args({0, 75})->Args({0, 150})->Args({1, 150})->Unit(benchmark::kMillisecond);

void BM_EvalFunctionals(benchmark::State& st) {
  const ConvexPolygon p = shape(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(eval_functionals(p).J);
}
BENCHMARK(BM_EvalFunctionals)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_EvaluateCandidate(benchmark::State& st) {
  const std::vector<double> h(static_cast<std::size_t>(st.range(0)), 1.0);
  for (auto _ : st) benchmark::DoNotOptimize(evaluate_candidate(h, Objective::J, {}).objective);
}
BENCHMARK(BM_EvaluateCandidate)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_WalkOnSpheres(benchmark::State& st) {
  const ConvexPolygon p = rectangle(1.0, 1.0);
  const long walks = st.range(0);
  for (auto _ : st) benchmark::DoNotOptimize(wos_torsion(p, {0.1, 0.2}, walks, 1e-4, 1, 1).mean);
  st.SetItemsProcessed(st.iterations() * walks);
}
BENCHMARK(BM_WalkOnSpheres)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
