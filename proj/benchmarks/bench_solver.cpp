#include <benchmark/benchmark.h>

#include <random>

#include "dissect/mesh.hpp"
#include "dissect/solver.hpp"
#include "dissect/tree.hpp"

using namespace dissect;

namespace {

NodeSystem random_system(std::size_t n, std::size_t ni) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  Matrix b(n, n);
  for (double& v : b.data()) v = u(rng);
  NodeSystem s;
  s.K = Matrix::square(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      double v = r == c ? static_cast<double>(n) : 0.0;
      for (std::size_t k = 0; k < n; ++k) v += b(r, k) * b(c, k);
      s.K(r, c) = v;
    }
  s.d.assign(n, 1.0);
  s.n_eliminated = ni;
  s.n_interface = n - ni;
  for (std::size_t i = 0; i < n; ++i) s.dof_ids.push_back(static_cast<DofId>(i));
  return s;
}

void BM_Condense(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const NodeSystem sys = random_system(n, n / 3);
  for (auto _ : state) benchmark::DoNotOptimize(condense(sys));
  state.counters["flops"] = benchmark::Counter(estimate_workload(n / 3, n - n / 3), benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_Condense)->RangeMultiplier(2)->Range(32, 512);

void BM_ElementStiffness(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  std::array<Point, 8> corners{};
  for (int c = 0; c < 8; ++c) corners[c] = {1.0 * (c & 1), 1.0 * ((c >> 1) & 1), 1.0 * ((c >> 2) & 1)};
  for (auto _ : state) benchmark::DoNotOptimize(element_stiffness(corners, p));
}
BENCHMARK(BM_ElementStiffness)->DenseRange(1, 6);

void BM_SolveSequential(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Mesh m = generate_mesh({n, n, n, {1, 1, 1}, static_cast<int>(state.range(1))});
  manufactured_problem(m, ManufacturedCase::Trig);
  const PartitionTree t = build_partition(m, 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(solve_sequential(t, m));
  state.counters["dofs"] = m.n_dofs;
}
BENCHMARK(BM_SolveSequential)->Args({4, 2})->Args({8, 1})->Args({8, 2})->Args({4, 4})->Unit(benchmark::kMillisecond);

void BM_DenseReference(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Mesh m = generate_mesh({n, n, n, {1, 1, 1}, 2});
  manufactured_problem(m, ManufacturedCase::Trig);
  for (auto _ : state) benchmark::DoNotOptimize(dense_reference_solve(m));
  state.counters["dofs"] = m.n_dofs;
}
BENCHMARK(BM_DenseReference)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);

void BM_IncrementalResolve(benchmark::State& state) {
  Mesh m = generate_mesh({8, 8, 8, {1, 1, 1}, 2});
  manufactured_problem(m, ManufacturedCase::Trig);
  const PartitionTree t = build_partition(m, 2.0);
  const FactorStore base = solve_sequential(t, m).store;
  const std::vector<Modification> mods{{100, 1.5}};
  for (auto _ : state) {
    state.PauseTiming();
    Mesh copy = m;
    FactorStore store = base;
    state.ResumeTiming();
    benchmark::DoNotOptimize(incremental_resolve(t, copy, store, mods));
  }
}
BENCHMARK(BM_IncrementalResolve)->Unit(benchmark::kMillisecond);

}  // namespace
