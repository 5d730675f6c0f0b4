#include <benchmark/benchmark.h>

#include "dissect/mesh.hpp"
#include "dissect/scheduler.hpp"
#include "dissect/synthetic.hpp"

using namespace dissect;

namespace {

// Simulated protocol cost alone: event handling per task.
void BM_SimulateSchedule(benchmark::State& state) {
  const int depth = static_cast<int>(state.range(0));
  const PartitionTree t = synthetic_tree(8, depth, octree_size_profile(depth));
  const TraderAssignment a = partition_tasks(t, 8);
  ParallelOptions opt;
  opt.workers = 16;
  opt.clock = ClockMode::Simulated;
  for (auto _ : state) benchmark::DoNotOptimize(simulate_schedule(t, a, opt));
  state.counters["tasks"] = benchmark::Counter(2.0 * t.size(), benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_SimulateSchedule)->DenseRange(2, 4)->Unit(benchmark::kMillisecond);

void BM_RunParallelThreaded(benchmark::State& state) {
  Mesh m = generate_mesh({6, 6, 6, {1, 1, 1}, 2});
  manufactured_problem(m, ManufacturedCase::Trig);
  const PartitionTree t = build_partition(m, 2.0);
  const TraderAssignment a = partition_tasks(t, 2);
  ParallelOptions opt;
  opt.workers = static_cast<int>(state.range(0));
  opt.clock = ClockMode::Real;
  for (auto _ : state) benchmark::DoNotOptimize(run_parallel(t, m, a, opt));
}
BENCHMARK(BM_RunParallelThreaded)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace
