#include <cmath>
#include <random>

#include "doctest.h"
#include "dissect/error.hpp"
#include "dissect/metrics.hpp"
#include "dissect/synthetic.hpp"
#include "json.hpp"

using namespace dissect;

namespace {

WorkerTrace busy(int worker, std::vector<std::pair<double, double>> spans) {
  WorkerTrace t;
  t.worker = worker;
  for (auto [a, b] : spans) t.intervals.push_back({a, b, 0, Phase::Condense});
  return t;
}

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::InvalidArgument;
}

double total_cost(const PartitionTree& t, const CostModel& cost) {
  double s = 0.0;
  for (const TreeNode& n : t.nodes) {
    s += condense_flops(n.eliminated_dofs.size(), n.interface_dofs.size()) / cost.flop_rate + cost.task_overhead;
    s += backsub_flops(n.eliminated_dofs.size(), n.interface_dofs.size()) / cost.flop_rate + cost.task_overhead;
  }
  return s;
}

ParallelOptions sim(int workers) {
  ParallelOptions o;
  o.workers = workers;
  o.clock = ClockMode::Simulated;
  return o;
}

}  // namespace

TEST_CASE("working_index examples") {
  CHECK(working_index(busy(0, {{0, 6}}), 10.0) == doctest::Approx(0.6));
  CHECK(working_index(busy(0, {{0, 10}}), 10.0) == 1.0);
  CHECK(working_index(busy(0, {{1, 2}, {4, 7}}), 10.0) == doctest::Approx(0.4));
  CHECK(working_index(busy(0, {}), 10.0) == 0.0);
  CHECK(working_index(busy(0, {{5, 6}}), PhaseWindow{5, 7}) == doctest::Approx(0.5));
}

TEST_CASE("working_index rejects malformed traces") {
  CHECK(kind_of([] { working_index(busy(0, {{0, 5}, {4, 6}}), 10.0); }) == ErrorKind::InvalidTrace);
  CHECK(kind_of([] { working_index(busy(0, {{0, 5}}), 0.0); }) == ErrorKind::InvalidTrace);
  CHECK(kind_of([] { working_index(busy(0, {{3, 3}}), 10.0); }) == ErrorKind::InvalidTrace);
  CHECK(kind_of([] { working_index(busy(0, {{8, 12}}), 10.0); }) == ErrorKind::InvalidTrace);
}

TEST_CASE("level_cut_profile examples") {
  const auto a = level_cut_profile(64);
  CHECK(a.level == 1);
  CHECK(a.active == std::vector<long long>{8, 1});
  const auto b = level_cut_profile(1);
  CHECK(b.level == 0);
  CHECK(b.active == std::vector<long long>{1});
  const auto c = level_cut_profile(4171);
  CHECK(c.level == 4);
  CHECK(c.active == std::vector<long long>{4096, 512, 64, 8, 1});
  CHECK(kind_of([] { level_cut_profile(0); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("level_cut_profile follows the logarithm formula and shrinks by b per level") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 500; ++trial) {
    const int b = 2 + static_cast<int>(rng() % 9);
    const long long n = 1 + static_cast<long long>(rng() % 1000000);
    const auto prof = level_cut_profile(n, b);
    // Oracle in long double; exact powers are checked separately above.
    const long double lg = std::log(static_cast<long double>(n)) / std::log(static_cast<long double>(b));
    const long double r = std::round(lg);
    const bool exact_power = std::abs(lg - r) < 1e-9L && std::pow(static_cast<long double>(b), r) == n;
    const int k = exact_power ? static_cast<int>(r) : static_cast<int>(std::ceil(lg));
    CHECK(prof.level == std::max(0, k - 1));
    REQUIRE(prof.active.size() == static_cast<std::size_t>(prof.level) + 1);
    CHECK(prof.active.back() == 1);
    for (std::size_t i = 1; i < prof.active.size(); ++i) CHECK(prof.active[i - 1] == b * prof.active[i]);
  }
}

TEST_CASE("report orders workers by omega with idle workers last") {
  const std::vector<WorkerTrace> traces{busy(0, {{0, 3}}), busy(1, {{0, 10}}), busy(2, {}), busy(3, {{2, 9.5}})};
  const auto r = working_index_report(traces, PhaseWindow{0, 10});
  CHECK(r.workers == std::vector<int>{1, 3, 0, 2});
  CHECK(r.omegas.back() == 0.0);
  CHECK(r.mean == doctest::Approx((1.0 + 0.75 + 0.3) / 4));
  CHECK(r.frac_above_0_9 == 0.25);
  const std::string csv = step_function_csv(r);
  CHECK(csv.rfind("worker_id,omega\n", 0) == 0);
  CHECK(csv.substr(csv.size() - 4) == "2,0\n");
}

TEST_CASE("no work is lost and speedup stays below the worker count") {
  const auto t = synthetic_tree(8, 2, octree_size_profile(2));
  for (int workers : {1, 2, 5, 9}) {
    const ParallelOptions opt = sim(workers);
    const ParallelRun run = simulate_schedule(t, partition_tasks(t, 3), opt);
    const double seq = total_cost(t, opt.cost);
    CHECK(busy_time(run.traces) == doctest::Approx(seq).epsilon(1e-12));
    const MetricsSummary s = report(run, t, seq);
    REQUIRE(s.speedup);
    CHECK(*s.speedup <= workers + 1e-12);
    CHECK(*s.efficiency == doctest::Approx(*s.speedup / workers));
    if (workers == 1) {
      CHECK(*s.speedup >= 0.9);
      CHECK(*s.speedup <= 1.0 + 1e-12);
    }
    for (double w : s.full.omegas) CHECK((w >= 0.0 && w <= 1.0));
    CHECK(s.condense.level_active.size() == 3);
  }
}

TEST_CASE("dynamic scheduling beats the static level cut") {
  const auto t = synthetic_tree(8, 3, octree_size_profile(3));
  const ParallelOptions opt = sim(16);
  const ParallelRun dyn = simulate_schedule(t, partition_tasks(t, 8), opt);
  const ParallelRun stat = run_static_levelcut(t, nullptr, opt);
  const MetricsSummary a = report(dyn, t, std::nullopt);
  const MetricsSummary b = report(stat, t, std::nullopt);
  CHECK(a.condense.mean > b.condense.mean);
  CHECK(!a.speedup);
}

TEST_CASE("summary json fields") {
  const auto t = synthetic_tree(2, 3, octree_size_profile(3));
  const ParallelRun run = simulate_schedule(t, partition_tasks(t, 2), sim(3));
  const auto j = nlohmann::json::parse(summary_json(report(run, t, 1.0)));
  for (const char* key : {"mean_omega", "frac_above_0.9", "min_omega", "span", "full_solve", "level_active",
                          "speedup", "efficiency", "n_workers", "n_traders"})
    CHECK(j.contains(key));
  CHECK(j["n_workers"] == 3);
  CHECK(j["n_traders"] == 2);
  const auto none = nlohmann::json::parse(summary_json(report(run, t, std::nullopt)));
  CHECK(none["speedup"].is_null());
}
