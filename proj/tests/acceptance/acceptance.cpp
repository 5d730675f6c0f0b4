// Acceptance run: one PASS/FAIL line per criterion with the measured values.
// Exit status is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>

#include "dissect/error.hpp"
#include "dissect/mesh.hpp"
#include "dissect/metrics.hpp"
#include "dissect/scheduler.hpp"
#include "dissect/solver.hpp"
#include "dissect/synthetic.hpp"
#include "dissect/tree.hpp"
#include "oracles.hpp"

using namespace dissect;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* title, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  const bool in_time = limit_s <= 0.0 || secs <= limit_s;
  const bool pass = out.pass && in_time;
  if (!pass) ++failures;
  std::printf("%s criterion %d: %s | %s | %.2f s", pass ? "PASS" : "FAIL", id, title, out.detail.c_str(), secs);
  if (limit_s > 0.0) std::printf(" (limit %.0f s)", limit_s);
  std::printf("\n");
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Mesh trig_mesh(int nx, int ny, int nz, int p, Extents e) {
  Mesh m = generate_mesh({nx, ny, nz, e, p});
  manufactured_problem(m, ManufacturedCase::Trig);
  return m;
}

// 1 -------------------------------------------------------------------------
Outcome oracle_equivalence() {
  struct Case {
    int nx, ny, nz, p;
    Extents e;
  };
  std::vector<Case> cases;
  for (int p = 1; p <= 3; ++p) {
    for (int n = 2; n <= 8; ++n) cases.push_back({n, n, n, p, {1, 1, 1}});
    cases.push_back({4, 1, 1, p, {4, 1, 1}});
    cases.push_back({8, 4, 2, p, {2, 1, 0.5}});
    cases.push_back({3, 5, 7, p, {0.3, 0.5, 0.7}});
  }
  double worst_err = 0.0, worst_res = 0.0;
  int checked = 0;
  std::set<int> degrees;
  bool bar = false;
  for (const Case& c : cases) {
    if (oracle::free_dof_count(c.nx, c.ny, c.nz, c.p) > 2000) continue;
    const Mesh m = trig_mesh(c.nx, c.ny, c.nz, c.p, c.e);
    const PartitionTree t = build_partition(m, 2.0);
    const Solution nd = solve_sequential(t, m).solution;
    ++checked;
    degrees.insert(c.p);
    bar = bar || (c.nx == 4 && c.ny == 1 && c.nz == 1);
    if (m.n_dofs == 0) continue;
    const Solution dense = dense_reference_solve(m);
    double num = 0.0, den = 0.0;
    for (int i = 0; i < m.n_dofs; ++i) {
      num = std::max(num, std::abs(nd.values[i] - dense.values[i]));
      den = std::max(den, std::abs(dense.values[i]));
    }
    worst_err = std::max(worst_err, num / den);
    const auto [k, d] = assemble_global(m);
    double r2 = 0.0, d2 = 0.0;
    for (int i = 0; i < m.n_dofs; ++i) {
      const double r = dot(k.row(i), nd.values) - d[i];
      r2 += r * r;
      d2 += d[i] * d[i];
    }
    worst_res = std::max(worst_res, std::sqrt(r2 / d2));
  }
  return {worst_err <= 1e-8 && worst_res <= 1e-8 && degrees.size() == 3 && bar,
          fmt("%d meshes, max rel error %.2e, max rel residual %.2e", checked, worst_err, worst_res)};
}

// 2 -------------------------------------------------------------------------
Outcome determinism() {
  const Mesh m = trig_mesh(8, 8, 8, 2, {1, 1, 1});
  const PartitionTree t = build_partition(m, 2.0);
  const Solution seq = solve_sequential(t, m).solution;
  int runs = 0, equal = 0;
  for (int traders : {1, 2, 4}) {
    const TraderAssignment a = partition_tasks(t, traders);
    for (int workers : {1, 2, 4, 8}) {
      ParallelOptions opt;
      opt.workers = workers;
      opt.clock = ClockMode::Real;
      ++runs;
      if (run_parallel(t, m, a, opt).solution == seq) ++equal;
    }
  }
  return {equal == runs, fmt("%d/%d runs bitwise equal to sequential (%d dofs, %zu nodes)", equal, runs, m.n_dofs,
                             t.size())};
}

// 3 -------------------------------------------------------------------------
std::vector<TaskKey> sources_of(const PartitionTree& t, const TaskKey& k) {
  const TreeNode& n = t.node(k.node);
  std::vector<TaskKey> out;
  if (k.phase == Phase::Condense) {
    for (NodeId c : n.children) out.push_back({c, Phase::Condense});
  } else {
    out.push_back(n.parent < 0 ? TaskKey{n.id, Phase::Condense} : TaskKey{n.parent, Phase::BackSubstitute});
  }
  return out;
}

Outcome scheduler_safety() {
  int violations = 0, duplicates = 0, missing = 0, stalls = 0;
  std::size_t tasks = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const PartitionTree t = random_tree(seed, 200);
    std::mt19937_64 rng(seed * 7919);
    ParallelOptions opt;
    opt.workers = 1 + static_cast<int>(rng() % 12);
    opt.clock = ClockMode::Simulated;
    opt.latency = {(rng() % 3) * 2e-6, (rng() % 2) * 1e-9};
    const TraderAssignment a = partition_tasks(t, 1 + static_cast<int>(rng() % 6), 1.0 + (rng() % 4));
    ParallelRun run;
    try {
      run = simulate_schedule(t, a, opt);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SchedulerStall) throw;
      ++stalls;
      continue;
    }
    std::map<TaskKey, int> count;
    std::map<TaskKey, std::pair<double, double>> when;
    for (const WorkerTrace& w : run.traces)
      for (const TraceInterval& iv : w.intervals) {
        ++count[{iv.task, iv.phase}];
        when[{iv.task, iv.phase}] = {iv.start, iv.end};
      }
    for (const TreeNode& n : t.nodes)
      for (Phase ph : {Phase::Condense, Phase::BackSubstitute}) {
        const auto it = count.find({n.id, ph});
        if (it == count.end()) ++missing;
        else if (it->second != 1) ++duplicates;
      }
    tasks += count.size();
    std::map<std::pair<TaskKey, TaskKey>, double> arrived;
    for (const DependencyArrival& d : run.arrivals) arrived[{d.dependent, d.source}] = d.time;
    for (const auto& [key, span] : when)
      for (const TaskKey& src : sources_of(t, key)) {
        const auto arr = arrived.find({key, src});
        const auto done = when.find(src);
        if (arr == arrived.end() || arr->second > span.first || done == when.end() || done->second.second > span.first)
          ++violations;
      }
  }
  return {violations == 0 && duplicates == 0 && missing == 0 && stalls == 0,
          fmt("50 trees, %zu tasks: %d dependency violations, %d duplicates, %d missing, %d stalls", tasks, violations,
              duplicates, missing, stalls)};
}

// 4 -------------------------------------------------------------------------
NodeSystem system_of(const Matrix& k, const std::vector<double>& d, std::size_t ni) {
  NodeSystem s;
  s.K = k;
  s.d = d;
  s.n_eliminated = ni;
  s.n_interface = k.rows() - ni;
  for (std::size_t i = 0; i < k.rows(); ++i) s.dof_ids.push_back(static_cast<DofId>(i));
  return s;
}

Outcome schur_properties() {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> u(-1, 1);
  double worst_sym = 0.0, min_eig = INFINITY, worst_inv = 0.0, worst_two = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 19;
    const std::size_t ni = 1 + rng() % (n - 1);
    const Matrix k = oracle::random_spd(rng, n);
    std::vector<double> d(n);
    for (double& v : d) v = u(rng);
    const Condensed one = condense(system_of(k, d, ni));
    const Eigen::MatrixXd s = oracle::to_eigen(one.schur.S);
    worst_sym = std::max(worst_sym, asymmetry(one.schur.S) / one.schur.S.max_abs());
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s).eigenvalues().minCoeff());
    const std::size_t nb = n - ni;
    const Eigen::MatrixXd expect = oracle::to_eigen(k).inverse().bottomRightCorner(nb, nb).inverse();
    worst_inv = std::max(worst_inv, (s - expect).norm() / expect.norm());
    if (ni >= 2) {
      const std::size_t first = 1 + rng() % (ni - 1);
      const Condensed a = condense(system_of(k, d, first));
      const Condensed two = condense(system_of(a.schur.S, a.schur.g, ni - first));
      const Eigen::MatrixXd s2 = oracle::to_eigen(two.schur.S);
      worst_two = std::max(worst_two, (s2 - s).norm() / s.norm());
      double gn = 0.0, gd = 0.0;
      for (std::size_t i = 0; i < nb; ++i) {
        gn += std::pow(two.schur.g[i] - one.schur.g[i], 2);
        gd += std::pow(one.schur.g[i], 2);
      }
      if (gd > 0.0) worst_two = std::max(worst_two, std::sqrt(gn / gd));
    }
  }
  return {worst_sym <= 1e-12 && min_eig > 0.0 && worst_inv <= 1e-9 && worst_two <= 1e-10,
          fmt("200 systems: asymmetry %.1e, min eigenvalue %.3g, inverse identity %.1e, two-stage %.1e", worst_sym,
              min_eig, worst_inv, worst_two)};
}

// 5 -------------------------------------------------------------------------
Outcome incremental() {
  const Mesh base = trig_mesh(6, 6, 6, 2, {1, 1, 1});
  const PartitionTree t = build_partition(base, 2.0);
  const FactorStore store0 = solve_sequential(t, base).store;
  std::mt19937_64 rng(55);
  int checks = 0, count_ok = 0, bitwise_ok = 0;

  auto expected_count = [&](const std::vector<Modification>& mods) {
    std::set<NodeId> path;
    for (const Modification& m : mods)
      for (NodeId v = *t.leaf_of(m.element); v >= 0; v = t.node(v).parent) path.insert(v);
    return static_cast<int>(path.size());
  };
  auto check = [&](const std::vector<Modification>& mods, int expect) {
    Mesh m = base;
    FactorStore store = store0;
    const IncrementalResult r = incremental_resolve(t, m, store, mods);
    Mesh fresh = base;
    for (const Modification& x : mods) scale_element(fresh, x.element, x.factor);
    ++checks;
    if (r.recompute_count == expect) ++count_ok;
    if (r.solution == solve_sequential(t, fresh).solution) ++bitwise_ok;
  };
  for (int k = 0; k < 8; ++k) {
    const ElementId e = static_cast<ElementId>(rng() % base.elements.size());
    check({{e, 2.0}}, t.node(*t.leaf_of(e)).depth + 1);
  }
  for (int m = 2; m <= 12; m += 2) {
    std::vector<Modification> mods;
    for (int k = 0; k < m; ++k)
      mods.push_back({static_cast<ElementId>(rng() % base.elements.size()), 0.5 + (rng() % 8) * 0.25});
    check(mods, expected_count(mods));
  }
  return {count_ok == checks && bitwise_ok == checks,
          fmt("%d re-solves: %d recompute counts exact, %d bitwise equal to a fresh solve (tree depth %d)", checks,
              count_ok, bitwise_ok, t.depth)};
}

// 6 -------------------------------------------------------------------------
Outcome load_balancing() {
  const PartitionTree t = synthetic_tree(8, 4, octree_size_profile(4));
  ParallelOptions opt;
  opt.workers = 16;
  opt.clock = ClockMode::Simulated;
  const ParallelRun dyn = simulate_schedule(t, partition_tasks(t, 8), opt);
  const ParallelRun stat = run_static_levelcut(t, nullptr, opt);
  const MetricsSummary a = report(dyn, t, std::nullopt);
  const MetricsSummary b = report(stat, t, std::nullopt);
  const double min_omega = a.condense.omegas.back();
  const bool pass = t.n_leaf_elements >= 4096 && min_omega >= 0.5 && a.condense.mean >= 0.75 &&
                    a.condense.mean > b.condense.mean && a.condense.frac_above_0_9 < 1.0;
  return {pass, fmt("%d leaves, dynamic: min omega %.3f, mean %.3f, frac_above_0.9 %.3f; static level cut: mean %.3f, "
                    "min %.3f; full solve dynamic mean %.3f",
                    t.n_leaf_elements, min_omega, a.condense.mean, a.condense.frac_above_0_9, b.condense.mean,
                    b.condense.omegas.back(), a.full.mean)};
}

// 7 -------------------------------------------------------------------------
Outcome level_cut() {
  const LevelCutProfile p = level_cut_profile(4171);
  std::string profile;
  for (long long a : p.active) profile += (profile.empty() ? "" : ",") + std::to_string(a);
  return {p.level == 4 && p.active == std::vector<long long>{4096, 512, 64, 8, 1},
          fmt("L = %d, profile [%s]", p.level, profile.c_str())};
}

// 8 -------------------------------------------------------------------------
Outcome p_convergence() {
  std::vector<double> err;
  for (int p = 1; p <= 3; ++p) {
    Mesh m = generate_mesh({4, 4, 4, {1, 1, 1}, p});
    const ExactSolution exact = manufactured_problem(m, ManufacturedCase::Trig);
    const PartitionTree t = build_partition(m, 2.0);
    err.push_back(l2_error(m, solve_sequential(t, m).solution.values, exact));
  }
  return {err[1] <= err[0] && err[2] <= err[1], fmt("L2 error p=1 %.3e, p=2 %.3e, p=3 %.3e", err[0], err[1], err[2])};
}

}  // namespace

int main() {
  criterion(1, "nested dissection matches the dense oracle", 60, oracle_equivalence);
  criterion(2, "parallel solves are bitwise deterministic", 120, determinism);
  criterion(3, "scheduler safety on random trees", 30, scheduler_safety);
  criterion(4, "Schur complement properties", 0, schur_properties);
  criterion(5, "incremental re-solve", 30, incremental);
  criterion(6, "load balancing on a 4096-leaf tree", 120, load_balancing);
  criterion(7, "level-cut formula", 0, level_cut);
  criterion(8, "p-convergence", 0, p_convergence);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures;
}
