#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dissect/scheduler.hpp"
#include "dissect/tree.hpp"

namespace dissect {

/// Static level-cut parallelism: cutting an N-leaf tree of branching b at
/// level L = max(0, ceil(log_b N) - 1) gives b^L independent subtrees, and
/// the number of active processes shrinks by b per level toward the root.
struct LevelCutProfile {
  int level = 0;
  std::vector<long long> active;  // b^L, b^(L-1), ..., 1
};

LevelCutProfile level_cut_profile(long long n_leaves, int branching = 8);

/// Busy fraction of one worker inside `window`. Throws invalid-trace for
/// overlapping or empty intervals, intervals outside the window, or an
/// empty window.
double working_index(const WorkerTrace& trace, const PhaseWindow& window);
/// Same with the window [0, span].
double working_index(const WorkerTrace& trace, double span);

struct WorkingIndexReport {
  std::vector<double> omegas;  // descending
  std::vector<int> workers;    // worker id of each entry in `omegas`
  double mean = 0.0;
  double frac_above_0_9 = 0.0;
  double span = 0.0;
  /// Peak number of concurrently running tasks per tree depth (empty
  /// without a tree).
  std::vector<int> level_active;
};

WorkingIndexReport working_index_report(const std::vector<WorkerTrace>& traces, const PhaseWindow& window,
                                        const PartitionTree* tree = nullptr);

struct MetricsSummary {
  WorkingIndexReport condense;
  WorkingIndexReport full;
  int n_workers = 0;
  int n_traders = 0;
  std::optional<double> speedup;  // needs a sequential time
  std::optional<double> efficiency;
};

/// Aggregates a parallel run. `sequential_time` is the wall (or simulated)
/// time of the same work on one processor.
MetricsSummary report(const ParallelRun& run, const PartitionTree& tree, std::optional<double> sequential_time);

/// Sum of all busy interval lengths.
double busy_time(const std::vector<WorkerTrace>& traces);

/// `worker_id,omega` rows in descending omega order.
std::string step_function_csv(const WorkingIndexReport& report);
std::string summary_json(const MetricsSummary& summary);

}  // namespace dissect
