#pragma once

#include <limits>
#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <vector>

#include "dissect/solver.hpp"
#include "dissect/transport.hpp"
#include "dissect/tree.hpp"

namespace dissect {

enum class TaskState { Blocked, Ready, Running, Done };

/// One schedulable unit: the condensation (or back substitution) of a node.
struct Task {
  TaskKey key;
  int owner = 0;
  int deps_unmet = 0;
  TaskState state = TaskState::Blocked;
  double workload = 0.0;
  /// +inf while blocked, -workload once ready: smaller is more urgent.
  double priority = std::numeric_limits<double>::infinity();
};

/// Flops of the condensation kernel for a node (elimination plus assembly).
double condense_flops(std::size_t n_eliminated, std::size_t n_interface);
/// Flops of the two triangular solves and coupling product at a node.
double backsub_flops(std::size_t n_eliminated, std::size_t n_interface);

/// Tasks of a task-graph node that depend on a completed task.
std::vector<TaskKey> dependents(const PartitionTree& tree, const TaskKey& completed);

/// Dependency-tracked priority queue of the tasks one trader owns. Holds a
/// condensation task per owned node (waiting on the node's children) and a
/// back-substitution task (waiting on the parent's back substitution, or on
/// the node's own condensation at the root).
class TraderQueue {
 public:
  TraderQueue(int trader, const PartitionTree& tree, const TraderAssignment& assignment);

  int trader() const { return trader_; }
  bool owns(NodeId node) const;
  std::size_t size() const { return tasks_.size(); }
  std::size_t done_count() const { return done_; }
  bool all_done() const { return done_ == tasks_.size(); }

  const Task& task(const TaskKey& key) const;

  /// Ready tasks, most urgent first (priority, then smallest node id).
  std::vector<TaskKey> ready_tasks() const;
  std::optional<TaskKey> best_ready() const;

  /// ready -> running.
  void start(const TaskKey& key);

  struct Update {
    std::vector<TaskKey> newly_ready;
    /// Dependent tasks owned by other traders: (trader, dependent).
    std::vector<std::pair<int, TaskKey>> forwards;
  };

  /// Marks an owned task done and releases its dependents: local ones are
  /// decremented here, remote ones are returned for forwarding. A second
  /// completion of the same task is a protocol violation.
  Update complete(const TaskKey& key);

  /// Dependency satisfied by a task another trader completed.
  std::vector<TaskKey> deliver(const TaskKey& completed_elsewhere);

 private:
  std::vector<TaskKey> satisfy(const TaskKey& source);
  Task& mutable_task(const TaskKey& key);
  void mark_ready(Task& t);

  int trader_;
  const PartitionTree* tree_;
  const TraderAssignment* assignment_;
  std::map<TaskKey, Task> tasks_;
  std::set<std::tuple<double, NodeId, Phase>> ready_;
  std::set<std::pair<TaskKey, TaskKey>> satisfied_;  // (dependent, source)
  std::size_t done_ = 0;
};

/// One queue per trader, each holding exactly the tasks of its owned nodes.
std::vector<TraderQueue> build_task_graph(const PartitionTree& tree, const TraderAssignment& assignment);

struct TraceInterval {
  double start = 0.0;
  double end = 0.0;
  NodeId task = 0;
  Phase phase = Phase::Condense;
};

struct WorkerTrace {
  int worker = 0;
  std::vector<TraceInterval> intervals;
};

/// Time window of one phase.
struct PhaseWindow {
  double begin = 0.0;
  double end = 0.0;
  double span() const { return end - begin; }
};

/// Time the owner of `dependent` held the output of `source`.
struct DependencyArrival {
  TaskKey dependent;
  TaskKey source;
  double time = 0.0;
};

/// Compute-time model used under the simulated clock.
struct CostModel {
  double flop_rate = 1e9;       // flops per second
  double task_overhead = 1e-6;  // seconds added to every task
};

struct ParallelOptions {
  int workers = 1;
  ClockMode clock = ClockMode::Real;
  LatencyModel latency;
  CostModel cost;
};

struct ParallelRun {
  Solution solution;   // empty for cost-only runs
  FactorStore store;   // empty for cost-only runs
  std::vector<WorkerTrace> traces;
  PhaseWindow condense_window;
  PhaseWindow backsub_window;
  std::vector<DependencyArrival> arrivals;
  TransportStats transport;
  int n_traders = 0;
  ActorId master = 0;  // actor ids: master 0, traders 1..k, workers k+1..

  PhaseWindow full_window() const { return {condense_window.begin, backsub_window.end}; }
  /// Traces restricted to one phase.
  std::vector<WorkerTrace> phase_traces(Phase phase) const;
};

/// Master/trader/worker execution of the full solve on a mesh.
ParallelRun run_parallel(const PartitionTree& tree, const Mesh& mesh, const TraderAssignment& assignment,
                         const ParallelOptions& options);

/// Same protocol without numerical payloads: task durations follow the cost
/// model applied to each node's eliminated/interface counts.
ParallelRun simulate_schedule(const PartitionTree& tree, const TraderAssignment& assignment,
                              const ParallelOptions& options);

/// Static level-cut ownership: every subtree rooted at depth L (or a leaf
/// above it) is dealt to workers round-robin by node id; nodes above the cut
/// belong to the owner of their first child.
std::vector<int> levelcut_owners(const PartitionTree& tree, int n_workers, int level);

/// Static baseline without master or traders: each worker runs its fixed
/// task list in order, exchanging results directly.
/// `level` < 0 selects the level-cut level for the tree's leaf count.
ParallelRun run_static_levelcut(const PartitionTree& tree, const Mesh* mesh, const ParallelOptions& options,
                                int level = -1);

}  // namespace dissect
