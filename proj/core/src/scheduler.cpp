#include "dissect/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <memory>
#include <string>

#include "dissect/error.hpp"
#include "dissect/metrics.hpp"

namespace dissect {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

[[noreturn]] void violation(const std::string& what) { throw Error(ErrorKind::ProtocolViolation, what); }

std::size_t n_elim(const TreeNode& n) { return n.eliminated_dofs.size(); }
std::size_t n_iface(const TreeNode& n) { return n.interface_dofs.size(); }

double task_workload(const TreeNode& n, Phase phase) {
  return phase == Phase::Condense ? n.workload : backsub_flops(n_elim(n), n_iface(n));
}

}  // namespace

double condense_flops(std::size_t ni, std::size_t nb) {
  const double n = static_cast<double>(ni + nb);
  return estimate_workload(ni, nb) + n * n;
}

double backsub_flops(std::size_t ni, std::size_t nb) {
  const double i = static_cast<double>(ni), b = static_cast<double>(nb);
  return 2.0 * i * (i + b);
}

std::vector<TaskKey> dependents(const PartitionTree& tree, const TaskKey& done) {
  const TreeNode& n = tree.node(done.node);
  if (done.phase == Phase::Condense) {
    if (n.parent < 0) return {TaskKey{n.id, Phase::BackSubstitute}};
    return {TaskKey{n.parent, Phase::Condense}};
  }
  std::vector<TaskKey> out;
  out.reserve(n.children.size());
  for (NodeId c : n.children) out.push_back(TaskKey{c, Phase::BackSubstitute});
  return out;
}

// ---------------------------------------------------------------------------
// TraderQueue

TraderQueue::TraderQueue(int trader, const PartitionTree& tree, const TraderAssignment& assignment)
    : trader_(trader), tree_(&tree), assignment_(&assignment) {
  if (assignment.owner.size() != tree.size())
    throw Error(ErrorKind::InvalidArgument, "trader assignment does not cover the tree");
  for (const TreeNode& n : tree.nodes) {
    if (assignment.owner[n.id] != trader) continue;
    for (Phase phase : {Phase::Condense, Phase::BackSubstitute}) {
      Task t;
      t.key = TaskKey{n.id, phase};
      t.owner = trader;
      t.deps_unmet = phase == Phase::Condense ? static_cast<int>(n.children.size()) : 1;
      t.workload = task_workload(n, phase);
      auto& stored = tasks_.emplace(t.key, t).first->second;
      if (stored.deps_unmet == 0) mark_ready(stored);
    }
  }
}

bool TraderQueue::owns(NodeId node) const {
  return node >= 0 && static_cast<std::size_t>(node) < assignment_->owner.size() &&
         assignment_->owner[node] == trader_;
}

const Task& TraderQueue::task(const TaskKey& key) const {
  auto it = tasks_.find(key);
  if (it == tasks_.end()) violation("trader " + std::to_string(trader_) + " does not own task " + to_string(key));
  return it->second;
}

Task& TraderQueue::mutable_task(const TaskKey& key) { return const_cast<Task&>(std::as_const(*this).task(key)); }

void TraderQueue::mark_ready(Task& t) {
  t.state = TaskState::Ready;
  t.priority = -t.workload;
  ready_.emplace(t.priority, t.key.node, t.key.phase);
}

std::vector<TaskKey> TraderQueue::ready_tasks() const {
  std::vector<TaskKey> out;
  out.reserve(ready_.size());
  for (const auto& [prio, node, phase] : ready_) out.push_back(TaskKey{node, phase});
  return out;
}

std::optional<TaskKey> TraderQueue::best_ready() const {
  if (ready_.empty()) return std::nullopt;
  const auto& [prio, node, phase] = *ready_.begin();
  return TaskKey{node, phase};
}

void TraderQueue::start(const TaskKey& key) {
  Task& t = mutable_task(key);
  if (t.state != TaskState::Ready) violation("task " + to_string(key) + " started while not ready");
  ready_.erase({t.priority, key.node, key.phase});
  t.state = TaskState::Running;
}

std::vector<TaskKey> TraderQueue::satisfy(const TaskKey& source) {
  std::vector<TaskKey> ready;
  for (const TaskKey& dep : dependents(*tree_, source)) {
    if (!owns(dep.node)) continue;
    if (!satisfied_.emplace(dep, source).second)
      violation("task " + to_string(dep) + " already received the output of " + to_string(source));
    Task& t = mutable_task(dep);
    if (t.state != TaskState::Blocked || t.deps_unmet <= 0)
      violation("task " + to_string(dep) + " received an input while not blocked");
    if (--t.deps_unmet == 0) {
      mark_ready(t);
      ready.push_back(dep);
    }
  }
  return ready;
}

TraderQueue::Update TraderQueue::complete(const TaskKey& key) {
  Task& t = mutable_task(key);
  if (t.state == TaskState::Done) violation("duplicate completion of task " + to_string(key));
  if (t.state != TaskState::Running) violation("task " + to_string(key) + " completed without running");
  t.state = TaskState::Done;
  ++done_;
  Update up;
  up.newly_ready = satisfy(key);
  for (const TaskKey& dep : dependents(*tree_, key)) {
    const int owner = assignment_->owner[dep.node];
    if (owner != trader_) up.forwards.emplace_back(owner, dep);
  }
  return up;
}

std::vector<TaskKey> TraderQueue::deliver(const TaskKey& source) {
  const auto deps = dependents(*tree_, source);
  if (std::none_of(deps.begin(), deps.end(), [&](const TaskKey& d) { return owns(d.node); }))
    violation("trader " + std::to_string(trader_) + " received the output of " + to_string(source) +
              " but owns none of its dependents");
  return satisfy(source);
}

std::vector<TraderQueue> build_task_graph(const PartitionTree& tree, const TraderAssignment& assignment) {
  if (assignment.owner.size() != tree.size())
    throw Error(ErrorKind::InvalidArgument, "trader assignment does not cover the tree");
  std::vector<TraderQueue> out;
  out.reserve(static_cast<std::size_t>(assignment.n_traders));
  for (int j = 0; j < assignment.n_traders; ++j) out.emplace_back(j, tree, assignment);
  return out;
}

std::vector<WorkerTrace> ParallelRun::phase_traces(Phase phase) const {
  std::vector<WorkerTrace> out;
  out.reserve(traces.size());
  for (const auto& t : traces) {
    WorkerTrace f{t.worker, {}};
    for (const auto& iv : t.intervals)
      if (iv.phase == phase) f.intervals.push_back(iv);
    out.push_back(std::move(f));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Task bodies and payload sizes shared by both execution modes.

namespace {

struct RunSetup {
  const PartitionTree* tree = nullptr;
  const Mesh* mesh = nullptr;  // null in cost-only runs
  ParallelOptions options;

  bool numeric() const { return mesh != nullptr; }
  const TreeNode& node(NodeId id) const { return tree->node(id); }

  double cost(const TaskKey& key) const {
    const TreeNode& n = node(key.node);
    const double flops = key.phase == Phase::Condense ? condense_flops(n_elim(n), n_iface(n))
                                                      : backsub_flops(n_elim(n), n_iface(n));
    return flops / options.cost.flop_rate + options.cost.task_overhead;
  }

  // Sizes used in cost-only runs, mirroring the numeric payloads.
  std::size_t schur_bytes(NodeId id) const {
    const double b = static_cast<double>(n_iface(node(id)));
    return static_cast<std::size_t>(8 * (b * b + b) + 4 * b);
  }
  std::size_t record_bytes(NodeId id) const {
    const double i = static_cast<double>(n_elim(node(id))), b = static_cast<double>(n_iface(node(id)));
    return static_cast<std::size_t>(8 * (i * i + i * b + i) + 4 * (i + b));
  }
  std::size_t values_bytes(NodeId id) const { return 12 * (n_elim(node(id)) + n_iface(node(id))); }
  std::size_t condense_input_bytes(NodeId id) const {
    const TreeNode& n = node(id);
    std::size_t total = 0;
    for (NodeId c : n.children) total += schur_bytes(c);
    if (n.element) {
      const double m = static_cast<double>(n_elim(n) + n_iface(n));
      total += static_cast<std::size_t>(8 * (m * m + m) + 4 * m);
    }
    return total;
  }
};

std::shared_ptr<const Condensed> run_condense(const CondenseInput& in) {
  std::vector<const SchurContribution*> ptrs;
  ptrs.reserve(in.inputs.size());
  for (const auto& c : in.inputs) ptrs.push_back(c.get());
  return std::make_shared<const Condensed>(condense(assemble(std::span<const SchurContribution* const>(ptrs), in.node)));
}

std::shared_ptr<const NodeValues> run_backsub(const BacksubInput& in) {
  const EliminationRecord& rec = in.factors->record;
  const auto ui = back_substitute(rec, in.interface_values);
  auto out = std::make_shared<NodeValues>();
  out->dofs.reserve(ui.size() + rec.interface.size());
  out->values.reserve(ui.size() + rec.interface.size());
  std::size_t a = 0, b = 0;
  while (a < ui.size() || b < rec.interface.size()) {
    if (b == rec.interface.size() || (a < ui.size() && rec.eliminated[a] < rec.interface[b])) {
      out->dofs.push_back(rec.eliminated[a]);
      out->values.push_back(ui[a++]);
    } else {
      out->dofs.push_back(rec.interface[b]);
      out->values.push_back(in.interface_values[b++]);
    }
  }
  return out;
}

std::vector<double> gather_interface(const EliminationRecord& rec, const NodeValues* parent) {
  std::vector<double> ub(rec.interface.size(), std::nan(""));
  if (!parent) return ub;
  for (std::size_t k = 0; k < ub.size(); ++k) {
    auto it = std::lower_bound(parent->dofs.begin(), parent->dofs.end(), rec.interface[k]);
    if (it != parent->dofs.end() && *it == rec.interface[k])
      ub[k] = parent->values[static_cast<std::size_t>(it - parent->dofs.begin())];
  }
  return ub;
}

/// Payloads a node's owner collects for its pending tasks.
struct Inbox {
  std::map<NodeId, std::vector<std::shared_ptr<const SchurContribution>>> schur;  // by consuming node
  std::map<NodeId, std::shared_ptr<const NodeValues>> values;                     // parent values by child
  std::map<NodeId, std::shared_ptr<const Condensed>> condensed;                   // own results
  std::map<NodeId, std::shared_ptr<const NodeValues>> solved;

  void store(const TaskKey& dep, const std::shared_ptr<const SchurContribution>& s,
             const std::shared_ptr<const NodeValues>& v) {
    if (dep.phase == Phase::Condense) {
      if (s) schur[dep.node].push_back(s);
    } else if (v) {
      values[dep.node] = v;
    }
  }

  /// Builds the task payload and its wire size; releases consumed inputs.
  TaskData take(const RunSetup& setup, const TaskKey& key) {
    TaskData data;
    data.task = key;
    data.sim_cost = setup.cost(key);
    const TreeNode& n = setup.node(key.node);
    if (key.phase == Phase::Condense) {
      if (setup.numeric()) {
        auto in = std::make_shared<CondenseInput>();
        in->node = n;
        if (n.element)
          in->inputs.push_back(
              std::make_shared<const SchurContribution>(element_block(setup.mesh->element(*n.element), n.id)));
        if (auto it = schur.find(n.id); it != schur.end()) {
          in->inputs.insert(in->inputs.end(), it->second.begin(), it->second.end());
          schur.erase(it);
        }
        if (in->inputs.size() != n.children.size() + (n.element ? 1 : 0))
          violation("task " + to_string(key) + " fetched with missing inputs");
        for (const auto& c : in->inputs) data.bytes += c->byte_size();
        data.condense = std::move(in);
      } else {
        data.bytes = setup.condense_input_bytes(n.id);
      }
    } else {
      if (setup.numeric()) {
        auto in = std::make_shared<BacksubInput>();
        in->factors = condensed.at(n.id);
        std::shared_ptr<const NodeValues> parent;
        if (auto it = values.find(n.id); it != values.end()) {
          parent = it->second;
          values.erase(it);
        }
        if (n.parent >= 0 && !parent) violation("task " + to_string(key) + " fetched before its parent values");
        in->interface_values = gather_interface(in->factors->record, parent.get());
        data.bytes = in->factors->record.byte_size() + 8 * in->interface_values.size();
        data.backsub = std::move(in);
      } else {
        data.bytes = setup.record_bytes(n.id) + 8 * n_iface(n);
      }
    }
    return data;
  }
};

/// Executes a task payload on the calling worker; returns the Result.
Result execute_task(const RunSetup& setup, const TaskData& data, Context& ctx, TraceInterval& interval) {
  Result r{ctx.self(), data.task, 0, nullptr, nullptr};
  const BusyInterval busy = ctx.execute(data.sim_cost, [&] {
    if (data.condense) r.condensed = run_condense(*data.condense);
    if (data.backsub) r.values = run_backsub(*data.backsub);
  });
  interval = TraceInterval{busy.start, busy.end, data.task.node, data.task.phase};
  if (data.task.phase == Phase::Condense)
    r.bytes = r.condensed ? r.condensed->schur.byte_size() + r.condensed->record.byte_size()
                          : setup.schur_bytes(data.task.node) + setup.record_bytes(data.task.node);
  else
    r.bytes = r.values ? r.values->byte_size() : setup.values_bytes(data.task.node);
  return r;
}

std::size_t forward_bytes(const RunSetup& setup, const TaskKey& source, const Result& r) {
  if (source.phase == Phase::Condense) return r.condensed ? r.condensed->schur.byte_size() : setup.schur_bytes(source.node);
  return r.values ? r.values->byte_size() : setup.values_bytes(source.node);
}

std::shared_ptr<const SchurContribution> schur_of(const std::shared_ptr<const Condensed>& c) {
  if (!c) return nullptr;
  return std::shared_ptr<const SchurContribution>(c, &c->schur);
}

// ---------------------------------------------------------------------------
// Dynamic protocol actors. Actor ids: master 0, traders 1..k, workers k+1..

ActorId trader_actor(int trader) { return 1 + trader; }

class MasterActor final : public Actor {
 public:
  MasterActor(int n_traders, int n_workers, ActorId first_worker)
      : slots_(static_cast<std::size_t>(n_traders)), n_workers_(n_workers), first_worker_(first_worker) {}

  void receive(const Envelope& env, Context& ctx) override {
    std::visit(Overloaded{[&](const TaskRequest& m) {
                            pending_.push_back(m.worker);
                            serve(ctx);
                          },
                          [&](const Advert& m) {
                            auto& slot = slots_.at(static_cast<std::size_t>(m.trader));
                            if (slot) violation("trader " + std::to_string(m.trader) + " advertised twice");
                            slot = m.task;
                            serve(ctx);
                          },
                          [&](const TraderDone&) {
                            if (++done_ == slots_.size()) shutdown(ctx);
                          },
                          [&](const auto& m) { violation("master got " + std::string(message_name(Message(m)))); }},
               env.msg);
  }

  std::vector<std::pair<TaskKey, double>> assigned;

 private:
  void serve(Context& ctx) {
    const std::size_t k = slots_.size();
    while (!pending_.empty()) {
      std::size_t chosen = k;
      for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = (next_ + i) % k;
        if (slots_[j]) {
          chosen = j;
          break;
        }
      }
      if (chosen == k) return;
      const TaskKey task = *slots_[chosen];
      slots_[chosen].reset();
      next_ = (chosen + 1) % k;
      assigned.emplace_back(task, ctx.now());
      ctx.send(pending_.front(), Assign{task, static_cast<int>(chosen)});
      pending_.pop_front();
    }
  }

  void shutdown(Context& ctx) {
    for (int w = 0; w < n_workers_; ++w) ctx.send(first_worker_ + w, Shutdown{});
    for (std::size_t j = 0; j < slots_.size(); ++j) ctx.send(trader_actor(static_cast<int>(j)), Shutdown{});
    ctx.stop();
  }

  std::vector<std::optional<TaskKey>> slots_;
  std::deque<ActorId> pending_;
  std::size_t next_ = 0;
  std::size_t done_ = 0;
  int n_workers_;
  ActorId first_worker_;
};

class TraderActor final : public Actor {
 public:
  TraderActor(int index, const RunSetup& setup, const TraderAssignment& assignment)
      : index_(index), setup_(setup), queue_(index, *setup.tree, assignment) {}

  void start(Context& ctx) override {
    advertise(ctx);
    report_done(ctx);
  }

  void receive(const Envelope& env, Context& ctx) override {
    std::visit(Overloaded{[&](const Fetch& m) { on_fetch(m, ctx); },
                          [&](const Result& m) { on_result(m, ctx); },
                          [&](const ResultForward& m) { on_forward(m, ctx); },
                          [&](const Shutdown&) { ctx.stop(); },
                          [&](const auto& m) {
                            violation("trader " + std::to_string(index_) + " got " +
                                      std::string(message_name(Message(m))));
                          }},
               env.msg);
  }

  Inbox inbox;
  std::vector<DependencyArrival> arrivals;
  std::vector<std::pair<TaskKey, double>> results;

 private:
  void on_fetch(const Fetch& m, Context& ctx) {
    if (!advertised_ || *advertised_ != m.task)
      violation("fetch of task " + to_string(m.task) + " that trader " + std::to_string(index_) + " did not advertise");
    advertised_.reset();
    queue_.start(m.task);
    ctx.send(m.worker, inbox.take(setup_, m.task));
    advertise(ctx);
  }

  void on_result(const Result& m, Context& ctx) {
    results.emplace_back(m.task, ctx.now());
    if (m.condensed) inbox.condensed[m.task.node] = m.condensed;
    if (m.values) inbox.solved[m.task.node] = m.values;
    const auto update = queue_.complete(m.task);
    const auto schur = schur_of(m.condensed);
    for (const TaskKey& dep : dependents(*setup_.tree, m.task))
      if (queue_.owns(dep.node)) {
        inbox.store(dep, schur, m.values);
        arrivals.push_back({dep, m.task, ctx.now()});
      }
    std::vector<int> sent;
    for (const auto& [trader, dep] : update.forwards) {
      if (std::find(sent.begin(), sent.end(), trader) != sent.end()) continue;
      sent.push_back(trader);
      ctx.send(trader_actor(trader), ResultForward{m.task, forward_bytes(setup_, m.task, m), schur, m.values});
    }
    advertise(ctx);
    report_done(ctx);
  }

  void on_forward(const ResultForward& m, Context& ctx) {
    queue_.deliver(m.task);
    for (const TaskKey& dep : dependents(*setup_.tree, m.task))
      if (queue_.owns(dep.node)) {
        inbox.store(dep, m.schur, m.values);
        arrivals.push_back({dep, m.task, ctx.now()});
      }
    advertise(ctx);
  }

  void advertise(Context& ctx) {
    if (advertised_) return;
    if (auto best = queue_.best_ready()) {
      advertised_ = best;
      ctx.send(0, Advert{index_, *best});
    }
  }

  void report_done(Context& ctx) {
    if (reported_ || !queue_.all_done()) return;
    reported_ = true;
    ctx.send(0, TraderDone{index_});
  }

  int index_;
  const RunSetup& setup_;
  TraderQueue queue_;
  std::optional<TaskKey> advertised_;
  bool reported_ = false;
};

class WorkerActor final : public Actor {
 public:
  WorkerActor(int index, const RunSetup& setup) : setup_(setup) { trace.worker = index; }

  void start(Context& ctx) override { request(ctx); }

  void receive(const Envelope& env, Context& ctx) override {
    std::visit(Overloaded{[&](const Assign& m) {
                            ctx.send(trader_actor(m.trader), Fetch{ctx.self(), m.task});
                          },
                          [&](const TaskData& m) {
                            held_ = m;
                            TraceInterval iv;
                            Result r = execute_task(setup_, *held_, ctx, iv);
                            trace.intervals.push_back(iv);
                            ctx.send(env.from, std::move(r));
                            held_.reset();
                            request(ctx);
                          },
                          [&](const Shutdown&) { ctx.stop(); },
                          [&](const auto& m) {
                            violation("worker got " + std::string(message_name(Message(m))));
                          }},
               env.msg);
  }

  WorkerTrace trace;

 private:
  void request(Context& ctx) {
    if (held_) violation("worker " + std::to_string(trace.worker) + " still holds a payload at task request");
    ctx.send(0, TaskRequest{ctx.self()});
  }

  const RunSetup& setup_;
  std::optional<TaskData> held_;
};

PhaseWindow window_of(const std::vector<std::pair<TaskKey, double>>& begins,
                      const std::vector<std::pair<TaskKey, double>>& ends, Phase phase) {
  PhaseWindow w{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& [k, t] : begins)
    if (k.phase == phase) w.begin = std::min(w.begin, t);
  for (const auto& [k, t] : ends)
    if (k.phase == phase) w.end = std::max(w.end, t);
  return w;
}

void collect_outputs(const RunSetup& setup, const std::vector<const Inbox*>& boxes, ParallelRun& out) {
  if (!setup.numeric()) return;
  const PartitionTree& tree = *setup.tree;
  out.store.resize(tree.size());
  out.solution.values.assign(static_cast<std::size_t>(setup.mesh->n_dofs), std::nan(""));
  std::vector<char> seen(tree.size(), 0);
  for (const Inbox* box : boxes) {
    for (const auto& [id, c] : box->condensed) {
      out.store[id] = *c;
      seen[id] = 1;
    }
    for (const auto& [id, v] : box->solved)
      for (std::size_t k = 0; k < v->dofs.size(); ++k) out.solution.values[v->dofs[k]] = v->values[k];
  }
  for (std::size_t i = 0; i < tree.size(); ++i)
    if (!seen[i]) throw Error(ErrorKind::IncompleteSolution, "node " + std::to_string(i) + " was never condensed");
  for (std::size_t d = 0; d < out.solution.values.size(); ++d)
    if (std::isnan(out.solution.values[d]))
      throw Error(ErrorKind::IncompleteSolution, "DOF " + std::to_string(d) + " has no value");
}

ParallelRun run_protocol(const RunSetup& setup, const TraderAssignment& assignment) {
  const PartitionTree& tree = *setup.tree;
  if (setup.options.workers < 1) throw Error(ErrorKind::InvalidArgument, "at least one worker is required");
  if (assignment.n_traders < 1 || assignment.owner.size() != tree.size())
    throw Error(ErrorKind::InvalidArgument, "trader assignment does not cover the tree");
  for (int o : assignment.owner)
    if (o < 0 || o >= assignment.n_traders) throw Error(ErrorKind::InvalidArgument, "node owner out of range");
  if (setup.numeric() && tree.n_leaf_elements > 0 && setup.mesh->elements.empty())
    throw Error(ErrorKind::Inconsistency, "tree references elements but the mesh is empty");

  const int k = assignment.n_traders;
  const int n = setup.options.workers;
  MasterActor master(k, n, 1 + k);
  std::vector<std::unique_ptr<TraderActor>> traders;
  std::vector<std::unique_ptr<WorkerActor>> workers;
  std::vector<Actor*> actors{&master};
  for (int j = 0; j < k; ++j) {
    traders.push_back(std::make_unique<TraderActor>(j, setup, assignment));
    actors.push_back(traders.back().get());
  }
  for (int w = 0; w < n; ++w) {
    workers.push_back(std::make_unique<WorkerActor>(w, setup));
    actors.push_back(workers.back().get());
  }

  ParallelRun out;
  out.transport = run_actors(actors, setup.options.clock, setup.options.latency);
  out.n_traders = k;
  out.master = 0;
  for (auto& w : workers) out.traces.push_back(std::move(w->trace));
  std::vector<std::pair<TaskKey, double>> results;
  std::vector<const Inbox*> boxes;
  for (auto& t : traders) {
    out.arrivals.insert(out.arrivals.end(), t->arrivals.begin(), t->arrivals.end());
    results.insert(results.end(), t->results.begin(), t->results.end());
    boxes.push_back(&t->inbox);
  }
  if (results.size() != 2 * tree.size())
    throw Error(ErrorKind::IncompleteSolution, "run ended with " + std::to_string(results.size()) + " of " +
                                                   std::to_string(2 * tree.size()) + " tasks done");
  out.condense_window = window_of(master.assigned, results, Phase::Condense);
  out.backsub_window = window_of(master.assigned, results, Phase::BackSubstitute);
  collect_outputs(setup, boxes, out);
  return out;
}

// ---------------------------------------------------------------------------
// Static level-cut baseline: fixed per-worker task lists, direct exchange.

class StaticWorkerActor final : public Actor {
 public:
  StaticWorkerActor(int index, const RunSetup& setup, const std::vector<int>& owner)
      : index_(index), setup_(setup), owner_(owner) {
    trace.worker = index;
    const PartitionTree& tree = *setup.tree;
    for (std::size_t i = tree.size(); i-- > 0;)
      if (owner[i] == index) plan_.push_back(TaskKey{static_cast<NodeId>(i), Phase::Condense});
    for (std::size_t i = 0; i < tree.size(); ++i)
      if (owner[i] == index) plan_.push_back(TaskKey{static_cast<NodeId>(i), Phase::BackSubstitute});
    for (const TaskKey& key : plan_) {
      const TreeNode& n = tree.node(key.node);
      missing_[key] = key.phase == Phase::Condense ? static_cast<int>(n.children.size()) : 1;
    }
  }

  void start(Context& ctx) override { run_ready(ctx); }

  void receive(const Envelope& env, Context& ctx) override {
    const auto* m = std::get_if<ResultForward>(&env.msg);
    if (!m) violation("static worker got " + std::string(message_name(env.msg)));
    accept(m->task, m->schur, m->values, ctx.now());
    run_ready(ctx);
  }

  WorkerTrace trace;
  Inbox inbox;
  std::vector<DependencyArrival> arrivals;

 private:
  void accept(const TaskKey& source, const std::shared_ptr<const SchurContribution>& s,
              const std::shared_ptr<const NodeValues>& v, double time) {
    for (const TaskKey& dep : dependents(*setup_.tree, source)) {
      if (owner_[dep.node] != index_) continue;
      inbox.store(dep, s, v);
      arrivals.push_back({dep, source, time});
      if (--missing_.at(dep) < 0) violation("task " + to_string(dep) + " received too many inputs");
    }
  }

  void run_ready(Context& ctx) {
    while (next_ < plan_.size() && missing_.at(plan_[next_]) == 0) {
      const TaskKey key = plan_[next_++];
      const TaskData data = inbox.take(setup_, key);
      TraceInterval iv;
      const Result r = execute_task(setup_, data, ctx, iv);
      trace.intervals.push_back(iv);
      if (r.condensed) inbox.condensed[key.node] = r.condensed;
      if (r.values) inbox.solved[key.node] = r.values;
      const auto schur = schur_of(r.condensed);
      accept(key, schur, r.values, ctx.now());
      std::vector<int> sent;
      for (const TaskKey& dep : dependents(*setup_.tree, key)) {
        const int o = owner_[dep.node];
        if (o == index_ || std::find(sent.begin(), sent.end(), o) != sent.end()) continue;
        sent.push_back(o);
        ctx.send(o, ResultForward{key, forward_bytes(setup_, key, r), schur, r.values});
      }
    }
    if (next_ == plan_.size()) ctx.stop();
  }

  int index_;
  const RunSetup& setup_;
  const std::vector<int>& owner_;
  std::vector<TaskKey> plan_;
  std::map<TaskKey, int> missing_;
  std::size_t next_ = 0;
};

}  // namespace

ParallelRun run_parallel(const PartitionTree& tree, const Mesh& mesh, const TraderAssignment& assignment,
                         const ParallelOptions& options) {
  return run_protocol(RunSetup{&tree, &mesh, options}, assignment);
}

ParallelRun simulate_schedule(const PartitionTree& tree, const TraderAssignment& assignment,
                              const ParallelOptions& options) {
  return run_protocol(RunSetup{&tree, nullptr, options}, assignment);
}

std::vector<int> levelcut_owners(const PartitionTree& tree, int n_workers, int level) {
  if (n_workers < 1) throw Error(ErrorKind::InvalidArgument, "at least one worker is required");
  std::vector<int> owner(tree.size(), -1);
  int dealt = 0;
  for (const TreeNode& n : tree.nodes)
    if (n.depth == level || (n.depth < level && n.is_leaf())) owner[n.id] = dealt++ % n_workers;
  for (const TreeNode& n : tree.nodes)
    if (owner[n.id] < 0 && n.parent >= 0 && n.depth > level) owner[n.id] = owner[n.parent];
  for (std::size_t i = tree.size(); i-- > 0;)
    if (owner[i] < 0) owner[i] = owner[tree.nodes[i].children.front()];
  return owner;
}

ParallelRun run_static_levelcut(const PartitionTree& tree, const Mesh* mesh, const ParallelOptions& options,
                                int level) {
  if (options.workers < 1) throw Error(ErrorKind::InvalidArgument, "at least one worker is required");
  if (level < 0) level = level_cut_profile(std::max(1, tree.n_leaf_elements)).level;
  const RunSetup setup{&tree, mesh, options};
  const std::vector<int> owner = levelcut_owners(tree, options.workers, level);

  std::vector<std::unique_ptr<StaticWorkerActor>> workers;
  std::vector<Actor*> actors;
  for (int w = 0; w < options.workers; ++w) {
    workers.push_back(std::make_unique<StaticWorkerActor>(w, setup, owner));
    actors.push_back(workers.back().get());
  }
  ParallelRun out;
  out.transport = run_actors(actors, options.clock, options.latency);
  out.n_traders = 0;
  out.master = -1;
  std::vector<std::pair<TaskKey, double>> begins, ends;
  std::vector<const Inbox*> boxes;
  for (auto& w : workers) {
    for (const auto& iv : w->trace.intervals) {
      begins.emplace_back(TaskKey{iv.task, iv.phase}, iv.start);
      ends.emplace_back(TaskKey{iv.task, iv.phase}, iv.end);
    }
    out.arrivals.insert(out.arrivals.end(), w->arrivals.begin(), w->arrivals.end());
    boxes.push_back(&w->inbox);
    out.traces.push_back(std::move(w->trace));
  }
  if (ends.size() != 2 * tree.size())
    throw Error(ErrorKind::IncompleteSolution, "static run ended with " + std::to_string(ends.size()) + " of " +
                                                   std::to_string(2 * tree.size()) + " tasks done");
  out.condense_window = window_of(begins, ends, Phase::Condense);
  out.backsub_window = window_of(begins, ends, Phase::BackSubstitute);
  collect_outputs(setup, boxes, out);
  return out;
}

}  // namespace dissect
