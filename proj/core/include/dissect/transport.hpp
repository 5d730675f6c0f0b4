#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "dissect/solver.hpp"

namespace dissect {

using ActorId = int;

enum class Phase : std::uint8_t { Condense = 0, BackSubstitute = 1 };

struct TaskKey {
  NodeId node = 0;
  Phase phase = Phase::Condense;

  friend auto operator<=>(const TaskKey&, const TaskKey&) = default;
};

std::string to_string(const TaskKey& key);

/// DOF values handed down during back substitution (ascending dofs).
struct NodeValues {
  std::vector<DofId> dofs;
  std::vector<double> values;

  std::size_t byte_size() const { return 8 * values.size() + 4 * dofs.size(); }
};

/// Everything a worker needs to condense one node.
struct CondenseInput {
  TreeNode node;
  std::vector<std::shared_ptr<const SchurContribution>> inputs;
};

/// Everything a worker needs to back substitute one node.
struct BacksubInput {
  std::shared_ptr<const Condensed> factors;
  std::vector<double> interface_values;
};

struct TaskRequest {
  ActorId worker;
};
struct Advert {
  int trader;
  TaskKey task;
};
struct Assign {
  TaskKey task;
  int trader;
};
struct Fetch {
  ActorId worker;
  TaskKey task;
};
struct TaskData {
  TaskKey task;
  double sim_cost = 0.0;     // seconds of compute under the simulated clock
  std::size_t bytes = 0;
  std::shared_ptr<const CondenseInput> condense;  // null in cost-only runs
  std::shared_ptr<const BacksubInput> backsub;
};
struct Result {
  ActorId worker;
  TaskKey task;
  std::size_t bytes = 0;
  std::shared_ptr<const Condensed> condensed;
  std::shared_ptr<const NodeValues> values;
};
struct ResultForward {
  TaskKey task;  // the completed task whose output is forwarded
  std::size_t bytes = 0;
  std::shared_ptr<const SchurContribution> schur;
  std::shared_ptr<const NodeValues> values;
};
struct TraderDone {
  int trader;
};
struct Shutdown {};

using Message = std::variant<TaskRequest, Advert, Assign, Fetch, TaskData, Result, ResultForward, TraderDone, Shutdown>;

/// Wire size used for latency and traffic accounting: a 16-byte header plus
/// matrix payloads.
std::size_t message_bytes(const Message& msg);
std::string_view message_name(const Message& msg);

struct Envelope {
  ActorId from = 0;
  ActorId to = 0;
  double sent = 0.0;
  double delivered = 0.0;
  std::size_t bytes = 0;
  Message msg;
};

/// delay = constant + per_byte * bytes.
struct LatencyModel {
  double constant = 0.0;
  double per_byte = 0.0;

  double delay(std::size_t bytes) const { return constant + per_byte * static_cast<double>(bytes); }
};

enum class ClockMode { Real, Simulated };

struct BusyInterval {
  double start = 0.0;
  double end = 0.0;
};

class Context {
 public:
  virtual ~Context() = default;
  virtual ActorId self() const = 0;
  virtual double now() const = 0;
  virtual void send(ActorId to, Message msg) = 0;
  /// Runs `work`. Under the simulated clock the actor is busy for exactly
  /// `sim_cost`; under the real clock the measured duration counts.
  virtual BusyInterval execute(double sim_cost, const std::function<void()>& work) = 0;
  /// The actor leaves the run; later messages to it are discarded.
  virtual void stop() = 0;
};

class Actor {
 public:
  virtual ~Actor() = default;
  virtual void start(Context&) {}
  virtual void receive(const Envelope& envelope, Context& ctx) = 0;
};

struct TransportStats {
  std::vector<std::size_t> bytes_in;
  std::vector<std::size_t> bytes_out;
  std::vector<std::size_t> messages_in;
  std::vector<std::size_t> messages_out;
};

/// Delivers messages between actors until every actor has stopped. Channels
/// are FIFO per (sender, receiver) pair. Throws scheduler-stall when actors
/// remain but no message is in flight and nobody is working.
TransportStats run_actors(std::span<Actor* const> actors, ClockMode clock, const LatencyModel& latency);

}  // namespace dissect
