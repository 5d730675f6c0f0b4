#include "dissect/transport.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <queue>
#include <thread>

#include "dissect/error.hpp"
#include "dissect/log.hpp"

namespace dissect {

namespace {

constexpr std::size_t kHeaderBytes = 16;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void log_delivery(const Envelope& env) {
  auto& log = logger();
  if (!log.should_log(spdlog::level::trace)) return;
  std::string task;
  std::visit(Overloaded{[&](const Advert& m) { task = to_string(m.task); },
                        [&](const Assign& m) { task = to_string(m.task); },
                        [&](const Fetch& m) { task = to_string(m.task); },
                        [&](const TaskData& m) { task = to_string(m.task); },
                        [&](const Result& m) { task = to_string(m.task); },
                        [&](const ResultForward& m) { task = to_string(m.task); },
                        [](const auto&) {}},
             env.msg);
  log.trace("{} {} -> {} task={} bytes={} sent={:.9f} delivered={:.9f}", message_name(env.msg), env.from, env.to,
            task, env.bytes, env.sent, env.delivered);
}

TransportStats empty_stats(std::size_t n) {
  TransportStats s;
  s.bytes_in.assign(n, 0);
  s.bytes_out.assign(n, 0);
  s.messages_in.assign(n, 0);
  s.messages_out.assign(n, 0);
  return s;
}

// ---------------------------------------------------------------------------
// Discrete-event engine: one global event queue ordered by delivery time.

class SimulatedRun {
 public:
  SimulatedRun(std::span<Actor* const> actors, const LatencyModel& latency)
      : actors_(actors.begin(), actors.end()),
        latency_(latency),
        clock_(actors_.size(), 0.0),
        stopped_(actors_.size(), 0),
        last_(actors_.size() * actors_.size(), 0.0),
        stats_(empty_stats(actors_.size())) {}

  TransportStats run() {
    for (std::size_t a = 0; a < actors_.size(); ++a) {
      Ctx ctx(*this, static_cast<ActorId>(a), 0.0);
      actors_[a]->start(ctx);
      clock_[a] = ctx.time;
    }
    while (!queue_.empty()) {
      Event ev = queue_.top();
      queue_.pop();
      const auto to = static_cast<std::size_t>(ev.env.to);
      if (stopped_[to]) continue;
      Ctx ctx(*this, ev.env.to, std::max(ev.env.delivered, clock_[to]));
      ev.env.delivered = ctx.time;
      log_delivery(ev.env);
      actors_[to]->receive(ev.env, ctx);
      clock_[to] = ctx.time;
    }
    std::string running;
    for (std::size_t a = 0; a < actors_.size(); ++a)
      if (!stopped_[a]) running += " " + std::to_string(a);
    if (!running.empty())
      throw Error(ErrorKind::SchedulerStall, "no message in flight but actors still running:" + running);
    return stats_;
  }

 private:
  struct Event {
    std::uint64_t seq;
    Envelope env;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.env.delivered != b.env.delivered) return a.env.delivered > b.env.delivered;
      return a.seq > b.seq;
    }
  };

  class Ctx final : public Context {
   public:
    Ctx(SimulatedRun& run, ActorId id, double t) : run_(run), id_(id), time(t) {}
    ActorId self() const override { return id_; }
    double now() const override { return time; }
    void send(ActorId to, Message msg) override { run_.post(id_, to, time, std::move(msg)); }
    BusyInterval execute(double sim_cost, const std::function<void()>& work) override {
      work();
      BusyInterval iv{time, time + sim_cost};
      time = iv.end;
      return iv;
    }
    void stop() override { run_.stopped_[static_cast<std::size_t>(id_)] = 1; }

   private:
    SimulatedRun& run_;
    ActorId id_;

   public:
    double time;
  };

  void post(ActorId from, ActorId to, double now, Message msg) {
    if (to < 0 || static_cast<std::size_t>(to) >= actors_.size())
      throw Error(ErrorKind::ProtocolViolation, "message to unknown actor " + std::to_string(to));
    const std::size_t bytes = message_bytes(msg);
    double& last = last_[static_cast<std::size_t>(from) * actors_.size() + static_cast<std::size_t>(to)];
    const double at = std::max(now + latency_.delay(bytes), last);
    last = at;
    stats_.bytes_out[from] += bytes;
    stats_.messages_out[from] += 1;
    stats_.bytes_in[to] += bytes;
    stats_.messages_in[to] += 1;
    queue_.push(Event{seq_++, Envelope{from, to, now, at, bytes, std::move(msg)}});
  }

  std::vector<Actor*> actors_;
  LatencyModel latency_;
  std::vector<double> clock_;
  std::vector<char> stopped_;
  std::vector<double> last_;
  TransportStats stats_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t seq_ = 0;
};

// ---------------------------------------------------------------------------
// Threaded engine: one thread per actor, mailboxes guarded by a single lock.

class ThreadedRun {
 public:
  ThreadedRun(std::span<Actor* const> actors, const LatencyModel& latency)
      : actors_(actors.begin(), actors.end()),
        latency_(latency),
        boxes_(actors_.size()),
        last_(actors_.size() * actors_.size(), 0.0),
        stats_(empty_stats(actors_.size())),
        running_(actors_.size()),
        origin_(std::chrono::steady_clock::now()) {}

  TransportStats run() {
    {
      std::lock_guard lock(mu_);
      for (auto& b : boxes_) b.stopped = false;
    }
    std::vector<std::thread> threads;
    threads.reserve(actors_.size());
    for (std::size_t a = 0; a < actors_.size(); ++a) threads.emplace_back([this, a] { actor_loop(a); });
    for (auto& t : threads) t.join();
    if (error_) std::rethrow_exception(error_);
    return stats_;
  }

 private:
  struct Mail {
    std::uint64_t seq;
    Envelope env;
  };
  struct Later {
    bool operator()(const Mail& a, const Mail& b) const {
      if (a.env.delivered != b.env.delivered) return a.env.delivered > b.env.delivered;
      return a.seq > b.seq;
    }
  };
  struct Box {
    std::priority_queue<Mail, std::vector<Mail>, Later> mail;
    std::condition_variable cv;
    bool stopped = false;
    bool idle = false;
  };

  class Ctx final : public Context {
   public:
    Ctx(ThreadedRun& run, ActorId id) : run_(run), id_(id) {}
    ActorId self() const override { return id_; }
    double now() const override { return run_.now(); }
    void send(ActorId to, Message msg) override { run_.post(id_, to, std::move(msg)); }
    BusyInterval execute(double, const std::function<void()>& work) override {
      BusyInterval iv{now(), 0.0};
      work();
      iv.end = now();
      if (iv.end <= iv.start) iv.end = std::nextafter(iv.start, std::numeric_limits<double>::infinity());
      return iv;
    }
    void stop() override { stopped = true; }

    bool stopped = false;

   private:
    ThreadedRun& run_;
    ActorId id_;
  };

  double now() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - origin_).count();
  }

  void post(ActorId from, ActorId to, Message msg) {
    if (to < 0 || static_cast<std::size_t>(to) >= actors_.size())
      throw Error(ErrorKind::ProtocolViolation, "message to unknown actor " + std::to_string(to));
    const std::size_t bytes = message_bytes(msg);
    const double t = now();
    std::lock_guard lock(mu_);
    double& last = last_[static_cast<std::size_t>(from) * actors_.size() + static_cast<std::size_t>(to)];
    const double at = std::max(t + latency_.delay(bytes), last);
    last = at;
    stats_.bytes_out[from] += bytes;
    stats_.messages_out[from] += 1;
    stats_.bytes_in[to] += bytes;
    stats_.messages_in[to] += 1;
    if (boxes_[to].stopped) return;
    ++in_flight_;
    boxes_[to].mail.push(Mail{seq_++, Envelope{from, to, t, at, bytes, std::move(msg)}});
    boxes_[to].cv.notify_one();
  }

  void abort_all() {
    aborted_ = true;
    for (auto& b : boxes_) b.cv.notify_all();
  }

  // Caller holds mu_.
  void check_stall() {
    if (aborted_ || running_ == 0 || in_flight_ > 0) return;
    for (const auto& b : boxes_)
      if (!b.stopped && !b.idle) return;
    error_ = std::make_exception_ptr(
        Error(ErrorKind::SchedulerStall, "all actors idle with no message in flight"));
    abort_all();
  }

  void fail(std::exception_ptr e) {
    std::lock_guard lock(mu_);
    if (!error_) error_ = e;
    abort_all();
  }

  void actor_loop(std::size_t a) {
    Ctx ctx(*this, static_cast<ActorId>(a));
    try {
      actors_[a]->start(ctx);
    } catch (...) {
      fail(std::current_exception());
      return;
    }
    std::unique_lock lock(mu_);
    if (ctx.stopped) {
      retire(a);
      return;
    }
    Box& box = boxes_[a];
    while (!aborted_) {
      if (!box.mail.empty()) {
        const double due = box.mail.top().env.delivered;
        const double t = now();
        if (due > t) {
          box.cv.wait_for(lock, std::chrono::duration<double>(due - t));
          continue;
        }
        Mail m = box.mail.top();
        box.mail.pop();
        lock.unlock();
        m.env.delivered = now();
        log_delivery(m.env);
        try {
          actors_[a]->receive(m.env, ctx);
        } catch (...) {
          fail(std::current_exception());
          return;
        }
        lock.lock();
        --in_flight_;
        if (ctx.stopped) {
          retire(a);
          return;
        }
        continue;
      }
      box.idle = true;
      check_stall();
      if (!aborted_) box.cv.wait(lock);
      box.idle = false;
    }
  }

  // Caller holds mu_.
  void retire(std::size_t a) {
    Box& box = boxes_[a];
    box.stopped = true;
    in_flight_ -= box.mail.size();
    while (!box.mail.empty()) box.mail.pop();
    --running_;
    check_stall();
  }

  std::vector<Actor*> actors_;
  LatencyModel latency_;
  std::vector<Box> boxes_;
  std::vector<double> last_;
  TransportStats stats_;
  std::size_t running_;
  std::size_t in_flight_ = 0;
  std::uint64_t seq_ = 0;
  bool aborted_ = false;
  std::exception_ptr error_;
  std::mutex mu_;
  std::chrono::steady_clock::time_point origin_;
};

}  // namespace

std::string to_string(const TaskKey& key) {
  return (key.phase == Phase::Condense ? "C" : "B") + std::to_string(key.node);
}

std::size_t message_bytes(const Message& msg) {
  return kHeaderBytes + std::visit(Overloaded{[](const TaskData& m) { return m.bytes; },
                                              [](const Result& m) { return m.bytes; },
                                              [](const ResultForward& m) { return m.bytes; },
                                              [](const auto&) { return std::size_t{0}; }},
                                   msg);
}

std::string_view message_name(const Message& msg) {
  static constexpr std::string_view names[] = {"TaskRequest", "Advert",        "Assign",
                                               "Fetch",       "TaskData",      "Result",
                                               "ResultForward", "TraderDone", "Shutdown"};
  return names[msg.index()];
}

TransportStats run_actors(std::span<Actor* const> actors, ClockMode clock, const LatencyModel& latency) {
  if (clock == ClockMode::Simulated) return SimulatedRun(actors, latency).run();
  return ThreadedRun(actors, latency).run();
}

}  // namespace dissect
