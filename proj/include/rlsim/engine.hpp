#pragma once

#include <bit>
#include <cstdint>
#include <deque>
#include <limits>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rlsim {

using ProcessId = std::uint32_t;
using PoolId = std::uint32_t;

class Engine;

struct Event {
  double time = 0.0;       // virtual seconds
  std::uint64_t seq = 0;   // insertion order; ties on time break by seq
  ProcessId target = 0;
  int kind = 0;            // process-defined message tag
  std::uint64_t arg = 0;   // opaque payload
};

/// A suspendable simulation process: it reacts to delivered events and may
/// schedule further events, acquire pools, or stop the run.
class Process {
 public:
  virtual ~Process() = default;
  virtual void on_event(Engine& eng, const Event& ev) = 0;
  virtual std::string_view name() const = 0;
  /// Human-readable label for an event kind, used by trace dumps.
  virtual std::string_view event_name(int /*kind*/) const { return "event"; }
};

class EngineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DeadlockError : public EngineError {
 public:
  using EngineError::EngineError;
};

struct TraceRecord {
  double time;
  ProcessId process;
  int kind;
  std::uint64_t arg;
};

/// Hash-first event trace. The FNV-1a content hash is always maintained;
/// full records are kept only when recording is enabled.
class Trace {
 public:
  void set_recording(bool on) { recording_ = on; }
  bool recording() const { return recording_; }

  void append(double t, ProcessId p, int kind, std::uint64_t arg) {
    feed(std::bit_cast<std::uint64_t>(t));
    feed(p);
    feed(static_cast<std::uint64_t>(static_cast<std::int64_t>(kind)));
    feed(arg);
    ++count_;
    if (recording_) records_.push_back({t, p, kind, arg});
  }

  std::uint64_t hash() const { return hash_; }
  std::uint64_t count() const { return count_; }
  const std::vector<TraceRecord>& records() const { return records_; }

 private:
  void feed(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      hash_ ^= (v >> (8 * i)) & 0xFFu;
      hash_ *= 0x00000100000001B3ull;
    }
  }

  std::uint64_t hash_ = 0xCBF29CE484222325ull;
  std::uint64_t count_ = 0;
  bool recording_ = false;
  std::vector<TraceRecord> records_;
};

/// Deterministic discrete-event simulation kernel: a virtual clock, an event
/// queue ordered by (time, seq), and counted resource pools with FIFO grant
/// order. One Engine instance is strictly single-threaded; independent
/// instances share nothing.
class Engine {
 public:
  struct RunStats {
    double end_time = 0.0;
    std::uint64_t delivered = 0;
    bool stopped = false;    // a process requested stop
    bool exhausted = false;  // event queue ran dry
  };

  // -- setup --------------------------------------------------------------

  ProcessId add_process(Process* p) {
    processes_.push_back(p);
    return static_cast<ProcessId>(processes_.size() - 1);
  }

  PoolId add_pool(std::uint32_t capacity, std::string name) {
    pools_.push_back(Pool{capacity, std::move(name)});
    return static_cast<PoolId>(pools_.size() - 1);
  }

  // -- events ---------------------------------------------------------------

  void schedule(double at, ProcessId target, int kind, std::uint64_t arg = 0) {
    if (at < clock_) {
      std::ostringstream os;
      os << "schedule at t=" << at << " is in the past (clock=" << clock_
         << ")";
      throw EngineError(os.str());
    }
    if (target >= processes_.size())
      throw EngineError("schedule: unknown target process");
    queue_.push(Event{at, next_seq_++, target, kind, arg});
  }

  double now() const { return clock_; }
  void request_stop() { stop_requested_ = true; }

  /// Delivers events in (time, seq) order until a stop request, the optional
  /// time horizon, or queue exhaustion. Exhaustion with processes still
  /// parked in pool queues is a deadlock.
  RunStats run(double until_time = std::numeric_limits<double>::infinity()) {
    while (!queue_.empty() && !stop_requested_) {
      if (queue_.top().time > until_time) {
        clock_ = until_time;
        return {clock_, delivered_, false, false};
      }
      Event ev = queue_.top();
      queue_.pop();
      clock_ = ev.time;
      trace_.append(ev.time, ev.target, ev.kind, ev.arg);
      ++delivered_;
      processes_[ev.target]->on_event(*this, ev);
    }
    if (stop_requested_) return {clock_, delivered_, true, false};
    if (total_waiters() > 0)
      throw DeadlockError("deadlock: event queue empty with waiting processes\n" +
                          waiter_dump());
    return {clock_, delivered_, false, true};
  }

  // -- resource pools -------------------------------------------------------

  /// Immediate grant if capacity is free (returns true and the caller
  /// proceeds); otherwise the requester joins the FIFO and later receives an
  /// event with (grant_kind, grant_arg). (requester, grant_arg) pairs must be
  /// unique among a pool's waiters.
  bool try_acquire(PoolId pool, ProcessId requester, int grant_kind,
                   std::uint64_t grant_arg = 0) {
    Pool& p = pools_.at(pool);
    if (p.in_use < p.capacity) {
      touch(p);
      ++p.in_use;
      ++p.grants;
      note_transition(p);
      return true;
    }
    for (const Waiter& w : p.waiters)
      if (w.pid == requester && w.arg == grant_arg)
        throw EngineError("duplicate wait on pool '" + p.name + "' by " +
                          std::string(processes_[requester]->name()));
    p.waiters.push_back({requester, grant_kind, grant_arg});
    return false;
  }

  /// Returns one unit. If waiters are queued the unit is handed to the head
  /// waiter (its grant event fires at the current time), keeping in_use
  /// pinned at capacity while anyone waits.
  void release(PoolId pool) {
    Pool& p = pools_.at(pool);
    if (p.in_use == 0)
      throw EngineError("release on idle pool '" + p.name + "'");
    ++p.releases;
    if (!p.waiters.empty()) {
      Waiter w = p.waiters.front();
      p.waiters.pop_front();
      ++p.grants;
      schedule(clock_, w.pid, w.kind, w.arg);
    } else {
      touch(p);
      --p.in_use;
      note_transition(p);
    }
  }

  std::uint32_t in_use(PoolId pool) const { return pools_.at(pool).in_use; }
  std::uint32_t capacity(PoolId pool) const { return pools_.at(pool).capacity; }
  std::size_t waiter_count(PoolId pool) const {
    return pools_.at(pool).waiters.size();
  }
  std::uint64_t grants(PoolId pool) const { return pools_.at(pool).grants; }
  std::uint64_t releases(PoolId pool) const { return pools_.at(pool).releases; }

  /// Time integral of in_use up to `at` (piecewise-exact).
  double busy_integral(PoolId pool, double at) const {
    const Pool& p = pools_.at(pool);
    return p.busy_integral + p.in_use * (at - p.last_change);
  }

  std::size_t total_waiters() const {
    std::size_t n = 0;
    for (const Pool& p : pools_) n += p.waiters.size();
    return n;
  }

  std::string waiter_dump() const {
    std::ostringstream os;
    for (const Pool& p : pools_) {
      os << "pool '" << p.name << "': " << p.in_use << "/" << p.capacity
         << " in use, " << p.waiters.size() << " waiting";
      for (const Waiter& w : p.waiters)
        os << "\n    " << processes_[w.pid]->name() << " (arg=" << w.arg << ")";
      os << "\n";
    }
    return os.str();
  }

  /// Record (time, in_use) transitions of one pool, for time-series output.
  void record_pool_transitions(PoolId pool) {
    pools_.at(pool).record_transitions = true;
  }
  const std::vector<std::pair<double, std::uint32_t>>& pool_transitions(
      PoolId pool) const {
    return pools_.at(pool).transitions;
  }

  Trace& trace() { return trace_; }
  const Trace& trace() const { return trace_; }
  const Process& process(ProcessId pid) const { return *processes_.at(pid); }

 private:
  struct Waiter {
    ProcessId pid;
    int kind;
    std::uint64_t arg;
  };

  struct Pool {
    Pool(std::uint32_t cap, std::string n) : capacity(cap), name(std::move(n)) {}
    std::uint32_t capacity;
    std::string name;
    std::uint32_t in_use = 0;
    std::deque<Waiter> waiters;
    std::uint64_t grants = 0;
    std::uint64_t releases = 0;
    double busy_integral = 0.0;
    double last_change = 0.0;
    bool record_transitions = false;
    std::vector<std::pair<double, std::uint32_t>> transitions;
  };

  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.seq > b.seq;
    }
  };

  void touch(Pool& p) {
    p.busy_integral += p.in_use * (clock_ - p.last_change);
    p.last_change = clock_;
  }

  void note_transition(Pool& p) {
    if (p.record_transitions) p.transitions.emplace_back(clock_, p.in_use);
  }

  std::vector<Process*> processes_;
  std::vector<Pool> pools_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  Trace trace_;
  double clock_ = 0.0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t delivered_ = 0;
  bool stop_requested_ = false;
};

}  // namespace rlsim
