#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rlsim/engine.hpp"
#include "rlsim/gpumodel.hpp"
#include "rlsim/model.hpp"
#include "rlsim/power.hpp"

namespace rlsim {

/// Run-time knobs that do not belong to the workload itself: the active SM
/// count (mirroring SM masking on real hardware) and what-if idealizations
/// used by the system-level attribution cascade.
struct SimOptions {
  std::uint32_t active_sms = 0;      // 0 -> all SMs of the simulated GPU
  IdealizationFlags kernel_flags{};  // applied to every kernel launch
  bool unlimited_cpu = false;        // CPU pool sized so steps never contend
  bool zero_env_step = false;        // environment steps cost no CPU time
  bool instant_gpu = false;          // kernels complete in zero time
  bool record_trace = false;
  double timeseries_dt = 0.0;        // interval stats bucket width; 0 = off
};

namespace ev {
// Actor
constexpr int kInit = 1;
constexpr int kCpuGranted = 2;
constexpr int kStepDone = 3;
constexpr int kActionReceived = 4;
// Inference batcher
constexpr int kInferRequest = 10;
constexpr int kBatchTimeout = 11;
constexpr int kInferGpuGrant = 12;
constexpr int kInferDone = 13;
// Learner
constexpr int kLearnerWake = 20;
constexpr int kTrainGpuGrant = 21;
constexpr int kTrainDone = 22;
}  // namespace ev

namespace detail {

inline std::uint64_t pack_slot(std::uint32_t actor, std::uint32_t slot) {
  return (static_cast<std::uint64_t>(actor) << 32) | slot;
}
inline std::uint32_t slot_actor(std::uint64_t key) {
  return static_cast<std::uint32_t>(key >> 32);
}
inline std::uint32_t slot_index(std::uint64_t key) {
  return static_cast<std::uint32_t>(key & 0xFFFFFFFFu);
}

}  // namespace detail

/// SEED-style actor-learner process network on top of the event engine:
/// actors step environments on a contended CPU thread pool, ship
/// observations to a central inference batcher, and a learner trains from a
/// replay buffer; inference and training share one exclusive GPU device.
class SystemSim {
 public:
  SystemSim(const Config& cfg, const SimOptions& opt = {})
      : cfg_(cfg), opt_(opt) {
    if (!cfg_.simulation.warmup_frames.has_value() ||
        !cfg_.workload.inference_timeout.has_value())
      throw std::invalid_argument("SystemSim: config must be validated first");
    active_sms_ = opt_.active_sms ? opt_.active_sms : cfg_.hardware.sm_per_gpu;
    if (active_sms_ < 1 || active_sms_ > cfg_.hardware.sm_per_gpu)
      throw std::invalid_argument("SystemSim: active_sms out of range");

    const auto& w = cfg_.workload;
    const std::uint64_t total_slots =
        static_cast<std::uint64_t>(w.num_actors) * w.envs_per_actor;
    const std::uint32_t cpu_capacity =
        opt_.unlimited_cpu
            ? static_cast<std::uint32_t>(
                  std::min<std::uint64_t>(total_slots, 0xFFFFFFFFu))
            : cfg_.hardware.cpu_threads;

    engine_.trace().set_recording(opt_.record_trace);
    cpu_pool_ = engine_.add_pool(cpu_capacity, "cpu_threads");
    gpu_pool_ = engine_.add_pool(1, "gpu_device");
    if (opt_.timeseries_dt > 0.0) engine_.record_pool_transitions(cpu_pool_);

    actors_.reserve(w.num_actors);
    for (std::uint32_t a = 0; a < w.num_actors; ++a) {
      actors_.push_back(std::make_unique<Actor>(*this, a));
      actors_.back()->pid = engine_.add_process(actors_.back().get());
    }
    batcher_ = std::make_unique<Batcher>(*this);
    batcher_->pid = engine_.add_process(batcher_.get());
    learner_ = std::make_unique<Learner>(*this);
    learner_->pid = engine_.add_process(learner_.get());

    for (auto& a : actors_) engine_.schedule(0.0, a->pid, ev::kInit, 0);
  }

  SimResult run() {
    const auto stats = engine_.run();
    if (!stats.stopped && frames_ < cfg_.simulation.total_env_frames) {
      std::ostringstream os;
      os << "simulation quiesced after " << frames_ << " of "
         << cfg_.simulation.total_env_frames << " frames\n"
         << engine_.waiter_dump();
      throw EngineError(os.str());
    }
    return assemble(stats.end_time);
  }

  Engine& engine() { return engine_; }
  const Config& config() const { return cfg_; }

  // counters exposed for invariant checks in tests
  std::uint64_t inference_requests() const { return requests_; }
  std::uint64_t inference_responses() const { return responses_; }
  std::uint64_t inference_in_flight() const { return inflight_; }
  std::uint64_t trajectories_inserted() const { return inserted_; }
  std::uint64_t trajectories_sampled() const { return sampled_; }
  std::uint64_t train_steps_total() const { return train_steps_; }

 private:
  // -- shared bookkeeping ---------------------------------------------------

  struct Snapshot {
    double t = 0.0;
    double cpu_busy_integral = 0.0;
    double inflight_integral = 0.0;
    std::uint64_t requests = 0;
    std::uint64_t responses = 0;
    double wait_sum = 0.0;
    std::uint64_t batches = 0;
    double occupancy_sum = 0.0;
    std::uint64_t train_steps = 0;
  };

  double kernel_duration(const KernelSpec& k) const {
    if (opt_.instant_gpu) return 0.0;
    return kernel_time(k, cfg_.hardware, active_sms_, opt_.kernel_flags);
  }

  double draw_step_time(StreamRng& rng) {
    if (opt_.zero_env_step) return 0.0;
    return cfg_.workload.env_step_time.sample(rng);
  }

  void on_frame(double t) {
    ++frames_;
    if (opt_.timeseries_dt > 0.0) frame_times_.push_back(t);
    if (frames_ == *cfg_.simulation.warmup_frames) snapshot_warmup(t);
    if (frames_ == cfg_.simulation.total_env_frames) engine_.request_stop();
  }

  void snapshot_warmup(double t) {
    warm_.t = t;
    warm_.cpu_busy_integral = engine_.busy_integral(cpu_pool_, t);
    warm_.inflight_integral = inflight_integral_at(t);
    warm_.requests = requests_;
    warm_.responses = responses_;
    warm_.wait_sum = wait_sum_;
    warm_.batches = batches_;
    warm_.occupancy_sum = occupancy_sum_;
    warm_.train_steps = train_steps_;
  }

  double inflight_integral_at(double t) const {
    return inflight_integral_ + static_cast<double>(inflight_) *
                                    (t - inflight_last_);
  }

  void on_request(double t) {
    inflight_integral_ = inflight_integral_at(t);
    inflight_last_ = t;
    ++inflight_;
    ++requests_;
  }

  void on_response(double t, double t_requested) {
    inflight_integral_ = inflight_integral_at(t);
    inflight_last_ = t;
    --inflight_;
    ++responses_;
    wait_sum_ += t - t_requested;
  }

  void gpu_begin(double t) { gpu_open_ = t; }

  void gpu_end(double t) {
    if (t > gpu_open_) busy_intervals_.emplace_back(gpu_open_, t);
    gpu_open_ = std::numeric_limits<double>::quiet_NaN();
  }

  void insert_trajectory(double /*t*/) {
    ++inserted_;
    if (replay_size_ < cfg_.workload.replay_capacity) ++replay_size_;
    if (!learner_->active)
      engine_.schedule(engine_.now(), learner_->pid, ev::kLearnerWake, 0);
  }

  // -- processes --------------------------------------------------------------

  struct Actor : Process {
    Actor(SystemSim& s, std::uint32_t i)
        : sim(s),
          index(i),
          label("actor" + std::to_string(i)),
          rng(s.cfg_.simulation.seed, i) {
      slots.resize(s.cfg_.workload.envs_per_actor);
    }

    struct EnvSlot {
      std::uint64_t steps = 0;
      std::uint32_t unroll_progress = 0;
    };

    void on_event(Engine& eng, const Event& e) override {
      switch (e.kind) {
        case ev::kInit:
          for (std::uint32_t s = 0; s < slots.size(); ++s) request_cpu(eng, s);
          break;
        case ev::kCpuGranted:
          begin_step(eng, static_cast<std::uint32_t>(e.arg));
          break;
        case ev::kStepDone:
          complete_step(eng, static_cast<std::uint32_t>(e.arg));
          break;
        case ev::kActionReceived:
          request_cpu(eng, static_cast<std::uint32_t>(e.arg));
          break;
        default:
          throw EngineError("actor: unexpected event kind");
      }
    }

    void request_cpu(Engine& eng, std::uint32_t slot) {
      if (eng.try_acquire(sim.cpu_pool_, pid, ev::kCpuGranted, slot))
        begin_step(eng, slot);
    }

    void begin_step(Engine& eng, std::uint32_t slot) {
      const double dt = sim.draw_step_time(rng);
      eng.schedule(eng.now() + dt, pid, ev::kStepDone, slot);
    }

    void complete_step(Engine& eng, std::uint32_t slot) {
      eng.release(sim.cpu_pool_);
      sim.on_frame(eng.now());
      EnvSlot& env = slots[slot];
      ++env.steps;
      if (++env.unroll_progress == sim.cfg_.workload.unroll_length) {
        env.unroll_progress = 0;
        sim.insert_trajectory(eng.now());
      }
      sim.on_request(eng.now());
      eng.schedule(eng.now(), sim.batcher_->pid, ev::kInferRequest,
                   detail::pack_slot(index, slot));
    }

    std::string_view name() const override { return label; }
    std::string_view event_name(int kind) const override {
      switch (kind) {
        case ev::kInit: return "init";
        case ev::kCpuGranted: return "cpu_granted";
        case ev::kStepDone: return "step_done";
        case ev::kActionReceived: return "action_received";
      }
      return "event";
    }

    SystemSim& sim;
    std::uint32_t index;
    std::string label;
    StreamRng rng;
    std::vector<EnvSlot> slots;
    ProcessId pid = 0;
  };

  struct PendingItem {
    std::uint64_t key;
    double t_requested;
  };

  struct Batcher : Process {
    explicit Batcher(SystemSim& s) : sim(s) {}

    void on_event(Engine& eng, const Event& e) override {
      switch (e.kind) {
        case ev::kInferRequest: {
          const std::uint32_t batch_size = sim.cfg_.workload.inference_batch_size;
          if (open.empty() && batch_size > 1)
            eng.schedule(eng.now() + *sim.cfg_.workload.inference_timeout, pid,
                         ev::kBatchTimeout, open_gen);
          open.push_back({e.arg, eng.now()});
          if (open.size() >= batch_size) close_batch(eng);
          break;
        }
        case ev::kBatchTimeout:
          if (e.arg == open_gen && !open.empty()) close_batch(eng);
          break;
        case ev::kInferGpuGrant:
          start_batch(eng, e.arg);
          break;
        case ev::kInferDone:
          finish_batch(eng, e.arg);
          break;
        default:
          throw EngineError("batcher: unexpected event kind");
      }
    }

    void close_batch(Engine& eng) {
      const std::uint64_t id = next_batch_id++;
      pending.emplace(id, std::move(open));
      open.clear();
      ++open_gen;
      if (eng.try_acquire(sim.gpu_pool_, pid, ev::kInferGpuGrant, id))
        start_batch(eng, id);
    }

    void start_batch(Engine& eng, std::uint64_t id) {
      const auto& items = pending.at(id);
      const KernelSpec k =
          kernel_at_batch(sim.cfg_.workload.inference_kernel,
                          static_cast<std::uint32_t>(items.size()));
      sim.gpu_begin(eng.now());
      eng.schedule(eng.now() + sim.kernel_duration(k), pid, ev::kInferDone, id);
    }

    void finish_batch(Engine& eng, std::uint64_t id) {
      sim.gpu_end(eng.now());
      eng.release(sim.gpu_pool_);
      auto node = pending.extract(id);
      const auto& items = node.mapped();
      ++sim.batches_;
      sim.occupancy_sum_ += static_cast<double>(items.size()) /
                            sim.cfg_.workload.inference_batch_size;
      for (const PendingItem& item : items) {
        sim.on_response(eng.now(), item.t_requested);
        eng.schedule(eng.now(),
                     sim.actors_[detail::slot_actor(item.key)]->pid,
                     ev::kActionReceived, detail::slot_index(item.key));
      }
    }

    std::string_view name() const override { return "inference_batcher"; }
    std::string_view event_name(int kind) const override {
      switch (kind) {
        case ev::kInferRequest: return "infer_request";
        case ev::kBatchTimeout: return "batch_timeout";
        case ev::kInferGpuGrant: return "gpu_granted";
        case ev::kInferDone: return "infer_done";
      }
      return "event";
    }

    SystemSim& sim;
    std::vector<PendingItem> open;
    std::uint64_t open_gen = 0;
    std::uint64_t next_batch_id = 0;
    std::map<std::uint64_t, std::vector<PendingItem>> pending;
    ProcessId pid = 0;
  };

  struct Learner : Process {
    explicit Learner(SystemSim& s) : sim(s) {}

    void on_event(Engine& eng, const Event& e) override {
      switch (e.kind) {
        case ev::kLearnerWake:
          try_start(eng);
          break;
        case ev::kTrainGpuGrant:
          start_train(eng);
          break;
        case ev::kTrainDone:
          finish_train(eng);
          break;
        default:
          throw EngineError("learner: unexpected event kind");
      }
    }

    void try_start(Engine& eng) {
      if (active) return;
      const auto& w = sim.cfg_.workload;
      if (sim.replay_size_ < w.replay_min_fill) return;
      const double next_sampled =
          static_cast<double>(sim.sampled_) + w.train_batch_size;
      if (next_sampled >
          w.samples_per_insert * static_cast<double>(sim.inserted_) + 1e-9)
        return;
      active = true;
      sim.sampled_ += w.train_batch_size;
      if (eng.try_acquire(sim.gpu_pool_, pid, ev::kTrainGpuGrant, 0))
        start_train(eng);
    }

    void start_train(Engine& eng) {
      sim.gpu_begin(eng.now());
      eng.schedule(eng.now() + sim.kernel_duration(sim.cfg_.workload.train_kernel),
                   pid, ev::kTrainDone, 0);
    }

    void finish_train(Engine& eng) {
      sim.gpu_end(eng.now());
      eng.release(sim.gpu_pool_);
      ++sim.train_steps_;
      active = false;
      try_start(eng);
    }

    std::string_view name() const override { return "learner"; }
    std::string_view event_name(int kind) const override {
      switch (kind) {
        case ev::kLearnerWake: return "wake";
        case ev::kTrainGpuGrant: return "gpu_granted";
        case ev::kTrainDone: return "train_done";
      }
      return "event";
    }

    SystemSim& sim;
    bool active = false;
    ProcessId pid = 0;
  };

  // -- result assembly --------------------------------------------------------

  SimResult assemble(double end_time) {
    if (!std::isnan(gpu_open_)) gpu_end(end_time);

    SimResult r;
    r.sim_duration = end_time;
    r.env_frames = frames_;
    r.trace_hash = engine_.trace().hash();
    r.train_steps = train_steps_ - warm_.train_steps;

    const double duration = end_time - warm_.t;
    const std::uint64_t frames_after = frames_ - *cfg_.simulation.warmup_frames;
    if (duration > 0.0) {
      r.frames_per_second = static_cast<double>(frames_after) / duration;
      const double cpu_busy =
          engine_.busy_integral(cpu_pool_, end_time) - warm_.cpu_busy_integral;
      r.cpu_busy_fraction =
          cpu_busy / (static_cast<double>(engine_.capacity(cpu_pool_)) * duration);
      r.gpu_busy_fraction = window_gpu_busy(warm_.t, end_time) / duration;
    } else {
      r.diagnostics.push_back(
          "measured window has zero duration; steady-state rates undefined");
    }

    const std::uint64_t batches = batches_ - warm_.batches;
    if (batches > 0)
      r.mean_inference_batch_occupancy =
          (occupancy_sum_ - warm_.occupancy_sum) / static_cast<double>(batches);
    const std::uint64_t responses = responses_ - warm_.responses;
    if (responses > 0)
      r.mean_inference_queue_wait =
          (wait_sum_ - warm_.wait_sum) / static_cast<double>(responses);
    if (duration > 0.0)
      r.mean_inference_in_flight =
          (inflight_integral_at(end_time) - warm_.inflight_integral) /
          duration;

    const auto timeline = busy_timeline(warm_.t, end_time);
    const PowerReport rep =
        power_report(timeline, end_time, r.frames_per_second,
                     cfg_.hardware.power);
    r.avg_power = rep.avg_power;
    r.peak_power = rep.peak_power;
    r.energy = rep.energy;
    r.energy_per_frame = rep.energy_per_frame;
    r.frames_per_watt_second = rep.perf_per_watt;

    if (train_steps_ == 0 && replay_size_ < cfg_.workload.replay_min_fill) {
      std::ostringstream os;
      os << "replay buffer never reached min fill (" << replay_size_ << " of "
         << cfg_.workload.replay_min_fill
         << " trajectories); learner stayed idle";
      r.diagnostics.push_back(os.str());
    }

    if (opt_.timeseries_dt > 0.0 && duration > 0.0)
      r.timeseries = build_timeseries(warm_.t, end_time);
    return r;
  }

  double window_gpu_busy(double t0, double t1) const {
    double busy = 0.0;
    for (const auto& [b, e] : busy_intervals_)
      busy += std::max(0.0, std::min(e, t1) - std::max(b, t0));
    return busy;
  }

  std::vector<BusyStep> busy_timeline(double t0, double t1) const {
    std::vector<BusyStep> steps;
    auto push = [&steps](double t, double busy) {
      if (!steps.empty() && steps.back().t == t) {
        steps.back().busy = busy;
        if (steps.size() >= 2 && steps[steps.size() - 2].busy == busy)
          steps.pop_back();
        return;
      }
      if (!steps.empty() && steps.back().busy == busy) return;
      steps.push_back({t, busy});
    };
    push(t0, 0.0);
    for (const auto& [b, e] : busy_intervals_) {
      const double cb = std::max(b, t0);
      const double ce = std::min(e, t1);
      if (ce <= cb) continue;
      push(cb, 1.0);
      push(ce, 0.0);
    }
    return steps;
  }

  std::vector<TimeSeriesPoint> build_timeseries(double t0, double t1) const {
    const double dt = opt_.timeseries_dt;
    const std::size_t buckets =
        static_cast<std::size_t>(std::ceil((t1 - t0) / dt));
    std::vector<TimeSeriesPoint> out(buckets);

    std::vector<std::uint64_t> frame_counts(buckets, 0);
    for (double t : frame_times_) {
      if (t < t0 || t >= t1) continue;
      const auto i = std::min<std::size_t>(
          buckets - 1, static_cast<std::size_t>((t - t0) / dt));
      ++frame_counts[i];
    }

    // Distributes weight * |[a,b] ∩ bucket_i| into each bucket. The index
    // advances monotonically; recomputing it from the running position can
    // land one bucket low at exact boundaries.
    auto fill = [&](std::vector<double>& arr, double a, double b,
                    double weight) {
      const double lo0 = std::max(a, t0);
      const double hi0 = std::min(b, t1);
      if (lo0 >= hi0) return;
      std::size_t i = std::min<std::size_t>(
          buckets - 1, static_cast<std::size_t>((lo0 - t0) / dt));
      double lo = lo0;
      for (; i < buckets && lo < hi0; ++i) {
        const double hi =
            (i + 1 == buckets) ? hi0 : std::min(hi0, t0 + (i + 1) * dt);
        if (hi > lo) {
          arr[i] += weight * (hi - lo);
          lo = hi;
        }
      }
      if (lo < hi0) arr[buckets - 1] += weight * (hi0 - lo);
    };

    std::vector<double> gpu_busy(buckets, 0.0);
    for (const auto& [b, e] : busy_intervals_) fill(gpu_busy, b, e, 1.0);

    // piecewise integration of CPU pool occupancy over each bucket
    std::vector<double> cpu_busy(buckets, 0.0);
    {
      const auto& trans = engine_.pool_transitions(cpu_pool_);
      double prev_t = 0.0;
      std::uint32_t level = 0;
      for (const auto& [t, lvl] : trans) {
        fill(cpu_busy, prev_t, t, level);
        prev_t = t;
        level = lvl;
      }
      fill(cpu_busy, prev_t, t1, level);
    }

    const double cpu_cap = engine_.capacity(cpu_pool_);
    for (std::size_t i = 0; i < buckets; ++i) {
      const double a = t0 + i * dt;
      const double b = std::min(t1, a + dt);
      const double width = b - a;
      out[i].t = a;
      if (width <= 0.0) continue;
      out[i].fps = frame_counts[i] / width;
      out[i].cpu_busy = cpu_busy[i] / (cpu_cap * width);
      out[i].gpu_busy = gpu_busy[i] / width;
      out[i].power_w = instantaneous_power(out[i].gpu_busy, cfg_.hardware.power);
    }
    return out;
  }

  Config cfg_;
  SimOptions opt_;
  std::uint32_t active_sms_ = 1;
  Engine engine_;
  PoolId cpu_pool_ = 0;
  PoolId gpu_pool_ = 0;
  std::vector<std::unique_ptr<Actor>> actors_;
  std::unique_ptr<Batcher> batcher_;
  std::unique_ptr<Learner> learner_;

  std::uint64_t frames_ = 0;
  Snapshot warm_;

  std::uint64_t requests_ = 0;
  std::uint64_t responses_ = 0;
  std::uint64_t inflight_ = 0;
  double inflight_integral_ = 0.0;
  double inflight_last_ = 0.0;
  double wait_sum_ = 0.0;
  std::uint64_t batches_ = 0;
  double occupancy_sum_ = 0.0;

  std::uint64_t replay_size_ = 0;
  std::uint64_t inserted_ = 0;
  std::uint64_t sampled_ = 0;
  std::uint64_t train_steps_ = 0;

  double gpu_open_ = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::pair<double, double>> busy_intervals_;
  std::vector<double> frame_times_;
};

/// Runs the full actor-learner network until the configured frame budget is
/// met. Deterministic per (config, seed): identical inputs give identical
/// traces and results.
inline SimResult simulate(const Config& cfg, const SimOptions& opt = {}) {
  SystemSim sim(cfg, opt);
  return sim.run();
}

}  // namespace rlsim
