#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlsim/rng.hpp"

namespace rlsim {

// ---------------------------------------------------------------------------
// Configuration types
// ---------------------------------------------------------------------------

struct PowerSpec {
  double p_idle = 0.0;  // watts drawn at zero GPU utilization
  double p_max = 0.0;   // watts drawn at full utilization

  bool operator==(const PowerSpec&) const = default;
};

/// Static description of the simulated platform.
struct HardwareSpec {
  std::uint32_t cpu_threads = 1;
  std::uint32_t gpu_count = 1;
  std::uint32_t sm_per_gpu = 1;
  double sm_math_rate = 1.0;      // work-units per second per SM
  double dram_bandwidth = 1.0;    // bytes per second, off-chip
  double dram_latency = 0.0;      // seconds per dependent round trip
  double l2_bandwidth = 1.0;      // bytes per second, on-chip tier
  double kernel_launch_overhead = 0.0;  // seconds per kernel invocation
  PowerSpec power;

  std::uint32_t total_sms() const { return gpu_count * sm_per_gpu; }

  bool operator==(const HardwareSpec&) const = default;
};

enum class DistKind { Constant, Exponential, Lognormal };

inline const char* to_string(DistKind k) {
  switch (k) {
    case DistKind::Constant: return "constant";
    case DistKind::Exponential: return "exponential";
    case DistKind::Lognormal: return "lognormal";
  }
  return "?";
}

struct Distribution {
  DistKind kind = DistKind::Constant;
  double mean = 1.0;  // seconds
  double cv = 0.0;    // coefficient of variation; ignored for constant

  double sample(StreamRng& rng) const {
    switch (kind) {
      case DistKind::Constant: return mean;
      case DistKind::Exponential: return rng.exponential(mean);
      case DistKind::Lognormal: return rng.lognormal(mean, cv);
    }
    return mean;
  }

  bool operator==(const Distribution&) const = default;
};

/// Abstract cost description of one GPU kernel invocation.
struct KernelSpec {
  double math_work = 0.0;          // work-units
  double mem_traffic = 0.0;        // bytes moved through the memory system
  double l2_hit_fraction = 0.0;    // share of traffic served on-chip, in [0,1]
  std::uint64_t dep_mem_rounds = 0;  // serially dependent memory round trips
  std::uint32_t blocks = 1;        // parallel work blocks
  bool per_item_scaling = false;   // math/traffic/blocks scale with batch size

  bool operator==(const KernelSpec&) const = default;
};

struct WorkloadSpec {
  std::uint32_t num_actors = 1;
  std::uint32_t envs_per_actor = 1;
  Distribution env_step_time;       // CPU seconds per environment step
  std::uint64_t obs_bytes = 0;      // observation payload; carried, adds no latency
  std::uint32_t inference_batch_size = 1;
  std::optional<double> inference_timeout;  // defaulted to 2x mean step time
  KernelSpec inference_kernel;
  std::uint32_t unroll_length = 1;  // env steps per emitted trajectory
  std::uint32_t train_batch_size = 1;  // trajectories per train step
  double samples_per_insert = 1.0;  // trajectory consumption / production ratio
  KernelSpec train_kernel;
  std::uint64_t replay_capacity = 1;  // trajectories
  std::uint64_t replay_min_fill = 1;  // trajectories before training starts

  bool operator==(const WorkloadSpec&) const = default;
};

struct SimulationSpec {
  std::uint64_t seed = 0;
  std::uint64_t total_env_frames = 1;
  std::optional<std::uint64_t> warmup_frames;  // defaulted to 10% of total

  bool operator==(const SimulationSpec&) const = default;
};

struct Config {
  HardwareSpec hardware;
  WorkloadSpec workload;
  SimulationSpec simulation;

  bool operator==(const Config&) const = default;
};

// ---------------------------------------------------------------------------
// Result types
// ---------------------------------------------------------------------------

struct TimeSeriesPoint {
  double t = 0.0;
  double fps = 0.0;
  double cpu_busy = 0.0;
  double gpu_busy = 0.0;
  double power_w = 0.0;
};

/// Steady-state metrics of one simulation run (warmup window excluded).
struct SimResult {
  double sim_duration = 0.0;      // total virtual seconds, including warmup
  std::uint64_t env_frames = 0;   // frames completed over the whole run
  double frames_per_second = 0.0;
  double cpu_busy_fraction = 0.0;
  double gpu_busy_fraction = 0.0;
  double mean_inference_batch_occupancy = 0.0;
  double mean_inference_queue_wait = 0.0;
  double mean_inference_in_flight = 0.0;
  std::uint64_t train_steps = 0;  // train steps inside the measured window
  double avg_power = 0.0;         // watts
  double peak_power = 0.0;        // watts
  double energy = 0.0;            // joules over the measured window
  double energy_per_frame = 0.0;  // joules
  double frames_per_watt_second = 0.0;
  std::uint64_t trace_hash = 0;
  std::vector<std::string> diagnostics;
  std::vector<TimeSeriesPoint> timeseries;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> issues)
      : std::runtime_error(join(issues)), issues_(std::move(issues)) {}

  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::ostringstream os;
    os << "invalid configuration (" << issues.size() << " issue"
       << (issues.size() == 1 ? "" : "s") << "):";
    for (const auto& s : issues) os << "\n  - " << s;
    return os.str();
  }

  std::vector<std::string> issues_;
};

namespace detail {

class IssueList {
 public:
  template <typename... Parts>
  void add(const Parts&... parts) {
    std::ostringstream os;
    (os << ... << parts);
    issues_.push_back(os.str());
  }
  bool empty() const { return issues_.empty(); }
  std::vector<std::string> take() { return std::move(issues_); }

 private:
  std::vector<std::string> issues_;
};

inline void check_kernel(const KernelSpec& k, const std::string& path,
                         IssueList& out) {
  if (k.math_work < 0.0) out.add(path, ".math_work: must be >= 0");
  if (k.mem_traffic < 0.0) out.add(path, ".mem_traffic: must be >= 0");
  if (k.l2_hit_fraction < 0.0 || k.l2_hit_fraction > 1.0)
    out.add(path, ".l2_hit_fraction: must be in [0, 1], got ",
            k.l2_hit_fraction);
  if (k.blocks < 1) out.add(path, ".blocks: must be >= 1");
}

inline void check_distribution(const Distribution& d, const std::string& path,
                               IssueList& out) {
  if (!(d.mean > 0.0)) out.add(path, ".mean: must be > 0, got ", d.mean);
  if (d.cv < 0.0) out.add(path, ".cv: must be >= 0, got ", d.cv);
}

}  // namespace detail

/// Checks every type invariant and normalizes documented defaults:
/// warmup_frames -> 10% of total frames, inference_timeout -> 2x mean step
/// time, distribution cv -> 0 for constant and 1 for exponential. Reports
/// every violation at once, naming offending fields by path.
inline Config validate(Config cfg) {
  detail::IssueList issues;

  const HardwareSpec& hw = cfg.hardware;
  if (hw.cpu_threads < 1) issues.add("hardware.cpu_threads: must be >= 1");
  if (hw.gpu_count < 1) issues.add("hardware.gpu_count: must be >= 1");
  if (hw.sm_per_gpu < 1) issues.add("hardware.sm_per_gpu: must be >= 1");
  if (!(hw.sm_math_rate > 0.0))
    issues.add("hardware.sm_math_rate: must be > 0, got ", hw.sm_math_rate);
  if (!(hw.dram_bandwidth > 0.0))
    issues.add("hardware.dram_bandwidth: must be > 0, got ",
               hw.dram_bandwidth);
  if (!(hw.l2_bandwidth > 0.0))
    issues.add("hardware.l2_bandwidth: must be > 0, got ", hw.l2_bandwidth);
  if (hw.dram_latency < 0.0)
    issues.add("hardware.dram_latency: must be >= 0, got ", hw.dram_latency);
  if (hw.kernel_launch_overhead < 0.0)
    issues.add("hardware.kernel_launch_overhead: must be >= 0, got ",
               hw.kernel_launch_overhead);
  if (hw.l2_bandwidth > 0.0 && hw.dram_bandwidth > 0.0 &&
      hw.l2_bandwidth < hw.dram_bandwidth)
    issues.add("hardware.l2_bandwidth (", hw.l2_bandwidth,
               ") must be >= hardware.dram_bandwidth (", hw.dram_bandwidth,
               ")");
  if (hw.power.p_idle < 0.0)
    issues.add("hardware.power.p_idle: must be >= 0, got ", hw.power.p_idle);
  if (hw.power.p_max < hw.power.p_idle)
    issues.add("hardware.power.p_max (", hw.power.p_max,
               ") must be >= hardware.power.p_idle (", hw.power.p_idle, ")");

  WorkloadSpec& w = cfg.workload;
  if (w.num_actors < 1) issues.add("workload.num_actors: must be >= 1");
  if (w.envs_per_actor < 1) issues.add("workload.envs_per_actor: must be >= 1");
  if (w.inference_batch_size < 1)
    issues.add("workload.inference_batch_size: must be >= 1");
  if (w.unroll_length < 1) issues.add("workload.unroll_length: must be >= 1");
  if (w.train_batch_size < 1)
    issues.add("workload.train_batch_size: must be >= 1");
  if (!(w.samples_per_insert > 0.0))
    issues.add("workload.samples_per_insert: must be > 0, got ",
               w.samples_per_insert);
  if (w.replay_capacity < 1) issues.add("workload.replay_capacity: must be >= 1");
  if (w.replay_min_fill < 1) issues.add("workload.replay_min_fill: must be >= 1");
  if (w.replay_min_fill > w.replay_capacity)
    issues.add("workload.replay_min_fill (", w.replay_min_fill,
               ") must be <= workload.replay_capacity (", w.replay_capacity,
               ")");
  detail::check_distribution(w.env_step_time, "workload.env_step_time", issues);
  detail::check_kernel(w.inference_kernel, "workload.inference_kernel", issues);
  detail::check_kernel(w.train_kernel, "workload.train_kernel", issues);

  // normalize: cv is meaningless for constant, pinned for exponential
  if (w.env_step_time.kind == DistKind::Constant) w.env_step_time.cv = 0.0;
  if (w.env_step_time.kind == DistKind::Exponential) w.env_step_time.cv = 1.0;

  if (!w.inference_timeout.has_value())
    w.inference_timeout = 2.0 * w.env_step_time.mean;
  if (!(*w.inference_timeout > 0.0))
    issues.add("workload.inference_timeout: must be > 0, got ",
               *w.inference_timeout);

  SimulationSpec& sim = cfg.simulation;
  if (sim.total_env_frames < 1)
    issues.add("simulation.total_env_frames: must be >= 1");
  if (!sim.warmup_frames.has_value())
    sim.warmup_frames = sim.total_env_frames / 10;
  if (*sim.warmup_frames >= sim.total_env_frames)
    issues.add("simulation.warmup_frames (", *sim.warmup_frames,
               ") must be < simulation.total_env_frames (",
               sim.total_env_frames, ")");

  if (!issues.empty()) throw ValidationError(issues.take());
  return cfg;
}

}  // namespace rlsim
