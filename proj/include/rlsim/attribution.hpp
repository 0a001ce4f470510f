#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string_view>

#include "rlsim/gpumodel.hpp"
#include "rlsim/model.hpp"
#include "rlsim/rlsys.hpp"

namespace rlsim {

/// Ordered bottleneck breakdown of a kernel or workload. Segments follow the
/// fixed outer-to-inner idealization order and partition the baseline time
/// exactly: baseline_time is the sum of the segments as stored, with no
/// residual. Attribution is order-dependent by construction; the labels
/// record the order used.
struct BreakdownReport {
  static constexpr std::size_t kSegments = 5;
  static constexpr std::array<std::string_view, kSegments> labels = {
      "dram_bandwidth", "dram_latency", "rest_of_memory", "sm_utilization",
      "math"};

  double baseline_time = 0.0;
  std::array<double, kSegments> seconds{};
  std::array<double, kSegments> fraction{};
  std::uint32_t n_sm = 0;

  double seconds_of(std::string_view label) const {
    for (std::size_t i = 0; i < kSegments; ++i)
      if (labels[i] == label) return seconds[i];
    return 0.0;
  }
  double fraction_of(std::string_view label) const {
    for (std::size_t i = 0; i < kSegments; ++i)
      if (labels[i] == label) return fraction[i];
    return 0.0;
  }
};

namespace detail {

inline BreakdownReport finish_report(std::array<double, 5> seconds,
                                     std::uint32_t n_sm) {
  BreakdownReport rep;
  rep.seconds = seconds;
  rep.n_sm = n_sm;
  double sum = 0.0;
  for (double s : seconds) sum += s;
  rep.baseline_time = sum;
  if (sum > 0.0)
    for (std::size_t i = 0; i < seconds.size(); ++i)
      rep.fraction[i] = seconds[i] / sum;
  return rep;
}

}  // namespace detail

/// Cumulative idealization cascade over one kernel, outermost component
/// first: (1) DRAM bandwidth, (2) DRAM latency, (3) the rest of the memory
/// system, (4) SM utilization via single-SM normalization. Each segment is
/// the runtime delta of its step; the final segment is the remaining math
/// time (which absorbs the launch overhead).
inline BreakdownReport attribute_kernel(const KernelSpec& k,
                                        const HardwareSpec& hw,
                                        std::uint32_t n_sm = 0) {
  if (n_sm == 0) n_sm = hw.sm_per_gpu;
  const auto c = detail::kernel_components(k, hw, n_sm);

  // Cascade times share the max-composition structure, so each delta
  // reduces to an exact difference of component maxima.
  const double m_all = std::max({c.math, c.dram, c.l2});
  const double m_no_dram = std::max(c.math, c.l2);

  std::array<double, 5> seconds{};
  seconds[0] = m_all - m_no_dram;       // dram_bandwidth
  seconds[1] = c.latency;               // dram_latency
  seconds[2] = m_no_dram - c.math;      // rest_of_memory
  seconds[3] = c.math - c.math_ideal;   // sm_utilization
  seconds[4] = c.launch + c.math_ideal; // math
  return detail::finish_report(seconds, n_sm);
}

/// Workload-level breakdown: time-weighted aggregation of the per-kernel
/// cascades, weighted by steady-state invocation rates. Per environment
/// frame, inference runs once per batch and training runs
/// samples_per_insert / (train_batch_size x unroll_length) times.
inline BreakdownReport attribute_workload(const WorkloadSpec& w,
                                          const HardwareSpec& hw,
                                          std::uint32_t n_sm = 0) {
  if (n_sm == 0) n_sm = hw.sm_per_gpu;
  const KernelSpec inf =
      kernel_at_batch(w.inference_kernel, w.inference_batch_size);
  const double rate_inf = 1.0 / static_cast<double>(w.inference_batch_size);
  const double rate_train =
      w.samples_per_insert / (static_cast<double>(w.train_batch_size) *
                              static_cast<double>(w.unroll_length));

  const BreakdownReport bi = attribute_kernel(inf, hw, n_sm);
  const BreakdownReport bt = attribute_kernel(w.train_kernel, hw, n_sm);

  std::array<double, 5> seconds{};
  for (std::size_t i = 0; i < seconds.size(); ++i)
    seconds[i] = rate_inf * bi.seconds[i] + rate_train * bt.seconds[i];
  return detail::finish_report(seconds, n_sm);
}

// ---------------------------------------------------------------------------
// System-level cascade
// ---------------------------------------------------------------------------

/// Runtime partition of a full simulation: how much of the time to finish
/// the frame budget is attributable to CPU thread contention, environment
/// compute, GPU compute, and the residual pipeline (batching waits and
/// scheduling gaps).
struct SystemBreakdown {
  static constexpr std::size_t kSegments = 4;
  static constexpr std::array<std::string_view, kSegments> labels = {
      "cpu_thread_contention", "environment_compute", "gpu_compute",
      "residual_pipeline"};

  double baseline_runtime = 0.0;
  std::array<double, kSegments> seconds{};
  std::array<double, kSegments> fraction{};

  double seconds_of(std::string_view label) const {
    for (std::size_t i = 0; i < kSegments; ++i)
      if (labels[i] == label) return seconds[i];
    return 0.0;
  }
};

/// Extends the idealization cascade to the whole system with deterministic
/// replays of the same seed: (1) unlimited CPU threads, (2) zero-cost
/// environment steps, (3) an instant GPU. cpu_first=false idealizes the GPU
/// before the CPU stages, for order-sensitivity studies.
inline SystemBreakdown attribute_system(const Config& cfg,
                                        const SimOptions& base = {},
                                        bool cpu_first = true) {
  SimOptions o0 = base;
  SimOptions o1 = o0;
  o1.unlimited_cpu = true;
  SimOptions o2 = o1;
  o2.zero_env_step = true;
  SimOptions o3 = o2;
  o3.instant_gpu = true;

  const double t0 = simulate(cfg, o0).sim_duration;
  double t1, t2, t3;
  if (cpu_first) {
    t1 = simulate(cfg, o1).sim_duration;
    t2 = simulate(cfg, o2).sim_duration;
    t3 = simulate(cfg, o3).sim_duration;
  } else {
    SimOptions g1 = o0;
    g1.instant_gpu = true;
    SimOptions g2 = g1;
    g2.unlimited_cpu = true;
    t1 = simulate(cfg, g1).sim_duration;
    t2 = simulate(cfg, g2).sim_duration;
    t3 = simulate(cfg, o3).sim_duration;
  }

  SystemBreakdown rep;
  rep.baseline_runtime = t0;
  const std::array<double, 4> raw = {t0 - t1, t1 - t2, t2 - t3, t3};
  if (cpu_first) {
    rep.seconds = {std::max(0.0, raw[0]), std::max(0.0, raw[1]),
                   std::max(0.0, raw[2]), raw[3]};
  } else {
    // deltas arrive as [gpu, cpu, env, residual]; map back to label order
    rep.seconds = {std::max(0.0, raw[1]), std::max(0.0, raw[2]),
                   std::max(0.0, raw[0]), raw[3]};
  }
  if (t0 > 0.0)
    for (std::size_t i = 0; i < rep.seconds.size(); ++i)
      rep.fraction[i] = rep.seconds[i] / t0;
  return rep;
}

}  // namespace rlsim
