#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "rlsim/model.hpp"

namespace rlsim {

/// Which hardware components to treat as perfect when timing a kernel.
/// All false is the baseline machine; turning any flag on never makes a
/// kernel slower.
struct IdealizationFlags {
  bool ideal_dram_bandwidth = false;
  bool ideal_dram_latency = false;
  bool ideal_rest_of_memory = false;
  bool ideal_sm_utilization = false;

  static IdealizationFlags ideal_memory() {
    return {true, true, true, false};
  }
  static IdealizationFlags all() { return {true, true, true, true}; }

  bool operator==(const IdealizationFlags&) const = default;
};

/// Occupancy under quantized block scheduling: blocks run in waves of n_sm,
/// and a partial final wave leaves SMs idle.
inline double sm_utilization(std::uint64_t blocks, std::uint32_t n_sm) {
  const double waves =
      static_cast<double>((blocks + n_sm - 1) / n_sm);  // ceil(blocks / n_sm)
  return static_cast<double>(blocks) / (waves * static_cast<double>(n_sm));
}

namespace detail {

// Component times behind kernel_time, shared with the attribution cascade.
struct KernelComponents {
  double math;        // SM-residency time at the achieved occupancy
  double math_ideal;  // same with occupancy forced to 1
  double dram;        // off-chip streaming time
  double l2;          // on-chip tier streaming time
  double latency;     // serial dependent-miss time
  double launch;
};

inline KernelComponents kernel_components(const KernelSpec& k,
                                          const HardwareSpec& hw,
                                          std::uint32_t n_sm) {
  const double per_sm = k.math_work / hw.sm_math_rate;
  const double u = sm_utilization(k.blocks, n_sm);
  KernelComponents c{};
  c.math = per_sm / (static_cast<double>(n_sm) * u);
  c.math_ideal = per_sm / (static_cast<double>(n_sm) * 1.0);
  c.dram = k.mem_traffic * (1.0 - k.l2_hit_fraction) / hw.dram_bandwidth;
  c.l2 = k.mem_traffic / hw.l2_bandwidth;
  c.latency = static_cast<double>(k.dep_mem_rounds) * hw.dram_latency;
  c.launch = hw.kernel_launch_overhead;
  return c;
}

}  // namespace detail

/// Execution time of one kernel invocation on n_sm SMs.
///
/// Streaming stages overlap (max composition of math, DRAM, and on-chip
/// traffic); serially dependent round trips and the launch overhead add on
/// top. Idealization flags zero out their component or force occupancy to 1.
inline double kernel_time(const KernelSpec& k, const HardwareSpec& hw,
                          std::uint32_t n_sm, IdealizationFlags flags = {}) {
  const auto c = detail::kernel_components(k, hw, n_sm);
  const double t_math = flags.ideal_sm_utilization ? c.math_ideal : c.math;
  const double t_dram = flags.ideal_dram_bandwidth ? 0.0 : c.dram;
  const double t_l2 = flags.ideal_rest_of_memory ? 0.0 : c.l2;
  const double t_lat = flags.ideal_dram_latency ? 0.0 : c.latency;
  return c.launch + std::max({t_math, t_dram, t_l2}) + t_lat;
}

/// Kernel time measured on a single SM with the memory system idealized,
/// normalized by the machine's total SM count. The launch overhead is a
/// fixed per-invocation cost and is not divided. Equals kernel_time at
/// n_sm = total SMs with full idealization.
inline double single_sm_normalized_time(const KernelSpec& k,
                                        const HardwareSpec& hw) {
  HardwareSpec no_launch = hw;
  no_launch.kernel_launch_overhead = 0.0;
  const double on_one_sm =
      kernel_time(k, no_launch, 1, IdealizationFlags::ideal_memory());
  return hw.kernel_launch_overhead +
         on_one_sm / static_cast<double>(hw.total_sms());
}

/// A kernel's cost at the given batch occupancy. Per-item kernels scale
/// math, traffic, and blocks linearly; dependent rounds are serial depth and
/// do not scale. Fixed kernels are returned unchanged.
inline KernelSpec kernel_at_batch(const KernelSpec& k, std::uint32_t items) {
  if (!k.per_item_scaling || items == 1) return k;
  KernelSpec scaled = k;
  scaled.math_work = k.math_work * items;
  scaled.mem_traffic = k.mem_traffic * items;
  const std::uint64_t blocks =
      static_cast<std::uint64_t>(k.blocks) * items;
  scaled.blocks = static_cast<std::uint32_t>(
      std::min<std::uint64_t>(blocks, 0xFFFFFFFFull));
  return scaled;
}

}  // namespace rlsim
