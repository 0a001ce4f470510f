#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "rlsim/gpumodel.hpp"
#include "rlsim/model.hpp"
#include "rlsim/rlsys.hpp"

namespace rlsim {

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct SweepPoint {
  std::uint32_t value = 0;
  std::optional<SimResult> result;
  std::string error;  // set when this point's simulation failed
};

/// One parameter sweep. The speedup column is normalized to the first point;
/// runtime_norm is normalized to the point at baseline_index (the first
/// point for actor sweeps, the full-SM point for SM sweeps), so for SM
/// sweeps runtime_norm reads directly as slowdown.
struct SweepResult {
  std::string param;
  std::vector<SweepPoint> points;
  std::size_t baseline_index = 0;

  double fps(std::size_t i) const { return points.at(i).result->frames_per_second; }
  double speedup(std::size_t i) const { return fps(i) / fps(0); }
  double runtime_norm(std::size_t i) const {
    return fps(baseline_index) / fps(i);
  }
  const SimResult& result(std::size_t i) const { return *points.at(i).result; }

  std::optional<std::size_t> index_of(std::uint32_t value) const {
    for (std::size_t i = 0; i < points.size(); ++i)
      if (points[i].value == value) return i;
    return std::nullopt;
  }
};

inline unsigned sweep_threads_from_env() {
  if (const char* s = std::getenv("RLSYSIM_THREADS")) {
    const long n = std::atol(s);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc ? hc : 1;
}

namespace detail {

template <typename MakeJob>
inline SweepResult run_sweep(std::string param,
                             const std::vector<std::uint32_t>& values,
                             std::size_t baseline_index, MakeJob&& make_job,
                             unsigned max_threads) {
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] <= values[i - 1])
      throw std::invalid_argument("sweep values must be strictly increasing");
  if (values.empty())
    throw std::invalid_argument("sweep needs at least one value");

  SweepResult sweep;
  sweep.param = std::move(param);
  sweep.baseline_index = baseline_index;
  sweep.points.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    sweep.points[i].value = values[i];

  auto run_point = [&](std::size_t i) {
    try {
      sweep.points[i].result = make_job(values[i]);
    } catch (const std::exception& ex) {
      sweep.points[i].error = ex.what();
    }
  };

  const unsigned workers = std::min<unsigned>(
      std::max(1u, max_threads), static_cast<unsigned>(values.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < values.size(); ++i) run_point(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < values.size();
             i = next.fetch_add(1))
          run_point(i);
      });
    for (auto& t : pool) t.join();
  }
  return sweep;
}

}  // namespace detail

/// Simulates the workload once per actor count, all else (including the
/// seed) fixed. Points run independently, so results are identical under
/// any sweep parallelism.
inline SweepResult sweep_actors(const Config& cfg,
                                const std::vector<std::uint32_t>& actor_counts,
                                const SimOptions& opt = {},
                                unsigned max_threads = 1) {
  for (std::uint32_t v : actor_counts)
    if (v < 1) throw std::invalid_argument("actor counts must be >= 1");
  return detail::run_sweep(
      "actors", actor_counts, 0,
      [&](std::uint32_t n) {
        Config c = cfg;
        c.workload.num_actors = n;
        return simulate(c, opt);
      },
      max_threads);
}

/// Simulates the workload once per active-SM count. The baseline for the
/// slowdown (runtime_norm) column is the largest SM count swept.
inline SweepResult sweep_sms(const Config& cfg,
                             const std::vector<std::uint32_t>& sm_counts,
                             const SimOptions& opt = {},
                             unsigned max_threads = 1) {
  for (std::uint32_t v : sm_counts)
    if (v < 1 || v > cfg.hardware.sm_per_gpu)
      throw std::invalid_argument(
          "SM counts must lie in [1, hardware.sm_per_gpu]");
  return detail::run_sweep(
      "sms", sm_counts, sm_counts.empty() ? 0 : sm_counts.size() - 1,
      [&](std::uint32_t n) {
        SimOptions o = opt;
        o.active_sms = n;
        return simulate(cfg, o);
      },
      max_threads);
}

// ---------------------------------------------------------------------------
// Closed-form throughput bounds (independent of the event simulation)
// ---------------------------------------------------------------------------

struct ThroughputBounds {
  double cpu_bound_fps = 0.0;
  double gpu_bound_fps = 0.0;
  double overall_fps = 0.0;
};

/// Per-resource steady-state frame-rate ceilings. The CPU bound divides the
/// concurrent stepper count by the mean step time; the GPU bound inverts the
/// GPU seconds consumed per frame by inference and throttled training.
/// Exact for constant step-time distributions.
inline ThroughputBounds analytic_bounds(const Config& cfg,
                                        std::uint32_t active_sms = 0,
                                        IdealizationFlags flags = {}) {
  const auto& w = cfg.workload;
  const auto& hw = cfg.hardware;
  const std::uint32_t n_sm = active_sms ? active_sms : hw.sm_per_gpu;

  ThroughputBounds b;
  const double steppers = std::min<double>(
      static_cast<double>(w.num_actors) * w.envs_per_actor, hw.cpu_threads);
  b.cpu_bound_fps = steppers / w.env_step_time.mean;

  const KernelSpec inf = kernel_at_batch(w.inference_kernel,
                                         w.inference_batch_size);
  const double t_inf = kernel_time(inf, hw, n_sm, flags);
  const double t_train = kernel_time(w.train_kernel, hw, n_sm, flags);
  const double gpu_per_frame =
      t_inf / static_cast<double>(w.inference_batch_size) +
      w.samples_per_insert * t_train /
          (static_cast<double>(w.train_batch_size) * w.unroll_length);
  b.gpu_bound_fps = gpu_per_frame > 0.0
                        ? 1.0 / gpu_per_frame
                        : std::numeric_limits<double>::infinity();
  b.overall_fps = std::min(b.cpu_bound_fps, b.gpu_bound_fps);
  return b;
}

// ---------------------------------------------------------------------------
// Knee detection
// ---------------------------------------------------------------------------

/// First point past which the per-doubling relative gain drops below
/// epsilon: the smallest v_i with (s_{i+1}/s_i - 1) / log2(v_{i+1}/v_i) <
/// epsilon, or the last value when no point qualifies.
inline double find_knee(const std::vector<std::pair<double, double>>& curve,
                        double epsilon) {
  if (curve.size() < 2)
    throw std::invalid_argument("find_knee: need at least two points");
  for (std::size_t i = 1; i < curve.size(); ++i)
    if (curve[i].first <= curve[i - 1].first)
      throw std::invalid_argument("find_knee: values must be ascending");

  for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
    const double gain = curve[i + 1].second / curve[i].second - 1.0;
    const double doublings = std::log2(curve[i + 1].first / curve[i].first);
    if (gain / doublings < epsilon) return curve[i].first;
  }
  return curve.back().first;
}

// ---------------------------------------------------------------------------
// CPU/GPU ratio
// ---------------------------------------------------------------------------

struct Rational {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  static Rational reduced(std::uint64_t n, std::uint64_t d) {
    const std::uint64_t g = std::gcd(n, d);
    return {g ? n / g : n, g ? d / g : d};
  }
  double decimal() const { return static_cast<double>(num) / den; }
  bool operator==(const Rational&) const = default;
};

struct RatioReport {
  std::uint32_t cpu_threads = 0;
  std::uint32_t total_sms = 0;
  Rational ratio;                       // cpu_threads / total_sms, exact
  std::optional<Rational> recommended_min_ratio;
  double delta = 0.0;                   // throughput-loss tolerance used
  std::string verdict;
};

/// The design metric itself: CPU hardware threads over total GPU SMs, kept
/// as an exact reduced fraction.
inline RatioReport cpu_gpu_ratio(const HardwareSpec& hw) {
  RatioReport rep;
  rep.cpu_threads = hw.cpu_threads;
  rep.total_sms = hw.total_sms();
  rep.ratio = Rational::reduced(hw.cpu_threads, hw.total_sms());
  return rep;
}

/// SM counts probed by recommend_ratio: the physical count halved down to 1.
inline std::vector<std::uint32_t> default_sm_grid(std::uint32_t full) {
  std::vector<std::uint32_t> grid;
  for (std::uint32_t v = full; v >= 1; v /= 2) {
    grid.push_back(v);
    if (v == 1) break;
  }
  std::reverse(grid.begin(), grid.end());
  return grid;
}

/// Finds the smallest per-GPU SM count whose throughput stays within delta
/// of the full-SM configuration, and reports the CPU/GPU ratio at that
/// operating point as the recommended minimum. A workload that is GPU-bound
/// even at full SMs is extrapolated analytically instead (more SMs than the
/// physical device cannot be simulated, only projected).
inline RatioReport recommend_ratio(const Config& cfg, double delta = 0.06,
                                   const SimOptions& opt = {},
                                   unsigned max_threads = 1,
                                   std::vector<std::uint32_t> grid = {}) {
  const auto& hw = cfg.hardware;
  RatioReport rep = cpu_gpu_ratio(hw);
  rep.delta = delta;

  const ThroughputBounds full_bounds = analytic_bounds(cfg, hw.sm_per_gpu);
  if (full_bounds.gpu_bound_fps < full_bounds.cpu_bound_fps) {
    // GPU-bound at full capacity: project the SM count at which the GPU
    // stops binding, allowing counts beyond the physical device.
    std::uint32_t n = hw.sm_per_gpu;
    while (analytic_bounds(cfg, n).gpu_bound_fps <
               full_bounds.cpu_bound_fps &&
           n < (1u << 24))
      n *= 2;
    std::uint32_t lo = n / 2, hi = n;
    while (lo + 1 < hi) {
      const std::uint32_t mid = lo + (hi - lo) / 2;
      if (analytic_bounds(cfg, mid).gpu_bound_fps < full_bounds.cpu_bound_fps)
        lo = mid;
      else
        hi = mid;
    }
    rep.recommended_min_ratio = Rational::reduced(
        hw.cpu_threads, static_cast<std::uint64_t>(hi) * hw.gpu_count);
    rep.verdict = "GPU-bound: the GPU limits throughput at full SM count; "
                  "the system needs more SMs (or fewer threads) than the "
                  "current ratio provides";
    return rep;
  }

  if (grid.empty()) grid = default_sm_grid(hw.sm_per_gpu);
  const SweepResult sweep = sweep_sms(cfg, grid, opt, max_threads);
  for (const auto& p : sweep.points)
    if (!p.error.empty())
      throw std::runtime_error("recommend_ratio: sweep point failed: " +
                               p.error);

  // walk downward from full SMs to the last count still within delta
  std::size_t star = sweep.points.size() - 1;
  bool any_exceeded = false;
  for (std::size_t i = sweep.points.size(); i-- > 0;) {
    if (sweep.runtime_norm(i) - 1.0 > delta) {
      any_exceeded = true;
      break;
    }
    star = i;
  }
  const std::uint32_t s_star = sweep.points[star].value;
  rep.recommended_min_ratio = Rational::reduced(
      hw.cpu_threads, static_cast<std::uint64_t>(s_star) * hw.gpu_count);
  if (!any_exceeded) {
    rep.verdict = "CPU-bound: throughput is insensitive to the SM count down "
                  "to the smallest step swept; the GPU is overprovisioned at "
                  "the current ratio";
  } else if (rep.ratio.decimal() >= rep.recommended_min_ratio->decimal()) {
    rep.verdict = "balanced: the current ratio meets the recommended minimum";
  } else {
    rep.verdict = "under-threaded: the current ratio is below the recommended "
                  "minimum; add CPU threads or reduce SMs per thread";
  }
  return rep;
}

}  // namespace rlsim
