#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "rlsim/model.hpp"

namespace rlsim {

struct PowerReport {
  double avg_power = 0.0;         // watts
  double peak_power = 0.0;        // watts
  double energy = 0.0;            // joules
  double energy_per_frame = 0.0;  // joules
  double perf_per_watt = 0.0;     // frames per second per watt
};

/// Utilization-linear GPU power: idle draw plus a busy-proportional span.
inline double instantaneous_power(double busy, const PowerSpec& spec) {
  return spec.p_idle + (spec.p_max - spec.p_idle) * busy;
}

/// One step of a piecewise-constant busy-fraction timeline: `busy` holds
/// from `t` until the next step (or the window end).
struct BusyStep {
  double t = 0.0;
  double busy = 0.0;
};

/// Integrates the linear power model over a busy timeline covering
/// [timeline.front().t, t_end]. Exact for piecewise-constant inputs; no
/// sampling error.
inline PowerReport power_report(std::span<const BusyStep> timeline,
                                double t_end, double fps,
                                const PowerSpec& spec) {
  if (timeline.empty())
    throw std::invalid_argument("power_report: empty busy timeline");

  PowerReport rep;
  double busy_integral = 0.0;
  for (std::size_t i = 0; i < timeline.size(); ++i) {
    const double t0 = timeline[i].t;
    const double t1 = (i + 1 < timeline.size()) ? timeline[i + 1].t : t_end;
    busy_integral += timeline[i].busy * (t1 - t0);
    const double p = instantaneous_power(timeline[i].busy, spec);
    if (p > rep.peak_power) rep.peak_power = p;
  }
  const double duration = t_end - timeline.front().t;
  if (duration > 0.0) {
    const double mean_busy = busy_integral / duration;
    rep.avg_power = instantaneous_power(mean_busy, spec);
    rep.energy = rep.avg_power * duration;
  } else {
    rep.avg_power = instantaneous_power(timeline.front().busy, spec);
    rep.energy = 0.0;
  }
  rep.perf_per_watt = (rep.avg_power > 0.0) ? fps / rep.avg_power : 0.0;
  const double frames = fps * duration;
  rep.energy_per_frame = (frames > 0.0) ? rep.energy / frames : 0.0;
  return rep;
}

}  // namespace rlsim
