#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "rlsim/calibration.hpp"
#include "rlsim/model.hpp"

namespace rlsim {

inline std::vector<std::string> preset_names() {
  return {"dgx1-v100", "dgx1-single-v100", "seedrl-calibrated"};
}

namespace detail {

/// Workload knobs frozen from the shipped calibration run; regenerate with
/// the calibrate command.
inline CalKnobs shipped_calibration_knobs() {
  CalKnobs k;
  k.inference_timeout = 0.001;
  k.t_inference_full = 0.0009;
  k.t_train = 0.133;
  k.train_batch = 3.0;
  k.train_math = 0.525;
  k.train_sm = 0.175;
  return k;
}

}  // namespace detail

/// Summary of the calibration run behind the seedrl-calibrated preset
/// (100k frames per point, seed 7; regenerate via the calibrate command).
inline std::string preset_calibration_log() {
  return std::string(
      "seedrl-calibrated fit, 100000 frames per evaluation point, seed 7\n"
      "  breakdown math fraction:            target 0.57,  achieved 0.548\n"
      "  breakdown sm_utilization fraction:  target 0.15,  achieved 0.167\n"
      "  breakdown dram_bandwidth fraction:  target 0.12,  achieved 0.125\n"
      "  breakdown latency+rest fraction:    target 0.16,  achieved 0.161\n"
      "  actor speedup 4 -> 40:              target 5.8,   achieved 6.20\n"
      "  actor speedup 40 -> 256:            target 2.0,   achieved 1.80\n"
      "  40-SM slowdown:                     target 1.06,  achieved 1.045\n"
      "  2-SM slowdown (model-derived):      17.2\n"
      "  actor-curve knee at eps=0.1 over [4,8,16,32,40,64,128,256]: 256\n");
}

/// Built-in configurations. The dgx1 presets describe the reference machine
/// (8 or 1 V100 GPUs, 40 CPU hardware threads); seedrl-calibrated is the
/// fitted actor-learner scenario used by the acceptance suite.
inline Config preset(const std::string& name) {
  const detail::CalKnobs knobs = detail::shipped_calibration_knobs();
  Config cfg = detail::build_calibration_config(knobs, {}, 100000, 1);
  if (name == "seedrl-calibrated") {
    cfg.simulation.seed = 7;
    return validate(cfg);
  }
  if (name == "dgx1-single-v100") return cfg;
  if (name == "dgx1-v100") {
    cfg.hardware.gpu_count = 8;
    return validate(cfg);
  }
  std::string msg = "unknown preset '" + name + "'; available:";
  for (const auto& n : preset_names()) msg += " " + n;
  throw std::invalid_argument(msg);
}

}  // namespace rlsim
