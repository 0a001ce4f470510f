#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlsim/model.hpp"

namespace rlsim {

using ordered_json = nlohmann::ordered_json;

class ConfigParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

/// Field reader scoped to one section. Keys outside the allowlist (typos)
/// are rejected up front, before any missing-key complaint could shadow
/// them; type mismatches and negative counts report the offending path.
class SectionReader {
 public:
  SectionReader(const ordered_json& j, std::string path,
                std::initializer_list<const char*> allowed)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object())
      throw ConfigParseError(path_ + ": expected an object");
    for (const auto& [key, value] : j_.items())
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
        throw ConfigParseError(path_ + "." + key + ": unknown key");
  }

  const ordered_json* find(const std::string& key) {
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const ordered_json& require(const std::string& key) {
    const ordered_json* v = find(key);
    if (!v) throw ConfigParseError(path_ + "." + key + ": missing key");
    return *v;
  }

  double number(const std::string& key) {
    return as_number(require(key), key);
  }
  double number_or(const std::string& key, double fallback) {
    const ordered_json* v = find(key);
    return v ? as_number(*v, key) : fallback;
  }
  std::uint64_t count(const std::string& key) {
    return as_count(require(key), key);
  }
  std::uint64_t count_or(const std::string& key, std::uint64_t fallback) {
    const ordered_json* v = find(key);
    return v ? as_count(*v, key) : fallback;
  }
  std::uint32_t count32(const std::string& key) {
    const std::uint64_t v = count(key);
    if (v > 0xFFFFFFFFull)
      throw ConfigParseError(path_ + "." + key + ": value too large");
    return static_cast<std::uint32_t>(v);
  }
  bool boolean_or(const std::string& key, bool fallback) {
    const ordered_json* v = find(key);
    if (!v) return fallback;
    if (!v->is_boolean())
      throw ConfigParseError(path_ + "." + key + ": expected a boolean");
    return v->get<bool>();
  }
  std::string text(const std::string& key) {
    const ordered_json& v = require(key);
    if (!v.is_string())
      throw ConfigParseError(path_ + "." + key + ": expected a string");
    return v.get<std::string>();
  }
  const ordered_json& object(const std::string& key) {
    const ordered_json& v = require(key);
    if (!v.is_object())
      throw ConfigParseError(path_ + "." + key + ": expected an object");
    return v;
  }
  std::string sub(const std::string& key) const { return path_ + "." + key; }

 private:
  double as_number(const ordered_json& v, const std::string& key) const {
    if (!v.is_number())
      throw ConfigParseError(path_ + "." + key + ": expected a number");
    return v.get<double>();
  }
  std::uint64_t as_count(const ordered_json& v, const std::string& key) const {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
      return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw ConfigParseError(path_ + "." + key +
                           ": expected a non-negative integer");
  }

  const ordered_json& j_;
  std::string path_;
};

inline Distribution parse_distribution(const ordered_json& j,
                                       const std::string& path) {
  SectionReader r(j, path, {"kind", "mean", "cv"});
  Distribution d;
  const std::string kind = r.text("kind");
  if (kind == "constant")
    d.kind = DistKind::Constant;
  else if (kind == "exponential")
    d.kind = DistKind::Exponential;
  else if (kind == "lognormal")
    d.kind = DistKind::Lognormal;
  else
    throw ConfigParseError(path + ".kind: expected one of constant, "
                           "exponential, lognormal; got '" + kind + "'");
  d.mean = r.number("mean");
  d.cv = r.number_or("cv", 0.0);
  return d;
}

inline KernelSpec parse_kernel(const ordered_json& j, const std::string& path) {
  SectionReader r(j, path,
                  {"math_work", "mem_traffic", "l2_hit_fraction",
                   "dep_mem_rounds", "blocks", "per_item_scaling"});
  KernelSpec k;
  k.math_work = r.number("math_work");
  k.mem_traffic = r.number("mem_traffic");
  k.l2_hit_fraction = r.number_or("l2_hit_fraction", 0.0);
  k.dep_mem_rounds = r.count_or("dep_mem_rounds", 0);
  k.blocks = r.count32("blocks");
  k.per_item_scaling = r.boolean_or("per_item_scaling", false);
  return k;
}

}  // namespace detail

/// Parses the canonical config document: top-level sections hardware,
/// workload, simulation plus a required schema_version of 1. Unknown keys
/// anywhere are an error. The result is unvalidated; run validate() next.
inline Config parse_config(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigParseError(std::string("config is not valid JSON: ") +
                           ex.what());
  }

  detail::SectionReader top(
      j, "config", {"schema_version", "hardware", "workload", "simulation"});
  const double version = top.number("schema_version");
  if (version != 1)
    throw ConfigParseError("config.schema_version: expected 1");

  Config cfg;
  {
    detail::SectionReader r(top.object("hardware"), "hardware",
                            {"cpu_threads", "gpu_count", "sm_per_gpu",
                             "sm_math_rate", "dram_bandwidth", "dram_latency",
                             "l2_bandwidth", "kernel_launch_overhead",
                             "power"});
    HardwareSpec& hw = cfg.hardware;
    hw.cpu_threads = r.count32("cpu_threads");
    hw.gpu_count = r.count32("gpu_count");
    hw.sm_per_gpu = r.count32("sm_per_gpu");
    hw.sm_math_rate = r.number("sm_math_rate");
    hw.dram_bandwidth = r.number("dram_bandwidth");
    hw.dram_latency = r.number("dram_latency");
    hw.l2_bandwidth = r.number("l2_bandwidth");
    hw.kernel_launch_overhead = r.number_or("kernel_launch_overhead", 0.0);
    detail::SectionReader pr(r.object("power"), r.sub("power"),
                             {"p_idle", "p_max"});
    hw.power.p_idle = pr.number("p_idle");
    hw.power.p_max = pr.number("p_max");
  }
  {
    detail::SectionReader r(
        top.object("workload"), "workload",
        {"num_actors", "envs_per_actor", "env_step_time", "obs_bytes",
         "inference_batch_size", "inference_timeout", "inference_kernel",
         "unroll_length", "train_batch_size", "samples_per_insert",
         "train_kernel", "replay_capacity", "replay_min_fill"});
    WorkloadSpec& w = cfg.workload;
    w.num_actors = r.count32("num_actors");
    w.envs_per_actor = r.count32("envs_per_actor");
    w.env_step_time = detail::parse_distribution(r.object("env_step_time"),
                                                 r.sub("env_step_time"));
    w.obs_bytes = r.count_or("obs_bytes", 0);
    w.inference_batch_size = r.count32("inference_batch_size");
    if (const ordered_json* v = r.find("inference_timeout")) {
      if (!v->is_number())
        throw ConfigParseError("workload.inference_timeout: expected a number");
      w.inference_timeout = v->get<double>();
    }
    w.inference_kernel = detail::parse_kernel(r.object("inference_kernel"),
                                              r.sub("inference_kernel"));
    w.unroll_length = r.count32("unroll_length");
    w.train_batch_size = r.count32("train_batch_size");
    w.samples_per_insert = r.number("samples_per_insert");
    w.train_kernel =
        detail::parse_kernel(r.object("train_kernel"), r.sub("train_kernel"));
    w.replay_capacity = r.count("replay_capacity");
    w.replay_min_fill = r.count("replay_min_fill");
  }
  {
    detail::SectionReader r(top.object("simulation"), "simulation",
                            {"seed", "total_env_frames", "warmup_frames"});
    SimulationSpec& s = cfg.simulation;
    s.seed = r.count("seed");
    s.total_env_frames = r.count("total_env_frames");
    if (const ordered_json* v = r.find("warmup_frames")) {
      if (!v->is_number_integer() && !v->is_number_unsigned())
        throw ConfigParseError(
            "simulation.warmup_frames: expected a non-negative integer");
      s.warmup_frames = v->get<std::uint64_t>();
    }
  }
  return cfg;
}

inline ordered_json kernel_to_json(const KernelSpec& k) {
  ordered_json j;
  j["math_work"] = k.math_work;
  j["mem_traffic"] = k.mem_traffic;
  j["l2_hit_fraction"] = k.l2_hit_fraction;
  j["dep_mem_rounds"] = k.dep_mem_rounds;
  j["blocks"] = k.blocks;
  j["per_item_scaling"] = k.per_item_scaling;
  return j;
}

/// Emits the canonical config document; emit -> parse is lossless.
inline std::string emit_config(const Config& cfg) {
  ordered_json j;
  j["schema_version"] = 1;

  ordered_json& hw = j["hardware"];
  hw["cpu_threads"] = cfg.hardware.cpu_threads;
  hw["gpu_count"] = cfg.hardware.gpu_count;
  hw["sm_per_gpu"] = cfg.hardware.sm_per_gpu;
  hw["sm_math_rate"] = cfg.hardware.sm_math_rate;
  hw["dram_bandwidth"] = cfg.hardware.dram_bandwidth;
  hw["dram_latency"] = cfg.hardware.dram_latency;
  hw["l2_bandwidth"] = cfg.hardware.l2_bandwidth;
  hw["kernel_launch_overhead"] = cfg.hardware.kernel_launch_overhead;
  hw["power"] = {{"p_idle", cfg.hardware.power.p_idle},
                 {"p_max", cfg.hardware.power.p_max}};

  ordered_json& w = j["workload"];
  w["num_actors"] = cfg.workload.num_actors;
  w["envs_per_actor"] = cfg.workload.envs_per_actor;
  w["env_step_time"] = {{"kind", to_string(cfg.workload.env_step_time.kind)},
                        {"mean", cfg.workload.env_step_time.mean},
                        {"cv", cfg.workload.env_step_time.cv}};
  w["obs_bytes"] = cfg.workload.obs_bytes;
  w["inference_batch_size"] = cfg.workload.inference_batch_size;
  if (cfg.workload.inference_timeout.has_value())
    w["inference_timeout"] = *cfg.workload.inference_timeout;
  w["inference_kernel"] = kernel_to_json(cfg.workload.inference_kernel);
  w["unroll_length"] = cfg.workload.unroll_length;
  w["train_batch_size"] = cfg.workload.train_batch_size;
  w["samples_per_insert"] = cfg.workload.samples_per_insert;
  w["train_kernel"] = kernel_to_json(cfg.workload.train_kernel);
  w["replay_capacity"] = cfg.workload.replay_capacity;
  w["replay_min_fill"] = cfg.workload.replay_min_fill;

  ordered_json& s = j["simulation"];
  s["seed"] = cfg.simulation.seed;
  s["total_env_frames"] = cfg.simulation.total_env_frames;
  if (cfg.simulation.warmup_frames.has_value())
    s["warmup_frames"] = *cfg.simulation.warmup_frames;

  return j.dump(2) + "\n";
}

}  // namespace rlsim
