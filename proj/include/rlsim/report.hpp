#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlsim/analytics.hpp"
#include "rlsim/attribution.hpp"
#include "rlsim/engine.hpp"
#include "rlsim/model.hpp"

namespace rlsim {

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Number formatting: 6 significant digits, locale-independent
// ---------------------------------------------------------------------------

inline std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

/// The double nearest to the 6-significant-digit rendering, so JSON numbers
/// match their CSV counterparts.
inline double round6(double v) {
  return std::strtod(fmt6(v).c_str(), nullptr);
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// SimResult
// ---------------------------------------------------------------------------

inline ordered_json sim_result_to_json(const SimResult& r) {
  ordered_json j;
  j["sim_duration"] = round6(r.sim_duration);
  j["env_frames"] = r.env_frames;
  j["frames_per_second"] = round6(r.frames_per_second);
  j["cpu_busy_fraction"] = round6(r.cpu_busy_fraction);
  j["gpu_busy_fraction"] = round6(r.gpu_busy_fraction);
  j["mean_inference_batch_occupancy"] =
      round6(r.mean_inference_batch_occupancy);
  j["mean_inference_queue_wait"] = round6(r.mean_inference_queue_wait);
  j["train_steps"] = r.train_steps;
  j["avg_power"] = round6(r.avg_power);
  j["energy"] = round6(r.energy);
  j["energy_per_frame"] = round6(r.energy_per_frame);
  j["frames_per_watt_second"] = round6(r.frames_per_watt_second);
  j["power"] = {{"avg_power", round6(r.avg_power)},
                {"peak_power", round6(r.peak_power)},
                {"energy", round6(r.energy)},
                {"energy_per_frame", round6(r.energy_per_frame)},
                {"perf_per_watt", round6(r.frames_per_watt_second)}};
  j["trace_hash"] = hash_hex(r.trace_hash);
  j["diagnostics"] = r.diagnostics;
  return j;
}

inline constexpr const char* kSimResultCsvHeader =
    "sim_duration,env_frames,frames_per_second,cpu_busy_fraction,"
    "gpu_busy_fraction,mean_inference_batch_occupancy,"
    "mean_inference_queue_wait,train_steps,avg_power,energy,energy_per_frame,"
    "frames_per_watt_second";

inline std::string sim_result_to_csv(const SimResult& r) {
  std::ostringstream os;
  os << kSimResultCsvHeader << "\n"
     << fmt6(r.sim_duration) << "," << r.env_frames << ","
     << fmt6(r.frames_per_second) << "," << fmt6(r.cpu_busy_fraction) << ","
     << fmt6(r.gpu_busy_fraction) << ","
     << fmt6(r.mean_inference_batch_occupancy) << ","
     << fmt6(r.mean_inference_queue_wait) << "," << r.train_steps << ","
     << fmt6(r.avg_power) << "," << fmt6(r.energy) << ","
     << fmt6(r.energy_per_frame) << "," << fmt6(r.frames_per_watt_second)
     << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Breakdown reports
// ---------------------------------------------------------------------------

inline ordered_json breakdown_to_json(const BreakdownReport& b) {
  ordered_json j;
  j["baseline_time"] = round6(b.baseline_time);
  j["n_sm"] = b.n_sm;
  ordered_json segs;
  for (std::size_t i = 0; i < BreakdownReport::kSegments; ++i)
    segs[std::string(BreakdownReport::labels[i])] = {
        {"seconds", round6(b.seconds[i])}, {"fraction", round6(b.fraction[i])}};
  j["segments"] = segs;
  return j;
}

inline std::string breakdown_to_csv(const BreakdownReport& b) {
  std::ostringstream os;
  os << "label,seconds,fraction\n";
  for (std::size_t i = 0; i < BreakdownReport::kSegments; ++i)
    os << BreakdownReport::labels[i] << "," << fmt6(b.seconds[i]) << ","
       << fmt6(b.fraction[i]) << "\n";
  return os.str();
}

inline ordered_json system_breakdown_to_json(const SystemBreakdown& b) {
  ordered_json j;
  j["baseline_runtime"] = round6(b.baseline_runtime);
  ordered_json segs;
  for (std::size_t i = 0; i < SystemBreakdown::kSegments; ++i)
    segs[std::string(SystemBreakdown::labels[i])] = {
        {"seconds", round6(b.seconds[i])}, {"fraction", round6(b.fraction[i])}};
  j["segments"] = segs;
  return j;
}

inline std::string system_breakdown_to_csv(const SystemBreakdown& b) {
  std::ostringstream os;
  os << "label,seconds,fraction\n";
  for (std::size_t i = 0; i < SystemBreakdown::kSegments; ++i)
    os << SystemBreakdown::labels[i] << "," << fmt6(b.seconds[i]) << ","
       << fmt6(b.fraction[i]) << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

inline constexpr const char* kSweepCsvHeader =
    "value,fps,runtime_norm,speedup,avg_power_w,perf_per_watt,"
    "energy_per_frame_j";

inline std::string sweep_to_csv(const SweepResult& s) {
  std::ostringstream os;
  os << kSweepCsvHeader << "\n";
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    const auto& p = s.points[i];
    if (!p.result.has_value()) continue;
    os << p.value << "," << fmt6(s.fps(i)) << "," << fmt6(s.runtime_norm(i))
       << "," << fmt6(s.speedup(i)) << "," << fmt6(p.result->avg_power) << ","
       << fmt6(p.result->frames_per_watt_second) << ","
       << fmt6(p.result->energy_per_frame) << "\n";
  }
  return os.str();
}

inline ordered_json sweep_to_json(const SweepResult& s) {
  ordered_json j;
  j["param"] = s.param;
  j["baseline_index"] = s.baseline_index;
  ordered_json points = ordered_json::array();
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    const auto& p = s.points[i];
    ordered_json pj;
    pj["value"] = p.value;
    if (p.result.has_value()) {
      pj["fps"] = round6(s.fps(i));
      pj["runtime_norm"] = round6(s.runtime_norm(i));
      pj["speedup"] = round6(s.speedup(i));
      pj["avg_power_w"] = round6(p.result->avg_power);
      pj["perf_per_watt"] = round6(p.result->frames_per_watt_second);
      pj["energy_per_frame_j"] = round6(p.result->energy_per_frame);
      pj["result"] = sim_result_to_json(*p.result);
    } else {
      pj["error"] = p.error;
    }
    points.push_back(std::move(pj));
  }
  j["points"] = std::move(points);
  return j;
}

// ---------------------------------------------------------------------------
// Ratio reports
// ---------------------------------------------------------------------------

inline ordered_json ratio_to_json(const RatioReport& r) {
  ordered_json j;
  j["cpu_threads"] = r.cpu_threads;
  j["total_sms"] = r.total_sms;
  j["ratio"] = {{"numerator", r.ratio.num},
                {"denominator", r.ratio.den},
                {"decimal", round6(r.ratio.decimal())}};
  if (r.recommended_min_ratio.has_value()) {
    j["recommended_min_ratio"] = {
        {"numerator", r.recommended_min_ratio->num},
        {"denominator", r.recommended_min_ratio->den},
        {"decimal", round6(r.recommended_min_ratio->decimal())}};
    j["delta"] = round6(r.delta);
  }
  if (!r.verdict.empty()) j["verdict"] = r.verdict;
  return j;
}

// ---------------------------------------------------------------------------
// Time series and trace dumps
// ---------------------------------------------------------------------------

inline std::string timeseries_to_csv(const std::vector<TimeSeriesPoint>& ts) {
  std::ostringstream os;
  os << "t,fps,cpu_busy,gpu_busy,power_w\n";
  for (const auto& p : ts)
    os << fmt6(p.t) << "," << fmt6(p.fps) << "," << fmt6(p.cpu_busy) << ","
       << fmt6(p.gpu_busy) << "," << fmt6(p.power_w) << "\n";
  return os.str();
}

inline std::string trace_to_text(const Engine& eng) {
  std::ostringstream os;
  for (const TraceRecord& rec : eng.trace().records()) {
    const Process& p = eng.process(rec.process);
    os << fmt6(rec.time) << "," << p.name() << "," << p.event_name(rec.kind)
       << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Output plumbing
// ---------------------------------------------------------------------------

inline std::string json_document(ordered_json body) {
  ordered_json doc;
  doc["schema_version"] = 1;
  for (auto& [k, v] : body.items()) doc[k] = std::move(v);
  return doc.dump(2) + "\n";
}

/// Writes through a temp file and renames, so readers never observe a
/// partially written report.
inline void atomic_write(const std::string& path, const std::string& content) {
  const std::filesystem::path target(path);
  const std::filesystem::path tmp(path + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ReportError("cannot open for writing: " + tmp.string());
    out << content;
    if (!out.flush()) throw ReportError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec)
    throw ReportError("cannot rename " + tmp.string() + " to " +
                      target.string() + ": " + ec.message());
}

/// Minimal CSV reader for round-trip checks: splits rows on newlines and
/// fields on commas (reports never emit quoted fields).
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    rows.push_back(std::move(fields));
  }
  return rows;
}

}  // namespace rlsim
