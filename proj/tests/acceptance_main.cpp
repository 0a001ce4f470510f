// Acceptance suite: exercises every shipped claim end to end at its stated
// tolerance and prints one PASS/FAIL line per criterion. Exits nonzero if
// any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlsim/rlsim.hpp"
#include "test_util.hpp"

using namespace rlsim;

namespace {

struct Checker {
  int failures = 0;

  void criterion(int number, const std::string& title,
                 const std::function<bool(std::ostringstream&)>& body) {
    std::ostringstream detail;
    bool ok = false;
    std::string error;
    const auto start = std::chrono::steady_clock::now();
    try {
      ok = body(detail);
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::printf("[%s] criterion %d: %s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL",
                number, title.c_str(), secs,
                detail.str().empty() ? "" : " ", detail.str().c_str());
    if (!error.empty()) std::printf("       exception: %s\n", error.c_str());
    if (!ok) ++failures;
  }
};

bool within(double value, double center, double halfwidth) {
  return std::abs(value - center) <= halfwidth;
}

double parse_csv_fraction(const std::string& csv, const std::string& label) {
  for (const auto& row : parse_csv(csv))
    if (row.size() == 3 && row[0] == label) return std::stod(row[2]);
  throw std::runtime_error("label not found in CSV: " + label);
}

}  // namespace

int main() {
  Checker c;
  const Config preset_cfg = preset("seedrl-calibrated");

  // ----------------------------------------------------------------------
  c.criterion(1, "workload bottleneck breakdown matches the published shares",
              [&](std::ostringstream& out) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto res =
        testutil::run_cli("attribute --preset seedrl-calibrated --format csv");
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (res.exit_code != 0) return false;
    const double math = parse_csv_fraction(res.out, "math");
    const double sm = parse_csv_fraction(res.out, "sm_utilization");
    const double bw = parse_csv_fraction(res.out, "dram_bandwidth");
    const double lat_rest = parse_csv_fraction(res.out, "dram_latency") +
                            parse_csv_fraction(res.out, "rest_of_memory");
    out << "math=" << math << " sm=" << sm << " bw=" << bw
        << " lat+rest=" << lat_rest;
    return within(math, 0.57, 0.03) && within(sm, 0.15, 0.03) &&
           within(bw, 0.12, 0.03) && within(lat_rest, 0.16, 0.04) &&
           elapsed < 10.0;
  });

  // ----------------------------------------------------------------------
  c.criterion(2, "actor sweep reproduces the published speedups and power "
                 "trends",
              [&](std::ostringstream& out) {
    if (preset_cfg.simulation.total_env_frames < 100000) return false;
    const auto t0 = std::chrono::steady_clock::now();
    const SweepResult s =
        sweep_actors(preset_cfg, {4, 8, 16, 32, 40, 64, 128, 256}, {}, 4);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    const double mid = s.speedup(*s.index_of(40)) / s.speedup(*s.index_of(4));
    const double tail =
        s.speedup(*s.index_of(256)) / s.speedup(*s.index_of(40));
    out << "speedup(40)/speedup(4)=" << mid
        << " speedup(256)/speedup(40)=" << tail << " runtime=" << elapsed
        << "s";
    bool monotone = true;
    for (std::size_t i = 1; i < s.points.size(); ++i) {
      monotone = monotone &&
                 s.result(i).avg_power >= s.result(i - 1).avg_power &&
                 s.result(i).frames_per_watt_second >=
                     s.result(i - 1).frames_per_watt_second &&
                 s.result(i).energy_per_frame <
                     s.result(i - 1).energy_per_frame;
    }
    return within(mid, 5.8, 0.58) && within(tail, 2.0, 0.30) && monotone &&
           elapsed < 60.0;
  });

  // ----------------------------------------------------------------------
  c.criterion(3, "SM sweep reproduces the published slowdown curve",
              [&](std::ostringstream& out) {
    const SweepResult s = sweep_sms(preset_cfg, {2, 10, 20, 40, 80}, {}, 5);
    const double sd40 = s.runtime_norm(*s.index_of(40));
    const double sd2 = s.runtime_norm(*s.index_of(2));
    out << "slowdown(40)=" << sd40 << " slowdown(2)=" << sd2;
    bool strictly_increasing = true;
    for (std::size_t i = 1; i < s.points.size(); ++i)
      strictly_increasing =
          strictly_increasing && s.runtime_norm(i - 1) > s.runtime_norm(i);
    const bool logged = preset_calibration_log().find("2-SM slowdown") !=
                        std::string::npos;
    return within(sd40, 1.06, 0.03) && strictly_increasing && sd2 >= 2.0 &&
           logged;
  });

  // ----------------------------------------------------------------------
  c.criterion(4, "the CPU/GPU ratio rule recommends at least one",
              [&](std::ostringstream& out) {
    const auto res = testutil::run_cli(
        "recommend --preset seedrl-calibrated --delta 0.06");
    if (res.exit_code != 0) return false;
    const auto j = nlohmann::json::parse(res.out);
    const double recommended =
        j.at("recommended_min_ratio").at("decimal").get<double>();
    const RatioReport dgx1 = cpu_gpu_ratio(preset("dgx1-v100").hardware);
    out << "recommended_min_ratio=" << recommended << " dgx1 ratio="
        << dgx1.ratio.num << "/" << dgx1.ratio.den;
    return recommended >= 1.0 && dgx1.ratio.num == 1 && dgx1.ratio.den == 16;
  });

  // ----------------------------------------------------------------------
  c.criterion(5, "attribution partitions baseline time exactly on 1000 "
                 "random kernels",
              [&](std::ostringstream& out) {
    StreamRng rng(2024, 0);
    int bad = 0;
    for (int i = 0; i < 1000; ++i) {
      HardwareSpec hw;
      hw.cpu_threads = 1;
      hw.gpu_count = 1 + static_cast<std::uint32_t>(rng.next_u64() % 4);
      hw.sm_per_gpu = 1 + static_cast<std::uint32_t>(rng.next_u64() % 100);
      hw.sm_math_rate = 0.1 + 1e3 * rng.next_unit();
      hw.dram_bandwidth = 1.0 + 1e9 * rng.next_unit();
      hw.l2_bandwidth = hw.dram_bandwidth * (1.0 + 9.0 * rng.next_unit());
      hw.dram_latency = rng.next_unit();
      hw.kernel_launch_overhead = 0.01 * rng.next_unit();
      KernelSpec k;
      k.math_work = 1e6 * rng.next_unit();
      k.mem_traffic = 1e8 * rng.next_unit();
      k.l2_hit_fraction = rng.next_unit();
      k.dep_mem_rounds = rng.next_u64() % 1000;
      k.blocks = 1 + static_cast<std::uint32_t>(rng.next_u64() % 1024);

      const BreakdownReport rep = attribute_kernel(k, hw);
      double sum = 0.0;
      bool nonneg = true;
      for (double s : rep.seconds) {
        nonneg = nonneg && s >= 0.0;
        sum += s;
      }
      const bool exact_sum = (sum == rep.baseline_time);
      const bool norm_equal =
          single_sm_normalized_time(k, hw) ==
          kernel_time(k, hw, hw.total_sms(), IdealizationFlags::all());
      if (!nonneg || !exact_sum || !norm_equal) ++bad;
    }
    out << "violations=" << bad << "/1000";
    return bad == 0;
  });

  // ----------------------------------------------------------------------
  c.criterion(6, "simulated throughput obeys the analytic oracle on 200 "
                 "random configs",
              [&](std::ostringstream& out) {
    StreamRng rng(777, 0);
    int dominance_bad = 0;
    int tightness_bad = 0;
    for (int i = 0; i < 200; ++i) {
      const Config v = testutil::oracle_config(rng, i % 4 == 0);
      const ThroughputBounds b = analytic_bounds(v);
      const double fps = simulate(v).frames_per_second;
      if (fps > b.overall_fps * 1.01) ++dominance_bad;

      // idealize whichever resource is not binding, then demand tightness
      SimOptions ideal;
      double binding = 0.0;
      if (b.cpu_bound_fps <= b.gpu_bound_fps) {
        ideal.instant_gpu = true;
        binding = b.cpu_bound_fps;
      } else {
        ideal.zero_env_step = true;
        ideal.unlimited_cpu = true;
        binding = b.gpu_bound_fps;
      }
      const double fps_ideal = simulate(v, ideal).frames_per_second;
      if (fps_ideal < 0.95 * binding) ++tightness_bad;
    }
    out << "dominance violations=" << dominance_bad
        << " tightness violations=" << tightness_bad;
    return dominance_bad == 0 && tightness_bad == 0;
  });

  // ----------------------------------------------------------------------
  c.criterion(7, "identical inputs give byte-identical outputs and traces",
              [&](std::ostringstream& out) {
    const std::string sim_cmd =
        "simulate --preset seedrl-calibrated --seed 42 --format json";
    const auto a = testutil::run_cli(sim_cmd);
    const auto b = testutil::run_cli(sim_cmd);
    const auto d = testutil::run_cli(sim_cmd);
    if (a.exit_code != 0) return false;
    const bool identical = (a.out == b.out) && (b.out == d.out);
    const std::string hash =
        nlohmann::json::parse(a.out).at("trace_hash").get<std::string>();

    const std::string sweep_cmd =
        "sweep --param actors --values 4,40 --preset seedrl-calibrated "
        "--format json";
    const auto serial = testutil::run_cli(sweep_cmd, "RLSYSIM_THREADS=1 ");
    const auto parallel = testutil::run_cli(sweep_cmd, "RLSYSIM_THREADS=8 ");
    out << "trace_hash=" << hash;
    return identical && serial.exit_code == 0 &&
           serial.out == parallel.out && !hash.empty();
  });

  // ----------------------------------------------------------------------
  c.criterion(8, "hand-computed micro scenarios replay exactly",
              [&](std::ostringstream& out) {
    // two actors on one CPU thread alternate and finish at t = 4 s
    Config two = testutil::small_config();
    two.hardware.cpu_threads = 1;
    two.workload.num_actors = 2;
    two.workload.env_step_time = {DistKind::Constant, 1.0, 0.0};
    two.simulation.total_env_frames = 4;
    two.simulation.warmup_frames = 0;
    SimOptions trace_opt;
    trace_opt.record_trace = true;
    SystemSim sim(validate(two), trace_opt);
    const SimResult r2 = sim.run();
    bool ok = r2.sim_duration == 4.0 && r2.env_frames == 4 &&
              r2.cpu_busy_fraction == 1.0;
    std::vector<ProcessId> order;
    for (const TraceRecord& rec : sim.engine().trace().records())
      if (rec.kind == ev::kStepDone) order.push_back(rec.process);
    ok = ok && order == std::vector<ProcessId>{0, 1, 0, 1};

    // one bottleneck-free actor with 0.1 s steps runs at 10 fps
    Config one = testutil::small_config();
    one.hardware.cpu_threads = 1;
    one.workload.num_actors = 1;
    one.workload.env_step_time = {DistKind::Constant, 0.1, 0.0};
    one.simulation.total_env_frames = 500;
    one.simulation.warmup_frames = 50;
    const SimResult r1 = simulate(validate(one));
    ok = ok && std::abs(r1.frames_per_second - 10.0) < 1e-9;

    // the worked kernel cascade partitions 30.5 s as [10, 0.5, 0, 0, 20]
    HardwareSpec hw;
    hw.cpu_threads = 1;
    hw.gpu_count = 1;
    hw.sm_per_gpu = 4;
    hw.sm_math_rate = 100.0;
    hw.dram_bandwidth = 1e5;
    hw.l2_bandwidth = 1e6;
    hw.dram_latency = 0.1;
    KernelSpec k;
    k.math_work = 8000.0;
    k.mem_traffic = 3e6;
    k.dep_mem_rounds = 5;
    k.blocks = 8;
    const BreakdownReport rep = attribute_kernel(k, hw, 4);
    ok = ok && rep.baseline_time == 30.5 && rep.seconds[0] == 10.0 &&
         rep.seconds[1] == 0.5 && rep.seconds[2] == 0.0 &&
         rep.seconds[3] == 0.0 && rep.seconds[4] == 20.0;
    out << "alternation/step-rate/cascade all exact";
    return ok;
  });

  if (c.failures == 0) {
    std::printf("acceptance: all criteria passed\n");
    return 0;
  }
  std::printf("acceptance: %d criterion/criteria FAILED\n", c.failures);
  return 1;
}
