// rlsim command-line driver: simulate, attribute, sweep, recommend,
// calibrate, presets. Data goes to stdout (or --output, written atomically);
// diagnostics go to stderr. Exit codes: 0 success, 1 configuration or usage
// error, 2 runtime error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rlsim/rlsim.hpp"

namespace {

struct CommonOpts {
  std::string preset;
  std::string config_path;
  std::string format = "json";
  std::string output;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> frames;
};

void add_common(CLI::App* sub, CommonOpts& c, bool with_format = true) {
  auto* preset = sub->add_option("--preset", c.preset,
                                 "Built-in configuration name");
  auto* config = sub->add_option("--config", c.config_path,
                                 "Path to a config file");
  preset->excludes(config);
  config->excludes(preset);
  sub->add_option("--seed", c.seed, "Override simulation.seed");
  sub->add_option("--frames", c.frames,
                  "Override simulation.total_env_frames");
  if (with_format)
    sub->add_option("--format", c.format, "Output format")
        ->check(CLI::IsMember({"csv", "json"}));
  sub->add_option("--output", c.output,
                  "Write the report to this file instead of stdout");
}

rlsim::Config load_config(const CommonOpts& c) {
  rlsim::Config cfg;
  if (!c.preset.empty()) {
    cfg = rlsim::preset(c.preset);
  } else if (!c.config_path.empty()) {
    std::ifstream in(c.config_path, std::ios::binary);
    if (!in)
      throw rlsim::ConfigParseError("cannot read config file: " +
                                    c.config_path);
    std::ostringstream ss;
    ss << in.rdbuf();
    cfg = rlsim::parse_config(ss.str());
  } else {
    throw rlsim::ConfigParseError("one of --preset or --config is required");
  }
  if (c.seed.has_value()) cfg.simulation.seed = *c.seed;
  if (c.frames.has_value()) {
    cfg.simulation.total_env_frames = *c.frames;
    cfg.simulation.warmup_frames.reset();
  }
  return rlsim::validate(cfg);
}

void emit(const CommonOpts& c, const std::string& content) {
  if (c.output.empty())
    std::cout << content;
  else
    rlsim::atomic_write(c.output, content);
}

std::vector<std::uint32_t> parse_value_list(const std::string& csv) {
  std::vector<std::uint32_t> values;
  std::istringstream is(csv);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    if (tok.empty()) continue;
    try {
      const unsigned long v = std::stoul(tok);
      if (v == 0 || v > 0xFFFFFFFFul) throw std::out_of_range(tok);
      values.push_back(static_cast<std::uint32_t>(v));
    } catch (const std::exception&) {
      throw std::invalid_argument("--values: '" + tok +
                                  "' is not a positive integer");
    }
  }
  if (values.empty())
    throw std::invalid_argument("--values: expected a comma-separated list");
  return values;
}

int run(int argc, char** argv) {
  CLI::App app{"rlsim: actor-learner RL training performance simulator"};
  app.require_subcommand(1);

  // simulate
  auto* sim_cmd = app.add_subcommand(
      "simulate", "Run the actor-learner simulation once");
  CommonOpts sim_common;
  add_common(sim_cmd, sim_common);
  std::uint32_t sim_sms = 0;
  std::string trace_out;
  double timeseries_dt = 0.0;
  std::string timeseries_out;
  sim_cmd->add_option("--sms", sim_sms, "Active SM count (default: all)");
  sim_cmd->add_option("--trace-out", trace_out,
                      "Dump the event trace (time,process,event lines)");
  sim_cmd->add_option("--timeseries-dt", timeseries_dt,
                      "Interval width for per-interval stats");
  sim_cmd->add_option("--timeseries-out", timeseries_out,
                      "Write per-interval stats CSV here")
      ->needs(sim_cmd->get_option("--timeseries-dt"));

  // attribute
  auto* attr_cmd = app.add_subcommand(
      "attribute", "Bottleneck breakdown via sequential idealization");
  CommonOpts attr_common;
  add_common(attr_cmd, attr_common);
  std::string attr_level = "workload";
  std::string attr_kernel = "inference";
  std::uint32_t attr_sms = 0;
  bool gpu_first = false;
  attr_cmd->add_option("--level", attr_level, "Breakdown granularity")
      ->check(CLI::IsMember({"workload", "kernel", "system"}));
  attr_cmd->add_option("--kernel", attr_kernel,
                       "Kernel to attribute at --level kernel")
      ->check(CLI::IsMember({"inference", "train"}));
  attr_cmd->add_option("--sms", attr_sms, "Active SM count (default: all)");
  attr_cmd->add_flag("--idealize-gpu-first", gpu_first,
                     "System cascade order: GPU before CPU stages");

  // sweep
  auto* sweep_cmd =
      app.add_subcommand("sweep", "Simulate across a parameter range");
  CommonOpts sweep_common;
  add_common(sweep_cmd, sweep_common);
  std::string sweep_param;
  std::string sweep_values;
  sweep_cmd->add_option("--param", sweep_param, "Swept parameter")
      ->required()
      ->check(CLI::IsMember({"actors", "sms"}));
  sweep_cmd->add_option("--values", sweep_values,
                        "Comma-separated ascending values")
      ->required();
  double sweep_epsilon = 0.0;
  sweep_cmd->add_option(
      "--epsilon", sweep_epsilon,
      "Report the sweep's knee (smallest value whose per-doubling relative "
      "gain drops below this threshold); JSON output only");

  // recommend
  auto* rec_cmd = app.add_subcommand(
      "recommend", "CPU/GPU ratio rule: recommended minimum thread/SM ratio");
  CommonOpts rec_common;
  add_common(rec_cmd, rec_common, /*with_format=*/false);
  double delta = 0.06;
  rec_cmd->add_option("--delta", delta, "Tolerated throughput loss");

  // calibrate
  auto* cal_cmd = app.add_subcommand(
      "calibrate", "Fit the workload parameters to the anchor ratios");
  CommonOpts cal_common;
  cal_common.format = "json";
  cal_cmd->add_option("--output", cal_common.output,
                      "Write the fitted config here instead of stdout");
  std::uint64_t cal_frames = 100000;
  int cal_rounds = 6;
  bool cal_knee = false;
  std::string cal_log;
  cal_cmd->add_option("--cal-frames", cal_frames,
                      "Simulated frames per evaluation point");
  cal_cmd->add_option("--rounds", cal_rounds, "Coordinate-descent rounds");
  cal_cmd->add_flag("--fit-knee", cal_knee,
                    "Also sweep the full actor curve for the fit log");
  cal_cmd->add_option("--log", cal_log, "Write the fit log to this file");
  double cal_step = 1.30;
  rlsim::CalibrationOptions cal_init;
  cal_cmd->add_option("--step", cal_step, "Initial probe step factor");
  cal_cmd->add_option("--init-timeout", cal_init.init_inference_timeout,
                      "Starting inference timeout");
  cal_cmd->add_option("--init-tinf", cal_init.init_t_inference_full,
                      "Starting full-batch inference kernel time");
  cal_cmd->add_option("--init-ttrain", cal_init.init_t_train,
                      "Starting train kernel time");
  cal_cmd->add_option("--init-tb", cal_init.init_train_batch,
                      "Starting train batch size");
  cal_cmd->add_option("--init-tmath", cal_init.init_train_math,
                      "Starting train-profile math fraction");
  cal_cmd->add_option("--init-tsm", cal_init.init_train_sm,
                      "Starting train-profile SM fraction");

  // presets
  auto* presets_cmd =
      app.add_subcommand("presets", "List or show built-in configurations");
  std::string show_name;
  presets_cmd->add_option("--show", show_name,
                          "Print the named preset as a config document");
  bool show_log = false;
  presets_cmd->add_flag("--log", show_log,
                        "Print the calibration fit log behind the "
                        "seedrl-calibrated preset");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const unsigned sweep_threads = rlsim::sweep_threads_from_env();

  if (sim_cmd->parsed()) {
    const rlsim::Config cfg = load_config(sim_common);
    rlsim::SimOptions opt;
    opt.active_sms = sim_sms;
    opt.record_trace = !trace_out.empty();
    opt.timeseries_dt = timeseries_dt;
    rlsim::SystemSim sim(cfg, opt);
    const rlsim::SimResult res = sim.run();
    for (const std::string& d : res.diagnostics) std::cerr << d << "\n";
    if (!trace_out.empty())
      rlsim::atomic_write(trace_out, rlsim::trace_to_text(sim.engine()));
    if (!timeseries_out.empty())
      rlsim::atomic_write(timeseries_out,
                          rlsim::timeseries_to_csv(res.timeseries));
    emit(sim_common, sim_common.format == "csv"
                         ? rlsim::sim_result_to_csv(res)
                         : rlsim::json_document(rlsim::sim_result_to_json(res)));
    return 0;
  }

  if (attr_cmd->parsed()) {
    const rlsim::Config cfg = load_config(attr_common);
    std::string content;
    if (attr_level == "system") {
      rlsim::SimOptions opt;
      opt.active_sms = attr_sms;
      const rlsim::SystemBreakdown b =
          rlsim::attribute_system(cfg, opt, !gpu_first);
      content = attr_common.format == "csv"
                    ? rlsim::system_breakdown_to_csv(b)
                    : rlsim::json_document(rlsim::system_breakdown_to_json(b));
    } else {
      rlsim::BreakdownReport b;
      if (attr_level == "workload") {
        b = rlsim::attribute_workload(cfg.workload, cfg.hardware, attr_sms);
      } else {
        const rlsim::KernelSpec k =
            attr_kernel == "train"
                ? cfg.workload.train_kernel
                : rlsim::kernel_at_batch(cfg.workload.inference_kernel,
                                         cfg.workload.inference_batch_size);
        b = rlsim::attribute_kernel(k, cfg.hardware, attr_sms);
      }
      content = attr_common.format == "csv"
                    ? rlsim::breakdown_to_csv(b)
                    : rlsim::json_document(rlsim::breakdown_to_json(b));
    }
    emit(attr_common, content);
    return 0;
  }

  if (sweep_cmd->parsed()) {
    const rlsim::Config cfg = load_config(sweep_common);
    const std::vector<std::uint32_t> values = parse_value_list(sweep_values);
    const rlsim::SweepResult s =
        sweep_param == "actors"
            ? rlsim::sweep_actors(cfg, values, {}, sweep_threads)
            : rlsim::sweep_sms(cfg, values, {}, sweep_threads);
    bool any_failed = false;
    for (const auto& p : s.points)
      if (!p.error.empty()) {
        std::cerr << "sweep point " << p.value << " failed: " << p.error
                  << "\n";
        any_failed = true;
      }
    if (sweep_common.format == "csv") {
      if (sweep_epsilon > 0.0)
        throw std::invalid_argument(
            "--epsilon requires --format json (the CSV schema is fixed)");
      emit(sweep_common, rlsim::sweep_to_csv(s));
    } else {
      rlsim::ordered_json j = rlsim::sweep_to_json(s);
      if (sweep_epsilon > 0.0 && !any_failed) {
        std::vector<std::pair<double, double>> curve;
        for (std::size_t i = 0; i < s.points.size(); ++i)
          curve.emplace_back(s.points[i].value, s.speedup(i));
        j["knee"] = {{"epsilon", sweep_epsilon},
                     {"value", rlsim::find_knee(curve, sweep_epsilon)}};
      }
      emit(sweep_common, rlsim::json_document(std::move(j)));
    }
    return any_failed ? 2 : 0;
  }

  if (rec_cmd->parsed()) {
    const rlsim::Config cfg = load_config(rec_common);
    const rlsim::RatioReport rep =
        rlsim::recommend_ratio(cfg, delta, {}, sweep_threads);
    emit(rec_common, rlsim::json_document(rlsim::ratio_to_json(rep)));
    return 0;
  }

  if (cal_cmd->parsed()) {
    rlsim::CalibrationOptions opts = cal_init;
    opts.frames = cal_frames;
    opts.rounds = cal_rounds;
    opts.step = cal_step;
    opts.fit_knee = cal_knee;
    opts.threads = sweep_threads;
    rlsim::CalibrationResult res;
    try {
      res = rlsim::calibrate({}, opts);
    } catch (const rlsim::CalibrationError& e) {
      std::cerr << e.what() << "\n";
      if (!cal_log.empty())
        rlsim::atomic_write(cal_log, e.best().log_text);
      // best-found parameters still go out, so the fit can be inspected
      emit(cal_common, rlsim::emit_config(e.best().config));
      return 2;
    }
    std::cerr << res.log_text;
    if (!cal_log.empty()) rlsim::atomic_write(cal_log, res.log_text);
    emit(cal_common, rlsim::emit_config(res.config));
    return 0;
  }

  if (presets_cmd->parsed()) {
    if (show_log) {
      std::cout << rlsim::preset_calibration_log();
    } else if (!show_name.empty()) {
      std::cout << rlsim::emit_config(rlsim::preset(show_name));
    } else {
      for (const std::string& n : rlsim::preset_names())
        std::cout << n << "\n";
    }
    return 0;
  }

  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const rlsim::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const rlsim::ConfigParseError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
}
