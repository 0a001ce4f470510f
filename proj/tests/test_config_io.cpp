#include <catch2/catch.hpp>

#include "rlsim/config_io.hpp"
#include "rlsim/presets.hpp"
#include "test_util.hpp"

using namespace rlsim;

TEST_CASE("emit then parse is lossless", "[config]") {
  for (const std::string& name : preset_names()) {
    const Config cfg = preset(name);
    const Config back = parse_config(emit_config(cfg));
    CHECK(back == cfg);
    // and a second round trip emits identical text
    CHECK(emit_config(back) == emit_config(cfg));
  }
}

TEST_CASE("round trip preserves unset defaults", "[config]") {
  Config cfg = testutil::small_config();
  cfg.simulation.warmup_frames.reset();
  cfg.workload.inference_timeout.reset();
  const Config back = parse_config(emit_config(cfg));
  CHECK(back == cfg);
  CHECK_FALSE(back.simulation.warmup_frames.has_value());
  CHECK_FALSE(back.workload.inference_timeout.has_value());
}

TEST_CASE("unknown keys are rejected with their path", "[config]") {
  std::string text = emit_config(testutil::small_config());
  text.replace(text.find("\"num_actors\""), 12, "\"bum_actors\"");
  try {
    parse_config(text);
    FAIL("expected ConfigParseError");
  } catch (const ConfigParseError& e) {
    CHECK(std::string(e.what()).find("workload.bum_actors") !=
          std::string::npos);
  }
}

TEST_CASE("missing keys are rejected with their path", "[config]") {
  const Config cfg = testutil::small_config();
  ordered_json j = ordered_json::parse(emit_config(cfg));
  j["hardware"].erase("sm_math_rate");
  try {
    parse_config(j.dump());
    FAIL("expected ConfigParseError");
  } catch (const ConfigParseError& e) {
    CHECK(std::string(e.what()).find("hardware.sm_math_rate") !=
          std::string::npos);
  }
}

TEST_CASE("schema_version is required and checked", "[config]") {
  ordered_json j = ordered_json::parse(emit_config(testutil::small_config()));
  j["schema_version"] = 2;
  CHECK_THROWS_AS(parse_config(j.dump()), ConfigParseError);
  j.erase("schema_version");
  CHECK_THROWS_AS(parse_config(j.dump()), ConfigParseError);
}

TEST_CASE("counts must be non-negative integers", "[config]") {
  ordered_json j = ordered_json::parse(emit_config(testutil::small_config()));
  j["hardware"]["cpu_threads"] = -4;
  try {
    parse_config(j.dump());
    FAIL("expected ConfigParseError");
  } catch (const ConfigParseError& e) {
    CHECK(std::string(e.what()).find("hardware.cpu_threads") !=
          std::string::npos);
  }
}

TEST_CASE("distribution kinds are checked", "[config]") {
  ordered_json j = ordered_json::parse(emit_config(testutil::small_config()));
  j["workload"]["env_step_time"]["kind"] = "weibull";
  try {
    parse_config(j.dump());
    FAIL("expected ConfigParseError");
  } catch (const ConfigParseError& e) {
    CHECK(std::string(e.what()).find("env_step_time.kind") !=
          std::string::npos);
  }
}

TEST_CASE("non-JSON input fails cleanly", "[config]") {
  CHECK_THROWS_AS(parse_config("hardware: {}"), ConfigParseError);
}

TEST_CASE("optional kernel fields default sensibly", "[config]") {
  ordered_json j = ordered_json::parse(emit_config(testutil::small_config()));
  j["workload"]["inference_kernel"].erase("l2_hit_fraction");
  j["workload"]["inference_kernel"].erase("dep_mem_rounds");
  j["workload"]["inference_kernel"].erase("per_item_scaling");
  const Config cfg = parse_config(j.dump());
  CHECK(cfg.workload.inference_kernel.l2_hit_fraction == 0.0);
  CHECK(cfg.workload.inference_kernel.dep_mem_rounds == 0);
  CHECK_FALSE(cfg.workload.inference_kernel.per_item_scaling);
}
