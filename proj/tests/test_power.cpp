#include <catch2/catch.hpp>

#include <vector>

#include "rlsim/power.hpp"
#include "rlsim/rng.hpp"

using namespace rlsim;

TEST_CASE("instantaneous power anchors at idle and max", "[power]") {
  const PowerSpec spec{70.0, 300.0};
  CHECK(instantaneous_power(0.0, spec) == 70.0);
  CHECK(instantaneous_power(1.0, spec) == 300.0);
  CHECK(instantaneous_power(0.5, spec) == 185.0);
}

TEST_CASE("an always-idle run draws idle power and does no work", "[power]") {
  const PowerSpec spec{70.0, 300.0};
  const std::vector<BusyStep> timeline = {{0.0, 0.0}};
  const PowerReport rep = power_report(timeline, 10.0, 0.0, spec);
  CHECK(rep.avg_power == Approx(70.0));
  CHECK(rep.perf_per_watt == 0.0);
  CHECK(rep.energy == Approx(700.0));
}

TEST_CASE("a fully busy window integrates as a rectangle", "[power]") {
  const PowerSpec spec{70.0, 300.0};
  const std::vector<BusyStep> timeline = {{0.0, 1.0}};
  const PowerReport rep = power_report(timeline, 10.0, 5.0, spec);
  CHECK(rep.energy == Approx(3000.0));
  CHECK(rep.avg_power == Approx(300.0));
  CHECK(rep.peak_power == Approx(300.0));
  CHECK(rep.perf_per_watt == Approx(5.0 / 300.0));
  CHECK(rep.energy_per_frame == Approx(3000.0 / 50.0));
}

TEST_CASE("an empty timeline is an error", "[power]") {
  CHECK_THROWS_AS(power_report({}, 1.0, 1.0, PowerSpec{70.0, 300.0}),
                  std::invalid_argument);
}

TEST_CASE("average power stays within the envelope", "[power]") {
  const PowerSpec spec{70.0, 300.0};
  StreamRng rng(21, 0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<BusyStep> timeline;
    double t = 0.0;
    const int steps = 1 + static_cast<int>(rng.next_u64() % 20);
    for (int i = 0; i < steps; ++i) {
      timeline.push_back({t, rng.next_unit()});
      t += 0.01 + rng.next_unit();
    }
    const PowerReport rep = power_report(timeline, t + 0.5, 1.0, spec);
    CHECK(rep.avg_power >= spec.p_idle);
    CHECK(rep.avg_power <= spec.p_max);
    CHECK(rep.peak_power <= spec.p_max);
  }
}

TEST_CASE("energy is additive over window partitions", "[power]") {
  const PowerSpec spec{50.0, 250.0};
  const std::vector<BusyStep> full = {{0.0, 0.2}, {1.0, 0.9}, {3.0, 0.5}};
  const PowerReport whole = power_report(full, 4.0, 1.0, spec);

  const std::vector<BusyStep> first = {{0.0, 0.2}, {1.0, 0.9}};
  const std::vector<BusyStep> second = {{2.0, 0.9}, {3.0, 0.5}};
  const PowerReport a = power_report(first, 2.0, 1.0, spec);
  const PowerReport b = power_report(second, 4.0, 1.0, spec);
  CHECK(whole.energy == Approx(a.energy + b.energy).epsilon(1e-12));
}

TEST_CASE("energy per frame is average power over throughput", "[power]") {
  const PowerSpec spec{70.0, 300.0};
  const std::vector<BusyStep> timeline = {{0.0, 0.3}, {2.0, 0.8}};
  const double fps = 12.5;
  const PowerReport rep = power_report(timeline, 6.0, fps, spec);
  CHECK(rep.energy_per_frame == Approx(rep.avg_power / fps));
}
