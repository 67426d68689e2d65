#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "nvcavity/calibration.hpp"
#include "nvcavity/noise.hpp"
#include "../support/generators.hpp"

using namespace nvcavity;
using namespace nvcavity::calibration;

namespace {

TimeSeries tone(double rms, double freq, double rate, std::size_t n, double phase = 0.3) {
  TimeSeries s{0.0, rate, {}, "T"};
  for (std::size_t i = 0; i < n; ++i) {
    s.values.push_back(rms * std::sqrt(2.0) *
                       std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / rate + phase));
  }
  return s;
}

} // namespace

TEST_CASE("coil field of the shipped test coil") {
  const auto b = coil_field(CoilConfig{});
  CHECK(b.amplitude == doctest::Approx(1.44e-9).epsilon(0.01));
  CHECK(b.rms == doctest::Approx(1.02e-9).epsilon(0.01));
  CHECK(b.rms == doctest::Approx(b.amplitude / std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("coil field limits") {
  CoilConfig c;
  c.distance = 0.0;
  CHECK(coil_field(c).amplitude ==
        doctest::Approx(kMu0 * c.n_turns * c.current / (2.0 * c.radius)).epsilon(1e-14));

  CoilConfig near, far;
  near.distance = 1.0;
  far.distance = 2.0;
  near.radius = far.radius = 1e-4;
  CHECK(coil_field(near).amplitude / coil_field(far).amplitude == doctest::Approx(8.0).epsilon(1e-6));

  CoilConfig rms_current;
  rms_current.current_is_peak = false;
  CHECK(coil_field(rms_current).rms == doctest::Approx(coil_field(CoilConfig{}).amplitude).epsilon(1e-14));
}

TEST_CASE("coil field is linear in turns and current") {
  nvtest::Gen gen(3);
  for (int trial = 0; trial < 50; ++trial) {
    CoilConfig c;
    c.n_turns = gen.integer(1, 100);
    c.current = gen.log_uniform(1e-9, 1e-2);
    c.radius = gen.log_uniform(1e-3, 0.1);
    c.distance = gen.uniform(0.0, 0.1);
    const double base = coil_field(c).amplitude;
    const int k = gen.integer(2, 7);
    CoilConfig turns = c, current = c;
    turns.n_turns *= k;
    current.current *= k;
    CHECK(coil_field(turns).amplitude == doctest::Approx(k * base).epsilon(1e-13));
    CHECK(coil_field(current).amplitude == doctest::Approx(k * base).epsilon(1e-13));
  }
}

TEST_CASE("coil validation") {
  CoilConfig c;
  c.radius = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = {};
  c.n_turns = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("whole cycle length") {
  CHECK(whole_cycle_length(68800, 2150.0, 72.0) % 1075 == 0);
  const auto n = whole_cycle_length(68800, 2150.0, 72.0);
  const double cycles = static_cast<double>(n) * 72.0 / 2150.0;
  CHECK(std::abs(cycles - std::round(cycles)) < 1e-9);
  CHECK(n > 68800 - 1075);
  CHECK(whole_cycle_length(1000, 1000.0, 10.0) == 1000);
}

TEST_CASE("exact tone is recovered without error") {
  const auto s = tone(1.02e-9, 72.0, 2150.0, 2150 * 32);
  const auto r = calibration_check(1.02e-9, s, 72.0);
  CHECK(r.relative_error < 1e-12);
  CHECK(r.cycles == doctest::Approx(72.0 * 32.0));
  CHECK(r.warnings.empty());
}

TEST_CASE("off-grid record warns") {
  const auto s = tone(1e-9, 72.3, 2150.0, 2150 * 32);
  const auto r = calibration_check(1e-9, s, 72.3);
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("too few cycles") {
  const auto s = tone(1e-9, 72.0, 2150.0, 2150);
  CHECK_THROWS_AS(calibration_check(1e-9, s, 72.0), RecordTooShort);
}

TEST_CASE("out-of-band content 40 dB down leaves the error unchanged") {
  const double rms = 1e-9;
  const std::size_t n = 2150 * 32;
  const auto clean = tone(rms, 72.0, 2150.0, n);
  const std::vector<noise::Component> extra{noise::Sine{0.01 * rms, 50.0, 0.0},
                                            noise::Sine{0.01 * rms, 150.0, 1.0},
                                            noise::White{0.01 * rms / std::sqrt(1075.0), 0.0}};
  nvtest::Gen gen(11);
  for (int trial = 0; trial < 10; ++trial) {
    auto noisy = clean;
    const auto add = noise::synthesize_record(32.0, 2150.0, extra, gen.seed());
    REQUIRE(add.size() == n);
    for (std::size_t i = 0; i < n; ++i) {
      noisy.values[i] += add.values[i];
    }
    const double e0 = calibration_check(rms, clean, 72.0).relative_error;
    const double e1 = calibration_check(rms, noisy, 72.0).relative_error;
    CHECK(std::abs(e1 - e0) < 1e-3);
  }
}
