#include <doctest.h>

#include <sstream>
#include <string>

#include "nvcavity/config.hpp"
#include "nvcavity/csv.hpp"
#include "../support/generators.hpp"

using namespace nvcavity;

namespace {

std::string roundtrip(const std::string &text) {
  std::istringstream is(text);
  std::ostringstream os;
  csv::write(os, csv::read(is));
  return os.str();
}

std::string error_of(const std::string &text) {
  try {
    config::parse_config(text);
  } catch (const ConfigError &e) {
    return e.what();
  }
  return {};
}

} // namespace

TEST_CASE("SI suffixes") {
  CHECK(config::parse_si("8.6k") == doctest::Approx(8600.0).epsilon(1e-15));
  CHECK(config::parse_si("300u") == doctest::Approx(300e-6).epsilon(1e-15));
  CHECK(config::parse_si("2.87G") == doctest::Approx(2.87e9).epsilon(1e-15));
  CHECK(config::parse_si("5.6M") == doctest::Approx(5.6e6).epsilon(1e-15));
  CHECK(config::parse_si("37p") == doctest::Approx(37e-12).epsilon(1e-15));
  CHECK(config::parse_si("1042n") == doctest::Approx(1042e-9).epsilon(1e-15));
  CHECK(config::parse_si("3m") == doctest::Approx(3e-3).epsilon(1e-15));
  CHECK(config::parse_si("1e-3") == doctest::Approx(1e-3).epsilon(1e-15));
  CHECK_THROWS(config::parse_si("8.6q"));
  CHECK_THROWS(config::parse_si(""));
}

TEST_CASE("config errors") {
  SUBCASE("unknown key carries the line number") {
    const auto msg = error_of("[run]\nseed = 1\n\n[lockin]\nf_modd = 8.6k\n");
    CHECK(msg.find("line 5") != std::string::npos);
    CHECK(msg.find("lockin.f_modd") != std::string::npos);
  }
  SUBCASE("malformed value") {
    const auto msg = error_of("[run]\nseed = 1\nduration = abc\n");
    CHECK(msg.find("line 3") != std::string::npos);
  }
  SUBCASE("missing seed") {
    CHECK(error_of("[run]\nduration = 5\n").find("run.seed") != std::string::npos);
  }
  SUBCASE("sample rate too low names both fields") {
    const auto msg = error_of("[run]\nseed = 1\nrate = 10k\n");
    CHECK(msg.find("run.rate") != std::string::npos);
    CHECK(msg.find("lockin.f_mod") != std::string::npos);
  }
  SUBCASE("floor band beyond the filter bandwidth") {
    const auto msg = error_of("[run]\nseed = 1\nfloor_band = 60:900\n");
    CHECK(msg.find("run.floor_band") != std::string::npos);
    CHECK(msg.find("lockin.time_constant") != std::string::npos);
  }
  SUBCASE("defaults are consistent once seeded") {
    CHECK(error_of("[run]\nseed = 7\n").empty());
  }
}

TEST_CASE("shipped profile reproduces the reference settings") {
  const auto c = config::load_config("paper_defaults");
  CHECK(c.cavity.r1 == 0.985);
  CHECK(c.cavity.r2 == 0.992);
  CHECK(c.cavity.loss_roundtrip == 0.0166);
  CHECK(c.singlet.loss_pumped == 0.0309);
  CHECK(c.saturation.p_sat == doctest::Approx(0.735).epsilon(1e-15));
  CHECK(c.saturation.depth == 0.605);
  CHECK(c.odmr.bias_field == doctest::Approx(3e-3).epsilon(1e-15));
  for (const auto &p : c.odmr.peaks) {
    CHECK(p.contrast == 0.037);
    CHECK(p.fwhm == doctest::Approx(5.6e6).epsilon(1e-15));
  }
  CHECK(c.lockin.f_mod == doctest::Approx(8.6e3).epsilon(1e-15));
  CHECK(c.lockin.f_dev == doctest::Approx(4.5e6).epsilon(1e-15));
  CHECK(c.lockin.time_constant == doctest::Approx(300e-6).epsilon(1e-15));
  CHECK(c.lockin.poles == 4);
  CHECK(c.lockin.auto_phase);
  CHECK(c.noise.a == 0.23);
  CHECK(c.noise.b == 1.16);
  CHECK(c.noise.c == doctest::Approx(2e-3).epsilon(1e-15));
  CHECK(c.noise.line_harmonic_rms.size() == 3);
  CHECK(c.floors.sensitive == doctest::Approx(37e-12).epsilon(1e-15));
  CHECK(c.floors.insensitive == doctest::Approx(28e-12).epsilon(1e-15));
  CHECK(c.ensemble.density_ppm == 0.68);
  CHECK(c.coil.n_turns == 11);
  CHECK(c.coil.radius == doctest::Approx(0.025).epsilon(1e-15));
  CHECK(c.coil.distance == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(c.coil.current == doctest::Approx(6.5e-6).epsilon(1e-15));
  CHECK(c.run.seed.value() == 20240611u);
  CHECK(c.run.test_tone_from_coil);
  CHECK(c.run.test_tone_freq == 72.0);
  CHECK(c.run.floor_band == std::pair<double, double>{60.0, 90.0});
}

TEST_CASE("CSV number formatting round-trips exactly") {
  nvtest::Gen gen(21);
  for (int i = 0; i < 1000; ++i) {
    const double v = gen.normal() * std::pow(10.0, gen.integer(-300, 300));
    CHECK(csv::parse_number(csv::format_number(v)) == v);
  }
  CHECK_THROWS_AS(csv::parse_number("1.0x"), InvalidArgument);
}

TEST_CASE("CSV read/write is a fixed point") {
  nvtest::Gen gen(22);
  TimeSeries s{0.0, 2150.0, gen.normals(500, 1e-11), "T"};
  std::ostringstream os;
  csv::write(os, csv::from_time_series(s));
  const auto first = os.str();
  CHECK(roundtrip(first) == first);
  CHECK(roundtrip(roundtrip(first)) == first);

  std::istringstream is(first);
  const auto back = csv::to_time_series(csv::read(is));
  CHECK(back.rate == 2150.0);
  CHECK(back.values == s.values);
  CHECK(back.unit == "T");

  const std::string hand = "# unit: V\nx,y\n1,2\n3,4\n";
  CHECK(roundtrip(hand) == hand);
}

TEST_CASE("CSV edge cases") {
  std::istringstream empty("");
  const auto t = csv::read(empty);
  CHECK(t.columns.empty());
  CHECK(t.rows.empty());
  CHECK(csv::to_spectrum(t).freq.empty());

  std::istringstream ragged("a,b\n1,2\n3\n");
  CHECK_THROWS_AS(csv::read(ragged), InvalidArgument);

  std::istringstream text("a,b\n1,x\n");
  CHECK_THROWS_AS(csv::read(text).numeric("b"), InvalidArgument);
}
