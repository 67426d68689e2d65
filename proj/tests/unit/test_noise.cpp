#include <doctest.h>

#include <cmath>
#include <numeric>

#include "nvcavity/noise.hpp"
#include "../support/generators.hpp"

using namespace nvcavity;
using namespace nvcavity::noise;

namespace {

double variance(const std::vector<double> &v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) {
    s += (x - mean) * (x - mean);
  }
  return s / static_cast<double>(v.size());
}

double integrated_power(const Spectrum &s) {
  double p = 0.0;
  for (double a : s.asd) {
    p += a * a * s.resolution();
  }
  return p;
}

TimeSeries white(double asd_value, double duration, double rate, std::uint64_t seed) {
  const std::vector<Component> c{White{asd_value, 0.0}};
  return synthesize_record(duration, rate, c, seed);
}

} // namespace

TEST_CASE("synthesized sine has the requested RMS") {
  const std::vector<Component> c{Sine{1e-9, 72.0, 0.3}};
  const auto s = synthesize_record(10.0, 20e3, c, 1);
  CHECK(s.size() == 200000);
  CHECK(std::sqrt(variance(s.values)) == doctest::Approx(1e-9).epsilon(0.005));
}

TEST_CASE("synthesis is deterministic per seed") {
  const std::vector<Component> c{White{1.0, 0.0}, Sine{0.1, 10.0, 0.0}, LineHarmonics{50.0, {0.1, 0.05}}};
  const auto a = synthesize_record(1.0, 1e3, c, 42);
  const auto b = synthesize_record(1.0, 1e3, c, 42);
  const auto d = synthesize_record(1.0, 1e3, c, 43);
  CHECK(a.values == b.values);
  CHECK(a.values != d.values);
}

TEST_CASE("synthesis refuses components above Nyquist") {
  const std::vector<Component> sine{Sine{1.0, 600.0, 0.0}};
  CHECK_THROWS_AS(synthesize_record(1.0, 1e3, sine, 1), Aliasing);
  const std::vector<Component> lines{LineHarmonics{50.0, {1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0}}};
  CHECK_THROWS_AS(synthesize_record(1.0, 1e3, lines, 1), Aliasing);
}

TEST_CASE("white noise estimate is flat at the configured ASD") {
  const double s = 28e-12;
  const auto rec = white(s, 64.0, 4e3, 7);
  const auto spec = asd(rec, {4000, 0.5, Window::hann});
  for (double lo = 10.0; lo < 1000.0; lo += 99.0) {
    double p = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < spec.freq.size(); ++k) {
      if (spec.freq[k] >= lo && spec.freq[k] < lo + 99.0) {
        p += spec.asd[k] * spec.asd[k];
        ++n;
      }
    }
    CHECK(std::sqrt(p / n) == doctest::Approx(s).epsilon(0.1));
  }
}

TEST_CASE("band-limited white noise keeps its in-band level") {
  const std::vector<Component> c{White{1.0, 100.0}};
  const auto rec = synthesize_record(64.0, 1e3, c, 3);
  const auto spec = asd(rec, {1000, 0.5, Window::hann});
  CHECK(noise_floor(spec, {20.0, 80.0}) == doctest::Approx(1.0).epsilon(0.1));
  CHECK(noise_floor(spec, {150.0, 450.0}) < 1e-3);
}

TEST_CASE("Parseval consistency") {
  nvtest::Gen gen(21);
  for (int i = 0; i < 5; ++i) {
    const auto rec = white(gen.uniform(0.5, 2.0), 40.0, 1e3, gen.seed());
    // Hann, 50% overlap, 79 averages.
    const auto spec = asd(rec, {1000, 0.5, Window::hann});
    CHECK(integrated_power(spec) == doctest::Approx(variance(rec.values)).epsilon(0.02));
    // A single rectangular segment is exact.
    const auto whole = asd(rec, {0, 0.0, Window::rectangular});
    CHECK(integrated_power(whole) == doctest::Approx(variance(rec.values)).epsilon(1e-10));
  }
}

TEST_CASE("bin-centred sine integrates back to its RMS") {
  const std::vector<Component> c{Sine{0.37, 72.0, 1.0}};
  const auto rec = synthesize_record(32.0, 2150.0, c, 1);
  const auto spec = asd(rec, {2150, 0.5, Window::hann});
  double p = 0.0;
  for (std::size_t k = 0; k < spec.freq.size(); ++k) {
    if (std::abs(spec.freq[k] - 72.0) <= 3.0) {
      p += spec.asd[k] * spec.asd[k] * spec.resolution();
    }
  }
  CHECK(std::sqrt(p) == doctest::Approx(0.37).epsilon(0.02));
}

TEST_CASE("zero signal and short records") {
  TimeSeries z{0.0, 100.0, std::vector<double>(1000, 0.0), "T"};
  for (double a : asd(z, {100, 0.5, Window::hann}).asd) {
    CHECK(a == 0.0);
  }
  CHECK_THROWS_AS(asd(z, {2000, 0.5, Window::hann}), RecordTooShort);
}

TEST_CASE("noise floor selection") {
  Spectrum flat;
  for (int k = 0; k <= 200; ++k) {
    flat.freq.push_back(k);
    flat.asd.push_back(3.5);
  }
  CHECK(noise_floor(flat, {60.0, 90.0}) == 3.5);
  const std::vector<Exclusion> all{{75.0, 20.0}};
  CHECK_THROWS_AS(noise_floor(flat, {60.0, 90.0}, all), EmptyBand);
  CHECK_THROWS_AS(noise_floor(Spectrum{}, {60.0, 90.0}), EmptyBand);

  const auto ex = line_exclusions(50.0, 200.0);
  REQUIRE(ex.size() == 4);
  CHECK(ex[1].center == 100.0);
  CHECK(ex[1].half_width == 2.0);
}

TEST_CASE("floor with mains lines") {
  const std::vector<Component> c{White{28e-12, 0.0}, LineHarmonics{50.0, {1e-9, 5e-10}}};
  const auto rec = synthesize_record(33.0, 2150.0, c, 5);
  const auto spec = asd(rec, {2150, 0.5, Window::hann});
  CHECK(noise_floor(spec, {60.0, 90.0}, line_exclusions(50.0, 90.0)) == doctest::Approx(28e-12).epsilon(0.1));
}

TEST_CASE("floor is invariant under excluded line harmonics") {
  nvtest::Gen gen(31);
  const auto base = white(1.0, 32.0, 1000.0, 9);
  const auto ex = line_exclusions(50.0, 200.0);
  const WelchOptions w{1000, 0.5, Window::hann};
  const double ref = noise_floor(asd(base, w), {40.0, 160.0}, ex);
  for (int i = 0; i < 5; ++i) {
    const std::vector<Component> lines{
        LineHarmonics{50.0, {gen.log_uniform(1e-3, 1e3), gen.log_uniform(1e-3, 1e3), gen.log_uniform(1e-3, 1e3)}}};
    auto with = synthesize_record(32.0, 1000.0, lines, 1);
    for (std::size_t k = 0; k < with.size(); ++k) {
      with.values[k] += base.values[k];
    }
    CHECK(noise_floor(asd(with, w), {40.0, 160.0}, ex) == doctest::Approx(ref).epsilon(1e-9));
  }
}

TEST_CASE("shot-noise behaviour fit") {
  SUBCASE("noiseless exact recovery") {
    NoiseModel m;
    m.a = 0.5;
    m.b = 1.0;
    m.c = 0.0;
    const auto itr = nvtest::linspace(0.01, 10.0, 40);
    std::vector<double> s;
    for (double i : itr) {
      s.push_back(shot_noise_behavior(m, i));
    }
    const auto f = fit_shot_noise_behavior(itr, s);
    CHECK(f.model.a == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(f.model.b == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(f.model.c <= 1e-6);
  }
  SUBCASE("residuals vanish on model data") {
    nvtest::Gen gen(17);
    for (int k = 0; k < 20; ++k) {
      NoiseModel m;
      m.a = gen.uniform(0.0, 1.0);
      m.b = gen.uniform(0.1, 2.0);
      m.c = gen.uniform(0.0, 0.1);
      std::vector<double> itr, s;
      for (int i = 0; i < 30; ++i) {
        itr.push_back(std::pow(10.0, -2.0 + 3.0 * i / 29.0));
        s.push_back(shot_noise_behavior(m, itr.back()));
      }
      const auto f = fit_shot_noise_behavior(itr, s);
      for (double r : f.residuals) {
        CHECK(std::abs(r) <= 1e-6);
      }
    }
  }
  SUBCASE("recovery under 1% noise") {
    nvtest::Gen gen(99);
    const NoiseModel truth;
    std::vector<double> itr;
    for (int i = 0; i < 40; ++i) {
      itr.push_back(std::pow(10.0, -2.0 + 3.0 * i / 39.0));
    }
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> s;
      for (double i : itr) {
        s.push_back(shot_noise_behavior(truth, i) * (1.0 + gen.normal(0.01)));
      }
      const auto f = fit_shot_noise_behavior(itr, s);
      CHECK(f.model.a == doctest::Approx(0.23).epsilon(0.10));
      CHECK(f.model.b == doctest::Approx(1.16).epsilon(0.03));
      // c^2 I^2 is far below b^2 I over this design: the fitted term stays within
      // three standard deviations (2% each in S^2) of the noise at the top of the sweep.
      const double i_max = itr.back();
      CHECK(f.fit.value("c2") * i_max * i_max <= 0.06 * std::pow(shot_noise_behavior(truth, i_max), 2));
    }
  }
  SUBCASE("c bounded under 0.01% noise") {
    nvtest::Gen gen(98);
    const NoiseModel truth;
    std::vector<double> itr;
    for (int i = 0; i < 40; ++i) {
      itr.push_back(std::pow(10.0, -2.0 + 3.0 * i / 39.0));
    }
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> s;
      for (double i : itr) {
        s.push_back(shot_noise_behavior(truth, i) * (1.0 + gen.normal(1e-4)));
      }
      const auto f = fit_shot_noise_behavior(itr, s);
      CHECK(f.model.a == doctest::Approx(0.23).epsilon(0.10));
      CHECK(f.model.b == doctest::Approx(1.16).epsilon(0.03));
      CHECK(f.model.c <= 0.01);
    }
  }
  SUBCASE("degenerate design") {
    const std::vector<double> same(5, 1.0), s{1, 1, 1, 1, 1};
    CHECK_THROWS_AS(fit_shot_noise_behavior(same, s), DegenerateDesign);
  }
  CHECK(shot_noise_behavior(NoiseModel{}, 0.0) == 0.23);
}

TEST_CASE("shot-noise limit") {
  const double h = 6.62607015e-34, c = 299792458.0;
  const double rel = std::sqrt(2.0 * h * c / 1042e-9 / 4.2e-3);
  CHECK(relative_shot_noise_asd(4.2e-3, 1042e-9) == doctest::Approx(rel).epsilon(1e-14));
  CHECK(rel == doctest::Approx(9.5e-9).epsilon(0.01));
  for (double p : {1e-3, 4.2e-3, 10e-3}) {
    CHECK(shot_noise_limit(2.0 * p, 1042e-9, 100.0) * std::sqrt(2.0) ==
          doctest::Approx(shot_noise_limit(p, 1042e-9, 100.0)).epsilon(1e-14));
    CHECK(shot_noise_limit(p, 1042e-9, 200.0) * 2.0 ==
          doctest::Approx(shot_noise_limit(p, 1042e-9, 100.0)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(shot_noise_limit(4.2e-3, 1042e-9, 0.0), ZeroSlope);
}

TEST_CASE("projection-noise limit") {
  const EnsembleParams e;
  const double eta = projection_noise_limit(e);
  CHECK(eta == doctest::Approx(5e-14).epsilon(0.1));
  for (double scale : {0.5, 1.0, 3.0}) {
    EnsembleParams a = e;
    a.density_ppm *= scale;
    EnsembleParams b = a;
    b.density_ppm *= 4.0;
    CHECK(projection_noise_limit(b) * 2.0 == doctest::Approx(projection_noise_limit(a)).epsilon(1e-14));
    EnsembleParams w = a;
    w.fwhm /= 2.0;
    CHECK(projection_noise_limit(w) * std::sqrt(2.0) ==
          doctest::Approx(projection_noise_limit(a)).epsilon(1e-14));
  }
  EnsembleParams bad = e;
  bad.volume_cm3 = 0.0;
  CHECK_THROWS_AS(projection_noise_limit(bad), InvalidArgument);
}

TEST_CASE("sensitivity report over three records") {
  const double rate = 2150.0, dur = 33.0;
  const std::vector<Component> s{White{37e-12, 0.0}, LineHarmonics{50.0, {2e-10, 1e-10}}};
  const std::vector<Component> i{White{28e-12, 0.0}};
  const std::vector<Component> e{White{2e-12, 0.0}};
  const auto rs = synthesize_record(dur, rate, s, 1);
  const auto ri = synthesize_record(dur, rate, i, 2);
  const auto re = synthesize_record(dur, rate, e, 3);
  const WelchOptions w{2150, 0.5, Window::hann};
  const auto ex = line_exclusions(50.0, 90.0);
  const auto r = sensitivity_report({rs, ri, re}, {60.0, 90.0}, w, ex, 22e-12, 0.43e-12);
  CHECK(r.sensitive_floor == doctest::Approx(37e-12).epsilon(0.1));
  CHECK(r.floor_asd == doctest::Approx(28e-12).epsilon(0.1));
  CHECK(r.electronic_floor == doctest::Approx(2e-12).epsilon(0.1));
  CHECK(r.warnings.empty());
  CHECK(r.to_text().find("projection_formula") != std::string::npos);

  const auto same = sensitivity_report({ri, ri, ri}, {60.0, 90.0}, w, ex, 22e-12, 0.43e-12);
  CHECK(same.sensitive_floor == same.floor_asd);
  CHECK(same.electronic_floor == same.floor_asd);

  const auto other = synthesize_record(dur, 2 * rate, e, 3);
  CHECK_THROWS_AS(sensitivity_report({rs, ri, other}, {60.0, 90.0}, w, ex, 1.0, 1.0), InvalidArgument);
}
