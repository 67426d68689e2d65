#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "nvcavity/cavity.hpp"
#include "nvcavity/estimation.hpp"
#include "nvcavity/lockin.hpp"
#include "nvcavity/spin.hpp"
#include "../support/generators.hpp"

using namespace nvcavity;
using namespace nvcavity::estimation;

namespace {

constexpr double kPi = std::numbers::pi;

Curve airy_data(double finesse, double peak, double noise, std::uint64_t seed, std::size_t n = 8000) {
  nvtest::Gen gen(seed);
  Curve c{nvtest::linspace(-kPi, 3.0 * kPi, n), {}};
  for (double x : c.x) {
    c.y.push_back(cavity::airy_transmission(peak, finesse, x) + noise * peak * gen.normal());
  }
  return c;
}

spin::OdmrSpectrum odmr_data(const spin::OdmrModel &m, double noise, std::uint64_t seed) {
  nvtest::Gen gen(seed);
  const auto c = spin::odmr_peak_centers(m);
  auto s = spin::odmr_spectrum(m, nvtest::linspace(c[0] - 28e6, c[3] + 28e6, 4001));
  for (auto &v : s.transmission) {
    v += noise * gen.normal();
  }
  return s;
}

const Model kLorentz = [](double x, std::span<const double> p) {
  return p[0] - p[1] / (1.0 + std::pow(2.0 * (x - p[2]) / p[3], 2));
};

} // namespace

TEST_CASE("exact linear fit") {
  const std::vector<double> x{0.0, 1.0, 2.0}, y{1.0, 3.0, 5.0};
  Model line = [](double xv, std::span<const double> p) { return p[0] * xv + p[1]; };
  const auto f = least_squares(line, x, y, {0.0, 0.0}, Bounds::unbounded(2), {"m", "b"});
  CHECK(f.converged);
  CHECK(std::abs(f.value("m") - 2.0) < 1e-10);
  CHECK(std::abs(f.value("b") - 1.0) < 1e-10);
}

TEST_CASE("noisy Lorentzian center") {
  nvtest::Gen gen(5);
  const double fwhm = 5.6;
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = nvtest::linspace(-20.0, 20.0, 200);
    std::vector<double> y;
    const std::vector<double> truth{1.0, 0.037, 0.7, fwhm};
    for (double xv : x) {
      y.push_back(kLorentz(xv, truth) + 0.01 * 0.037 * gen.normal());
    }
    const auto f = least_squares(kLorentz, x, y, {1.0, 0.03, 0.0, 4.0}, Bounds::unbounded(4));
    CHECK(std::abs(f.params[2] - 0.7) < fwhm / 50.0);
  }
}

TEST_CASE("flat model surfaces an error") {
  const auto x = nvtest::linspace(0.0, 1.0, 10);
  const std::vector<double> y(10, 1.0);
  Model flat = [](double, std::span<const double> p) { return std::clamp(p[0], 0.0, 0.0) + 2.0; };
  Bounds b{{0.0}, {1.0}};
  CHECK_THROWS_AS(least_squares(flat, x, y, {1.0}, b), FitError);
}

TEST_CASE("fit is invariant under reordering the data") {
  nvtest::Gen gen(6);
  auto x = nvtest::linspace(-20.0, 20.0, 120);
  std::vector<double> y;
  for (double xv : x) {
    y.push_back(kLorentz(xv, std::vector<double>{1.0, 0.05, 1.0, 5.0}) + 0.001 * gen.normal());
  }
  const std::vector<double> init{1.0, 0.04, 0.0, 4.0};
  const auto a = least_squares(kLorentz, x, y, init, Bounds::unbounded(4));
  std::vector<std::size_t> perm(x.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), gen.engine());
  std::vector<double> xs, ys;
  for (auto i : perm) {
    xs.push_back(x[i]);
    ys.push_back(y[i]);
  }
  const auto b = least_squares(kLorentz, xs, ys, init, Bounds::unbounded(4));
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(b.params[j] == doctest::Approx(a.params[j]).epsilon(1e-7));
  }
}

TEST_CASE("standard errors shrink as 1/sqrt(n)") {
  Model line = [](double xv, std::span<const double> p) { return p[0] * xv + p[1]; };
  auto fit_n = [&](std::size_t n, std::uint64_t seed) {
    nvtest::Gen gen(seed);
    const auto x = nvtest::linspace(0.0, 1.0, n);
    std::vector<double> y;
    for (double xv : x) {
      y.push_back(2.0 * xv + 1.0 + 0.1 * gen.normal());
    }
    return least_squares(line, x, y, {0.0, 0.0}, Bounds::unbounded(2)).std_errors;
  };
  double ratio = 0.0;
  const int trials = 20;
  for (int t = 0; t < trials; ++t) {
    ratio += fit_n(200, 100 + t)[0] / fit_n(800, 200 + t)[0];
  }
  CHECK(ratio / trials == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("FitResult serialization") {
  const std::vector<double> x{0.0, 1.0, 2.0, 3.0}, y{1.0, 3.1, 4.9, 7.0};
  Model line = [](double xv, std::span<const double> p) { return p[0] * xv + p[1]; };
  const auto f = least_squares(line, x, y, {0.0, 0.0}, Bounds::unbounded(2), {"m", "b"});
  CHECK(f.to_text("line.").find("line.m = ") != std::string::npos);
  CHECK(f.to_csv().rfind("param,value,std\nm,", 0) == 0);
  CHECK_THROWS_AS(f.value("q"), InvalidArgument);
}

TEST_CASE("Airy fit") {
  SUBCASE("noiseless") {
    const auto f = fit_airy(airy_data(160.0, 0.3, 0.0, 1));
    CHECK(f.finesse == doctest::Approx(160.0).epsilon(1e-6));
    CHECK(f.fsr == doctest::Approx(2.0 * kPi).epsilon(1e-6));
    REQUIRE(f.peak_positions.size() == 2);
    CHECK(std::abs(f.peak_positions[0]) < 1e-6);
  }
  SUBCASE("wide resonances") {
    const auto f = fit_airy(airy_data(10.0, 0.3, 0.0, 1));
    CHECK(f.finesse == doctest::Approx(10.0).epsilon(0.02));
  }
  SUBCASE("two percent noise") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto f = fit_airy(airy_data(160.0, 0.3, 0.02, seed));
      CHECK(std::abs(f.finesse - 160.0) <= 4.0);
    }
  }
  SUBCASE("one resonance only") {
    Curve c{nvtest::linspace(-1.0, 1.0, 500), {}};
    for (double x : c.x) {
      c.y.push_back(cavity::airy_transmission(0.3, 160.0, x));
    }
    CHECK_THROWS_AS(fit_airy(c), TooFewPeaks);
  }
}

TEST_CASE("saturation fit") {
  const spin::SaturationModel truth;
  const auto p = nvtest::linspace(0.0, 3.0, 1001);
  SUBCASE("noiseless") {
    std::vector<double> y;
    for (double v : p) {
      y.push_back(spin::saturation_transmission(truth, v));
    }
    const auto f = fit_saturation(p, y);
    CHECK(std::abs(f.value("p_sat") - 0.735) <= 1e-8 * 0.735);
    CHECK(std::abs(f.value("depth") - 0.605) <= 1e-8 * 0.605);
    CHECK(f.warnings.empty());
  }
  SUBCASE("half-percent noise") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      nvtest::Gen gen(seed);
      std::vector<double> y;
      for (double v : p) {
        y.push_back(spin::saturation_transmission(truth, v) + 0.005 * gen.normal());
      }
      const auto f = fit_saturation(p, y);
      CHECK(f.value("p_sat") == doctest::Approx(0.735).epsilon(0.02));
      CHECK(f.value("depth") == doctest::Approx(0.605).epsilon(0.01));
    }
  }
  SUBCASE("powers far below saturation") {
    const auto low = nvtest::linspace(0.0, 0.01, 10);
    std::vector<double> y;
    for (double v : low) {
      y.push_back(spin::saturation_transmission(truth, v));
    }
    const auto f = fit_saturation(low, y);
    CHECK_FALSE(f.warnings.empty());
  }
  SUBCASE("too few powers") {
    const std::vector<double> two{0.1, 0.1, 0.5}, y{0.9, 0.9, 0.7};
    CHECK_THROWS_AS(fit_saturation(two, y), DegenerateDesign);
  }
}

TEST_CASE("ODMR fit") {
  spin::OdmrModel m;
  SUBCASE("four features under 0.2% noise") {
    const auto truth = spin::odmr_peak_centers(m);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto f = fit_odmr(odmr_data(m, 0.002, seed));
      REQUIRE(f.peaks.size() == 4);
      for (std::size_t k = 0; k < 4; ++k) {
        CHECK(std::abs(f.peaks[k].center - truth[k]) < 100e3);
        CHECK(f.peaks[k].contrast == doctest::Approx(0.037).epsilon(0.05));
        CHECK(f.peaks[k].fwhm == doctest::Approx(5.6e6).epsilon(0.05));
      }
      CHECK(f.peaks[0].outer);
      CHECK_FALSE(f.peaks[1].outer);
      CHECK_FALSE(f.peaks[2].outer);
      CHECK(f.peaks[3].outer);
    }
  }
  SUBCASE("noiseless four features") {
    const auto truth = spin::odmr_peak_centers(m);
    const auto f = fit_odmr(odmr_data(m, 0.0, 1));
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(f.peaks[k].center == doctest::Approx(truth[k]).epsilon(1e-6));
      CHECK(f.peaks[k].contrast == doctest::Approx(0.037).epsilon(1e-6));
      CHECK(f.peaks[k].fwhm == doctest::Approx(5.6e6).epsilon(1e-6));
    }
  }
  SUBCASE("single isolated feature") {
    spin::OdmrSpectrum s;
    s.freqs = nvtest::linspace(2.9e9, 2.94e9, 801);
    for (double f : s.freqs) {
      s.transmission.push_back(1.0 - 0.05 * spin::lorentzian(f, 2.9213e9, 4.1e6));
    }
    OdmrFitOptions o;
    o.n_peaks = 1;
    const auto f = fit_odmr(s, o);
    REQUIRE(f.peaks.size() == 1);
    CHECK(f.peaks[0].center == doctest::Approx(2.9213e9).epsilon(1e-6));
    CHECK(f.peaks[0].contrast == doctest::Approx(0.05).epsilon(1e-6));
    CHECK(f.peaks[0].fwhm == doctest::Approx(4.1e6).epsilon(1e-6));
  }
  SUBCASE("peak-count mismatch") {
    spin::OdmrSpectrum s;
    s.freqs = nvtest::linspace(2.8e9, 2.94e9, 1401);
    for (double f : s.freqs) {
      s.transmission.push_back(1.0 - 0.037 * spin::lorentzian(f, 2.84e9, 5.6e6) -
                               0.037 * spin::lorentzian(f, 2.9e9, 5.6e6));
    }
    CHECK_THROWS_AS(fit_odmr(s), PeakCountMismatch);
  }
}

TEST_CASE("dispersive slope fit") {
  lockin::LockInConfig c;
  const double fwhm = 5.6e6;
  auto shape = [&](double f) { return 1.0 - 0.037 * spin::lorentzian(f, 0.0, fwhm); };
  const auto grid = nvtest::linspace(-2.0 * fwhm, 2.0 * fwhm, 401);
  const auto curve = lockin::dispersive_curve(shape, 0.0, c, grid);
  const double step = grid[1] - grid[0];

  const auto s = fit_slope(curve.detunings, curve.lockin_out, fwhm / 20.0, fwhm);
  CHECK(std::abs(s.zero_crossing) <= step);
  CHECK(s.slope == doctest::Approx(curve.slope_at_zero).epsilon(0.01));
  CHECK(s.warnings.empty());

  const auto wide = fit_slope(curve.detunings, curve.lockin_out, fwhm, fwhm);
  CHECK_FALSE(wide.warnings.empty());
  CHECK(wide.nonlinearity > 0.01);
}
