#include "nvcavity/calibration.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

namespace nvcavity::calibration {

void CoilConfig::validate() const {
  if (n_turns < 1) {
    throw InvalidArgument("calibration", "coil needs at least one turn");
  }
  if (!(radius > 0.0)) {
    throw InvalidArgument("calibration", "coil radius must be positive");
  }
  if (!(distance >= 0.0)) {
    throw InvalidArgument("calibration", "coil distance must be non-negative");
  }
  if (!(current >= 0.0)) {
    throw InvalidArgument("calibration", "coil current must be non-negative");
  }
}

CoilField coil_field(const CoilConfig &c) {
  c.validate();
  const double r2 = c.radius * c.radius;
  const double z2 = c.distance * c.distance;
  const double per_amp = kMu0 * static_cast<double>(c.n_turns) * r2 / (2.0 * std::pow(z2 + r2, 1.5));
  const double b = per_amp * c.current;
  if (c.current_is_peak) {
    return {b, b / std::numbers::sqrt2};
  }
  return {b * std::numbers::sqrt2, b};
}

std::size_t whole_cycle_length(std::size_t n, double rate, double freq) {
  const double samples_per_cycle = rate / freq;
  auto cycles = std::floor(static_cast<double>(n) / samples_per_cycle);
  for (; cycles >= 1.0; cycles -= 1.0) {
    const double len = cycles * samples_per_cycle;
    if (std::abs(len - std::round(len)) < 1e-6) {
      return static_cast<std::size_t>(std::llround(len));
    }
  }
  return n;
}

CalibrationResult calibration_check(double b_test_rms, const TimeSeries &recovered,
                                    double test_freq) {
  if (!(b_test_rms > 0.0)) {
    throw InvalidArgument("calibration", "test field must be positive");
  }
  if (!(test_freq > 0.0) || !(test_freq < 0.5 * recovered.rate)) {
    throw InvalidArgument("calibration", "test frequency must lie in (0, Nyquist)");
  }
  const std::size_t n = recovered.size();
  CalibrationResult out;
  out.cycles = static_cast<double>(n) * test_freq / recovered.rate;
  if (out.cycles < 100.0) {
    throw RecordTooShort("calibration", "record holds " + std::to_string(out.cycles) +
                                            " cycles of the test tone; at least 100 are needed");
  }
  if (std::abs(out.cycles - std::round(out.cycles)) > 1e-6) {
    out.warnings.push_back("off-grid: record is not an integer number of test-tone cycles");
  }

  const double w = 2.0 * std::numbers::pi * test_freq / recovered.rate;
  std::complex<double> acc{0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    const double ph = w * static_cast<double>(i);
    acc += recovered.values[i] * std::complex<double>(std::cos(ph), -std::sin(ph));
  }
  // |X_k| = A N / 2 for a tone of amplitude A, so sqrt(2) |X_k| / N is the RMS.
  out.recovered_rms = std::numbers::sqrt2 * std::abs(acc) / static_cast<double>(n);
  out.relative_error = std::abs(out.recovered_rms - b_test_rms) / b_test_rms;
  return out;
}

} // namespace nvcavity::calibration
