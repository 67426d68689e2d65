#pragma once

#include "nvcavity/error.hpp"
#include "nvcavity/signal.hpp"

namespace nvcavity::calibration {

inline constexpr double kMu0 = 4e-7 * 3.14159265358979323846;

/// Single circular test coil on the sensor axis.
struct CoilConfig {
  int n_turns = 11;
  double radius = 0.025;            ///< m
  double distance = 0.01;           ///< coil plane to sensor (m)
  double current = 6.5e-6;          ///< A
  double series_resistance = 1e3;   ///< ohm, metadata only
  bool current_is_peak = true;      ///< false: `current` is an RMS value

  void validate() const;
};

struct CoilField {
  double amplitude = 0.0; ///< T
  double rms = 0.0;       ///< T
};

/// On-axis field mu0 N I r^2 / (2 (z^2 + r^2)^(3/2)).
CoilField coil_field(const CoilConfig &c);

/// Largest prefix of `n` samples spanning a whole number of cycles of `freq`
/// (to within one part in 1e6 of a sample).
std::size_t whole_cycle_length(std::size_t n, double rate, double freq);

struct CalibrationResult {
  double recovered_rms = 0.0;  ///< T
  double relative_error = 0.0;
  double cycles = 0.0;
  Warnings warnings;
};

/// Recovers the RMS amplitude of the tone at `test_freq` with a single-bin DFT
/// over the record and compares it to `b_test_rms`. Requires at least 100
/// cycles; warns when the record does not hold an integer number of cycles.
CalibrationResult calibration_check(double b_test_rms, const TimeSeries &recovered,
                                    double test_freq);

} // namespace nvcavity::calibration
