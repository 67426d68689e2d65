#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace nvcavity {

/// Uniformly sampled real-valued record.
struct TimeSeries {
  double t0 = 0.0;   ///< time of the first sample (s)
  double rate = 0.0; ///< sample rate (Hz)
  std::vector<double> values;
  std::string unit;

  std::size_t size() const { return values.size(); }
  double time(std::size_t i) const { return t0 + static_cast<double>(i) / rate; }
  double duration() const { return static_cast<double>(values.size()) / rate; }
};

/// One-sided amplitude spectral density, `unit` is the ASD unit (e.g. "T/sqrt(Hz)").
struct Spectrum {
  std::vector<double> freq;
  std::vector<double> asd;
  std::string unit;

  double resolution() const { return freq.size() > 1 ? freq[1] - freq[0] : 0.0; }
};

/// Generic sampled curve (scan, sweep, fitted data).
struct Curve {
  std::vector<double> x;
  std::vector<double> y;
};

} // namespace nvcavity
