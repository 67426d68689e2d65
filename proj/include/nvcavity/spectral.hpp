#pragma once

#include <complex>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace nvcavity {

/// Real-to-complex FFT of a fixed length. Plans are built with FFTW_ESTIMATE
/// so results are reproducible run to run. Plan creation is not thread-safe.
class RealFft {
public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft &) = delete;
  RealFft &operator=(const RealFft &) = delete;
  RealFft(RealFft &&) noexcept;
  RealFft &operator=(RealFft &&) noexcept;

  std::size_t size() const { return n_; }

  /// Returns the n/2 + 1 non-negative-frequency bins (unnormalized).
  std::vector<std::complex<double>> forward(std::span<const double> x);

  /// Inverse of forward(), normalized so inverse(forward(x)) == x.
  std::vector<double> inverse(std::span<const std::complex<double>> bins);

private:
  struct Impl;
  std::size_t n_;
  std::unique_ptr<Impl> impl_;
};

/// Multiplies the spectrum of `x` by a real, zero-phase gain g(f) and
/// transforms back. The record is treated as periodic.
std::vector<double> apply_frequency_gain(std::span<const double> x, double rate,
                                         const std::function<double(double)> &gain);

} // namespace nvcavity
