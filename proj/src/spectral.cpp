#include "nvcavity/spectral.hpp"

#include <algorithm>
#include <cstring>

#include <fftw3.h>

#include "nvcavity/error.hpp"

namespace nvcavity {

struct RealFft::Impl {
  double *real = nullptr;
  fftw_complex *spec = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;

  explicit Impl(std::size_t n) {
    real = fftw_alloc_real(n);
    spec = fftw_alloc_complex(n / 2 + 1);
    const int len = static_cast<int>(n);
    fwd = fftw_plan_dft_r2c_1d(len, real, spec, FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_1d(len, spec, real, FFTW_ESTIMATE);
  }
  ~Impl() {
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
    fftw_free(real);
    fftw_free(spec);
  }
};

RealFft::RealFft(std::size_t n) : n_(n) {
  if (n == 0) {
    throw InvalidArgument("spectral", "FFT length must be positive");
  }
  impl_ = std::make_unique<Impl>(n);
}

RealFft::~RealFft() = default;
RealFft::RealFft(RealFft &&) noexcept = default;
RealFft &RealFft::operator=(RealFft &&) noexcept = default;

std::vector<std::complex<double>> RealFft::forward(std::span<const double> x) {
  if (x.size() != n_) {
    throw InvalidArgument("spectral", "FFT input length mismatch");
  }
  std::copy(x.begin(), x.end(), impl_->real);
  fftw_execute(impl_->fwd);
  std::vector<std::complex<double>> out(n_ / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = {impl_->spec[k][0], impl_->spec[k][1]};
  }
  return out;
}

std::vector<double> RealFft::inverse(std::span<const std::complex<double>> bins) {
  if (bins.size() != n_ / 2 + 1) {
    throw InvalidArgument("spectral", "inverse FFT bin count mismatch");
  }
  for (std::size_t k = 0; k < bins.size(); ++k) {
    impl_->spec[k][0] = bins[k].real();
    impl_->spec[k][1] = bins[k].imag();
  }
  fftw_execute(impl_->inv);
  std::vector<double> out(impl_->real, impl_->real + n_);
  const double scale = 1.0 / static_cast<double>(n_);
  for (auto &v : out) {
    v *= scale;
  }
  return out;
}

std::vector<double> apply_frequency_gain(std::span<const double> x, double rate,
                                         const std::function<double(double)> &gain) {
  if (x.empty()) {
    return {};
  }
  RealFft fft(x.size());
  auto bins = fft.forward(x);
  const double df = rate / static_cast<double>(x.size());
  for (std::size_t k = 0; k < bins.size(); ++k) {
    bins[k] *= gain(static_cast<double>(k) * df);
  }
  return fft.inverse(bins);
}

} // namespace nvcavity
