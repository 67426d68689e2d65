#include "nvcavity/spin.hpp"

#include <algorithm>
#include <cmath>

#include "nvcavity/error.hpp"

namespace nvcavity::spin {

void SaturationModel::validate() const {
  if (!(p_sat > 0.0) || !(depth > 0.0 && depth <= 1.0)) {
    throw InvalidArgument("spin", "saturation model needs p_sat > 0 and 0 < depth <= 1");
  }
}

void OdmrModel::validate() const {
  if (!(d_zfs > 0.0) || !(gamma > 0.0) || !(bias_field >= 0.0)) {
    throw InvalidArgument("spin", "ODMR model needs D > 0, gamma > 0, B >= 0");
  }
  for (const auto &p : peaks) {
    if (!(p.contrast > 0.0 && p.contrast < 1.0) || !(p.fwhm > 0.0)) {
      throw InvalidArgument("spin", "each ODMR peak needs 0 < contrast < 1 and fwhm > 0");
    }
  }
}

double peak_projection(int index) {
  static constexpr std::array<double, 4> kProjection{-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0};
  if (index < 0 || index > 3) {
    throw InvalidArgument("spin", "peak index must be 0..3");
  }
  return kProjection[static_cast<std::size_t>(index)];
}

double saturation_transmission(const SaturationModel &m, double pump_power) {
  m.validate();
  if (!(pump_power >= 0.0)) {
    throw InvalidArgument("spin", "pump power must be non-negative");
  }
  if (std::isinf(pump_power)) {
    return 1.0 - m.depth;
  }
  return 1.0 - m.depth * pump_power / (pump_power + m.p_sat);
}

double lorentzian(double f, double center, double fwhm) {
  const double u = 2.0 * (f - center) / fwhm;
  return 1.0 / (1.0 + u * u);
}

std::array<double, 4> odmr_peak_centers(const OdmrModel &m) {
  m.validate();
  std::array<double, 4> c{};
  for (int i = 0; i < 4; ++i) {
    c[static_cast<std::size_t>(i)] = m.d_zfs + m.gamma * m.bias_field * peak_projection(i);
  }
  return c;
}

double odmr_transmission(const OdmrModel &m, double f, double delta_field) {
  const double split = m.gamma * (m.bias_field + delta_field);
  double t = m.baseline;
  for (int i = 0; i < 4; ++i) {
    const auto &p = m.peaks[static_cast<std::size_t>(i)];
    t -= p.contrast * lorentzian(f, m.d_zfs + split * peak_projection(i), p.fwhm);
  }
  return t;
}

OdmrSpectrum odmr_spectrum(const OdmrModel &m, std::span<const double> freqs) {
  m.validate();
  if (!std::is_sorted(freqs.begin(), freqs.end())) {
    throw InvalidArgument("spin", "frequency grid must be ascending");
  }
  OdmrSpectrum out;
  out.freqs.assign(freqs.begin(), freqs.end());
  out.transmission.reserve(freqs.size());
  for (double f : freqs) {
    if (!std::isfinite(f)) {
      throw InvalidArgument("spin", "frequency grid must be finite");
    }
    out.transmission.push_back(odmr_transmission(m, f));
  }
  return out;
}

} // namespace nvcavity::spin
