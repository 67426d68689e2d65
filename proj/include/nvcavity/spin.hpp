#pragma once

#include <array>
#include <span>
#include <vector>

namespace nvcavity::spin {

/// Normalized IR transmission versus green pump power.
struct SaturationModel {
  double p_sat = 0.735; ///< saturation power (W)
  double depth = 0.605; ///< transmission reduction at saturation

  void validate() const;
};

/// One ODMR dip: unit-peak Lorentzian scaled by `contrast`.
struct OdmrPeak {
  double contrast = 0.037;
  double fwhm = 5.6e6; ///< Hz
};

/// Ensemble ODMR response for a bias field along [111]. The four features
/// are stored in ascending frequency order: outer-low, inner-low,
/// inner-high, outer-high.
struct OdmrModel {
  double d_zfs = 2.87e9;      ///< zero-field splitting (Hz)
  double gamma = 28.024e9;    ///< gyromagnetic ratio (Hz/T)
  double bias_field = 3e-3;   ///< field magnitude along [111] (T)
  std::array<OdmrPeak, 4> peaks{};
  double baseline = 1.0;

  void validate() const;
};

struct OdmrSpectrum {
  std::vector<double> freqs;
  std::vector<double> transmission;
};

inline constexpr int kOuterLow = 0;
inline constexpr int kInnerLow = 1;
inline constexpr int kInnerHigh = 2;
inline constexpr int kOuterHigh = 3;

/// Signed projection of the [111] field onto the NV axis producing peak `index`
/// (+-1 for the aligned orientation, +-1/3 for the other three).
double peak_projection(int index);

double saturation_transmission(const SaturationModel &m, double pump_power);

/// Unit-peak Lorentzian with full width `fwhm`.
double lorentzian(double f, double center, double fwhm);

/// Resonance centers D +- gamma B and D +- gamma B / 3, ascending.
std::array<double, 4> odmr_peak_centers(const OdmrModel &m);

/// Transmission at microwave frequency `f` with an extra field `delta_field`
/// (T, along [111]) added to the bias.
double odmr_transmission(const OdmrModel &m, double f, double delta_field = 0.0);

OdmrSpectrum odmr_spectrum(const OdmrModel &m, std::span<const double> freqs);

} // namespace nvcavity::spin
