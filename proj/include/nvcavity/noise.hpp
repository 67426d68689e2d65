#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "nvcavity/error.hpp"
#include "nvcavity/estimation.hpp"
#include "nvcavity/signal.hpp"

namespace nvcavity::noise {

inline constexpr double kPlanck = 6.62607015e-34;
inline constexpr double kSpeedOfLight = 299792458.0;

/// Sine of the given RMS amplitude.
struct Sine {
  double rms = 0.0;
  double freq = 0.0;
  double phase = 0.0;
};

/// Gaussian white noise of one-sided ASD `asd`. A non-zero `bandwidth`
/// removes all content above it (brick-wall, in the frequency domain).
struct White {
  double asd = 0.0;
  double bandwidth = 0.0;
};

/// Mains pickup: harmonic k (1-based) of `fundamental` with RMS amplitude rms[k-1].
struct LineHarmonics {
  double fundamental = 50.0;
  std::vector<double> rms;
};

using Component = std::variant<Sine, White, LineHarmonics>;

/// Sum of the components sampled at `rate` for `duration`. Deterministic for a
/// fixed seed; each white component draws from its own seeded stream.
/// Throws Aliasing when a deterministic component sits at or above Nyquist.
TimeSeries synthesize_record(double duration, double rate, std::span<const Component> components,
                             std::uint64_t seed, std::string unit = "T");

enum class Window { hann, rectangular };

struct WelchOptions {
  std::size_t segment_len = 0; ///< samples per segment (0: whole record)
  double overlap = 0.5;
  Window window = Window::hann;
};

/// Welch estimate of the one-sided ASD (per-segment mean removed). The PSD
/// integrates to the record variance.
Spectrum asd(const TimeSeries &signal, const WelchOptions &opts = {});

struct Exclusion {
  double center = 0.0;
  double half_width = 0.0;
};

/// Windows of +- half_width around every harmonic of `line_freq` up to `up_to`.
std::vector<Exclusion> line_exclusions(double line_freq, double up_to, double half_width = 2.0);

/// Median ASD over bins inside [band.first, band.second] that fall outside
/// every exclusion. Throws EmptyBand when no bins remain.
double noise_floor(const Spectrum &spectrum, std::pair<double, double> band,
                   std::span<const Exclusion> exclusions = {});

/// RMS noise law S = sqrt(a^2 + b^2 I + c^2 I^2) plus mains descriptors.
struct NoiseModel {
  double a = 0.23;
  double b = 1.16;
  double c = 2e-3;
  double line_freq = 50.0;
  std::vector<double> line_harmonic_rms;
};

double shot_noise_behavior(const NoiseModel &m, double i_tr);

struct ShotNoiseFit {
  NoiseModel model;
  std::vector<double> residuals;
  estimation::FitResult fit;
};

/// Non-negative least-squares fit of (a, b, c) to (I_tr, S_IR) points.
/// Throws DegenerateDesign when the transmission levels do not vary.
ShotNoiseFit fit_shot_noise_behavior(std::span<const double> i_tr, std::span<const double> s_ir);

/// Relative optical-power ASD sqrt(2 h nu / P) in 1/sqrt(Hz).
double relative_shot_noise_asd(double power, double wavelength);

/// Field-referred photon-shot-noise limit: relative_shot_noise_asd / slope_field,
/// where slope_field is the fractional signal change per tesla.
double shot_noise_limit(double ir_power, double wavelength, double slope_field);

struct EnsembleParams {
  double density_ppm = 0.68;
  double volume_cm3 = 390e-4 * 4500e-8; ///< 390 um x 4500 um^2
  double fwhm = 5.6e6;                  ///< Hz
  double gamma = 28.0e9;                ///< Hz/T
  double carbon_density_cm3 = 1.76e23;
};

inline constexpr std::string_view kProjectionNoiseFormula =
    "eta = 1/(2*pi*gamma*sqrt(N*T2star)); N = density_ppm*1e-6*carbon_density*volume; "
    "T2star = 1/(pi*fwhm)";

/// Spin-projection-noise limit 1/(2 pi gamma sqrt(N T2*)), T2* = 1/(pi fwhm).
double projection_noise_limit(const EnsembleParams &e);

struct SensitivityReport {
  std::pair<double, double> floor_band{60.0, 90.0};
  double floor_asd = 0.0;        ///< magnetically insensitive floor (T/sqrt(Hz))
  double sensitive_floor = 0.0;  ///< magnetically sensitive (environment-limited) floor
  double electronic_floor = 0.0;
  double shot_limit = 0.0;
  double projection_limit = 0.0;
  std::string projection_formula{kProjectionNoiseFormula};
  Warnings warnings;

  /// Flat `key = value` block.
  std::string to_text() const;
};

struct RecordSet {
  const TimeSeries &sensitive;
  const TimeSeries &insensitive;
  const TimeSeries &electronic;
};

struct RecordSpectra {
  Spectrum sensitive;
  Spectrum insensitive;
  Spectrum electronic;
};

/// ASD and floor of each record assembled with the two sensitivity limits.
SensitivityReport sensitivity_report(const RecordSet &records, std::pair<double, double> band,
                                     const WelchOptions &welch,
                                     std::span<const Exclusion> exclusions, double shot_limit,
                                     double projection_limit, RecordSpectra *spectra = nullptr);

} // namespace nvcavity::noise
