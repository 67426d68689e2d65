#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nvcavity/calibration.hpp"
#include "nvcavity/cavity.hpp"
#include "nvcavity/error.hpp"
#include "nvcavity/lockin.hpp"
#include "nvcavity/noise.hpp"
#include "nvcavity/spin.hpp"

namespace nvcavity::config {

struct SingletSection {
  double loss_pumped = 0.0309;
  double cross_section_cm2 = 3e-18;
  double path_factor = 1.0; ///< absorption path in units of the diamond thickness
};

/// Floors of the three synthesized records (T/sqrt(Hz)) and the bandwidth of
/// the magnetic environment noise.
struct FloorSection {
  double sensitive = 37e-12;
  double insensitive = 28e-12;
  double electronic = 2e-12;
  double magnetic_bandwidth = 1e3;
};

struct RunSection {
  double duration = 33.0;     ///< synthesized record length (s)
  double rate = 103.2e3;      ///< synthesis / demodulation rate (Hz)
  double output_rate = 2150.0; ///< rate after decimation (Hz)
  double settle = 1.0;        ///< demodulated lead-in discarded (s)
  std::optional<std::uint64_t> seed;
  double test_tone_rms = 0.0; ///< T; 0 disables the tone
  bool test_tone_from_coil = false;
  double test_tone_freq = 72.0;
  std::pair<double, double> floor_band{60.0, 90.0};
  double welch_segment = 1.0; ///< s
  int lock_peak = spin::kOuterHigh;
  double ir_power = 4.2e-3;   ///< detected IR power for the shot-noise limit (W)
  double wavelength = 1042e-9;
  double airy_noise = 0.02;
  double saturation_noise = 0.005;
  double odmr_noise = 0.002;
  double shot_sweep_noise = 0.01;
};

struct ScenarioConfig {
  cavity::CavityParams cavity;
  SingletSection singlet;
  spin::SaturationModel saturation;
  spin::OdmrModel odmr;
  lockin::LockInConfig lockin;
  noise::NoiseModel noise;
  FloorSection floors;
  noise::EnsembleParams ensemble;
  calibration::CoilConfig coil;
  RunSection run;

  /// Effective test-tone RMS (coil-derived when requested).
  double test_tone() const;
  /// Cross-field consistency checks. Throws ConfigError naming both fields.
  void validate() const;
};

/// Number with an optional SI suffix: k M G m u n p.
double parse_si(const std::string &text);

/// Parses the `[section]` / `key = value` format. Unknown keys and malformed
/// values raise ConfigError with the line number; a missing `run.seed` is an error.
ScenarioConfig parse_config(const std::string &text);

/// Reads a config file. A bare profile name (no directory part) that does not
/// exist as a path is looked up, with or without `.cfg`, in NVCAVITY_PROFILE_DIR
/// and then in the shipped profile directory.
ScenarioConfig load_config(const std::filesystem::path &path);

std::filesystem::path resolve_profile(const std::filesystem::path &path);

} // namespace nvcavity::config
