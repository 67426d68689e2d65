#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nvcavity/calibration.hpp"
#include "nvcavity/cavity.hpp"
#include "nvcavity/config.hpp"
#include "nvcavity/estimation.hpp"
#include "nvcavity/lockin.hpp"
#include "nvcavity/noise.hpp"

namespace nvcavity::pipeline {

struct PipelineOptions {
  bool write_files = true;
  bool plot_data = false; ///< also emit whitespace-separated .dat files under plot/
};

struct ScenarioResult {
  noise::SensitivityReport report;
  bool has_tone = false;
  double tone_rms = 0.0;
  calibration::CalibrationResult calibration;

  double finesse = 0.0;
  double transmission = 0.0;
  cavity::SingletDensity singlet;
  cavity::ModeWaists waists;

  lockin::DispersiveCurve dispersive;
  double slope = 0.0;            ///< lock-in output per Hz of detuning at zero
  double volts_per_tesla = 0.0;  ///< signed output-to-field factor
  double ref_phase = 0.0;

  estimation::AiryFit airy;
  estimation::FitResult saturation;
  estimation::OdmrFit odmr;
  estimation::SlopeFit slope_fit;
  noise::ShotNoiseFit shot;

  TimeSeries sensitive;   ///< field-referred records after demodulation (T)
  TimeSeries insensitive;
  TimeSeries electronic;
  noise::RecordSpectra spectra;

  std::vector<std::filesystem::path> files;
  Warnings warnings;
};

/// Derived per-stream seed; streams are independent for a fixed master seed.
std::uint64_t sub_seed(std::uint64_t seed, std::uint32_t stream);

/// Chains synthesis, demodulation, decimation, equalization, calibration and
/// the sensitivity analysis for one scenario, writing artifacts to `out_dir`.
ScenarioResult run_scenario(const config::ScenarioConfig &cfg, const std::filesystem::path &out_dir,
                            const PipelineOptions &opts = {});

/// Human-readable summary written to report.txt.
std::string format_report(const ScenarioResult &r);

} // namespace nvcavity::pipeline
