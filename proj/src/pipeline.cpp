#include "nvcavity/pipeline.hpp"

#include <algorithm>
#include <array>
#include <tuple>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "nvcavity/csv.hpp"
#include "nvcavity/spectral.hpp"

namespace nvcavity::pipeline {

namespace fs = std::filesystem;
using config::ScenarioConfig;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

enum Stream : std::uint32_t {
  kAiryStream = 1,
  kSaturationStream = 2,
  kOdmrStream = 3,
  kShotStream = 4,
  kFieldStream = 10,
  kSensitiveDetector = 11,
  kInsensitiveDetector = 12,
  kElectronicDetector = 13,
};

enum class Record { sensitive, insensitive, electronic };

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return out;
}

std::vector<double> logspace(double a, double b, std::size_t n) {
  auto out = linspace(std::log10(a), std::log10(b), n);
  for (auto &v : out) {
    v = std::pow(10.0, v);
  }
  return out;
}

std::size_t checked_ratio(double a, double b) { return static_cast<std::size_t>(std::llround(a / b)); }

lockin::DispersiveOptions dispersive_options(const ScenarioConfig &cfg) {
  lockin::DispersiveOptions opts;
  // Synthesize the calibration curve on the same grid the records use, so the
  // slope and the time-domain chain see identical sampling of each period.
  const double spp = cfg.run.rate / cfg.lockin.f_mod;
  if (std::abs(spp - std::round(spp)) < 1e-9 * spp) {
    opts.samples_per_period = static_cast<int>(std::lround(spp));
  }
  return opts;
}

/// Detector record for one of the three measurement configurations, carried
/// through demodulation, decimation, settling removal, equalization and
/// conversion to field.
TimeSeries field_record(const ScenarioConfig &cfg, Record kind, const lockin::LockInConfig &lia,
                        double volts_per_tesla, double tone, Warnings *warnings) {
  const auto &run = cfg.run;
  const std::uint64_t seed = *run.seed;
  const double f_res = spin::odmr_peak_centers(cfg.odmr)[static_cast<std::size_t>(run.lock_peak)];

  double floor = cfg.floors.insensitive;
  std::uint32_t stream = kSensitiveDetector;
  if (kind == Record::insensitive) {
    stream = kInsensitiveDetector;
  } else if (kind == Record::electronic) {
    floor = cfg.floors.electronic;
    stream = kElectronicDetector;
  }
  // Demodulation doubles the white-noise power at baseband, so the detector
  // ASD is the target field floor times |k| / sqrt(2).
  std::vector<noise::Component> detector;
  if (floor > 0.0) {
    detector.emplace_back(noise::White{floor * std::abs(volts_per_tesla) / std::numbers::sqrt2, 0.0});
  }
  TimeSeries x = noise::synthesize_record(run.duration, run.rate, detector, sub_seed(seed, stream), "V");

  if (kind == Record::sensitive) {
    std::vector<noise::Component> field;
    const double env = std::sqrt(std::max(
        0.0, cfg.floors.sensitive * cfg.floors.sensitive - cfg.floors.insensitive * cfg.floors.insensitive));
    if (env > 0.0) {
      field.emplace_back(noise::White{env, cfg.floors.magnetic_bandwidth});
    }
    if (tone > 0.0) {
      field.emplace_back(noise::Sine{tone, run.test_tone_freq, 0.0});
    }
    if (!cfg.noise.line_harmonic_rms.empty()) {
      field.emplace_back(noise::LineHarmonics{cfg.noise.line_freq, cfg.noise.line_harmonic_rms});
    }
    const TimeSeries b =
        noise::synthesize_record(run.duration, run.rate, field, sub_seed(seed, kFieldStream), "T");
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double cycles = lia.f_mod * static_cast<double>(i) / run.rate;
      const double f_mw = f_res + lia.f_dev * std::cos(kTwoPi * (cycles - std::floor(cycles)));
      x.values[i] += spin::odmr_transmission(cfg.odmr, f_mw, b.values[i]);
    }
  } else if (kind == Record::insensitive) {
    // Microwaves parked on resonance without modulation: no field-dependent
    // signal reaches the lock-in, only the optical noise does.
    const double dc = spin::odmr_transmission(cfg.odmr, f_res);
    for (auto &v : x.values) {
      v += dc;
    }
  }

  const TimeSeries demod = lockin::demodulate(x, lia, warnings);
  const std::size_t factor = checked_ratio(run.rate, run.output_rate);
  TimeSeries out = lockin::decimate(demod, factor);
  const auto skip = std::min(out.size(), static_cast<std::size_t>(std::llround(run.settle * out.rate)));
  out.values.erase(out.values.begin(), out.values.begin() + static_cast<std::ptrdiff_t>(skip));
  out.t0 = static_cast<double>(skip) / out.rate;

  // Undo the magnitude response of the low-pass cascade and the block average.
  const double in_rate = run.rate;
  out.values = apply_frequency_gain(out.values, out.rate, [&](double f) {
    return 1.0 / (lockin::filter_response(lia, f) * lockin::block_average_response(factor, in_rate, f));
  });
  const lockin::FieldConversion conv{volts_per_tesla};
  for (auto &v : out.values) {
    v = conv.to_tesla(v);
  }
  out.unit = "T";
  return out;
}

std::string fmt(double v) { return csv::format_number(v); }

} // namespace

std::uint64_t sub_seed(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  std::array<std::uint32_t, 2> words{};
  seq.generate(words.begin(), words.end());
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

ScenarioResult run_scenario(const ScenarioConfig &cfg, const fs::path &out_dir,
                            const PipelineOptions &opts) {
  cfg.validate();
  const auto &run = cfg.run;
  const std::uint64_t seed = *run.seed;
  ScenarioResult r;

  std::vector<std::pair<std::string, csv::Table>> tables;
  std::vector<std::tuple<std::string, std::vector<double>, std::vector<double>>> plots;
  auto add = [&](const std::string &name, csv::Table t, const std::vector<double> &x,
                 const std::vector<double> &y) {
    tables.emplace_back(name, std::move(t));
    plots.emplace_back(name, x, y);
  };

  // Cavity figures of merit.
  r.finesse = cavity::finesse_from_params(cfg.cavity);
  r.transmission = cavity::transmission_on_resonance(cfg.cavity);
  cavity::SingletAbsorption absorption;
  absorption.loss_dark = cfg.cavity.loss_roundtrip;
  absorption.loss_pumped = cfg.singlet.loss_pumped;
  absorption.cross_section_cm2 = cfg.singlet.cross_section_cm2;
  absorption.path_length_cm = cfg.singlet.path_factor * cfg.cavity.l_diamond * 100.0;
  r.singlet = cavity::singlet_density(absorption);
  r.waists = cavity::mode_waists(cfg.cavity, run.wavelength);

  // Synthetic characterization data and their fits.
  {
    std::mt19937_64 gen(sub_seed(seed, kAiryStream));
    std::normal_distribution<double> normal;
    const auto phase = linspace(-std::numbers::pi, 3.0 * std::numbers::pi, 8000);
    auto y = cavity::airy_scan(cfg.cavity, phase);
    for (auto &v : y) {
      v += run.airy_noise * r.transmission * normal(gen);
    }
    r.airy = estimation::fit_airy({phase, y});
    add("airy_scan.csv", csv::two_column("phase_rad", phase, "transmission", y, "1"), phase, y);
  }
  {
    std::mt19937_64 gen(sub_seed(seed, kSaturationStream));
    std::normal_distribution<double> normal;
    const auto power = linspace(0.0, 3.0, 1001);
    std::vector<double> y;
    for (double p : power) {
      y.push_back(spin::saturation_transmission(cfg.saturation, p) + run.saturation_noise * normal(gen));
    }
    r.saturation = estimation::fit_saturation(power, y);
    add("saturation.csv", csv::two_column("power_w", power, "transmission", y, "1"), power, y);
  }
  {
    std::mt19937_64 gen(sub_seed(seed, kOdmrStream));
    std::normal_distribution<double> normal;
    const auto centers = spin::odmr_peak_centers(cfg.odmr);
    double wmax = 0.0;
    for (const auto &p : cfg.odmr.peaks) {
      wmax = std::max(wmax, p.fwhm);
    }
    const auto n = static_cast<std::size_t>(
        std::ceil((centers[3] - centers[0] + 10.0 * wmax) / (wmax / 100.0))) + 1;
    const auto freqs = linspace(centers[0] - 5.0 * wmax, centers[3] + 5.0 * wmax, n);
    auto spec = spin::odmr_spectrum(cfg.odmr, freqs);
    for (auto &v : spec.transmission) {
      v += run.odmr_noise * normal(gen);
    }
    estimation::OdmrFitOptions fo;
    fo.d_zfs = cfg.odmr.d_zfs;
    fo.smooth_width = cfg.odmr.peaks[static_cast<std::size_t>(run.lock_peak)].fwhm / 2.0;
    r.odmr = estimation::fit_odmr(spec, fo);
    add("odmr_spectrum.csv", csv::two_column("freq_hz", spec.freqs, "transmission", spec.transmission, "V"),
        spec.freqs, spec.transmission);
  }
  {
    std::mt19937_64 gen(sub_seed(seed, kShotStream));
    std::normal_distribution<double> normal;
    const auto itr = logspace(0.01, 10.0, 40);
    std::vector<double> s;
    for (double i : itr) {
      s.push_back(noise::shot_noise_behavior(cfg.noise, i) * (1.0 + run.shot_sweep_noise * normal(gen)));
    }
    r.shot = noise::fit_shot_noise_behavior(itr, s);
    add("shot_noise.csv", csv::two_column("itr_v", itr, "sir_v", s, "V"), itr, s);
  }

  // Dispersive calibration of the locked feature.
  const auto dopts = dispersive_options(cfg);
  const int peak = run.lock_peak;
  const double fwhm = cfg.odmr.peaks[static_cast<std::size_t>(peak)].fwhm;
  const auto detunings = linspace(-2.0 * fwhm, 2.0 * fwhm, 401);
  r.dispersive = lockin::dispersive_curve(cfg.odmr, peak, cfg.lockin, detunings, dopts);
  r.ref_phase = r.dispersive.ref_phase;
  r.slope_fit = estimation::fit_slope(r.dispersive.detunings, r.dispersive.lockin_out, fwhm / 20.0, fwhm);
  add("dispersive.csv", csv::from_dispersive(r.dispersive), r.dispersive.detunings, r.dispersive.lockin_out);

  lockin::LockInConfig lia = cfg.lockin;
  lia.ref_phase = r.ref_phase;
  lia.auto_phase = false;
  {
    const double f_res = spin::odmr_peak_centers(cfg.odmr)[static_cast<std::size_t>(peak)];
    const double h = fwhm * 1e-4;
    auto shape = [&](double f) { return spin::odmr_transmission(cfg.odmr, f); };
    r.slope = (lockin::steady_state_output(shape, f_res + h, lia, dopts) -
               lockin::steady_state_output(shape, f_res - h, lia, dopts)) /
              (2.0 * h);
  }
  // A field dB shifts the feature by gamma * projection * dB, which reads as a
  // detuning of the opposite sign.
  const double detuning_per_tesla = -cfg.odmr.gamma * spin::peak_projection(peak);
  r.volts_per_tesla = lockin::volts_to_tesla(r.slope, detuning_per_tesla).volts_per_tesla;

  // Field records.
  r.tone_rms = cfg.test_tone();
  r.has_tone = r.tone_rms > 0.0;
  r.sensitive = field_record(cfg, Record::sensitive, lia, r.volts_per_tesla, r.tone_rms, &r.warnings);
  r.insensitive = field_record(cfg, Record::insensitive, lia, r.volts_per_tesla, 0.0, &r.warnings);
  r.electronic = field_record(cfg, Record::electronic, lia, r.volts_per_tesla, 0.0, &r.warnings);

  if (r.has_tone) {
    TimeSeries window = r.sensitive;
    window.values.resize(calibration::whole_cycle_length(window.size(), window.rate, run.test_tone_freq));
    r.calibration = calibration::calibration_check(r.tone_rms, window, run.test_tone_freq);
  }

  // Sensitivity analysis.
  noise::WelchOptions welch;
  welch.segment_len = static_cast<std::size_t>(std::llround(run.welch_segment * run.output_rate));
  auto exclusions = noise::line_exclusions(cfg.noise.line_freq, run.floor_band.second);
  if (r.has_tone) {
    exclusions.push_back({run.test_tone_freq, 2.0});
  }
  const double slope_field = std::abs(r.volts_per_tesla) / cfg.odmr.baseline;
  const double shot = noise::shot_noise_limit(run.ir_power, run.wavelength, slope_field);
  const double proj = noise::projection_noise_limit(cfg.ensemble);
  r.report = noise::sensitivity_report({r.sensitive, r.insensitive, r.electronic}, run.floor_band, welch,
                                       exclusions, shot, proj, &r.spectra);

  add("timeseries_sensitive.csv", csv::from_time_series(r.sensitive), {}, {});
  add("timeseries_insensitive.csv", csv::from_time_series(r.insensitive), {}, {});
  add("timeseries_electronic.csv", csv::from_time_series(r.electronic), {}, {});
  add("asd_sensitive.csv", csv::from_spectrum(r.spectra.sensitive), r.spectra.sensitive.freq,
      r.spectra.sensitive.asd);
  add("asd_insensitive.csv", csv::from_spectrum(r.spectra.insensitive), r.spectra.insensitive.freq,
      r.spectra.insensitive.asd);
  add("asd_electronic.csv", csv::from_spectrum(r.spectra.electronic), r.spectra.electronic.freq,
      r.spectra.electronic.asd);

  for (const auto *w : {&r.airy.fit.warnings, &r.saturation.warnings, &r.odmr.fit.warnings,
                        &r.slope_fit.warnings, &r.shot.fit.warnings, &r.dispersive.warnings,
                        &r.calibration.warnings, &r.report.warnings}) {
    r.warnings.insert(r.warnings.end(), w->begin(), w->end());
  }

  if (!opts.write_files) {
    return r;
  }
  fs::create_directories(out_dir);
  for (const auto &[name, table] : tables) {
    csv::write_file(out_dir / name, table);
    r.files.push_back(out_dir / name);
  }
  const std::pair<std::string, const estimation::FitResult *> fits[] = {
      {"airy", &r.airy.fit}, {"saturation", &r.saturation}, {"odmr", &r.odmr.fit}, {"shot", &r.shot.fit}};
  {
    std::ofstream os(out_dir / "fits.txt", std::ios::binary);
    for (const auto &[name, fit] : fits) {
      os << fit->to_text(name + ".");
    }
    os << "airy.finesse_derived = " << fmt(r.airy.finesse) << '\n'
       << "shot.a = " << fmt(r.shot.model.a) << '\n'
       << "shot.b = " << fmt(r.shot.model.b) << '\n'
       << "shot.c = " << fmt(r.shot.model.c) << '\n'
       << "slope.slope = " << fmt(r.slope_fit.slope) << '\n'
       << "slope.zero_crossing = " << fmt(r.slope_fit.zero_crossing) << '\n'
       << "slope.nonlinearity = " << fmt(r.slope_fit.nonlinearity) << '\n';
    r.files.push_back(out_dir / "fits.txt");
  }
  for (const auto &[name, fit] : fits) {
    const auto path = out_dir / ("fit_" + name + ".csv");
    std::ofstream os(path, std::ios::binary);
    os << fit->to_csv();
    r.files.push_back(path);
  }
  {
    std::ofstream os(out_dir / "report.txt", std::ios::binary);
    os << format_report(r);
    r.files.push_back(out_dir / "report.txt");
  }
  if (opts.plot_data) {
    fs::create_directories(out_dir / "plot");
    for (const auto &[name, x, y] : plots) {
      if (x.empty()) {
        continue;
      }
      const auto path = out_dir / "plot" / (fs::path(name).stem().string() + ".dat");
      csv::write_plot_data(path, x, y, name);
      r.files.push_back(path);
    }
  }
  return r;
}

std::string format_report(const ScenarioResult &r) {
  std::ostringstream os;
  os << r.report.to_text();
  os << "finesse = " << fmt(r.finesse) << '\n'
     << "transmission_on_resonance = " << fmt(r.transmission) << '\n'
     << "singlet_density_ppm = " << fmt(r.singlet.ppm) << '\n'
     << "mode_waist_flat_m = " << fmt(r.waists.flat) << '\n'
     << "mode_waist_curved_m = " << fmt(r.waists.curved) << '\n'
     << "ref_phase_rad = " << fmt(r.ref_phase) << '\n'
     << "slope_per_hz = " << fmt(r.slope) << '\n'
     << "volts_per_tesla = " << fmt(r.volts_per_tesla) << '\n';
  if (r.has_tone) {
    os << "test_tone_rms_t = " << fmt(r.tone_rms) << '\n'
       << "recovered_rms_t = " << fmt(r.calibration.recovered_rms) << '\n'
       << "calibration_relative_error = " << fmt(r.calibration.relative_error) << '\n';
  }
  for (const auto &w : r.warnings) {
    if (std::find(r.report.warnings.begin(), r.report.warnings.end(), w) == r.report.warnings.end()) {
      os << "warning = " << w << '\n';
    }
  }
  return os.str();
}

} // namespace nvcavity::pipeline
