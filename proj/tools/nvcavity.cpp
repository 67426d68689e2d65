// Command-line front end: one subcommand per analysis step plus the full
// scenario runner. Exit codes: 0 success, 1 domain error, 2 usage error.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nvcavity/calibration.hpp"
#include "nvcavity/cavity.hpp"
#include "nvcavity/config.hpp"
#include "nvcavity/csv.hpp"
#include "nvcavity/estimation.hpp"
#include "nvcavity/lockin.hpp"
#include "nvcavity/noise.hpp"
#include "nvcavity/pipeline.hpp"
#include "nvcavity/spin.hpp"

namespace {

using namespace nvcavity;

/// Accepts plain or SI-suffixed numbers ("8.6k", "300u").
struct SiNumber : CLI::Validator {
  SiNumber() {
    name_ = "SI";
    func_ = [](const std::string &s) {
      try {
        config::parse_si(s);
        return std::string();
      } catch (const std::exception &) {
        return "not a number: " + s;
      }
    };
  }
};

const SiNumber kSi;

double si(const std::string &s) { return config::parse_si(s); }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void print_warnings(const Warnings &w) {
  for (const auto &m : w) {
    std::cerr << "warning: " << m << '\n';
  }
}

void emit(const csv::Table &t, const std::string &out) {
  if (out.empty()) {
    csv::write(std::cout, t);
  } else {
    csv::write_file(out, t);
  }
}

std::pair<double, double> parse_band(const std::string &s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) {
    throw CLI::ValidationError("--band", "expected low:high");
  }
  try {
    return {si(s.substr(0, colon)), si(s.substr(colon + 1))};
  } catch (const Error &) {
    throw CLI::ValidationError("--band", "expected low:high");
  }
}

TimeSeries read_series(const std::string &path) { return csv::to_time_series(csv::read_file(path)); }

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Digital twin and analysis toolkit for a cavity-enhanced NV magnetometer"};
  app.require_subcommand(1);
  std::string profile = "paper_defaults";
  app.add_option("--profile", profile, "config profile (name or path) supplying defaults");

  std::function<void()> action;
  auto load = [&] { return config::load_config(profile); };

  // cavity ------------------------------------------------------------------
  auto *cav = app.add_subcommand("cavity", "Fabry-Perot cavity model")->require_subcommand(1);
  std::string finesse_s, trans_s, r1_s;
  auto *solve = cav->add_subcommand("solve", "recover R2 and round-trip loss from F and T");
  solve->add_option("--finesse", finesse_s)->required()->check(kSi);
  solve->add_option("--transmission", trans_s)->required()->check(kSi);
  solve->add_option("--r1", r1_s)->required()->check(kSi);
  solve->callback([&] {
    action = [&] {
      const auto s = cavity::solve_r2_and_loss(si(finesse_s), si(trans_s), si(r1_s));
      char line[160];
      std::snprintf(line, sizeof line, "r2 = %.4g (%.10g)\nA = %.4g (%.10g)\n", s.r2, s.r2, s.loss, s.loss);
      std::cout << line << "residual = " << num(s.residual) << '\n';
    };
  });

  std::size_t scan_points = 8000;
  std::string scan_noise = "0";
  std::uint64_t seed = 1;
  std::string out;
  auto *scan = cav->add_subcommand("scan", "Airy transmission versus round-trip phase (-pi..3pi)");
  scan->add_option("--points", scan_points)->check(CLI::Range(8, 10000000));
  scan->add_option("--noise", scan_noise, "additive noise relative to the peak")->check(kSi);
  scan->add_option("--seed", seed);
  scan->add_option("--out", out);
  scan->callback([&] {
    action = [&] {
      const auto cfg = load();
      std::vector<double> phase(scan_points);
      for (std::size_t i = 0; i < scan_points; ++i) {
        phase[i] = -std::numbers::pi + 4.0 * std::numbers::pi * static_cast<double>(i) /
                                           static_cast<double>(scan_points - 1);
      }
      auto y = cavity::airy_scan(cfg.cavity, phase);
      const double sigma = si(scan_noise) * cavity::transmission_on_resonance(cfg.cavity);
      if (sigma > 0.0) {
        std::mt19937_64 gen(seed);
        std::normal_distribution<double> normal(0.0, sigma);
        for (auto &v : y) {
          v += normal(gen);
        }
      }
      emit(csv::two_column("phase_rad", phase, "transmission", y, "1"), out);
    };
  });

  auto *waists = cav->add_subcommand("waists", "TEM00 mode radii on both mirrors");
  waists->callback([&] {
    action = [&] {
      const auto cfg = load();
      const auto w = cavity::mode_waists(cfg.cavity, cfg.run.wavelength);
      std::cout << "waist_flat_m = " << num(w.flat) << '\n'
                << "waist_curved_m = " << num(w.curved) << '\n'
                << "fsr_hz = " << num(cavity::free_spectral_range(cfg.cavity.l_optical)) << '\n';
    };
  });

  auto *singlet = cav->add_subcommand("singlet", "singlet density for one and two diamond passes");
  singlet->callback([&] {
    action = [&] {
      const auto cfg = load();
      cavity::SingletAbsorption s;
      s.loss_dark = cfg.cavity.loss_roundtrip;
      s.loss_pumped = cfg.singlet.loss_pumped;
      s.cross_section_cm2 = cfg.singlet.cross_section_cm2;
      for (double factor : {1.0, 2.0}) {
        s.path_length_cm = factor * cfg.cavity.l_diamond * 100.0;
        const auto d = cavity::singlet_density(s);
        std::cout << "path_" << factor << "xLd: density_cm3 = " << num(d.per_cm3)
                  << ", ppm = " << num(d.ppm) << '\n';
      }
      std::cout << "finesse = " << num(cavity::finesse_from_params(cfg.cavity)) << '\n';
    };
  });

  // odmr ----------------------------------------------------------------------
  auto *odmr = app.add_subcommand("odmr", "ODMR spectrum model and fit")->require_subcommand(1);
  std::string odmr_noise = "0";
  std::size_t odmr_points = 1201;
  auto *sim = odmr->add_subcommand("simulate", "four-feature ODMR spectrum");
  sim->add_option("--points", odmr_points)->check(CLI::Range(16, 10000000));
  sim->add_option("--noise", odmr_noise)->check(kSi);
  sim->add_option("--seed", seed);
  sim->add_option("--out", out);
  sim->callback([&] {
    action = [&] {
      const auto cfg = load();
      const auto c = spin::odmr_peak_centers(cfg.odmr);
      const double w = cfg.odmr.peaks[0].fwhm;
      std::vector<double> f(odmr_points);
      for (std::size_t i = 0; i < odmr_points; ++i) {
        f[i] = c[0] - 5.0 * w + (c[3] - c[0] + 10.0 * w) * static_cast<double>(i) /
                                    static_cast<double>(odmr_points - 1);
      }
      auto s = spin::odmr_spectrum(cfg.odmr, f);
      if (si(odmr_noise) > 0.0) {
        std::mt19937_64 gen(seed);
        std::normal_distribution<double> normal(0.0, si(odmr_noise));
        for (auto &v : s.transmission) {
          v += normal(gen);
        }
      }
      emit(csv::two_column("freq_hz", s.freqs, "transmission", s.transmission, "V"), out);
    };
  });

  std::string in;
  int n_peaks = 4;
  auto *ofit = odmr->add_subcommand("fit", "multi-Lorentzian fit of a freq_hz,transmission CSV");
  ofit->add_option("csv", in)->required();
  ofit->add_option("--peaks", n_peaks)->check(CLI::Range(1, 16));
  ofit->callback([&] {
    action = [&] {
      const auto c = csv::to_curve(csv::read_file(in));
      estimation::OdmrFitOptions o;
      o.n_peaks = n_peaks;
      const auto f = estimation::fit_odmr({c.x, c.y}, o);
      std::cout << f.fit.to_text();
      for (std::size_t i = 0; i < f.peaks.size(); ++i) {
        const auto &p = f.peaks[i];
        std::cout << "peak" << i << ": center_hz = " << num(p.center) << ", contrast = " << num(p.contrast)
                  << ", fwhm_hz = " << num(p.fwhm) << (p.outer ? ", outer" : ", inner") << '\n';
      }
      print_warnings(f.fit.warnings);
    };
  });

  // saturation ----------------------------------------------------------------
  auto *sat = app.add_subcommand("saturation", "pump saturation law")->require_subcommand(1);
  auto *sfit = sat->add_subcommand("fit", "fit a power_w,transmission CSV");
  sfit->add_option("csv", in)->required();
  sfit->callback([&] {
    action = [&] {
      const auto c = csv::to_curve(csv::read_file(in));
      const auto f = estimation::fit_saturation(c.x, c.y);
      std::cout << f.to_text();
      print_warnings(f.warnings);
    };
  });

  // lockin --------------------------------------------------------------------
  auto *lia = app.add_subcommand("lockin", "FM lock-in chain")->require_subcommand(1);
  std::size_t curve_points = 401;
  auto *curve = lia->add_subcommand("curve", "dispersive curve of the locked ODMR feature");
  curve->add_option("--points", curve_points)->check(CLI::Range(3, 100000));
  curve->add_option("--out", out);
  curve->callback([&] {
    action = [&] {
      const auto cfg = load();
      const double w = cfg.odmr.peaks[static_cast<std::size_t>(cfg.run.lock_peak)].fwhm;
      std::vector<double> d(curve_points);
      for (std::size_t i = 0; i < curve_points; ++i) {
        d[i] = -2.0 * w + 4.0 * w * static_cast<double>(i) / static_cast<double>(curve_points - 1);
      }
      const auto c = lockin::dispersive_curve(cfg.odmr, cfg.run.lock_peak, cfg.lockin, d);
      auto t = csv::from_dispersive(c);
      t.meta.emplace_back("slope_per_hz", csv::format_number(c.slope_at_zero));
      t.meta.emplace_back("ref_phase_rad", csv::format_number(c.ref_phase));
      emit(t, out);
      print_warnings(c.warnings);
    };
  });

  std::size_t decim = 1;
  auto *demod = lia->add_subcommand("demod", "demodulate a time_s,value CSV");
  demod->add_option("csv", in)->required();
  demod->add_option("--decimate", decim, "block-average factor")->check(CLI::Range(1, 1000000));
  demod->add_option("--out", out);
  demod->callback([&] {
    action = [&] {
      const auto cfg = load();
      auto c = cfg.lockin;
      c.auto_phase = false;
      Warnings w;
      auto o = lockin::demodulate(read_series(in), c, &w);
      if (decim > 1) {
        o = lockin::decimate(o, decim);
      }
      emit(csv::from_time_series(o), out);
      print_warnings(w);
    };
  });

  // noise ---------------------------------------------------------------------
  auto *nz = app.add_subcommand("noise", "noise metrology")->require_subcommand(1);
  std::string segment_s = "0";
  auto *asd = nz->add_subcommand("asd", "Welch ASD (Hann, 50% overlap) of a time_s,value CSV");
  asd->add_option("csv", in)->required();
  asd->add_option("--segment", segment_s, "segment length in seconds (0: whole record)")->check(kSi);
  asd->add_option("--out", out);
  asd->callback([&] {
    action = [&] {
      const auto s = read_series(in);
      noise::WelchOptions o;
      o.segment_len = static_cast<std::size_t>(std::llround(si(segment_s) * s.rate));
      emit(csv::from_spectrum(noise::asd(s, o)), out);
    };
  });

  std::string band_s = "60:90";
  std::string line_s = "50";
  std::string segment_floor = "1";
  auto *floor = nz->add_subcommand("floor", "median ASD over a band (spectrum or time-series CSV)");
  floor->add_option("csv", in)->required();
  floor->add_option("--band", band_s, "low:high in Hz");
  floor->add_option("--line", line_s, "mains frequency whose harmonics are excluded (0: none)")->check(kSi);
  floor->add_option("--segment", segment_floor, "Welch segment (s) for time-series input")->check(kSi);
  floor->callback([&] {
    action = [&] {
      const auto band = parse_band(band_s);
      const auto table = csv::read_file(in);
      Spectrum spec;
      if (table.has_columns("time_s", "value")) {
        const auto s = csv::to_time_series(table);
        noise::WelchOptions o;
        o.segment_len = static_cast<std::size_t>(std::llround(si(segment_floor) * s.rate));
        spec = noise::asd(s, o);
      } else {
        spec = csv::to_spectrum(table);
      }
      const auto ex = noise::line_exclusions(si(line_s), band.second);
      const double value = noise::noise_floor(spec, band, ex);
      std::cout << "floor = " << num(value) << '\n';
    };
  });

  auto *fitshot = nz->add_subcommand("fitshot", "fit S = sqrt(a^2 + b^2 I + c^2 I^2) to an itr_v,sir_v CSV");
  fitshot->add_option("csv", in)->required();
  fitshot->callback([&] {
    action = [&] {
      const auto c = csv::to_curve(csv::read_file(in));
      const auto f = noise::fit_shot_noise_behavior(c.x, c.y);
      std::cout << "a = " << num(f.model.a) << '\n'
                << "b = " << num(f.model.b) << '\n'
                << "c = " << num(f.model.c) << '\n';
      print_warnings(f.fit.warnings);
    };
  });

  // calib ---------------------------------------------------------------------
  auto *cal = app.add_subcommand("calib", "test-coil calibration")->require_subcommand(1);
  auto *coil = cal->add_subcommand("coil", "on-axis coil field");
  coil->callback([&] {
    action = [&] {
      const auto b = calibration::coil_field(load().coil);
      std::cout << "amplitude_t = " << num(b.amplitude) << '\n' << "rms_t = " << num(b.rms) << '\n';
    };
  });

  std::string freq_s, btest_s;
  auto *check = cal->add_subcommand("check", "compare a recovered field record with the applied tone");
  check->add_option("csv", in)->required();
  check->add_option("--freq", freq_s)->required()->check(kSi);
  check->add_option("--btest", btest_s, "applied RMS field (T)")->required()->check(kSi);
  check->callback([&] {
    action = [&] {
      const auto r = calibration::calibration_check(si(btest_s), read_series(in), si(freq_s));
      std::cout << "recovered_rms_t = " << num(r.recovered_rms) << '\n'
                << "relative_error = " << num(r.relative_error) << '\n';
      print_warnings(r.warnings);
    };
  });

  // limits --------------------------------------------------------------------
  auto *lim = app.add_subcommand("limits", "fundamental sensitivity limits")->require_subcommand(1);
  std::string power_s, slope_s;
  auto *shot = lim->add_subcommand("shot", "photon-shot-noise limit");
  shot->add_option("--power", power_s, "detected IR power (W)")->check(kSi);
  shot->add_option("--slope-field", slope_s, "fractional signal change per tesla")->check(kSi);
  shot->callback([&] {
    action = [&] {
      const auto cfg = load();
      double slope_field = 0.0;
      if (!slope_s.empty()) {
        slope_field = si(slope_s);
      } else {
        const auto r = pipeline::run_scenario(cfg, {}, {.write_files = false});
        slope_field = std::abs(r.volts_per_tesla) / cfg.odmr.baseline;
      }
      const double p = power_s.empty() ? cfg.run.ir_power : si(power_s);
      std::cout << "shot_limit_t_rthz = " << num(noise::shot_noise_limit(p, cfg.run.wavelength, slope_field))
                << '\n';
    };
  });

  auto *proj = lim->add_subcommand("projection", "spin-projection-noise limit");
  proj->callback([&] {
    action = [&] {
      const auto cfg = load();
      std::cout << "projection_limit_t_rthz = " << num(noise::projection_noise_limit(cfg.ensemble)) << '\n'
                << "formula: " << noise::kProjectionNoiseFormula << '\n';
    };
  });

  // pipeline ------------------------------------------------------------------
  auto *pipe = app.add_subcommand("pipeline", "end-to-end scenario")->require_subcommand(1);
  std::string cfg_path;
  std::string out_dir = "nvcavity_out";
  bool plot = false;
  auto *prun = pipe->add_subcommand("run", "synthesize, demodulate, calibrate and report");
  prun->add_option("config", cfg_path)->required();
  prun->add_option("--out", out_dir, "output directory");
  prun->add_flag("--plot-data", plot, "also write gnuplot-ready .dat files");
  prun->callback([&] {
    action = [&] {
      const auto cfg = config::load_config(cfg_path);
      const auto r = pipeline::run_scenario(cfg, out_dir, {.write_files = true, .plot_data = plot});
      std::cout << pipeline::format_report(r);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return 2;
  }

  try {
    if (action) {
      action();
    }
  } catch (const CLI::Error &e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError &e) {
    std::cerr << "error [config]: " << e.what() << '\n';
    return 1;
  } catch (const Error &e) {
    std::cerr << "error [" << e.module() << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
