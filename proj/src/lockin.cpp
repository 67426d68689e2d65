#include "nvcavity/lockin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace nvcavity::lockin {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double uniform_rate(std::span<const double> t) {
  if (t.size() < 2) {
    throw InvalidArgument("lockin", "time grid needs at least two samples");
  }
  const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  if (!(dt > 0.0)) {
    throw InvalidArgument("lockin", "time grid must be increasing");
  }
  return 1.0 / dt;
}

double wrap_phase(double phi) {
  phi = std::remainder(phi, kTwoPi);
  return phi;
}

} // namespace

void LockInConfig::validate() const {
  if (!(f_mod > 0.0) || !(f_dev > 0.0) || !(time_constant > 0.0) || poles < 1 || harmonic < 1) {
    throw InvalidArgument("lockin",
                          "lock-in needs f_mod, f_dev, time_constant > 0, poles >= 1, harmonic >= 1");
  }
  if (!(stage_bandwidth() < f_mod)) {
    throw InvalidArgument("lockin", "demodulation bandwidth 1/(2 pi tau) must be below f_mod");
  }
}

double LockInConfig::stage_bandwidth() const { return 1.0 / (kTwoPi * time_constant); }

std::vector<double> fm_waveform(const LockInConfig &cfg, double f_center,
                                std::span<const double> t, Warnings *warnings) {
  cfg.validate();
  const double rate = uniform_rate(t);
  if (rate < 2.0 * cfg.f_mod) {
    throw Undersampled("lockin", "sample rate " + std::to_string(rate) +
                                     " Hz is below twice the modulation frequency");
  }
  if (rate < 10.0 * cfg.f_mod) {
    warn(warnings, "sample rate below 10 f_mod; waveform is coarsely sampled");
  }
  std::vector<double> out;
  out.reserve(t.size());
  for (double ti : t) {
    out.push_back(f_center + cfg.f_dev * std::cos(kTwoPi * cfg.f_mod * ti));
  }
  return out;
}

double filter_response(const LockInConfig &cfg, double f) {
  if (!(f >= 0.0)) {
    throw InvalidArgument("lockin", "frequency must be non-negative");
  }
  const double x = kTwoPi * f * cfg.time_constant;
  return std::pow(1.0 + x * x, -0.5 * cfg.poles);
}

double noise_equivalent_bandwidth(const LockInConfig &cfg) {
  const double n = cfg.poles;
  return cfg.stage_bandwidth() * std::sqrt(std::numbers::pi) * std::tgamma(n - 0.5) /
         (2.0 * std::tgamma(n));
}

double settling_time(const LockInConfig &cfg) {
  return (10.0 + 2.0 * (cfg.poles - 1)) * cfg.time_constant;
}

LockInAmplifier::LockInAmplifier(const LockInConfig &cfg, double sample_rate, double t0)
    : cfg_(cfg), rate_(sample_rate), t0_(t0),
      alpha_(-std::expm1(-1.0 / (sample_rate * cfg.time_constant))),
      stages_(static_cast<std::size_t>(cfg.poles), 0.0) {
  cfg_.validate();
  if (!(sample_rate > 0.0)) {
    throw InvalidArgument("lockin", "sample rate must be positive");
  }
}

double LockInAmplifier::process(double sample) {
  const double cycles =
      cfg_.harmonic * cfg_.f_mod * (t0_ + static_cast<double>(index_) / rate_);
  const double frac = cycles - std::floor(cycles);
  double x = 2.0 * sample * std::cos(kTwoPi * frac + cfg_.ref_phase);
  for (auto &y : stages_) {
    y += alpha_ * (x - y);
    x = y;
  }
  ++index_;
  return x;
}

void LockInAmplifier::reset() {
  index_ = 0;
  std::fill(stages_.begin(), stages_.end(), 0.0);
}

TimeSeries demodulate(const TimeSeries &signal, const LockInConfig &cfg, Warnings *warnings) {
  cfg.validate();
  if (signal.rate < 10.0 * cfg.harmonic * cfg.f_mod) {
    throw Undersampled("lockin", "demodulation needs a sample rate of at least 10 f_mod");
  }
  if (signal.duration() < 10.0 * cfg.time_constant) {
    warn(warnings, "record shorter than 10 time constants; output has not settled");
  }
  LockInAmplifier amp(cfg, signal.rate, signal.t0);
  TimeSeries out{signal.t0, signal.rate, {}, signal.unit};
  out.values.reserve(signal.size());
  for (double v : signal.values) {
    out.values.push_back(amp.process(v));
  }
  return out;
}

TimeSeries decimate(const TimeSeries &signal, std::size_t factor) {
  if (factor == 0) {
    throw InvalidArgument("lockin", "decimation factor must be positive");
  }
  TimeSeries out{signal.t0, signal.rate / static_cast<double>(factor), {}, signal.unit};
  const std::size_t blocks = signal.size() / factor;
  out.values.reserve(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < factor; ++i) {
      sum += signal.values[b * factor + i];
    }
    out.values.push_back(sum / static_cast<double>(factor));
  }
  return out;
}

double block_average_response(std::size_t factor, double input_rate, double f) {
  const double x = std::numbers::pi * f / input_rate;
  const double den = static_cast<double>(factor) * std::sin(x);
  if (den == 0.0) {
    return 1.0;
  }
  return std::abs(std::sin(static_cast<double>(factor) * x) / den);
}

double steady_state_output(const Lineshape &lineshape, double f_center, const LockInConfig &cfg,
                           const DispersiveOptions &opts) {
  const int spp = opts.samples_per_period;
  if (spp < 10) {
    throw Undersampled("lockin", "dispersive synthesis needs at least 10 samples per period");
  }
  const double rate = cfg.f_mod * spp;
  const double settle = std::max(opts.settle_time_constants * cfg.time_constant, settling_time(cfg));
  const auto settle_periods =
      static_cast<std::size_t>(std::ceil(settle * cfg.f_mod));
  const std::size_t avg_samples = static_cast<std::size_t>(opts.average_periods) * spp;
  const std::size_t total = settle_periods * static_cast<std::size_t>(spp) + avg_samples;

  std::vector<double> period(static_cast<std::size_t>(spp));
  for (int k = 0; k < spp; ++k) {
    period[static_cast<std::size_t>(k)] =
        lineshape(f_center + cfg.f_dev * std::cos(kTwoPi * k / spp));
  }

  LockInAmplifier amp(cfg, rate);
  double sum = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    const double out = amp.process(period[i % static_cast<std::size_t>(spp)]);
    if (i >= total - avg_samples) {
      sum += out;
    }
  }
  return sum / static_cast<double>(avg_samples);
}

double optimize_ref_phase(const Lineshape &lineshape, double f_res, const LockInConfig &cfg,
                          const DispersiveOptions &opts) {
  const double h = opts.probe > 0.0 ? opts.probe : cfg.f_dev / 100.0;
  auto slope = [&](double phi) {
    LockInConfig c = cfg;
    c.ref_phase = phi;
    return (steady_state_output(lineshape, f_res + h, c, opts) -
            steady_state_output(lineshape, f_res - h, c, opts)) /
           (2.0 * h);
  };

  double best = 0.0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 8; ++i) {
    const double phi = kTwoPi * i / 8.0;
    const double v = slope(phi);
    if (v > best_val) {
      best_val = v;
      best = phi;
    }
  }

  // Golden-section maximization on the bracket around the best candidate.
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = best - std::numbers::pi / 4.0;
  double b = best + std::numbers::pi / 4.0;
  double c = b - g * (b - a);
  double d = a + g * (b - a);
  double fc = slope(c);
  double fd = slope(d);
  while (b - a > 1e-7) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = slope(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = slope(d);
    }
  }
  return wrap_phase(0.5 * (a + b));
}

DispersiveCurve dispersive_curve(const Lineshape &lineshape, double f_res,
                                 const LockInConfig &cfg, std::span<const double> detunings,
                                 const DispersiveOptions &opts) {
  cfg.validate();
  if (detunings.size() < 3) {
    throw InvalidArgument("lockin", "dispersive curve needs at least three detunings");
  }
  LockInConfig used = cfg;
  if (cfg.auto_phase) {
    used.ref_phase = optimize_ref_phase(lineshape, f_res, cfg, opts);
  }

  DispersiveCurve curve;
  curve.ref_phase = used.ref_phase;
  curve.detunings.assign(detunings.begin(), detunings.end());
  curve.lockin_out.reserve(detunings.size());
  for (double d : detunings) {
    curve.lockin_out.push_back(steady_state_output(lineshape, f_res + d, used, opts));
  }

  std::size_t center = 0;
  for (std::size_t i = 1; i < detunings.size(); ++i) {
    if (std::abs(detunings[i]) < std::abs(detunings[center])) {
      center = i;
    }
  }
  if (center == 0 || center + 1 >= detunings.size()) {
    throw InvalidArgument("lockin", "detuning grid must bracket zero detuning");
  }
  curve.slope_at_zero = (curve.lockin_out[center + 1] - curve.lockin_out[center - 1]) /
                        (detunings[center + 1] - detunings[center - 1]);
  return curve;
}

DispersiveCurve dispersive_curve(const spin::OdmrModel &model, int peak_index,
                                 const LockInConfig &cfg, std::span<const double> detunings,
                                 DispersiveOptions opts) {
  model.validate();
  const auto centers = spin::odmr_peak_centers(model);
  const double f_res = centers.at(static_cast<std::size_t>(peak_index));
  const double fwhm = model.peaks[static_cast<std::size_t>(peak_index)].fwhm;
  if (opts.probe <= 0.0) {
    opts.probe = std::min(cfg.f_dev, fwhm) / 100.0;
  }

  Warnings overlap;
  const double window = cfg.f_dev + 3.0 * fwhm;
  for (int i = 0; i < 4; ++i) {
    if (i != peak_index && std::abs(centers[static_cast<std::size_t>(i)] - f_res) < window) {
      overlap.push_back("peak " + std::to_string(i) + " lies inside the modulation window of peak " +
                        std::to_string(peak_index));
    }
  }

  auto lineshape = [&model](double f) { return spin::odmr_transmission(model, f); };
  auto curve = dispersive_curve(lineshape, f_res, cfg, detunings, opts);
  curve.warnings.insert(curve.warnings.end(), overlap.begin(), overlap.end());
  return curve;
}

FieldConversion volts_to_tesla(double slope_at_zero, double gamma) {
  if (slope_at_zero == 0.0 || !std::isfinite(slope_at_zero)) {
    throw ZeroSlope("lockin", "dispersive slope is zero; output cannot be converted to field");
  }
  return {slope_at_zero * gamma};
}

} // namespace nvcavity::lockin
