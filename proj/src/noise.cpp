#include "nvcavity/noise.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "nvcavity/spectral.hpp"

namespace nvcavity::noise {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

template <class... Ts> struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts> Overloaded(Ts...) -> Overloaded<Ts...>;

double median_of(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), mid));
  }
  return m;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

} // namespace

TimeSeries synthesize_record(double duration, double rate, std::span<const Component> components,
                             std::uint64_t seed, std::string unit) {
  if (!(duration > 0.0) || !(rate > 0.0)) {
    throw InvalidArgument("noise", "duration and rate must be positive");
  }
  const double nyquist = 0.5 * rate;
  const auto n = static_cast<std::size_t>(std::llround(duration * rate));
  TimeSeries out{0.0, rate, std::vector<double>(n, 0.0), std::move(unit)};

  std::uint32_t stream = 0;
  for (const auto &component : components) {
    ++stream;
    std::visit(
        Overloaded{
            [&](const Sine &s) {
              if (s.freq >= nyquist) {
                throw Aliasing("noise", "sine at " + fmt(s.freq) + " Hz is above Nyquist");
              }
              const double amp = std::sqrt(2.0) * s.rms;
              for (std::size_t i = 0; i < n; ++i) {
                out.values[i] += amp * std::sin(kTwoPi * s.freq * out.time(i) + s.phase);
              }
            },
            [&](const LineHarmonics &l) {
              for (std::size_t k = 0; k < l.rms.size(); ++k) {
                const double f = l.fundamental * static_cast<double>(k + 1);
                if (f >= nyquist) {
                  throw Aliasing("noise", "line harmonic at " + fmt(f) + " Hz is above Nyquist");
                }
                const double amp = std::sqrt(2.0) * l.rms[k];
                for (std::size_t i = 0; i < n; ++i) {
                  out.values[i] += amp * std::sin(kTwoPi * f * out.time(i));
                }
              }
            },
            [&](const White &w) {
              if (w.bandwidth > nyquist) {
                throw Aliasing("noise", "white-noise bandwidth exceeds Nyquist");
              }
              std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                                stream};
              std::mt19937_64 gen(seq);
              std::normal_distribution<double> normal(0.0, w.asd * std::sqrt(0.5 * rate));
              std::vector<double> draw(n);
              for (auto &v : draw) {
                v = normal(gen);
              }
              if (w.bandwidth > 0.0 && w.bandwidth < nyquist) {
                const double cut = w.bandwidth;
                draw = apply_frequency_gain(draw, rate, [cut](double f) { return f <= cut ? 1.0 : 0.0; });
              }
              for (std::size_t i = 0; i < n; ++i) {
                out.values[i] += draw[i];
              }
            },
        },
        component);
  }
  return out;
}

Spectrum asd(const TimeSeries &signal, const WelchOptions &opts) {
  const std::size_t n = signal.size();
  const std::size_t len = opts.segment_len == 0 ? n : opts.segment_len;
  if (len < 2 || len > n) {
    throw RecordTooShort("noise", "record of " + std::to_string(n) +
                                      " samples is shorter than the segment length " +
                                      std::to_string(len));
  }
  if (!(opts.overlap >= 0.0 && opts.overlap < 1.0)) {
    throw InvalidArgument("noise", "overlap must lie in [0, 1)");
  }
  const auto hop = std::max<std::size_t>(
      1, len - static_cast<std::size_t>(std::llround(opts.overlap * static_cast<double>(len))));

  std::vector<double> window(len, 1.0);
  if (opts.window == Window::hann) {
    for (std::size_t i = 0; i < len; ++i) {
      window[i] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(len));
    }
  }
  double wss = 0.0;
  for (double w : window) {
    wss += w * w;
  }

  RealFft fft(len);
  const std::size_t bins = len / 2 + 1;
  std::vector<double> acc(bins, 0.0);
  std::vector<double> seg(len);
  std::size_t segments = 0;
  for (std::size_t start = 0; start + len <= n; start += hop) {
    double mean = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      mean += signal.values[start + i];
    }
    mean /= static_cast<double>(len);
    for (std::size_t i = 0; i < len; ++i) {
      seg[i] = (signal.values[start + i] - mean) * window[i];
    }
    const auto spec = fft.forward(seg);
    for (std::size_t k = 0; k < bins; ++k) {
      acc[k] += std::norm(spec[k]);
    }
    ++segments;
  }

  Spectrum out;
  out.unit = signal.unit + "/sqrt(Hz)";
  out.freq.resize(bins);
  out.asd.resize(bins);
  const double df = signal.rate / static_cast<double>(len);
  for (std::size_t k = 0; k < bins; ++k) {
    const bool edge = k == 0 || (len % 2 == 0 && k == bins - 1);
    const double scale = (edge ? 1.0 : 2.0) / (signal.rate * wss);
    out.freq[k] = static_cast<double>(k) * df;
    out.asd[k] = std::sqrt(acc[k] / static_cast<double>(segments) * scale);
  }
  return out;
}

std::vector<Exclusion> line_exclusions(double line_freq, double up_to, double half_width) {
  std::vector<Exclusion> out;
  if (line_freq <= 0.0) {
    return out;
  }
  for (double f = line_freq; f <= up_to + half_width; f += line_freq) {
    out.push_back({f, half_width});
  }
  return out;
}

double noise_floor(const Spectrum &spectrum, std::pair<double, double> band,
                   std::span<const Exclusion> exclusions) {
  if (!(band.first < band.second)) {
    throw InvalidArgument("noise", "band must satisfy low < high");
  }
  std::vector<double> kept;
  for (std::size_t k = 0; k < spectrum.freq.size(); ++k) {
    const double f = spectrum.freq[k];
    if (f < band.first || f > band.second) {
      continue;
    }
    const bool excluded = std::any_of(exclusions.begin(), exclusions.end(), [f](const Exclusion &e) {
      return std::abs(f - e.center) <= e.half_width;
    });
    if (!excluded) {
      kept.push_back(spectrum.asd[k]);
    }
  }
  if (kept.empty()) {
    throw EmptyBand("noise", "empty band: no spectral bins in " + fmt(band.first) + "-" +
                                 fmt(band.second) + " Hz outside the exclusions");
  }
  return median_of(std::move(kept));
}

double shot_noise_behavior(const NoiseModel &m, double i_tr) {
  return std::sqrt(m.a * m.a + m.b * m.b * i_tr + m.c * m.c * i_tr * i_tr);
}

ShotNoiseFit fit_shot_noise_behavior(std::span<const double> i_tr, std::span<const double> s_ir) {
  const std::size_t n = i_tr.size();
  if (s_ir.size() != n) {
    throw InvalidArgument("noise", "I_tr and S_IR lengths differ");
  }
  if (n < 3) {
    throw InvalidArgument("noise", "shot-noise fit needs at least three points");
  }
  const auto [lo, hi] = std::minmax_element(i_tr.begin(), i_tr.end());
  if (*lo == *hi) {
    throw DegenerateDesign("noise", "degenerate design: all I_tr values are equal");
  }

  // Linear least squares on S^2 = A + B I + C I^2 seeds the nonlinear fit.
  Eigen::MatrixXd design(static_cast<Eigen::Index>(n), 3);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    design(r, 0) = 1.0;
    design(r, 1) = i_tr[i];
    design(r, 2) = i_tr[i] * i_tr[i];
    rhs[r] = s_ir[i] * s_ir[i];
  }
  const Eigen::Vector3d lin = design.colPivHouseholderQr().solve(rhs);
  std::vector<double> init{std::max(lin[0], 0.0), std::max(lin[1], 0.0), std::max(lin[2], 0.0)};

  // Fit the squared coefficients so a vanishing term keeps a non-zero Jacobian column.
  estimation::Model model = [](double x, std::span<const double> p) {
    return std::sqrt(std::max(0.0, p[0] + p[1] * x + p[2] * x * x));
  };
  const double inf = std::numeric_limits<double>::infinity();
  estimation::Bounds bounds{{0.0, 0.0, 0.0}, {inf, inf, inf}};
  ShotNoiseFit out;
  out.fit = estimation::least_squares(model, i_tr, s_ir, init, bounds, {"a2", "b2", "c2"});

  const auto &p = out.fit.params;
  out.model.a = std::sqrt(p[0]);
  out.model.b = std::sqrt(p[1]);
  out.model.c = std::sqrt(p[2]);
  out.residuals.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.residuals.push_back(s_ir[i] - shot_noise_behavior(out.model, i_tr[i]));
  }
  if (*hi < 10.0 * std::max(*lo, 1e-300)) {
    out.fit.warnings.push_back("I_tr spans less than a decade");
  }
  return out;
}

double relative_shot_noise_asd(double power, double wavelength) {
  if (!(power > 0.0) || !(wavelength > 0.0)) {
    throw InvalidArgument("noise", "power and wavelength must be positive");
  }
  const double photon_energy = kPlanck * kSpeedOfLight / wavelength;
  return std::sqrt(2.0 * photon_energy / power);
}

double shot_noise_limit(double ir_power, double wavelength, double slope_field) {
  if (!(slope_field != 0.0) || !std::isfinite(slope_field)) {
    throw ZeroSlope("noise", "field slope must be non-zero");
  }
  return relative_shot_noise_asd(ir_power, wavelength) / std::abs(slope_field);
}

double projection_noise_limit(const EnsembleParams &e) {
  if (!(e.density_ppm > 0.0 && e.volume_cm3 > 0.0 && e.fwhm > 0.0 && e.gamma > 0.0 &&
        e.carbon_density_cm3 > 0.0)) {
    throw InvalidArgument("noise", "ensemble parameters must be strictly positive");
  }
  const double spins = e.density_ppm * 1e-6 * e.carbon_density_cm3 * e.volume_cm3;
  const double t2star = 1.0 / (std::numbers::pi * e.fwhm);
  return 1.0 / (kTwoPi * e.gamma * std::sqrt(spins * t2star));
}

std::string SensitivityReport::to_text() const {
  std::ostringstream os;
  os << "floor_band_low_hz = " << fmt(floor_band.first) << '\n'
     << "floor_band_high_hz = " << fmt(floor_band.second) << '\n'
     << "sensitive_floor_t_rthz = " << fmt(sensitive_floor) << '\n'
     << "insensitive_floor_t_rthz = " << fmt(floor_asd) << '\n'
     << "electronic_floor_t_rthz = " << fmt(electronic_floor) << '\n'
     << "shot_limit_t_rthz = " << fmt(shot_limit) << '\n'
     << "projection_limit_t_rthz = " << fmt(projection_limit) << '\n'
     << "projection_formula = " << projection_formula << '\n';
  for (const auto &w : warnings) {
    os << "warning = " << w << '\n';
  }
  return os.str();
}

SensitivityReport sensitivity_report(const RecordSet &records, std::pair<double, double> band,
                                     const WelchOptions &welch,
                                     std::span<const Exclusion> exclusions, double shot_limit,
                                     double projection_limit, RecordSpectra *spectra) {
  const auto &s = records.sensitive;
  for (const TimeSeries *r : {&records.insensitive, &records.electronic}) {
    if (r->rate != s.rate || r->size() != s.size()) {
      throw InvalidArgument("noise", "records must share sample rate and duration");
    }
  }
  RecordSpectra local{asd(records.sensitive, welch), asd(records.insensitive, welch),
                      asd(records.electronic, welch)};
  SensitivityReport report;
  report.floor_band = band;
  report.sensitive_floor = noise_floor(local.sensitive, band, exclusions);
  report.floor_asd = noise_floor(local.insensitive, band, exclusions);
  report.electronic_floor = noise_floor(local.electronic, band, exclusions);
  report.shot_limit = shot_limit;
  report.projection_limit = projection_limit;
  if (!(projection_limit <= shot_limit && shot_limit <= report.floor_asd)) {
    report.warnings.push_back(
        "expected projection_limit <= shot_limit <= floor for a shot-noise-dominated sensor");
  }
  if (spectra != nullptr) {
    *spectra = std::move(local);
  }
  return report;
}

} // namespace nvcavity::noise
