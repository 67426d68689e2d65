#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "nvcavity/cavity.hpp"
#include "nvcavity/estimation.hpp"

namespace nvcavity::estimation {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) {
    return 0.0;
  }
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), mid));
  }
  return m;
}

std::vector<double> moving_average(std::span<const double> y, std::size_t half) {
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(y.size() - 1, i + half);
    double s = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) {
      s += y[k];
    }
    out[i] = s / static_cast<double>(hi - lo + 1);
  }
  return out;
}

struct Run {
  std::size_t first;
  std::size_t last;
};

} // namespace

AiryFit fit_airy(const Curve &scan) {
  const auto &x = scan.x;
  const auto &y = scan.y;
  if (x.size() != y.size() || x.size() < 8) {
    throw InvalidArgument("estimation", "Airy fit needs matching x/y with at least 8 points");
  }
  const double ymax = *std::max_element(y.begin(), y.end());
  const double ymin = *std::min_element(y.begin(), y.end());
  const double threshold = ymin + 0.5 * (ymax - ymin);

  std::vector<Run> runs;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] > threshold) {
      if (!runs.empty() && runs.back().last + 1 == i) {
        runs.back().last = i;
      } else {
        runs.push_back({i, i});
      }
    }
  }
  // Noise near the half-maximum splits a resonance into fragments; merge
  // fragments separated by less than a few resonance widths.
  if (runs.size() > 1) {
    std::vector<double> widths;
    for (const auto &r : runs) {
      widths.push_back(x[r.last] - x[r.first]);
    }
    const double merge_gap = 3.0 * std::max(median(widths), std::abs(x[1] - x[0]));
    std::vector<Run> merged{runs.front()};
    for (std::size_t k = 1; k < runs.size(); ++k) {
      if (x[runs[k].first] - x[merged.back().last] < merge_gap) {
        merged.back().last = runs[k].last;
      } else {
        merged.push_back(runs[k]);
      }
    }
    runs = std::move(merged);
  }
  if (runs.size() < 2) {
    throw TooFewPeaks("estimation", "Airy fit needs at least two transmission peaks, found " +
                                        std::to_string(runs.size()));
  }

  std::vector<double> positions;
  std::vector<double> widths;
  for (const auto &r : runs) {
    auto it = std::max_element(y.begin() + static_cast<std::ptrdiff_t>(r.first),
                               y.begin() + static_cast<std::ptrdiff_t>(r.last) + 1);
    positions.push_back(x[static_cast<std::size_t>(it - y.begin())]);
    if (r.first > 0 && r.last + 1 < x.size()) {
      widths.push_back(x[r.last] - x[r.first] + std::abs(x[1] - x[0]));
    }
  }
  const double fsr0 = (positions.back() - positions.front()) / static_cast<double>(positions.size() - 1);
  const double fwhm0 = widths.empty() ? fsr0 / 10.0 : median(widths);
  const double finesse0 = std::max(1.5, fsr0 / fwhm0);

  Model model = [](double xv, std::span<const double> p) {
    return cavity::airy_transmission(p[0], p[1], 2.0 * std::numbers::pi * (xv - p[2]) / p[3]);
  };
  const double inf = std::numeric_limits<double>::infinity();
  Bounds bounds{{0.0, 1.0, positions.front() - 0.5 * fsr0, 0.0},
                {inf, inf, positions.front() + 0.5 * fsr0, inf}};
  AiryFit out;
  out.fit = least_squares(model, x, y, {ymax, finesse0, positions.front(), fsr0}, bounds,
                          {"peak", "finesse", "x0", "fsr"});
  out.finesse = out.fit.value("finesse");
  out.fsr = out.fit.value("fsr");
  const double x0 = out.fit.value("x0");
  const auto [xmin_it, xmax_it] = std::minmax_element(x.begin(), x.end());
  const double kmin = std::ceil((*xmin_it - x0) / out.fsr);
  const double kmax = std::floor((*xmax_it - x0) / out.fsr);
  for (double k = kmin; k <= kmax; k += 1.0) {
    out.peak_positions.push_back(x0 + k * out.fsr);
  }
  return out;
}

FitResult fit_saturation(std::span<const double> power, std::span<const double> transmission) {
  if (power.size() != transmission.size()) {
    throw InvalidArgument("estimation", "power and transmission lengths differ");
  }
  std::vector<double> distinct(power.begin(), power.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3) {
    throw DegenerateDesign("estimation", "saturation fit needs at least three distinct powers");
  }

  // Initial guess: deepest observed dip, half-depth crossing for p_sat.
  const double ymin = *std::min_element(transmission.begin(), transmission.end());
  const double depth0 = std::clamp(1.2 * (1.0 - ymin), 1e-3, 1.0);
  double psat0 = median(std::vector<double>(power.begin(), power.end()));
  for (std::size_t i = 0; i < power.size(); ++i) {
    if (1.0 - transmission[i] >= 0.5 * depth0) {
      psat0 = std::min(psat0, power[i]);
    }
  }
  psat0 = std::max(psat0, 1e-3 * distinct.back());
  if (!(psat0 > 0.0)) {
    psat0 = 1.0;
  }

  Model model = [](double p, std::span<const double> q) { return 1.0 - q[1] * p / (p + q[0]); };
  const double inf = std::numeric_limits<double>::infinity();
  Bounds bounds{{1e-12, 1e-12}, {inf, 1.0}};
  auto fit = least_squares(model, power, transmission, {psat0, depth0}, bounds, {"p_sat", "depth"});

  const double p_sat = fit.value("p_sat");
  if (!(distinct.front() < 0.5 * p_sat && distinct.back() > p_sat)) {
    fit.warnings.push_back("insufficient range: powers should include P < P_sat/2 and P > P_sat");
  }
  return fit;
}

OdmrFit fit_odmr(const spin::OdmrSpectrum &spectrum, const OdmrFitOptions &opts) {
  const auto &f = spectrum.freqs;
  const auto &y = spectrum.transmission;
  const std::size_t n = f.size();
  if (y.size() != n || n < 16) {
    throw InvalidArgument("estimation", "ODMR fit needs matching arrays with at least 16 points");
  }
  if (opts.n_peaks < 1) {
    throw InvalidArgument("estimation", "n_peaks must be positive");
  }
  const double step = (f.back() - f.front()) / static_cast<double>(n - 1);
  // Fit in MHz relative to the scan center for conditioning.
  const double origin = 0.5 * (f.front() + f.back());
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = (f[i] - origin) * 1e-6;
  }

  const double base0 = median(std::vector<double>(y.begin(), y.end()));
  std::vector<double> dip(n);
  for (std::size_t i = 0; i < n; ++i) {
    dip[i] = base0 - y[i];
  }
  const auto half = static_cast<std::size_t>(std::max(0.0, std::round(0.5 * opts.smooth_width / step)));
  const auto smooth = moving_average(dip, half);

  std::vector<double> diffs;
  for (std::size_t i = 1; i < n; ++i) {
    diffs.push_back(std::abs(y[i] - y[i - 1]));
  }
  const double sigma = 1.4826 * median(diffs) / std::sqrt(2.0);
  const double smax = *std::max_element(smooth.begin(), smooth.end());
  const double threshold =
      std::max(0.2 * smax, 5.0 * sigma / std::sqrt(static_cast<double>(2 * half + 1)));

  std::vector<std::size_t> minima;
  const std::size_t reach = std::max<std::size_t>(half, 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (smooth[i] <= threshold) {
      continue;
    }
    const std::size_t lo = i >= reach ? i - reach : 0;
    const std::size_t hi = std::min(n - 1, i + reach);
    bool is_max = true;
    for (std::size_t k = lo; k <= hi && is_max; ++k) {
      if (smooth[k] > smooth[i] || (smooth[k] == smooth[i] && k < i)) {
        is_max = false;
      }
    }
    if (is_max) {
      minima.push_back(i);
    }
  }
  if (minima.size() != static_cast<std::size_t>(opts.n_peaks)) {
    throw PeakCountMismatch("estimation", "expected " + std::to_string(opts.n_peaks) +
                                              " ODMR features, found " +
                                              std::to_string(minima.size()));
  }

  std::vector<double> init{base0};
  std::vector<std::string> names{"baseline"};
  const double inf = std::numeric_limits<double>::infinity();
  Bounds bounds{{0.0}, {inf}};
  for (std::size_t k = 0; k < minima.size(); ++k) {
    const std::size_t i = minima[k];
    const double depth = smooth[i];
    std::size_t l = i, r = i;
    while (l > 0 && smooth[l] > 0.5 * depth) {
      --l;
    }
    while (r + 1 < n && smooth[r] > 0.5 * depth) {
      ++r;
    }
    const double width = std::max((f[r] - f[l]) * 1e-6, 2.0 * step * 1e-6);
    double raw_depth = 0.0;
    for (std::size_t j = (i >= half ? i - half : 0); j <= std::min(n - 1, i + half); ++j) {
      raw_depth = std::max(raw_depth, dip[j]);
    }
    init.insert(init.end(), {u[i], std::clamp(0.5 * (depth + raw_depth), 1e-6, 0.99), width});
    const std::string tag = "peak" + std::to_string(k) + ".";
    names.insert(names.end(), {tag + "center", tag + "contrast", tag + "fwhm"});
    bounds.lower.insert(bounds.lower.end(), {u.front(), 1e-9, 0.1 * step * 1e-6});
    bounds.upper.insert(bounds.upper.end(), {u.back(), 1.0, u.back() - u.front()});
  }

  const int peaks = opts.n_peaks;
  Model model = [peaks](double x, std::span<const double> p) {
    double t = p[0];
    for (int k = 0; k < peaks; ++k) {
      const auto b = static_cast<std::size_t>(1 + 3 * k);
      const double v = 2.0 * (x - p[b]) / p[b + 2];
      t -= p[b + 1] / (1.0 + v * v);
    }
    return t;
  };

  OdmrFit out;
  out.fit = least_squares(model, u, y, init, bounds, names);

  // Report in SI units.
  auto &fr = out.fit;
  for (std::size_t k = 0; k < static_cast<std::size_t>(peaks); ++k) {
    const std::size_t b = 1 + 3 * k;
    fr.params[b] = origin + fr.params[b] * 1e6;
    fr.params[b + 2] *= 1e6;
    if (!fr.std_errors.empty()) {
      fr.std_errors[b] *= 1e6;
      fr.std_errors[b + 2] *= 1e6;
    }
    out.peaks.push_back({fr.params[b], fr.params[b + 1], fr.params[b + 2], false});
  }
  out.baseline = fr.params[0];
  std::sort(out.peaks.begin(), out.peaks.end(),
            [](const FittedPeak &a, const FittedPeak &b) { return a.center < b.center; });

  // The two features farthest from the zero-field splitting are the aligned
  // (outer) orientation; fewer than three features are all outer.
  std::vector<std::size_t> order(out.peaks.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(out.peaks[a].center - opts.d_zfs) > std::abs(out.peaks[b].center - opts.d_zfs);
  });
  const std::size_t n_outer = out.peaks.size() <= 2 ? out.peaks.size() : 2;
  for (std::size_t k = 0; k < n_outer; ++k) {
    out.peaks[order[k]].outer = true;
  }
  return out;
}

SlopeFit fit_slope(std::span<const double> detunings, std::span<const double> output, double window,
                   double fwhm) {
  if (detunings.size() != output.size()) {
    throw InvalidArgument("estimation", "detuning and output lengths differ");
  }
  if (!(window > 0.0)) {
    throw InvalidArgument("estimation", "slope window must be positive");
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < detunings.size(); ++i) {
    if (std::abs(detunings[i]) < window) {
      sx += detunings[i];
      sy += output[i];
      sxx += detunings[i] * detunings[i];
      sxy += detunings[i] * output[i];
      ++count;
    }
  }
  const double nn = static_cast<double>(count);
  const double den = nn * sxx - sx * sx;
  if (count < 2 || den == 0.0) {
    throw DegenerateDesign("estimation", "slope window contains fewer than two distinct detunings");
  }
  SlopeFit out;
  out.n_points = count;
  out.slope = (nn * sxy - sx * sy) / den;
  out.intercept = (sy - out.slope * sx) / nn;
  if (out.slope == 0.0) {
    throw ZeroSlope("estimation", "fitted slope is zero");
  }
  out.zero_crossing = -out.intercept / out.slope;

  double worst = 0.0;
  for (std::size_t i = 0; i < detunings.size(); ++i) {
    if (std::abs(detunings[i]) < window) {
      worst = std::max(worst, std::abs(output[i] - (out.intercept + out.slope * detunings[i])));
    }
  }
  out.nonlinearity = worst / (std::abs(out.slope) * window);
  if (fwhm > 0.0 && window >= 0.5 * fwhm) {
    out.warnings.push_back("slope window is not small compared to fwhm/2 (nonlinearity " +
                           std::to_string(out.nonlinearity) + ")");
  } else if (out.nonlinearity > 0.01) {
    out.warnings.push_back("dispersive curve is nonlinear inside the slope window (nonlinearity " +
                           std::to_string(out.nonlinearity) + ")");
  }
  return out;
}

} // namespace nvcavity::estimation
