#pragma once

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nvcavity/error.hpp"
#include "nvcavity/signal.hpp"
#include "nvcavity/spin.hpp"

namespace nvcavity::estimation {

/// Model value at abscissa x for parameter vector p.
using Model = std::function<double(double x, std::span<const double> p)>;

struct Bounds {
  std::vector<double> lower;
  std::vector<double> upper;

  static Bounds unbounded(std::size_t n) {
    const double inf = std::numeric_limits<double>::infinity();
    return {std::vector<double>(n, -inf), std::vector<double>(n, inf)};
  }
};

struct LeastSquaresOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-10; ///< on the max column-residual cosine
  double step_tolerance = 1e-12;     ///< relative parameter step
  std::vector<double> weights;       ///< optional per-point weights (empty: all 1)
};

struct FitResult {
  std::vector<std::string> names;
  std::vector<double> params;
  std::vector<double> std_errors; ///< linearized standard errors; empty if unavailable
  std::vector<bool> at_bound;
  double residual_norm = 0.0;     ///< sqrt of the weighted sum of squared residuals
  double gradient_norm = 0.0;     ///< max |J_j . r| / (|J_j| |r|) at the solution
  int n_iterations = 0;
  bool converged = false;
  Warnings warnings;

  double value(std::string_view name) const;
  double std_error(std::string_view name) const;

  /// `name = value` lines plus fit diagnostics.
  std::string to_text(std::string_view prefix = {}) const;
  /// `param,value,std` rows (with header).
  std::string to_csv() const;
};

/// Bounded Levenberg-Marquardt with a central-difference Jacobian
/// (step max(1e-6, 1e-6 |p|)); bounds are enforced by projection.
/// Throws FitError on a singular Jacobian or when the iteration budget runs out.
FitResult least_squares(const Model &model, std::span<const double> x, std::span<const double> y,
                        std::vector<double> init, const Bounds &bounds,
                        std::vector<std::string> names = {}, const LeastSquaresOptions &opts = {});

struct AiryFit {
  FitResult fit;
  double finesse = 0.0;
  double fsr = 0.0; ///< in scan units
  std::vector<double> peak_positions;
};

/// Fits peak / (1 + (2F/pi)^2 sin^2(pi (x - x0) / FSR)) to a cavity scan.
/// Throws TooFewPeaks unless at least two resonances are present.
AiryFit fit_airy(const Curve &scan);

/// Fits 1 - depth P / (P + p_sat). Warns when the powers do not straddle saturation.
FitResult fit_saturation(std::span<const double> power, std::span<const double> transmission);

struct FittedPeak {
  double center = 0.0;
  double contrast = 0.0;
  double fwhm = 0.0;
  bool outer = false;
};

struct OdmrFit {
  FitResult fit;
  double baseline = 1.0;
  std::vector<FittedPeak> peaks; ///< ascending by center
};

struct OdmrFitOptions {
  int n_peaks = 4;
  double smooth_width = 2.8e6; ///< moving-average width for initialization (Hz)
  double d_zfs = 2.87e9;       ///< used to label outer/inner features
};

/// Multi-Lorentzian dip fit initialized from minima of a smoothed spectrum.
/// Throws PeakCountMismatch when the detected minima differ from n_peaks.
OdmrFit fit_odmr(const spin::OdmrSpectrum &spectrum, const OdmrFitOptions &opts = {});

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double zero_crossing = 0.0;
  double nonlinearity = 0.0; ///< max |residual| / (|slope| * window)
  std::size_t n_points = 0;
  Warnings warnings;
};

/// Ordinary linear fit over |detuning| < window. Warns when the window is
/// wider than fwhm/2 (if fwhm > 0) or the curve is visibly nonlinear (> 1%).
SlopeFit fit_slope(std::span<const double> detunings, std::span<const double> output,
                   double window, double fwhm = 0.0);

} // namespace nvcavity::estimation
