#include "nvcavity/cavity.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/tools/roots.hpp>

#include "nvcavity/error.hpp"

namespace nvcavity::cavity {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_fraction(double v) { return v >= 0.0 && v <= 1.0; }

double finesse_from_amplitude(double r) { return kPi * std::sqrt(r) / (1.0 - r); }

double transmission_raw(double r1, double r2, double a) {
  const double den = 2.0 - r1 - r2 + a;
  return 4.0 * (1.0 - r1) * (1.0 - r2) * (1.0 - a) / (den * den);
}

// Inverse of finesse_from_amplitude on r in (0, 1).
double amplitude_from_finesse(double f) {
  // F (1 - s^2) = pi s with s = sqrt(r)
  const double s = (-kPi + std::sqrt(kPi * kPi + 4.0 * f * f)) / (2.0 * f);
  return s * s;
}

} // namespace

void CavityParams::validate() const {
  if (!(r1 > 0.0 && r1 <= 1.0) || !(r2 > 0.0 && r2 <= 1.0)) {
    throw InvalidArgument("cavity", "reflectances must lie in (0, 1]");
  }
  if (!(loss_roundtrip >= 0.0 && loss_roundtrip < 1.0)) {
    throw InvalidArgument("cavity", "round-trip loss must lie in [0, 1)");
  }
  if (!(l_diamond > 0.0 && l_diamond < l_optical && l_optical < mirror_curvature)) {
    throw InvalidArgument("cavity",
                          "lengths must satisfy 0 < l_diamond < l_optical < mirror_curvature");
  }
}

double roundtrip_amplitude(const CavityParams &p) {
  return std::sqrt(p.r1 * p.r2 * (1.0 - p.loss_roundtrip));
}

double finesse_from_params(const CavityParams &p) {
  p.validate();
  const double r = roundtrip_amplitude(p);
  if (r >= 1.0) {
    throw UnboundedFinesse("cavity", "lossless cavity with perfect mirrors has unbounded finesse");
  }
  return finesse_from_amplitude(r);
}

double transmission_on_resonance(const CavityParams &p) {
  p.validate();
  if (2.0 - p.r1 - p.r2 + p.loss_roundtrip <= 0.0) {
    throw InvalidArgument("cavity", "transmission undefined for lossless perfect mirrors");
  }
  return transmission_raw(p.r1, p.r2, p.loss_roundtrip);
}

MirrorLossSolution solve_r2_and_loss(double finesse, double transmission, double r1) {
  if (!(finesse > 1.0) || !(transmission > 0.0 && transmission < 1.0) ||
      !(r1 > 0.0 && r1 < 1.0)) {
    throw InvalidArgument("cavity", "solve requires finesse > 1, 0 < T < 1, 0 < R1 < 1");
  }

  // The finesse pins the product R2 (1 - A) = q; only R2 remains free.
  const double r = amplitude_from_finesse(finesse);
  const double q = r * r / r1;
  if (q >= 1.0) {
    throw NoSolution("cavity", "finesse " + std::to_string(finesse) +
                                   " requires R2(1-A) >= 1 for R1 = " + std::to_string(r1));
  }

  auto mismatch = [&](double r2) { return transmission_raw(r1, r2, 1.0 - q / r2) - transmission; };

  // Bracket sign changes of the transmission mismatch on R2 in [q, 1].
  constexpr int kGrid = 4000;
  std::vector<std::pair<double, double>> brackets;
  double prev_x = q;
  double prev_v = mismatch(q);
  for (int i = 1; i <= kGrid; ++i) {
    const double x = q + (1.0 - q) * static_cast<double>(i) / kGrid;
    const double v = mismatch(x);
    if (prev_v == 0.0 || (prev_v > 0.0) != (v > 0.0)) {
      if (brackets.empty() || brackets.back().second != prev_x) {
        brackets.emplace_back(prev_x, x);
      }
    }
    prev_x = x;
    prev_v = v;
  }
  // The R2 = 1 end is always a zero of transmission_raw, never a root unless T = 0.
  if (brackets.empty()) {
    throw NoSolution("cavity", "no (R2, A) reproduces finesse " + std::to_string(finesse) +
                                   " and transmission " + std::to_string(transmission));
  }
  if (brackets.size() > 1) {
    throw AmbiguousSolution("cavity", "two (R2, A) pairs reproduce the measured finesse and "
                                      "transmission");
  }

  boost::uintmax_t max_iter = 200;
  auto tol = boost::math::tools::eps_tolerance<double>(52);
  const auto [lo, hi] = boost::math::tools::toms748_solve(mismatch, brackets[0].first,
                                                          brackets[0].second, tol, max_iter);
  double r2 = 0.5 * (lo + hi);
  double a = 1.0 - q / r2;

  // Damped Newton polish on the relative residuals of both observables.
  auto residuals = [&](double x2, double xa) {
    const double rr = std::sqrt(r1 * x2 * (1.0 - xa));
    return std::array<double, 2>{finesse_from_amplitude(rr) / finesse - 1.0,
                                 transmission_raw(r1, x2, xa) / transmission - 1.0};
  };
  auto norm = [](const std::array<double, 2> &v) { return std::max(std::abs(v[0]), std::abs(v[1])); };

  constexpr double kTolerance = 1e-10;
  constexpr int kBudget = 200;
  auto res = residuals(r2, a);
  int iter = 0;
  while (norm(res) > 1e-14 && iter < kBudget) {
    ++iter;
    const double h2 = 1e-7 * std::max(1.0 - r2, 1e-6);
    const double ha = 1e-7 * std::max(a, 1e-6);
    const auto p2 = residuals(r2 + h2, a), m2 = residuals(r2 - h2, a);
    const auto pa = residuals(r2, a + ha), ma = residuals(r2, a - ha);
    const double j00 = (p2[0] - m2[0]) / (2 * h2), j01 = (pa[0] - ma[0]) / (2 * ha);
    const double j10 = (p2[1] - m2[1]) / (2 * h2), j11 = (pa[1] - ma[1]) / (2 * ha);
    const double det = j00 * j11 - j01 * j10;
    if (det == 0.0 || !std::isfinite(det)) {
      break;
    }
    const double d2 = -(j11 * res[0] - j01 * res[1]) / det;
    const double da = -(-j10 * res[0] + j00 * res[1]) / det;
    double step = 1.0;
    bool improved = false;
    for (int k = 0; k < 30; ++k, step *= 0.5) {
      const double n2 = std::clamp(r2 + step * d2, q, 1.0);
      const double na = std::clamp(a + step * da, 0.0, 1.0 - 1e-15);
      const auto nr = residuals(n2, na);
      if (norm(nr) < norm(res)) {
        r2 = n2;
        a = na;
        res = nr;
        improved = true;
        break;
      }
    }
    if (!improved) {
      break;
    }
  }

  if (!(norm(res) <= kTolerance) || !is_fraction(r2) || !is_fraction(a)) {
    throw NoSolution("cavity", "residual could not be driven below tolerance");
  }
  return {r2, a, norm(res), iter};
}

SingletDensity singlet_density(const SingletAbsorption &s) {
  if (!(s.loss_dark >= 0.0 && s.loss_dark <= s.loss_pumped && s.loss_pumped < 1.0)) {
    throw InvalidArgument("cavity", "losses must satisfy 0 <= dark <= pumped < 1");
  }
  if (!(s.cross_section_cm2 > 0.0 && s.path_length_cm > 0.0 && s.carbon_density_cm3 > 0.0)) {
    throw InvalidArgument("cavity", "cross-section, path length and carbon density must be positive");
  }
  const double a_nv = s.loss_pumped - s.loss_dark;
  if (a_nv >= 1.0) {
    throw NonPhysicalLoss("cavity", "singlet absorption must be below unity");
  }
  const double n = -std::log1p(-a_nv) / (s.cross_section_cm2 * s.path_length_cm);
  return {n, n / s.carbon_density_cm3 * 1e6};
}

double airy_transmission(double peak, double finesse, double phase) {
  const double coeff = 2.0 * finesse / kPi;
  const double s = std::sin(0.5 * phase);
  return peak / (1.0 + coeff * coeff * s * s);
}

std::vector<double> airy_scan(const CavityParams &p, std::span<const double> phase) {
  const double peak = transmission_on_resonance(p);
  const double f = finesse_from_params(p);
  std::vector<double> out;
  out.reserve(phase.size());
  for (double phi : phase) {
    out.push_back(airy_transmission(peak, f, phi));
  }
  return out;
}

double piezo_phase(double displacement, double wavelength) {
  return 4.0 * kPi * displacement / wavelength;
}

double free_spectral_range(double l_optical) {
  if (!(l_optical > 0.0)) {
    throw InvalidArgument("cavity", "optical length must be positive");
  }
  return kSpeedOfLight / (2.0 * l_optical);
}

ModeWaists mode_waists(const CavityParams &p, double wavelength) {
  const double l = p.l_optical;
  const double rc = p.mirror_curvature;
  if (!(l > 0.0 && l < rc)) {
    throw UnstableResonator("cavity", "plano-concave resonator requires 0 < L < R_c");
  }
  if (!(wavelength > 0.0)) {
    throw InvalidArgument("cavity", "wavelength must be positive");
  }
  const double scale = wavelength / kPi;
  return {std::sqrt(scale * std::sqrt(l * (rc - l))),
          std::sqrt(scale * rc * std::sqrt(l / (rc - l)))};
}

} // namespace nvcavity::cavity
