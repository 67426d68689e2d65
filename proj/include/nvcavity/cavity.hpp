#pragma once

#include <span>
#include <vector>

namespace nvcavity::cavity {

inline constexpr double kSpeedOfLight = 299792458.0;   // m/s
inline constexpr double kDiamondCarbonDensity = 1.76e23; // atoms per cm^3

/// Plano-concave resonator formed by the coated diamond (input mirror) and a
/// spherical output coupler. Defaults describe the built sensor head.
struct CavityParams {
  double r1 = 0.985;              ///< diamond-coating reflectance
  double r2 = 0.992;              ///< output-coupler reflectance
  double loss_roundtrip = 0.0166; ///< round-trip loss fraction A
  double l_optical = 5.00e-3;     ///< optical cavity length (m)
  double l_diamond = 0.39e-3;     ///< geometric diamond thickness (m)
  double mirror_curvature = 10e-3; ///< concave-mirror radius of curvature (m)

  /// Throws InvalidArgument when a field invariant is violated.
  void validate() const;
};

/// Singlet-state absorption measurement: dark and pumped round-trip loss.
/// Lengths and areas are in CGS units to match the cross-section literature.
struct SingletAbsorption {
  double loss_dark = 0.0166;
  double loss_pumped = 0.0309;
  double cross_section_cm2 = 3e-18;
  double path_length_cm = 0.039;
  double carbon_density_cm3 = kDiamondCarbonDensity;
};

struct SingletDensity {
  double per_cm3 = 0.0;
  double ppm = 0.0;
};

struct MirrorLossSolution {
  double r2 = 0.0;
  double loss = 0.0;
  double residual = 0.0; ///< max relative residual of the finesse/transmission pair
  int iterations = 0;
};

struct ModeWaists {
  double flat = 0.0;   ///< 1/e^2 radius on the plane (diamond) mirror (m)
  double curved = 0.0; ///< 1/e^2 radius on the concave mirror (m)
};

/// Effective single-pass amplitude factor sqrt(R1 R2 (1-A)).
double roundtrip_amplitude(const CavityParams &p);

/// Finesse pi*sqrt(r)/(1-r), r = sqrt(R1 R2 (1-A)). Throws UnboundedFinesse
/// in the lossless perfect-mirror limit.
double finesse_from_params(const CavityParams &p);

/// On-resonance power transmission 4(1-R1)(1-R2)(1-A)/(2-R1-R2+A)^2.
double transmission_on_resonance(const CavityParams &p);

/// Recovers (R2, A) from a measured finesse and on-resonance transmission
/// given the input-mirror reflectance. Roots are bracketed on the
/// one-parameter family R2(1-A) = const fixed by the finesse, then polished
/// with a damped Newton iteration on both relative residuals.
///
/// Throws NoSolution when the inputs are inconsistent and AmbiguousSolution
/// when two physical roots exist.
MirrorLossSolution solve_r2_and_loss(double finesse, double transmission, double r1);

/// Beer-Lambert singlet density from the pump-induced extra loss.
SingletDensity singlet_density(const SingletAbsorption &s);

/// Airy transmission for a given on-resonance peak and finesse at round-trip phase.
double airy_transmission(double peak, double finesse, double phase);

/// Transmission versus round-trip phase for the given cavity.
std::vector<double> airy_scan(const CavityParams &p, std::span<const double> phase);

/// Round-trip phase produced by a mirror displacement: 4 pi dL / lambda.
double piezo_phase(double displacement, double wavelength);

/// c / (2 L).
double free_spectral_range(double l_optical);

/// Gaussian TEM00 radii of a plano-concave resonator. Throws
/// UnstableResonator unless 0 < L < R_c.
ModeWaists mode_waists(const CavityParams &p, double wavelength);

} // namespace nvcavity::cavity
