#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "nvcavity/error.hpp"
#include "nvcavity/signal.hpp"
#include "nvcavity/spin.hpp"

namespace nvcavity::lockin {

/// Frequency-modulation and demodulation settings of the lock-in chain.
struct LockInConfig {
  double f_mod = 8.6e3;          ///< modulation / reference frequency (Hz)
  double f_dev = 4.5e6;          ///< microwave frequency deviation (Hz)
  double time_constant = 300e-6; ///< per-stage low-pass time constant (s)
  int poles = 4;                 ///< number of cascaded single-pole stages
  double ref_phase = 0.0;        ///< reference phase (rad)
  bool auto_phase = false;       ///< choose ref_phase that maximizes the dispersive slope
  int harmonic = 1;

  void validate() const;

  /// Single-pole -3 dB frequency 1/(2 pi tau).
  double stage_bandwidth() const;
};

/// Instantaneous microwave frequency f_c + f_dev cos(2 pi f_mod t) on a uniform
/// time grid. Throws Undersampled below 2 f_mod; warns below 10 f_mod.
std::vector<double> fm_waveform(const LockInConfig &cfg, double f_center,
                                std::span<const double> t, Warnings *warnings = nullptr);

/// |H(f)| = (1 + (2 pi f tau)^2)^(-poles/2).
double filter_response(const LockInConfig &cfg, double f);

/// Integral of |H|^2 over positive frequencies; 1/(4 tau) for a single pole.
double noise_equivalent_bandwidth(const LockInConfig &cfg);

/// Time after which the filter cascade has settled to ~1e-4 of a step:
/// 10 tau for one pole plus 2 tau per additional pole.
double settling_time(const LockInConfig &cfg);

/// Streaming demodulator. One instance owns one stream; the mixer uses the
/// amplitude convention so A cos(2 pi f_mod t + ref_phase) settles to A.
class LockInAmplifier {
public:
  LockInAmplifier(const LockInConfig &cfg, double sample_rate, double t0 = 0.0);

  double process(double sample);
  void reset();
  std::size_t samples_processed() const { return index_; }

private:
  LockInConfig cfg_;
  double rate_;
  double t0_;
  double alpha_;
  std::size_t index_ = 0;
  std::vector<double> stages_;
};

/// Runs a whole record through a fresh LockInAmplifier. Output keeps the input
/// sample rate. Throws Undersampled below 10 f_mod; warns when the record is
/// shorter than 10 time constants.
TimeSeries demodulate(const TimeSeries &signal, const LockInConfig &cfg,
                      Warnings *warnings = nullptr);

/// Block-average decimation by an integer factor (trailing partial block dropped).
TimeSeries decimate(const TimeSeries &signal, std::size_t factor);

/// Magnitude response of decimate() at frequency f for the given input rate.
double block_average_response(std::size_t factor, double input_rate, double f);

struct DispersiveOptions {
  int samples_per_period = 32;        ///< synthesis rate in units of f_mod
  double settle_time_constants = 30.0; ///< discarded lead-in, in units of tau
  int average_periods = 8;            ///< whole periods averaged for the output
  double probe = 0.0;                 ///< detuning step for phase optimization (0: f_dev/100)
};

/// Demodulated output versus detuning f_c - f_res.
struct DispersiveCurve {
  std::vector<double> detunings;
  std::vector<double> lockin_out;
  double slope_at_zero = 0.0; ///< output per Hz of detuning (central difference at zero)
  double ref_phase = 0.0;     ///< reference phase actually used
  Warnings warnings;
};

using Lineshape = std::function<double(double)>;

/// Steady-state lock-in output for a static lineshape probed around `f_center`.
double steady_state_output(const Lineshape &lineshape, double f_center, const LockInConfig &cfg,
                           const DispersiveOptions &opts = {});

/// Reference phase maximizing the slope at zero detuning: eight-point scan
/// followed by golden-section refinement.
double optimize_ref_phase(const Lineshape &lineshape, double f_res, const LockInConfig &cfg,
                          const DispersiveOptions &opts = {});

/// Quasi-static dispersive curve for an arbitrary lineshape centred at f_res.
DispersiveCurve dispersive_curve(const Lineshape &lineshape, double f_res,
                                 const LockInConfig &cfg, std::span<const double> detunings,
                                 const DispersiveOptions &opts = {});

/// Dispersive curve of one feature of an ODMR model (all four features are
/// synthesized; a warning is raised when neighbours enter the window).
DispersiveCurve dispersive_curve(const spin::OdmrModel &model, int peak_index,
                                 const LockInConfig &cfg, std::span<const double> detunings,
                                 DispersiveOptions opts = {});

/// Output-to-field conversion factor k = slope * gamma.
struct FieldConversion {
  double volts_per_tesla = 0.0;

  double to_tesla(double volts) const { return volts / volts_per_tesla; }
  double to_volts(double tesla) const { return tesla * volts_per_tesla; }
};

FieldConversion volts_to_tesla(double slope_at_zero, double gamma);

} // namespace nvcavity::lockin
