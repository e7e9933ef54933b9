#pragma once

#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "neuroclean/recording.hpp"

namespace neuroclean::dsp {

/// Second-order section, a0 normalized to 1. First-order sections carry
/// b2 = a2 = 0.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

enum class FilterKind { Lowpass, Highpass, Bandpass };

struct IirFilter {
  std::vector<Biquad> sections;
  FilterKind kind = FilterKind::Bandpass;
  int prototype_order = 0;
  std::optional<double> f_lo_hz;
  std::optional<double> f_hi_hz;
  double fs = 0.0;

  /// Number of poles of the whole cascade.
  int order() const;
};

/// Digital Butterworth filter by bilinear transform with prewarped edges.
/// Both edges given: bandpass of prototype order `order` (the LP-to-BP
/// transform gives `order` poles per band edge). Only f_lo: highpass.
/// Only f_hi: lowpass. Edges must lie strictly inside (0, fs/2), otherwise
/// InvalidCutoff.
IirFilter design_butterworth(int order, std::optional<double> f_lo_hz,
                             std::optional<double> f_hi_hz, double fs);

std::complex<double> frequency_response(const IirFilter& filter, double f_hz);
double magnitude_db(const IirFilter& filter, double f_hz);

/// Largest pole modulus over all sections.
double max_pole_radius(const IirFilter& filter);

/// Single forward pass with zero initial state.
std::vector<double> sosfilt(const IirFilter& filter, std::span<const double> signal);

/// Forward-backward (zero-phase) filtering with odd reflection padding of
/// 3 * order samples and steady-state initial conditions. The effective
/// magnitude response is |H|^2. Throws SignalTooShort when the signal is not
/// longer than the padding.
std::vector<double> filtfilt(const IirFilter& filter, std::span<const double> signal);

/// filtfilt applied to every active channel; masked rows stay zero.
Recording filtfilt(const IirFilter& filter, const Recording& recording);

}  // namespace neuroclean::dsp
