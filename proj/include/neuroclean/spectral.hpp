#pragma once

#include <span>
#include <vector>

namespace neuroclean::dsp {

struct PsdEstimate {
  std::vector<double> freqs_hz;
  std::vector<double> power;  // one-sided density, units^2 / Hz
  double resolution_hz = 0.0;
};

enum class Window { Hann, Rectangular };
enum class Detrend { Constant, None };

struct WelchOptions {
  std::size_t segment_len = 0;  // 0 = min(2 * fs, n)
  double overlap_fraction = 0.5;
  Window window = Window::Hann;
  Detrend detrend = Detrend::Constant;
};

/// Averaged modified periodogram. Scaling is one-sided density so that
/// sum(power) * resolution approximates the signal variance.
PsdEstimate welch_psd(std::span<const double> signal, double fs, const WelchOptions& options = {});

/// Mean of the PSD bins with f_lo <= f < f_hi. The DC bin never belongs to a
/// band. Throws EmptyBand when no bin qualifies.
double band_power(const PsdEstimate& psd, double f_lo, double f_hi);

}  // namespace neuroclean::dsp
