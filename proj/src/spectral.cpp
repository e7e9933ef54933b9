#include "neuroclean/spectral.hpp"

#include <cmath>
#include <numbers>

#include "neuroclean/error.hpp"
#include "neuroclean/fft.hpp"

namespace neuroclean::dsp {

namespace {

std::vector<double> make_window(Window w, std::size_t n) {
  std::vector<double> out(n, 1.0);
  if (w == Window::Hann) {
    // Periodic Hann, the usual choice for spectral averaging.
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                    static_cast<double>(n));
    }
  }
  return out;
}

}  // namespace

PsdEstimate welch_psd(std::span<const double> signal, double fs, const WelchOptions& options) {
  if (!(fs > 0.0)) throw Error(ErrorCode::InvalidArgument, "sampling rate must be positive");
  if (!(options.overlap_fraction >= 0.0 && options.overlap_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "overlap fraction must be in [0, 1)");
  }
  const std::size_t n = signal.size();
  std::size_t seg = options.segment_len;
  if (seg == 0) seg = std::min(static_cast<std::size_t>(std::llround(2.0 * fs)), n);
  if (seg < 2 || seg > n) {
    throw Error(ErrorCode::SignalTooShort, "signal shorter than the Welch segment");
  }
  const auto overlap = static_cast<std::size_t>(std::llround(options.overlap_fraction * seg));
  const std::size_t step = std::max<std::size_t>(1, seg - std::min(overlap, seg - 1));

  const auto window = make_window(options.window, seg);
  double window_power = 0.0;
  for (double w : window) window_power += w * w;

  const std::size_t n_bins = seg / 2 + 1;
  std::vector<double> acc(n_bins, 0.0);
  std::vector<double> buf(seg);
  std::vector<Complex> spec(n_bins);
  RealFftPlan plan(seg);
  std::size_t n_segments = 0;
  for (std::size_t start = 0; start + seg <= n; start += step) {
    double m = 0.0;
    if (options.detrend == Detrend::Constant) {
      for (std::size_t i = 0; i < seg; ++i) m += signal[start + i];
      m /= static_cast<double>(seg);
    }
    for (std::size_t i = 0; i < seg; ++i) buf[i] = (signal[start + i] - m) * window[i];
    plan.forward(buf, spec);
    for (std::size_t k = 0; k < n_bins; ++k) acc[k] += std::norm(spec[k]);
    ++n_segments;
  }

  PsdEstimate psd;
  psd.resolution_hz = fs / static_cast<double>(seg);
  psd.freqs_hz.resize(n_bins);
  psd.power.resize(n_bins);
  const double scale = 1.0 / (fs * window_power * static_cast<double>(n_segments));
  for (std::size_t k = 0; k < n_bins; ++k) {
    psd.freqs_hz[k] = bin_frequency(k, seg, fs);
    const bool unpaired = (k == 0) || (seg % 2 == 0 && k == n_bins - 1);
    psd.power[k] = acc[k] * scale * (unpaired ? 1.0 : 2.0);
  }
  return psd;
}

double band_power(const PsdEstimate& psd, double f_lo, double f_hi) {
  if (!(f_lo >= 0.0 && f_lo < f_hi)) throw Error(ErrorCode::InvalidArgument, "invalid band edges");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 1; k < psd.freqs_hz.size(); ++k) {
    const double f = psd.freqs_hz[k];
    if (f >= f_lo && f < f_hi) {
      sum += psd.power[k];
      ++count;
    }
  }
  if (count == 0) throw Error(ErrorCode::EmptyBand, "no PSD bins in band");
  return sum / static_cast<double>(count);
}

}  // namespace neuroclean::dsp
