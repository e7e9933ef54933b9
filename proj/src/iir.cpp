#include "neuroclean/iir.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "neuroclean/error.hpp"

namespace neuroclean::dsp {

namespace {

using cd = std::complex<double>;

// Analog Butterworth prototype poles on the unit circle, left half plane.
std::vector<cd> prototype_poles(int order) {
  std::vector<cd> poles;
  for (int m = -order + 1; m < order; m += 2) {
    poles.push_back(-std::exp(cd(0.0, std::numbers::pi * m / (2.0 * order))));
  }
  return poles;
}

double prewarp(double f, double fs) { return 2.0 * fs * std::tan(std::numbers::pi * f / fs); }

Biquad section_from_poles(cd p1, std::optional<cd> p2, FilterKind kind) {
  Biquad s;
  if (p2) {
    const cd sum = p1 + *p2;
    const cd prod = p1 * *p2;
    s.a1 = -sum.real();
    s.a2 = prod.real();
    switch (kind) {
      case FilterKind::Lowpass: s.b0 = 1.0; s.b1 = 2.0; s.b2 = 1.0; break;
      case FilterKind::Highpass: s.b0 = 1.0; s.b1 = -2.0; s.b2 = 1.0; break;
      case FilterKind::Bandpass: s.b0 = 1.0; s.b1 = 0.0; s.b2 = -1.0; break;
    }
  } else {
    s.a1 = -p1.real();
    s.a2 = 0.0;
    s.b0 = 1.0;
    s.b1 = kind == FilterKind::Lowpass ? 1.0 : -1.0;
    s.b2 = 0.0;
  }
  return s;
}

cd section_response(const Biquad& s, cd zinv) {
  const cd num = s.b0 + zinv * (s.b1 + zinv * s.b2);
  const cd den = 1.0 + zinv * (s.a1 + zinv * s.a2);
  return num / den;
}

void run_section(const Biquad& s, std::vector<double>& x, double z1, double z2) {
  for (double& v : x) {
    const double in = v;
    const double y = s.b0 * in + z1;
    z1 = s.b1 * in - s.a1 * y + z2;
    z2 = s.b2 * in - s.a2 * y;
    v = y;
  }
}

// Steady-state DF2T state of one section for a unit step input.
std::pair<double, double> step_state(const Biquad& s) {
  const double gain = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
  const double z2 = s.b2 - s.a2 * gain;
  const double z1 = s.b1 - s.a1 * gain + z2;
  return {z1, z2};
}

void run_cascade(const IirFilter& f, std::vector<double>& x, bool steady_start) {
  double level = steady_start && !x.empty() ? x.front() : 0.0;
  for (const auto& s : f.sections) {
    auto [z1, z2] = step_state(s);
    run_section(s, x, z1 * level, z2 * level);
    level *= (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
  }
}

}  // namespace

int IirFilter::order() const {
  return kind == FilterKind::Bandpass ? 2 * prototype_order : prototype_order;
}

IirFilter design_butterworth(int order, std::optional<double> f_lo, std::optional<double> f_hi,
                             double fs) {
  if (order < 1) throw Error(ErrorCode::InvalidArgument, "filter order must be >= 1");
  if (!(fs > 0.0)) throw Error(ErrorCode::InvalidArgument, "sampling rate must be positive");
  if (!f_lo && !f_hi) throw Error(ErrorCode::InvalidCutoff, "at least one cutoff is required");
  const double nyq = fs / 2.0;
  for (const auto& f : {f_lo, f_hi}) {
    if (f && !(*f > 0.0 && *f < nyq)) {
      throw Error(ErrorCode::InvalidCutoff, "cutoff must lie strictly inside (0, fs/2)");
    }
  }
  if (f_lo && f_hi && !(*f_lo < *f_hi)) {
    throw Error(ErrorCode::InvalidCutoff, "lower cutoff must be below upper cutoff");
  }

  IirFilter filter;
  filter.prototype_order = order;
  filter.f_lo_hz = f_lo;
  filter.f_hi_hz = f_hi;
  filter.fs = fs;
  filter.kind = (f_lo && f_hi) ? FilterKind::Bandpass
                               : (f_lo ? FilterKind::Highpass : FilterKind::Lowpass);

  // Analog poles after the frequency transformation.
  std::vector<cd> analog;
  const auto proto = prototype_poles(order);
  switch (filter.kind) {
    case FilterKind::Lowpass: {
      const double wc = prewarp(*f_hi, fs);
      for (cd p : proto) analog.push_back(p * wc);
      break;
    }
    case FilterKind::Highpass: {
      const double wc = prewarp(*f_lo, fs);
      for (cd p : proto) analog.push_back(wc / p);
      break;
    }
    case FilterKind::Bandpass: {
      const double w1 = prewarp(*f_lo, fs);
      const double w2 = prewarp(*f_hi, fs);
      const double bw = w2 - w1;
      const double w0sq = w1 * w2;
      for (cd p : proto) {
        const cd half = p * bw / 2.0;
        const cd root = std::sqrt(half * half - w0sq);
        analog.push_back(half + root);
        analog.push_back(half - root);
      }
      break;
    }
  }

  // Bilinear map, then split into conjugate pairs and real poles.
  const double fs2 = 2.0 * fs;
  std::vector<cd> complex_upper;
  std::vector<double> reals;
  for (cd p : analog) {
    const cd z = (fs2 + p) / (fs2 - p);
    if (std::abs(z.imag()) <= 1e-12 * std::max(1.0, std::abs(z))) {
      reals.push_back(z.real());
    } else if (z.imag() > 0.0) {
      complex_upper.push_back(z);
    }
  }
  std::sort(reals.begin(), reals.end());

  struct Pending {
    cd p1;
    std::optional<cd> p2;
    double radius;
  };
  std::vector<Pending> pending;
  for (cd z : complex_upper) pending.push_back({z, std::conj(z), std::abs(z)});
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) {
    pending.push_back({reals[i], cd(reals[i + 1]), std::max(std::abs(reals[i]), std::abs(reals[i + 1]))});
  }
  if (reals.size() % 2 == 1) pending.push_back({reals.back(), std::nullopt, std::abs(reals.back())});

  // Poles closest to the unit circle last.
  std::stable_sort(pending.begin(), pending.end(),
                   [](const Pending& a, const Pending& b) { return a.radius < b.radius; });
  for (const auto& p : pending) filter.sections.push_back(section_from_poles(p.p1, p.p2, filter.kind));

  // Unit gain in the passband reference point, spread evenly over sections.
  double ref_f = 0.0;
  switch (filter.kind) {
    case FilterKind::Lowpass: ref_f = 0.0; break;
    case FilterKind::Highpass: ref_f = nyq; break;
    case FilterKind::Bandpass: {
      const double w0 = std::sqrt(prewarp(*f_lo, fs) * prewarp(*f_hi, fs));
      ref_f = fs / std::numbers::pi * std::atan(w0 / fs2);
      break;
    }
  }
  const double g = std::abs(frequency_response(filter, ref_f));
  const double per_section = std::pow(g, -1.0 / static_cast<double>(filter.sections.size()));
  for (auto& s : filter.sections) {
    s.b0 *= per_section;
    s.b1 *= per_section;
    s.b2 *= per_section;
  }
  return filter;
}

std::complex<double> frequency_response(const IirFilter& filter, double f_hz) {
  const double w = 2.0 * std::numbers::pi * f_hz / filter.fs;
  const cd zinv = std::exp(cd(0.0, -w));
  cd h = 1.0;
  for (const auto& s : filter.sections) h *= section_response(s, zinv);
  return h;
}

double magnitude_db(const IirFilter& filter, double f_hz) {
  return 20.0 * std::log10(std::abs(frequency_response(filter, f_hz)));
}

double max_pole_radius(const IirFilter& filter) {
  double r = 0.0;
  for (const auto& s : filter.sections) {
    // Roots of z^2 + a1 z + a2.
    const cd disc = std::sqrt(cd(s.a1 * s.a1 - 4.0 * s.a2));
    r = std::max({r, std::abs((-s.a1 + disc) / 2.0), std::abs((-s.a1 - disc) / 2.0)});
  }
  return r;
}

std::vector<double> sosfilt(const IirFilter& filter, std::span<const double> signal) {
  std::vector<double> x(signal.begin(), signal.end());
  run_cascade(filter, x, false);
  return x;
}

std::vector<double> filtfilt(const IirFilter& filter, std::span<const double> signal) {
  const std::size_t n = signal.size();
  const auto pad = static_cast<std::size_t>(3 * filter.order());
  if (n <= pad) throw Error(ErrorCode::SignalTooShort, "signal too short for filtfilt padding");

  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  const double first = signal.front();
  const double last = signal.back();
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * first - signal[i]);
  ext.insert(ext.end(), signal.begin(), signal.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * last - signal[n - 1 - i]);

  run_cascade(filter, ext, true);
  std::reverse(ext.begin(), ext.end());
  run_cascade(filter, ext, true);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
          ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

Recording filtfilt(const IirFilter& filter, const Recording& recording) {
  Recording out = recording;
  std::vector<double> row(static_cast<std::size_t>(recording.n_samples()));
  for (int c : recording.active_channels()) {
    Eigen::Map<Eigen::RowVectorXd>(row.data(), recording.n_samples()) = recording.data.row(c);
    const auto y = filtfilt(filter, row);
    out.data.row(c) = Eigen::Map<const Eigen::RowVectorXd>(y.data(), recording.n_samples());
  }
  return out;
}

}  // namespace neuroclean::dsp
