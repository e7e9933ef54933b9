#pragma once

#include <complex>
#include <memory>
#include <span>
#include <vector>

namespace neuroclean::dsp {

using Complex = std::complex<double>;

/// Real-to-complex transform, returns the n/2 + 1 non-negative frequency bins
/// (unnormalized, X[k] = sum_t x[t] exp(-2 pi i k t / n)).
std::vector<Complex> rfft(std::span<const double> signal);

/// Inverse of rfft for a signal of length n, including the 1/n factor.
std::vector<double> irfft(std::span<const Complex> spectrum, std::size_t n);

/// Full complex forward transform (unnormalized).
std::vector<Complex> fft(std::span<const Complex> signal);

/// Reusable real-to-complex plan for a fixed length. Not safe to share
/// between threads.
class RealFftPlan {
 public:
  explicit RealFftPlan(std::size_t n);
  ~RealFftPlan();
  RealFftPlan(RealFftPlan&&) noexcept;
  RealFftPlan& operator=(RealFftPlan&&) noexcept;

  std::size_t size() const { return n_; }
  /// Writes n/2 + 1 bins into out.
  void forward(std::span<const double> in, std::span<Complex> out);

 private:
  struct Impl;
  std::size_t n_;
  std::unique_ptr<Impl> impl_;
};

/// Frequency of rfft bin k for a length-n signal.
inline double bin_frequency(std::size_t k, std::size_t n, double fs) {
  return static_cast<double>(k) * fs / static_cast<double>(n);
}

}  // namespace neuroclean::dsp
