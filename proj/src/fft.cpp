#include "neuroclean/fft.hpp"

#include <algorithm>
#include <cstring>
#include <memory>
#include <mutex>

#include <fftw3.h>

#include "neuroclean/error.hpp"

namespace neuroclean::dsp {

namespace {

// FFTW's planner is not thread-safe; execution with fresh buffers is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <typename T>
FftwBuffer<T> alloc(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * std::max<std::size_t>(n, 1)));
  if (p == nullptr) throw std::bad_alloc();
  return FftwBuffer<T>(p);
}

class Plan {
 public:
  explicit Plan(fftw_plan p) : plan_(p) {
    if (plan_ == nullptr) throw Error(ErrorCode::InvalidArgument, "FFTW plan creation failed");
  }
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  void execute() const { fftw_execute(plan_); }

 private:
  fftw_plan plan_;
};

}  // namespace

struct RealFftPlan::Impl {
  FftwBuffer<double> in;
  FftwBuffer<fftw_complex> out;
  std::unique_ptr<Plan> plan;
};

RealFftPlan::RealFftPlan(std::size_t n) : n_(n), impl_(std::make_unique<Impl>()) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "FFT length must be positive");
  impl_->in = alloc<double>(n);
  impl_->out = alloc<fftw_complex>(n / 2 + 1);
  std::lock_guard lock(planner_mutex());
  impl_->plan = std::make_unique<Plan>(
      fftw_plan_dft_r2c_1d(static_cast<int>(n), impl_->in.get(), impl_->out.get(), FFTW_ESTIMATE));
}

RealFftPlan::~RealFftPlan() = default;
RealFftPlan::RealFftPlan(RealFftPlan&&) noexcept = default;
RealFftPlan& RealFftPlan::operator=(RealFftPlan&&) noexcept = default;

void RealFftPlan::forward(std::span<const double> in, std::span<Complex> out) {
  if (in.size() != n_ || out.size() != n_ / 2 + 1) {
    throw Error(ErrorCode::InvalidArgument, "buffer sizes do not match the FFT plan");
  }
  std::copy(in.begin(), in.end(), impl_->in.get());
  impl_->plan->execute();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = {impl_->out[k][0], impl_->out[k][1]};
}

std::vector<Complex> rfft(std::span<const double> signal) {
  const std::size_t n = signal.size();
  if (n == 0) return {};
  auto in = alloc<double>(n);
  auto out = alloc<fftw_complex>(n / 2 + 1);
  std::unique_ptr<Plan> plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = std::make_unique<Plan>(
        fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE));
  }
  std::copy(signal.begin(), signal.end(), in.get());
  plan->execute();
  std::vector<Complex> result(n / 2 + 1);
  for (std::size_t k = 0; k < result.size(); ++k) result[k] = {out[k][0], out[k][1]};
  return result;
}

std::vector<double> irfft(std::span<const Complex> spectrum, std::size_t n) {
  if (n == 0) return {};
  if (spectrum.size() != n / 2 + 1) {
    throw Error(ErrorCode::InvalidArgument, "irfft spectrum length must be n/2+1");
  }
  auto in = alloc<fftw_complex>(n / 2 + 1);
  auto out = alloc<double>(n);
  std::unique_ptr<Plan> plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = std::make_unique<Plan>(
        fftw_plan_dft_c2r_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE));
  }
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    in[k][0] = spectrum[k].real();
    in[k][1] = spectrum[k].imag();
  }
  plan->execute();
  std::vector<double> result(n);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t t = 0; t < n; ++t) result[t] = out[t] * scale;
  return result;
}

std::vector<Complex> fft(std::span<const Complex> signal) {
  const std::size_t n = signal.size();
  if (n == 0) return {};
  auto in = alloc<fftw_complex>(n);
  auto out = alloc<fftw_complex>(n);
  std::unique_ptr<Plan> plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = std::make_unique<Plan>(fftw_plan_dft_1d(static_cast<int>(n), in.get(), out.get(),
                                                   FFTW_FORWARD, FFTW_ESTIMATE));
  }
  for (std::size_t t = 0; t < n; ++t) {
    in[t][0] = signal[t].real();
    in[t][1] = signal[t].imag();
  }
  plan->execute();
  std::vector<Complex> result(n);
  for (std::size_t k = 0; k < n; ++k) result[k] = {out[k][0], out[k][1]};
  return result;
}

}  // namespace neuroclean::dsp
