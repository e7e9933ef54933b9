#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "neuroclean/error.hpp"
#include "neuroclean/fft.hpp"
#include "neuroclean/iir.hpp"
#include "neuroclean/spectral.hpp"
#include "neuroclean/stats.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace neuroclean;
using namespace neuroclean::dsp;
using oracle::analytic_magnitude;

namespace {

double lag_of_peak_xcorr(const std::vector<double>& a, const std::vector<double>& b, int max_lag) {
  double best = -1e300;
  int best_lag = 0;
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    double acc = 0.0;
    for (int i = 0; i < static_cast<int>(a.size()); ++i) {
      const int j = i + lag;
      if (j >= 0 && j < static_cast<int>(b.size())) acc += a[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(j)];
    }
    if (acc > best) {
      best = acc;
      best_lag = lag;
    }
  }
  return best_lag;
}

}  // namespace

TEST_CASE("FFT matches the direct DFT for every n <= 64") {
  double worst = 0.0;
  for (std::size_t n = 1; n <= 64; ++n) {
    const auto x = testutil::gaussian(n, 100 + n);
    const auto ref = testutil::direct_dft(x);
    const auto got = rfft(x);
    REQUIRE(got.size() == n / 2 + 1);
    for (std::size_t k = 0; k < got.size(); ++k) worst = std::max(worst, std::abs(got[k] - ref[k]));

    std::vector<Complex> cx(x.begin(), x.end());
    const auto full = fft(cx);
    for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(full[k] - ref[k]));

    const auto back = irfft(got, n);
    for (std::size_t t = 0; t < n; ++t) worst = std::max(worst, std::abs(back[t] - x[t]));

    RealFftPlan plan(n);
    std::vector<Complex> out(n / 2 + 1);
    plan.forward(x, out);
    for (std::size_t k = 0; k < out.size(); ++k) worst = std::max(worst, std::abs(out[k] - got[k]));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("welch: constant signal puts all power in the DC bin when not detrended") {
  std::vector<double> x(1000, 3.0);
  WelchOptions opt;
  opt.detrend = Detrend::None;
  const auto psd = welch_psd(x, 250.0, opt);
  CHECK(psd.power[0] > 1.0);
  for (std::size_t k = 2; k < psd.power.size(); ++k) CHECK(psd.power[k] < 1e-20);
  // With the default mean removal nothing is left.
  const auto detrended = welch_psd(x, 250.0);
  CHECK(*std::max_element(detrended.power.begin(), detrended.power.end()) < 1e-20);
}

TEST_CASE("welch: 10 Hz sinusoid peaks at 10 Hz, matching a direct DFT of one segment") {
  const double fs = 250.0;
  const auto x = testutil::sinusoid(1000, fs, 10.0);
  const auto psd = welch_psd(x, fs);
  CHECK(psd.resolution_hz == doctest::Approx(0.5));
  const auto peak = std::max_element(psd.power.begin(), psd.power.end()) - psd.power.begin();
  CHECK(psd.freqs_hz[static_cast<std::size_t>(peak)] == doctest::Approx(10.0));

  // Oracle: Hann-windowed direct DFT of the first segment, same density scaling.
  const std::size_t seg = 500;
  std::vector<double> w(seg), xw(seg);
  double wp = 0.0;
  double m = 0.0;
  for (std::size_t i = 0; i < seg; ++i) m += x[i];
  m /= seg;
  for (std::size_t i = 0; i < seg; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / seg);
    wp += w[i] * w[i];
    xw[i] = (x[i] - m) * w[i];
  }
  const auto ref = testutil::direct_dft(xw);
  const double expected_peak = 2.0 * std::norm(ref[20]) / (fs * wp);
  // Stationary sinusoid with an integer number of cycles per segment: every
  // segment has the same periodogram, so the average equals one segment.
  CHECK(psd.power[20] == doctest::Approx(expected_peak).epsilon(1e-9));
}

TEST_CASE("welch: white noise integrates to its variance") {
  const double fs = 500.0;
  const auto x = testutil::gaussian(200000, 7);
  const auto psd = welch_psd(x, fs);
  const double total = std::accumulate(psd.power.begin(), psd.power.end(), 0.0) * psd.resolution_hz;
  CHECK(total == doctest::Approx(1.0).epsilon(0.05));
  CHECK(psd.freqs_hz.front() == 0.0);
  CHECK(psd.freqs_hz.back() == doctest::Approx(fs / 2));
  CHECK(std::all_of(psd.power.begin(), psd.power.end(), [](double p) { return p >= 0.0; }));
}

TEST_CASE("welch: repeating one segment gives the single-segment periodogram") {
  const auto base = testutil::gaussian(256, 11);
  std::vector<double> rep;
  for (int i = 0; i < 6; ++i) rep.insert(rep.end(), base.begin(), base.end());
  WelchOptions opt;
  opt.segment_len = 256;
  opt.overlap_fraction = 0.0;
  const auto single = welch_psd(base, 100.0, opt);
  const auto many = welch_psd(rep, 100.0, opt);
  for (std::size_t k = 0; k < single.power.size(); ++k) {
    CHECK(many.power[k] == doctest::Approx(single.power[k]).epsilon(1e-12));
  }
}

TEST_CASE("welch error paths") {
  const auto x = testutil::gaussian(10, 1);
  WelchOptions opt;
  opt.segment_len = 20;
  CHECK_THROWS_AS(welch_psd(x, 100.0, opt), Error);
  opt.segment_len = 8;
  opt.overlap_fraction = 1.0;
  CHECK_THROWS_AS(welch_psd(x, 100.0, opt), Error);
}

TEST_CASE("band_power") {
  PsdEstimate flat;
  flat.resolution_hz = 1.0;
  for (int k = 0; k <= 50; ++k) {
    flat.freqs_hz.push_back(k);
    flat.power.push_back(4.0);
  }
  CHECK(band_power(flat, 8.0, 13.0) == doctest::Approx(4.0));
  CHECK(band_power(flat, 30.0, 40.0) == doctest::Approx(4.0));
  try {
    band_power(flat, 0.0, 0.5);
    FAIL("expected EmptyBand");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyBand);
  }

  const auto x = testutil::sinusoid(2500, 250.0, 10.0);
  const auto psd = welch_psd(x, 250.0);
  CHECK(band_power(psd, 8.0, 13.0) > 1e6 * band_power(psd, 30.0, 40.0));
}

TEST_CASE("butterworth bandpass 1-100 Hz matches the analytic magnitude") {
  const auto f = design_butterworth(4, 1.0, 100.0, 1000.0);
  CHECK(f.order() == 8);
  CHECK(max_pole_radius(f) < 1.0);
  CHECK(magnitude_db(f, 1.0) == doctest::Approx(-3.0103).epsilon(0.2 / 3.0));
  CHECK(magnitude_db(f, 100.0) == doctest::Approx(-3.0103).epsilon(0.2 / 3.0));
  const double mid = std::sqrt(1.0 * 100.0);
  CHECK(std::abs(magnitude_db(f, mid)) < 0.1);
  for (double fr : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 100.0, 150.0, 300.0, 450.0}) {
    const double expected = analytic_magnitude(4, 1.0, 100.0, 1000.0, fr);
    CHECK(std::abs(frequency_response(f, fr)) == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("butterworth highpass and lowpass designs") {
  const auto hp = design_butterworth(4, 1.0, std::nullopt, 1000.0);
  CHECK(hp.kind == FilterKind::Highpass);
  CHECK(std::abs(frequency_response(hp, 0.0)) < 1e-12);
  CHECK(magnitude_db(hp, 1.0) == doctest::Approx(-3.0103).epsilon(0.01));
  const auto lp = design_butterworth(5, std::nullopt, 40.0, 250.0);
  CHECK(lp.order() == 5);
  CHECK(magnitude_db(lp, 40.0) == doctest::Approx(-3.0103).epsilon(0.01));
  CHECK(std::abs(frequency_response(lp, 0.0)) == doctest::Approx(1.0));
  for (double fr : {1.0, 20.0, 39.0, 60.0, 100.0}) {
    CHECK(std::abs(frequency_response(lp, fr)) ==
          doctest::Approx(analytic_magnitude(5, std::nullopt, 40.0, 250.0, fr)).epsilon(1e-6));
  }
  // Odd-order bandpass exercises real pole pairs.
  const auto bp3 = design_butterworth(3, 4.0, 7.0, 250.0);
  for (double fr : {2.0, 4.0, 5.3, 7.0, 12.0}) {
    CHECK(std::abs(frequency_response(bp3, fr)) ==
          doctest::Approx(analytic_magnitude(3, 4.0, 7.0, 250.0, fr)).epsilon(1e-6));
  }
}

TEST_CASE("butterworth passband is monotone on each side of the centre") {
  const auto f = design_butterworth(4, 8.0, 15.0, 500.0);
  const double centre = std::sqrt(8.0 * 15.0);
  double prev = 0.0;
  for (double fr = 0.5; fr <= centre; fr += 0.25) {
    const double m = std::abs(frequency_response(f, fr));
    CHECK(m >= prev - 1e-12);
    prev = m;
  }
  prev = 2.0;
  for (double fr = centre; fr < 250.0; fr += 0.5) {
    const double m = std::abs(frequency_response(f, fr));
    CHECK(m <= prev + 1e-12);
    prev = m;
  }
}

TEST_CASE("butterworth rejects cutoffs outside (0, fs/2)") {
  for (auto [lo, hi] : std::vector<std::pair<std::optional<double>, std::optional<double>>>{
           {0.0, 10.0}, {1.0, 500.0}, {1.0, 600.0}, {20.0, 10.0}, {std::nullopt, std::nullopt}}) {
    try {
      design_butterworth(4, lo, hi, 1000.0);
      FAIL("expected InvalidCutoff");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidCutoff);
    }
  }
}

TEST_CASE("filtfilt basic examples") {
  const double fs = 1000.0;
  const auto f = design_butterworth(4, 1.0, 100.0, fs);
  std::vector<double> zeros(2000, 0.0);
  for (double v : filtfilt(f, zeros)) CHECK(v == 0.0);

  std::vector<double> dc(5000, 7.0);
  const auto dc_out = filtfilt(f, dc);
  double worst = 0.0;
  for (double v : dc_out) worst = std::max(worst, std::abs(v));
  CHECK(worst < 1e-6);

  const auto s = testutil::sinusoid(10000, fs, 10.0);
  const auto y = filtfilt(f, s);
  const double gain = std::pow(analytic_magnitude(4, 1.0, 100.0, fs, 10.0), 2);
  double peak = 0.0;
  for (std::size_t i = 2000; i < 8000; ++i) peak = std::max(peak, std::abs(y[i]));
  CHECK(gain == doctest::Approx(1.0).epsilon(0.001));
  CHECK(peak == doctest::Approx(1.0).epsilon(0.01));

  CHECK_THROWS_AS(filtfilt(f, std::vector<double>(24, 1.0)), Error);
  CHECK_NOTHROW(filtfilt(f, std::vector<double>(25, 1.0)));
}

TEST_CASE("filtfilt applies |H|^2 and has zero phase") {
  const double fs = 500.0;
  const auto f = design_butterworth(4, 5.0, 40.0, fs);
  for (double fr : {3.0, 5.0, 12.0, 40.0, 60.0}) {
    const auto s = testutil::sinusoid(20000, fs, fr);
    const auto y = filtfilt(f, s);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 5000; i < 15000; ++i) {
      num += y[i] * s[i];
      den += s[i] * s[i];
    }
    CHECK(num / den == doctest::Approx(std::norm(frequency_response(f, fr))).epsilon(0.01));
  }

  // Band-limited pulse: a windowed 15 Hz burst.
  std::vector<double> pulse(4000, 0.0);
  for (int i = -200; i <= 200; ++i) {
    const double t = i / fs;
    pulse[static_cast<std::size_t>(2000 + i)] =
        std::exp(-t * t / (2 * 0.05 * 0.05)) * std::cos(2 * std::numbers::pi * 15.0 * t);
  }
  const auto y = filtfilt(f, pulse);
  CHECK(lag_of_peak_xcorr(pulse, y, 50) == 0);

  // Symmetric input gives symmetric output.
  for (std::size_t i = 0; i < 400; ++i) CHECK(y[2000 - i] == doctest::Approx(y[2000 + i]).epsilon(1e-6));
}

TEST_CASE("filtfilt is linear") {
  const auto f = design_butterworth(4, 1.0, 100.0, 1000.0);
  const auto x = testutil::gaussian(3000, 5);
  std::vector<double> scaled(x.size());
  std::transform(x.begin(), x.end(), scaled.begin(), [](double v) { return -3.5 * v; });
  const auto a = filtfilt(f, x);
  const auto b = filtfilt(f, scaled);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(b[i] == doctest::Approx(-3.5 * a[i]).epsilon(1e-9));
}

TEST_CASE("pearson") {
  const std::vector<double> x{1, 2, 3};
  std::vector<double> neg{-1, -2, -3};
  CHECK(pearson(x, x) == doctest::Approx(1.0));
  CHECK(pearson(x, neg) == doctest::Approx(-1.0));
  // Hand computation: sxy = 5, sxx = 2, syy = 38/3.
  CHECK(pearson(x, std::vector<double>{2, 4, 7}) == doctest::Approx(5.0 / std::sqrt(2.0 * 38.0 / 3.0)));
  CHECK(pearson(x, std::vector<double>{2, 4, 7}) == doctest::Approx(0.993399).epsilon(1e-6));
  CHECK(pearson(x, std::vector<double>{2, 4, 8}) == doctest::Approx(0.981981).epsilon(1e-6));
  try {
    pearson(x, std::vector<double>{5, 5, 5});
    FAIL("expected ConstantInput");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConstantInput);
  }
}

TEST_CASE("skewness") {
  CHECK(skewness(std::vector<double>{-1, 0, 1}) == doctest::Approx(0.0));
  CHECK(skewness(std::vector<double>{0, 0, 0, 10}) > 0.0);
  // m2 = 18.75, m3 = 93.75 for [0,0,0,10], i.e. 2/sqrt(3).
  CHECK(skewness(std::vector<double>{0, 0, 0, 10}) == doctest::Approx(93.75 / std::pow(18.75, 1.5)));
  std::mt19937_64 rng(2024);
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> e(100000);
  for (auto& v : e) v = expo(rng);
  CHECK(skewness(e) == doctest::Approx(2.0).epsilon(0.05));
  CHECK_THROWS_AS(skewness(std::vector<double>{4, 4, 4, 4}), Error);
}

TEST_CASE("order statistics") {
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({4, 1, 2, 3}) == 2.5);
  CHECK(percentile({1, 2, 3, 4, 5}, 75.0) == 4.0);
  CHECK(percentile({1, 2, 3, 4}, 75.0) == doctest::Approx(3.25));
  CHECK(mad(std::vector<double>{1, 1, 2, 2, 4, 6, 9}) == 1.0);
}
