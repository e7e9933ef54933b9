#include "doctest.h"

#include <cmath>
#include <random>

#include "neuroclean/error.hpp"
#include "neuroclean/fft.hpp"
#include "neuroclean/spectral.hpp"
#include "neuroclean/zapline.hpp"
#include "test_util.hpp"

using namespace neuroclean;
using namespace neuroclean::zapline;

namespace {

constexpr double kFs = 1000.0;

// Spatially white pink background plus an optional 60 Hz source with a fixed
// spatial pattern. `line_ratio` is line power over background power, per
// channel on average.
Recording line_scene(int channels, std::size_t n, std::uint64_t seed, double line_ratio,
                     int n_patterns = 1) {
  std::vector<std::vector<double>> rows;
  for (int c = 0; c < channels; ++c) rows.push_back(testutil::pink(n, seed * 100 + static_cast<std::uint64_t>(c)));
  Matrix x = testutil::rows_of(rows);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int p = 0; p < n_patterns; ++p) {
    Eigen::VectorXd pattern(channels);
    for (int c = 0; c < channels; ++c) pattern(c) = g(rng);
    // Unit mean-square pattern, sinusoid of power 1/2 rescaled to line_ratio.
    pattern *= std::sqrt(static_cast<double>(channels)) / pattern.norm();
    const double phase = 0.3 + 1.1 * p;
    for (std::size_t t = 0; t < n; ++t) {
      const double s = std::sqrt(2.0 * line_ratio / n_patterns) *
                       std::sin(2.0 * std::numbers::pi * 60.0 * static_cast<double>(t) / kFs + phase);
      x.col(static_cast<Eigen::Index>(t)) += pattern * s;
    }
  }
  auto r = Recording::from_data(x, kFs);
  r.line_freq_hz = 60.0;
  return r;
}

double band_db(const Recording& r, double lo, double hi) {
  return 10.0 * std::log10(mean_band_power(r, lo, hi));
}

}  // namespace

TEST_CASE("split_branches: a pure 60 Hz sinusoid goes entirely to the line branch") {
  const std::size_t n = 4000;
  auto r = Recording::from_data(testutil::rows_of({testutil::sinusoid(n, kFs, 60.0, 5.0),
                                                    testutil::sinusoid(n, kFs, 60.0, 2.0, 1.0)}),
                                kFs);
  const auto b = split_branches(r, ZaplineConfig{});
  CHECK(b.clean.cwiseAbs().maxCoeff() < 1e-9);
  CHECK((b.line - r.data).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("split_branches: the branches add back to the input") {
  const auto r = line_scene(4, 3000, 3, 1.0);
  const auto b = split_branches(r, ZaplineConfig{});
  CHECK(((b.clean + b.line) - r.data).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("split_branches: noise with empty line bins leaves almost nothing in the line branch") {
  const std::size_t n = 5000;
  ZaplineConfig cfg;
  // Oracle: build the signal directly in the frequency domain with every bin
  // within 5.5 Hz of a harmonic set to zero.
  auto spec = dsp::rfft(testutil::gaussian(n, 9));
  for (std::size_t k = 1; k < spec.size(); ++k) {
    const double f = dsp::bin_frequency(k, n, kFs);
    spec[k] /= std::sqrt(f);
    for (double h = 60.0; h < kFs / 2; h += 60.0) {
      if (std::abs(f - h) <= 5.5) spec[k] = 0.0;
    }
  }
  spec[0] = 0.0;
  const auto x = dsp::irfft(spec, n);
  const auto r = Recording::from_data(testutil::rows_of({x}), kFs);
  const auto b = split_branches(r, cfg);
  CHECK(b.line.squaredNorm() <= 0.02 * r.data.squaredNorm());
}

TEST_CASE("split_branches needs two seconds of data") {
  const auto r = Recording::from_data(testutil::rows_of({testutil::gaussian(1999, 1)}), kFs);
  try {
    split_branches(r, ZaplineConfig{});
    FAIL("expected TooShort");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooShort);
  }
}

TEST_CASE("dss: one line pattern gives one dominant eigenvalue") {
  const auto r = line_scene(8, 10000, 4, 1.0);
  const auto b = split_branches(r, ZaplineConfig{});
  const auto d = dss_line_components(b.line, r.channel_mask, kFs, ZaplineConfig{});
  REQUIRE(d.eigenvalues.size() == 8);
  CHECK(d.eigenvalues(0) > 10.0 * d.eigenvalues(1));
  for (Eigen::Index i = 1; i < 8; ++i) CHECK(d.eigenvalues(i - 1) >= d.eigenvalues(i));
  for (Eigen::Index i = 0; i < 8; ++i) CHECK(d.filters.col(i).norm() == doctest::Approx(1.0));
  CHECK(auto_n_remove(d.eigenvalues) == 1);
}

TEST_CASE("dss: spatially white noise has a flat eigenvalue spectrum") {
  const auto r = line_scene(8, 150000, 5, 0.0, 0);
  const auto b = split_branches(r, ZaplineConfig{});
  const auto d = dss_line_components(b.line, r.channel_mask, kFs, ZaplineConfig{});
  const double m = d.eigenvalues.mean();
  for (Eigen::Index i = 0; i < d.eigenvalues.size(); ++i) {
    CHECK(d.eigenvalues(i) == doctest::Approx(m).epsilon(0.2));
  }
  CHECK(auto_n_remove(d.eigenvalues) == 0);
}

TEST_CASE("dss: two independent line patterns give exactly two dominant eigenvalues") {
  const auto r = line_scene(8, 10000, 6, 1.0, 2);
  const auto b = split_branches(r, ZaplineConfig{});
  const auto d = dss_line_components(b.line, r.channel_mask, kFs, ZaplineConfig{});
  CHECK(d.eigenvalues(1) > 10.0 * d.eigenvalues(2));
  CHECK(auto_n_remove(d.eigenvalues) == 2);
}

TEST_CASE("apply_zapline: 0 dB rank-1 line is removed without touching 1-40 Hz") {
  const auto r = line_scene(8, 30000, 7, 1.0);
  const auto [out, report] = apply_zapline(r, ZaplineConfig{});
  CHECK(report.details.at("n_remove") == 1);
  const double reduction = band_db(r, 59.0, 61.0) - band_db(out, 59.0, 61.0);
  CHECK(reduction >= 20.0);
  CHECK(std::abs(band_db(r, 1.0, 40.0) - band_db(out, 1.0, 40.0)) < 1.0);
  CHECK(out.data.squaredNorm() <= r.data.squaredNorm());
}

TEST_CASE("apply_zapline: off-band bins are untouched and the removed power sits in the notches") {
  const std::size_t n = 20000;
  auto r = line_scene(6, n, 8, 1.0);
  r = r.with_channels_zeroed({2});
  const auto [out, report] = apply_zapline(r, ZaplineConfig{});
  CHECK(out.data.row(2).isZero(0.0));
  CHECK(out.channel_mask == r.channel_mask);

  auto in_notch = [](double f, double margin) {
    for (double h = 60.0; h < kFs / 2; h += 60.0) {
      if (std::abs(f - h) <= 5.0 + margin) return true;
    }
    return false;
  };
  double removed_total = 0.0, removed_in_notch = 0.0;
  for (int c : r.active_channels()) {
    const auto x = testutil::row_vec(r.data, c);
    const auto y = testutil::row_vec(out.data, c);
    const auto a = dsp::rfft(x);
    const auto b = dsp::rfft(y);
    for (std::size_t k = 1; k < a.size(); ++k) {
      const double diff = std::norm(a[k]) - std::norm(b[k]);
      removed_total += diff;
      if (in_notch(dsp::bin_frequency(k, n, kFs), 1.5 * kFs / n)) {
        removed_in_notch += diff;
      } else {
        CHECK(std::norm(b[k]) / std::norm(a[k]) == doctest::Approx(1.0).epsilon(0.1));
      }
    }
    // PSD transparency outside the notches, beyond the Hann main lobe.
    const auto pa = dsp::welch_psd(x, kFs);
    const auto pb = dsp::welch_psd(y, kFs);
    const double lobe = 2.0 * kFs / static_cast<double>(2.0 * kFs);
    for (std::size_t k = 1; k < pa.freqs_hz.size(); ++k) {
      if (in_notch(pa.freqs_hz[k], lobe)) continue;
      CHECK(pb.power[k] / pa.power[k] == doctest::Approx(1.0).epsilon(0.1));
    }
  }
  CHECK(removed_total > 0.0);
  CHECK(removed_in_notch >= 0.9 * removed_total);
}

TEST_CASE("apply_zapline: no transient at the recording edges") {
  // Pink background does not wrap around smoothly, which a purely circular
  // notch would turn into ringing at both ends.
  const std::size_t n = 20000;
  const auto r = line_scene(6, n, 12, 1.0);
  const auto [out, report] = apply_zapline(r, ZaplineConfig{});
  const Matrix removed = r.data - out.data;
  const auto edge = static_cast<Eigen::Index>(0.2 * kFs);
  const double head = testutil::rms(removed.leftCols(edge));
  const double tail = testutil::rms(removed.rightCols(edge));
  const double middle = testutil::rms(removed.middleCols(edge, static_cast<Eigen::Index>(n) - 2 * edge));
  CHECK(head < 1.5 * middle);
  CHECK(tail < 1.5 * middle);
}

TEST_CASE("apply_zapline: no line component and automatic selection leaves the input") {
  const auto r = line_scene(8, 20000, 10, 0.0, 0);
  const auto [out, report] = apply_zapline(r, ZaplineConfig{});
  const double rel = std::sqrt((out.data - r.data).squaredNorm() / r.data.squaredNorm());
  CHECK(rel < 1e-3);
}

TEST_CASE("apply_zapline: n_remove = 0 is the identity") {
  const auto r = line_scene(4, 5000, 11, 1.0);
  ZaplineConfig cfg;
  cfg.n_remove = 0;
  const auto [out, report] = apply_zapline(r, cfg);
  CHECK(out == r);
}

TEST_CASE("apply_zapline on 50 Hz mains") {
  const std::size_t n = 10000;
  Matrix x(4, static_cast<Eigen::Index>(n));
  for (int c = 0; c < 4; ++c) {
    const auto bg = testutil::pink(n, 40 + static_cast<std::uint64_t>(c));
    const auto line = testutil::sinusoid(n, kFs, 50.0, 1.0 + c);
    for (std::size_t t = 0; t < n; ++t) x(c, static_cast<Eigen::Index>(t)) = bg[t] + line[t];
  }
  auto r = Recording::from_data(x, kFs);
  ZaplineConfig cfg;
  cfg.line_freq_hz = 50.0;
  const auto [out, report] = apply_zapline(r, cfg);
  CHECK(band_db(r, 49.0, 51.0) - band_db(out, 49.0, 51.0) >= 20.0);
  cfg.line_freq_hz = 55.0;
  CHECK_THROWS_AS(apply_zapline(r, cfg), Error);
}
