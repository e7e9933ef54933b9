#include "doctest.h"

#include <cmath>
#include <numeric>
#include <functional>
#include <random>

#include "neuroclean/cluster_mara.hpp"
#include "neuroclean/error.hpp"
#include "neuroclean/iir.hpp"
#include "neuroclean/stats.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace neuroclean;
using namespace neuroclean::mara;
using oracle::dbscan_oracle;

namespace {

std::vector<double> unit_variance(std::vector<double> x) {
  double m = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double ss = 0.0;
  for (auto& v : x) {
    v -= m;
    ss += v * v;
  }
  const double s = std::sqrt(ss / static_cast<double>(x.size()));
  for (auto& v : x) v /= s;
  return x;
}

std::vector<double> brain_source(std::size_t n, double fs, double rhythm_hz, std::uint64_t seed) {
  auto x = testutil::pink(n, seed);
  if (rhythm_hz > 0.0) {
    const auto osc = testutil::sinusoid(n, fs, rhythm_hz, 1.0, 0.1 * static_cast<double>(seed));
    for (std::size_t i = 0; i < n; ++i) x[i] += osc[i];
  }
  return unit_variance(x);
}

std::vector<double> blink_source(std::size_t n, double fs, std::uint64_t seed) {
  std::vector<double> x(n, 0.0);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> at(0, n - 1);
  for (int b = 0; b < static_cast<int>(n / fs / 4); ++b) {
    const std::size_t t0 = at(rng);
    for (std::size_t t = t0; t < std::min(n, t0 + static_cast<std::size_t>(0.4 * fs)); ++t) {
      x[t] += 20.0 * std::exp(-static_cast<double>(t - t0) / (0.08 * fs));
    }
  }
  const auto line = testutil::sinusoid(n, fs, 60.0, 0.5);
  const auto bg = testutil::gaussian(n, seed + 1, 0.1);
  for (std::size_t i = 0; i < n; ++i) x[i] += line[i] + bg[i];
  return unit_variance(x);
}

struct Scene {
  Recording recording;
  ica::ComponentDecomposition dec;
  Matrix artifact_part;  // channel contribution of the artifact component
};

// Three families of four brain components plus an optional blink/line source.
Scene mara_scene(std::uint64_t seed, bool with_artifact) {
  const double fs = 250.0;
  const std::size_t n = static_cast<std::size_t>(60 * fs);
  std::vector<std::vector<double>> rows;
  const double rhythms[3] = {10.0, 0.0, 22.0};
  for (int f = 0; f < 3; ++f)
    for (int i = 0; i < 4; ++i) rows.push_back(brain_source(n, fs, rhythms[f], seed * 50 + static_cast<std::uint64_t>(f * 4 + i)));
  if (with_artifact) rows.push_back(blink_source(n, fs, seed));
  const auto k = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index m = 16;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix mixing(m, k);
  Eigen::VectorXd pattern(m);
  for (Eigen::Index c = 0; c < m; ++c) pattern(c) = g(rng);
  for (Eigen::Index j = 0; j < k; ++j) {
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(m));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (Eigen::Index c = 0; c < m; ++c) mixing(c, j) = pattern(perm[static_cast<std::size_t>(c)]);
  }

  Scene s;
  s.dec.sources = testutil::rows_of(rows);
  s.dec.mixing = mixing;
  s.dec.unmixing = mixing.completeOrthogonalDecomposition().pseudoInverse();
  s.dec.mean_vector = Eigen::VectorXd::Zero(m);
  s.dec.n_channels_total = static_cast<int>(m);
  s.dec.converged = true;
  for (int c = 0; c < m; ++c) s.dec.channel_index_map.push_back(c);
  s.recording = Recording::from_data(mixing * s.dec.sources, fs);
  s.artifact_part = Matrix::Zero(m, static_cast<Eigen::Index>(n));
  if (with_artifact) s.artifact_part = mixing.col(k - 1) * s.dec.sources.row(k - 1);
  return s;
}

}  // namespace

TEST_CASE("spatial range") {
  const std::vector<double> c{2, -2, 0};
  CHECK(feature_spatial_range(c) == doctest::Approx(std::log(4.0)));
  CHECK(feature_spatial_range(std::vector<double>{3, 3, 3}) == doctest::Approx(std::log(1e-12)));
  const std::vector<double> scaled{2 * std::exp(1.0), -2 * std::exp(1.0), 0};
  CHECK(feature_spatial_range(scaled) == doctest::Approx(std::log(4.0) + 1.0));
}

TEST_CASE("alpha power") {
  const double fs = 250.0;
  const auto a = feature_alpha_power(testutil::sinusoid(5000, fs, 10.0), fs);
  const auto b = feature_alpha_power(testutil::sinusoid(5000, fs, 40.0), fs);
  CHECK(a - b > 3.0);

  const auto white = testutil::gaussian(10000, 3);
  const auto bp = dsp::filtfilt(dsp::design_butterworth(4, 8.0, 13.0, fs), white);
  // Same alpha-band content but far less total power: the bandpassed copy is
  // rescaled to the white noise's variance before comparing.
  double vw = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < white.size(); ++i) {
    vw += white[i] * white[i];
    vb += bp[i] * bp[i];
  }
  std::vector<double> bp_scaled(bp.size());
  for (std::size_t i = 0; i < bp.size(); ++i) bp_scaled[i] = bp[i] * std::sqrt(vw / vb);
  CHECK(feature_alpha_power(bp_scaled, fs) > feature_alpha_power(white, fs));

  CHECK(feature_alpha_power(std::vector<double>(1000, 0.0), fs) == doctest::Approx(std::log(1e-12)));
}

TEST_CASE("1/f fit") {
  const double fs = 200.0;
  dsp::PsdEstimate psd;
  for (int k = 0; k <= 200; ++k) {
    psd.freqs_hz.push_back(0.5 * k);
    psd.power.push_back(k == 0 ? 0.0 : 3.0 / (0.5 * k));
  }
  const auto exact = feature_one_over_f_fit(psd, fs);
  CHECK(exact.lambda == doctest::Approx(1.0));
  CHECK(exact.fit_error < 1e-12);

  const auto white = feature_one_over_f_fit(testutil::gaussian(60000, 8), fs);
  CHECK(std::abs(white.lambda) < 0.1);

  auto pink = testutil::pink(20000, 5);
  const auto base = feature_one_over_f_fit(pink, fs);
  const auto peak = testutil::sinusoid(pink.size(), fs, 20.0, 0.5);
  for (std::size_t i = 0; i < pink.size(); ++i) pink[i] += peak[i];
  CHECK(feature_one_over_f_fit(pink, fs).fit_error > base.fit_error);
  CHECK(base.lambda == doctest::Approx(1.0).epsilon(0.15));

  dsp::PsdEstimate sparse{{0.0, 50.0}, {1.0, 1.0}, 50.0};
  CHECK_THROWS_AS(feature_one_over_f_fit(sparse, fs), Error);
  CHECK(fit_band_high_hz(1000.0) == 35.0);
  CHECK(fit_band_high_hz(60.0) == doctest::Approx(27.0));
}

TEST_CASE("local skewness") {
  const double fs = 100.0;
  CHECK(feature_local_skewness(testutil::gaussian(6000, 4), fs) < 0.1);

  std::vector<double> spikes(6000, 0.0);
  const auto bg = testutil::gaussian(6000, 5, 0.2);
  for (std::size_t i = 0; i < spikes.size(); ++i) spikes[i] = bg[i] + (i % 700 < 10 ? 8.0 : 0.0);
  CHECK(feature_local_skewness(spikes, fs) > 1.0);

  std::vector<double> neg(spikes.size());
  for (std::size_t i = 0; i < spikes.size(); ++i) neg[i] = -spikes[i];
  CHECK(feature_local_skewness(neg, fs) == doctest::Approx(feature_local_skewness(spikes, fs)));

  // Two full windows plus a 2-sample tail that is ignored.
  std::vector<double> w(3002, 0.0);
  for (std::size_t i = 0; i < 1500; ++i) w[i] = (i % 50 == 0) ? 5.0 : 0.0;
  const double first = std::abs(dsp::skewness(std::span<const double>(w.data(), 1500)));
  CHECK(feature_local_skewness(w, fs) == doctest::Approx(first / 2.0));
  // Shorter than a window: whole signal.
  const auto short_sig = testutil::gaussian(500, 6);
  CHECK(feature_local_skewness(short_sig, fs) == doctest::Approx(std::abs(dsp::skewness(short_sig))));
}

TEST_CASE("standardize_columns") {
  Matrix f(3, 2);
  f << 1, 5, 2, 5, 3, 5;
  const auto z = standardize_columns(f);
  CHECK(z.col(0).mean() == doctest::Approx(0.0));
  CHECK(std::sqrt(z.col(0).array().square().mean()) == doctest::Approx(1.0));
  CHECK(z.col(1).isZero(0.0));
}

TEST_CASE("dbscan examples") {
  Matrix p(4, 2);
  p << 0, 0, 0, 1, 1, 0, 10, 10;
  CHECK(dbscan(p, 2.0, 2) == std::vector<int>{0, 0, 0, -1});
  CHECK(dbscan(Matrix::Ones(5, 3), 2.0, 2) == std::vector<int>(5, 0));
  Matrix far(3, 1);
  far << 0, 10, 20;
  CHECK(dbscan(far, 2.0, 2) == std::vector<int>(3, -1));
  CHECK(dbscan(far, 2.0, 1) == std::vector<int>{0, 1, 2});
}

TEST_CASE("dbscan matches the reachability oracle on random instances") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<int> nn(1, 50), dd(1, 5), ms(1, 4);
    const int n = nn(rng), d = dd(rng), min_samples = ms(rng);
    std::uniform_real_distribution<double> eps_d(0.5, 3.0);
    const double eps = eps_d(rng);
    std::normal_distribution<double> g(0.0, 2.0);
    Matrix p(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) p(i, j) = g(rng);
    CAPTURE(trial);
    CHECK(dbscan(p, eps, min_samples) == dbscan_oracle(p, eps, min_samples));
  }
}

TEST_CASE("reject_components removes an injected blink/line component") {
  const auto s = mara_scene(1, true);
  const auto [out, report] = reject_components(s.recording, s.dec, PipelineConfig{});
  const auto labels = report.details.at("labels").get<std::vector<int>>();
  CHECK(labels.back() == -1);
  CHECK(std::find(report.rejected_component_indices.begin(), report.rejected_component_indices.end(), 12) !=
        report.rejected_component_indices.end());
  const Matrix clean = s.recording.data - s.artifact_part;
  const double before = s.artifact_part.squaredNorm();
  const double after = (out.data - clean).squaredNorm();
  CHECK(after < 0.1 * before);
}

TEST_CASE("reject_components with no outliers returns the input") {
  const auto s = mara_scene(2, false);
  const auto [out, report] = reject_components(s.recording, s.dec, PipelineConfig{});
  CHECK(report.rejected_component_indices.empty());
  CHECK(std::sqrt((out.data - s.recording.data).squaredNorm() / s.recording.data.squaredNorm()) < 1e-6);
  CHECK(report.details.at("n_clusters").get<int>() >= 1);
}

TEST_CASE("reject_components refuses to reject everything") {
  const auto s = mara_scene(3, true);
  PipelineConfig cfg;
  cfg.dbscan_eps = 1e-9;
  const auto [out, report] = reject_components(s.recording, s.dec, cfg);
  CHECK(out == s.recording);
  CHECK(report.rejected_component_indices.empty());
  REQUIRE_FALSE(report.warnings.empty());
  CHECK(report.warnings[0].find("AllComponentsRejected") != std::string::npos);
}

TEST_CASE("experimental label rejection also drops whole clusters") {
  const auto s = mara_scene(4, true);
  PipelineConfig cfg;
  cfg.mara_reject_labels = {0};
  const auto [out, report] = reject_components(s.recording, s.dec, cfg);
  const auto labels = report.details.at("labels").get<std::vector<int>>();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool rejected = std::find(report.rejected_component_indices.begin(),
                                    report.rejected_component_indices.end(),
                                    static_cast<int>(i)) != report.rejected_component_indices.end();
    CHECK(rejected == (labels[i] == -1 || labels[i] == 0));
  }
}

TEST_CASE("features are deterministic") {
  const auto s = mara_scene(5, true);
  CHECK(compute_features(s.dec, 250.0).raw == compute_features(s.dec, 250.0).raw);
}
