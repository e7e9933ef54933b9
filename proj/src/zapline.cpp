#include "neuroclean/zapline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "neuroclean/error.hpp"
#include "neuroclean/fft.hpp"
#include "neuroclean/spectral.hpp"
#include "neuroclean/stats.hpp"

namespace neuroclean::zapline {

namespace {

std::vector<double> harmonic_frequencies(const ZaplineConfig& config, double fs) {
  std::vector<double> out;
  for (int h = 1;; ++h) {
    const double f = h * config.line_freq_hz;
    if (f >= fs / 2.0) break;
    if (config.n_harmonics && h > *config.n_harmonics) break;
    out.push_back(f);
  }
  return out;
}

// Weight of each rfft bin in the line branch: 1 inside the notch, 0.5 on the
// first bin outside each edge, 0 elsewhere.
std::vector<double> notch_weights(const ZaplineConfig& config, std::size_t n, double fs) {
  const std::size_t n_bins = n / 2 + 1;
  std::vector<double> w(n_bins, 0.0);
  const double df = fs / static_cast<double>(n);
  for (double f : harmonic_frequencies(config, fs)) {
    const auto lo = static_cast<long>(std::ceil((f - config.notch_halfwidth_hz) / df - 1e-9));
    const auto hi = static_cast<long>(std::floor((f + config.notch_halfwidth_hz) / df + 1e-9));
    for (long k = lo - 1; k <= hi + 1; ++k) {
      if (k < 1 || k >= static_cast<long>(n_bins)) continue;
      const double v = (k < lo || k > hi) ? 0.5 : 1.0;
      w[static_cast<std::size_t>(k)] = std::max(w[static_cast<std::size_t>(k)], v);
    }
  }
  return w;
}

std::vector<std::size_t> bias_bins(const ZaplineConfig& config, std::size_t n, double fs) {
  const std::size_t n_bins = n / 2 + 1;
  std::vector<bool> in(n_bins, false);
  for (std::size_t k = 1; k < n_bins; ++k) {
    const double f = dsp::bin_frequency(k, n, fs);
    for (double h : harmonic_frequencies(config, fs)) {
      if (std::abs(f - h) <= 0.5 * config.dss_bias_bandwidth_hz + 1e-9) in[k] = true;
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < n_bins; ++k) {
    if (in[k]) out.push_back(k);
  }
  return out;
}

Matrix active_rows(const Matrix& m, const std::vector<int>& channels) {
  Matrix out(static_cast<Eigen::Index>(channels.size()), m.cols());
  for (std::size_t i = 0; i < channels.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(channels[i]);
  return out;
}

std::vector<int> active_of(const std::vector<bool>& mask) {
  std::vector<int> out;
  for (std::size_t c = 0; c < mask.size(); ++c) {
    if (mask[c]) out.push_back(static_cast<int>(c));
  }
  return out;
}

}  // namespace

ZaplineConfig ZaplineConfig::from_pipeline(const PipelineConfig& config, double line_freq_hz) {
  ZaplineConfig z;
  z.line_freq_hz = line_freq_hz;
  z.n_remove = config.zapline_n_remove;
  z.dss_bias_bandwidth_hz = config.zapline_bias_bandwidth_hz;
  z.notch_halfwidth_hz = config.zapline_notch_halfwidth_hz;
  return z;
}

Branches split_branches(const Recording& recording, const ZaplineConfig& config) {
  const double fs = recording.sampling_rate_hz;
  const auto n = static_cast<std::size_t>(recording.n_samples());
  if (static_cast<double>(n) < 2.0 * fs) {
    throw Error(ErrorCode::TooShort, "zapline needs at least two seconds of data");
  }
  const auto weights = notch_weights(config, n, fs);
  Branches out{Matrix::Zero(recording.n_channels(), recording.n_samples()),
               Matrix::Zero(recording.n_channels(), recording.n_samples())};
  dsp::RealFftPlan plan(n);
  std::vector<dsp::Complex> spec(n / 2 + 1);
  std::vector<double> row(n);
  for (int c : recording.active_channels()) {
    Eigen::Map<Eigen::RowVectorXd>(row.data(), static_cast<Eigen::Index>(n)) = recording.data.row(c);
    plan.forward(row, spec);
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= weights[k];
    const auto line = dsp::irfft(spec, n);
    for (std::size_t t = 0; t < n; ++t) {
      out.line(c, static_cast<Eigen::Index>(t)) = line[t];
      out.clean(c, static_cast<Eigen::Index>(t)) = row[t] - line[t];
    }
  }
  return out;
}

DssResult dss_line_components(const Matrix& line_branch, const std::vector<bool>& channel_mask,
                              double fs, const ZaplineConfig& config) {
  DssResult res;
  res.channels = active_of(channel_mask);
  const auto m = static_cast<Eigen::Index>(res.channels.size());
  if (m < 2) throw Error(ErrorCode::InvalidArgument, "DSS needs at least two active channels");
  const auto n = static_cast<std::size_t>(line_branch.cols());
  const Matrix x = active_rows(line_branch, res.channels);

  Eigen::MatrixXd c_full = (x * x.transpose()) / static_cast<double>(n);
  c_full = 0.5 * (c_full + c_full.transpose()).eval();

  // Biased covariance from the line-band bins only (Parseval).
  const auto bins = bias_bins(config, n, fs);
  Eigen::MatrixXcd z(m, static_cast<Eigen::Index>(bins.size()));
  dsp::RealFftPlan plan(n);
  std::vector<dsp::Complex> spec(n / 2 + 1);
  std::vector<double> row(n);
  for (Eigen::Index i = 0; i < m; ++i) {
    Eigen::Map<Eigen::RowVectorXd>(row.data(), static_cast<Eigen::Index>(n)) = x.row(i);
    plan.forward(row, spec);
    for (std::size_t b = 0; b < bins.size(); ++b) {
      const bool unpaired = (n % 2 == 0 && bins[b] == n / 2);
      z(i, static_cast<Eigen::Index>(b)) = spec[bins[b]] * (unpaired ? 1.0 : std::sqrt(2.0));
    }
  }
  Eigen::MatrixXd c_bias = (z * z.adjoint()).real() / (static_cast<double>(n) * static_cast<double>(n));
  c_bias = 0.5 * (c_bias + c_bias.transpose()).eval();

  const double trace = c_full.trace();
  if (!(trace > 0.0)) {
    res.eigenvalues = Eigen::VectorXd::Zero(m);
    res.filters = Matrix::Identity(m, m);
    res.covariance = c_full;
    return res;
  }
  c_full.diagonal().array() += 1e-8 * trace / static_cast<double>(m);
  res.covariance = c_full;

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(c_bias, c_full);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::InvalidArgument, "DSS eigendecomposition failed");
  }
  res.eigenvalues.resize(m);
  res.filters.resize(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::Index src = m - 1 - j;
    res.eigenvalues(j) = solver.eigenvalues()(src);
    Eigen::VectorXd w = solver.eigenvectors().col(src);
    w.normalize();
    Eigen::Index arg = 0;
    w.cwiseAbs().maxCoeff(&arg);
    if (w(arg) < 0.0) w = -w;
    res.filters.col(j) = w;
  }
  return res;
}

int auto_n_remove(const Eigen::VectorXd& eigenvalues) {
  if (eigenvalues.size() == 0) return 0;
  const std::vector<double> ev(eigenvalues.data(), eigenvalues.data() + eigenvalues.size());
  const double med = dsp::median(ev);
  const double spread = std::max(dsp::mad(ev), 0.5 * med);
  const double threshold = med + 3.0 * spread;
  int count = 0;
  for (double v : ev) count += v > threshold ? 1 : 0;
  return count;
}

double mean_band_power(const Recording& recording, double f_lo, double f_hi) {
  const auto channels = recording.active_channels();
  if (channels.empty()) return 0.0;
  double acc = 0.0;
  std::vector<double> row(static_cast<std::size_t>(recording.n_samples()));
  for (int c : channels) {
    Eigen::Map<Eigen::RowVectorXd>(row.data(), recording.n_samples()) = recording.data.row(c);
    acc += dsp::band_power(dsp::welch_psd(row, recording.sampling_rate_hz), f_lo, f_hi);
  }
  return acc / static_cast<double>(channels.size());
}

std::pair<Recording, StageReport> apply_zapline(const Recording& recording,
                                                const ZaplineConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  if (config.line_freq_hz != 50.0 && config.line_freq_hz != 60.0) {
    throw Error(ErrorCode::InvalidArgument, "line frequency must be 50 or 60 Hz");
  }
  if (config.n_remove && *config.n_remove < 0) {
    throw Error(ErrorCode::InvalidArgument, "n_remove must be >= 0");
  }
  if (!(config.dss_bias_bandwidth_hz > 0.0 && config.notch_halfwidth_hz >= 0.5 * config.dss_bias_bandwidth_hz)) {
    throw Error(ErrorCode::InvalidArgument, "notch half-width must cover the bias bandwidth");
  }

  StageReport report;
  report.stage_name = "zapline";
  report.params = Json{{"line_freq_hz", config.line_freq_hz},
                       {"n_harmonics", config.n_harmonics ? Json(*config.n_harmonics) : Json("all")},
                       {"n_remove", config.n_remove ? Json(*config.n_remove) : Json("auto")},
                       {"dss_bias_bandwidth_hz", config.dss_bias_bandwidth_hz},
                       {"notch_halfwidth_hz", config.notch_halfwidth_hz}};

  const auto branches = split_branches(recording, config);
  const auto dss = dss_line_components(branches.line, recording.channel_mask,
                                       recording.sampling_rate_hz, config);
  int n_remove = config.n_remove ? *config.n_remove : auto_n_remove(dss.eigenvalues);
  n_remove = std::min<int>(n_remove, static_cast<int>(dss.eigenvalues.size()));

  Recording out = recording;
  if (n_remove > 0) {
    const Matrix x_line = active_rows(branches.line, dss.channels);
    const Eigen::MatrixXd w = dss.filters.leftCols(n_remove);
    const Eigen::MatrixXd cw = dss.covariance * w;
    const Eigen::MatrixXd gram = w.transpose() * cw;
    const Eigen::MatrixXd proj = cw * gram.ldlt().solve(w.transpose());
    const Matrix removed = proj * x_line;
    for (std::size_t i = 0; i < dss.channels.size(); ++i) {
      out.data.row(dss.channels[i]) -= removed.row(static_cast<Eigen::Index>(i));
    }
  }

  const double f = config.line_freq_hz;
  const double before = mean_band_power(recording, f - 1.0, f + 1.0);
  const double after = mean_band_power(out, f - 1.0, f + 1.0);
  // Distortion check below the first notch, where brain rhythms live.
  const double off_hi = f - config.notch_halfwidth_hz;
  const double off_before = mean_band_power(recording, 1.0, off_hi);
  const double off_after = mean_band_power(out, 1.0, off_hi);
  Json eig = Json::array();
  for (Eigen::Index i = 0; i < dss.eigenvalues.size(); ++i) eig.push_back(dss.eigenvalues(i));
  report.details = Json{{"n_remove", n_remove},
                        {"n_harmonics", harmonic_frequencies(config, recording.sampling_rate_hz).size()},
                        {"eigenvalues", eig},
                        {"line_band_power_before", before},
                        {"line_band_power_after", after},
                        {"line_band_reduction_db",
                         (before > 0.0 && after > 0.0) ? 10.0 * std::log10(before / after) : 0.0},
                        {"offband_band_hz", {1.0, off_hi}},
                        {"offband_change_db",
                         (off_before > 0.0 && off_after > 0.0) ? 10.0 * std::log10(off_after / off_before) : 0.0}};
  report.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return {std::move(out), std::move(report)};
}

}  // namespace neuroclean::zapline
