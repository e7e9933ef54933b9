#include "neuroclean/cluster_mara.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>

#include "neuroclean/error.hpp"
#include "neuroclean/stats.hpp"

namespace neuroclean::mara {

namespace {

std::vector<double> row_of(const Matrix& m, Eigen::Index r) {
  std::vector<double> out(static_cast<std::size_t>(m.cols()));
  Eigen::Map<Eigen::RowVectorXd>(out.data(), m.cols()) = m.row(r);
  return out;
}

}  // namespace

double feature_spatial_range(std::span<const double> column) {
  if (column.size() < 2) throw Error(ErrorCode::InvalidArgument, "spatial range needs two entries");
  const auto [lo, hi] = std::minmax_element(column.begin(), column.end());
  return std::log(std::max(*hi - *lo, kLogFloor));
}

double feature_alpha_power(std::span<const double> source, double fs) {
  if (!(fs > 26.0)) throw Error(ErrorCode::InvalidArgument, "alpha power needs fs > 26 Hz");
  return std::log(std::max(dsp::band_power(dsp::welch_psd(source, fs), 8.0, 13.0), kLogFloor));
}

double fit_band_high_hz(double fs) { return std::min(35.0, 0.9 * fs / 2.0); }

OneOverFFit feature_one_over_f_fit(const dsp::PsdEstimate& psd, double fs) {
  const double hi = fit_band_high_hz(fs);
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < psd.freqs_hz.size(); ++k) {
    const double f = psd.freqs_hz[k];
    if (f >= 2.0 && f <= hi) {
      lx.push_back(std::log(f));
      ly.push_back(std::log(std::max(psd.power[k], 1e-300)));
    }
  }
  if (lx.size() < 2) throw Error(ErrorCode::EmptyBand, "fewer than two PSD bins in the 1/f fit band");
  const double mx = dsp::mean(lx), my = dsp::mean(ly);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (intercept + slope * lx[i]);
    ss += r * r;
  }
  return {-slope, std::sqrt(ss / static_cast<double>(lx.size()))};
}

OneOverFFit feature_one_over_f_fit(std::span<const double> source, double fs) {
  return feature_one_over_f_fit(dsp::welch_psd(source, fs), fs);
}

double feature_local_skewness(std::span<const double> source, double fs, double window_s) {
  if (!(window_s > 0.0) || !(fs > 0.0)) throw Error(ErrorCode::InvalidArgument, "invalid skewness window");
  const std::size_t n = source.size();
  const auto win = std::max<std::size_t>(3, static_cast<std::size_t>(std::llround(window_s * fs)));
  auto one = [](std::span<const double> w) {
    try {
      return std::abs(dsp::skewness(w));
    } catch (const Error&) {
      return 0.0;
    }
  };
  if (n < win) return n >= 3 ? one(source) : 0.0;
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < n; start += win) {
    const std::size_t len = std::min(win, n - start);
    if (len < 3) break;
    acc += one(source.subspan(start, len));
    ++count;
  }
  return acc / static_cast<double>(count);
}

Matrix standardize_columns(const Matrix& features) {
  Matrix out = Matrix::Zero(features.rows(), features.cols());
  if (features.rows() == 0) return out;
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    const double m = features.col(j).mean();
    const double sd = std::sqrt((features.col(j).array() - m).square().mean());
    if (sd > 0.0) out.col(j) = (features.col(j).array() - m) / sd;
  }
  return out;
}

MaraFeatureMatrix compute_features(const ica::ComponentDecomposition& dec, double fs, double window_s) {
  const Eigen::Index k = dec.sources.rows();
  MaraFeatureMatrix fm;
  fm.raw.resize(k, 5);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto src = row_of(dec.sources, i);
    const Eigen::VectorXd col = dec.mixing.col(i);
    const auto psd = dsp::welch_psd(src, fs);
    const auto fit = feature_one_over_f_fit(psd, fs);
    fm.raw(i, 0) = feature_spatial_range(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
    fm.raw(i, 1) = std::log(std::max(dsp::band_power(psd, 8.0, 13.0), kLogFloor));
    fm.raw(i, 2) = fit.lambda;
    fm.raw(i, 3) = fit.fit_error;
    fm.raw(i, 4) = feature_local_skewness(src, fs, window_s);
  }
  fm.standardized = standardize_columns(fm.raw);
  return fm;
}

std::vector<int> dbscan(const Matrix& points, double eps, int min_samples) {
  const auto n = static_cast<std::size_t>(points.rows());
  std::vector<std::vector<std::size_t>> neighbours(n);
  const double eps2 = eps * eps;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double d2 = (points.row(static_cast<Eigen::Index>(i)) - points.row(static_cast<Eigen::Index>(j))).squaredNorm();
      if (d2 <= eps2) neighbours[i].push_back(j);
    }
  }
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i) core[i] = static_cast<int>(neighbours[i].size()) >= min_samples;

  std::vector<int> labels(n, -1);
  int next = 0;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (!core[seed] || labels[seed] != -1) continue;
    const int id = next++;
    std::deque<std::size_t> queue{seed};
    labels[seed] = id;
    while (!queue.empty()) {
      const std::size_t p = queue.front();
      queue.pop_front();
      for (std::size_t q : neighbours[p]) {
        if (labels[q] != -1) continue;
        labels[q] = id;
        if (core[q]) queue.push_back(q);
      }
    }
  }
  return labels;
}

std::pair<Recording, StageReport> reject_components(const Recording& recording,
                                                    const ica::ComponentDecomposition& dec,
                                                    const PipelineConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  StageReport report;
  report.stage_name = "ica_cluster_mara";
  report.params = Json{{"dbscan_eps", config.dbscan_eps},
                       {"dbscan_min_samples", config.dbscan_min_samples},
                       {"standardize", config.mara_standardize},
                       {"skew_window_s", config.mara_skew_window_s},
                       {"reject_labels", config.mara_reject_labels},
                       {"ica_tol", config.ica_tol},
                       {"ica_max_iter", config.ica_max_iter},
                       {"seed", config.random_seed}};

  const auto fm = compute_features(dec, recording.sampling_rate_hz, config.mara_skew_window_s);
  const auto labels = dbscan(config.mara_standardize ? fm.standardized : fm.raw, config.dbscan_eps,
                             config.dbscan_min_samples);

  std::vector<int> rejected;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool extra = std::find(config.mara_reject_labels.begin(), config.mara_reject_labels.end(),
                                 labels[i]) != config.mara_reject_labels.end();
    if (labels[i] == -1 || extra) rejected.push_back(static_cast<int>(i));
  }
  const int n_clusters = labels.empty() ? 0 : std::max(0, *std::max_element(labels.begin(), labels.end()) + 1);

  Json features = Json::array();
  for (Eigen::Index i = 0; i < fm.raw.rows(); ++i) {
    Json row = Json::object();
    for (std::size_t f = 0; f < kFeatureNames.size(); ++f) row[std::string(kFeatureNames[f])] = fm.raw(i, static_cast<Eigen::Index>(f));
    features.push_back(row);
  }
  report.details = Json{{"n_components", dec.n_components()},
                        {"ica_converged", dec.converged},
                        {"ica_iterations", dec.iterations},
                        {"n_clusters", n_clusters},
                        {"labels", labels},
                        {"features", features}};
  if (!dec.converged) report.warnings.push_back("FastICA did not converge; using the last iterate");

  Recording out = recording;
  if (!rejected.empty() && static_cast<int>(rejected.size()) == dec.n_components()) {
    report.warnings.push_back("AllComponentsRejected: every component was an outlier, input left unchanged");
  } else if (!rejected.empty()) {
    Matrix sources = dec.sources;
    for (int i : rejected) sources.row(i).setZero();
    out.data = ica::remix(dec, sources);
    report.rejected_component_indices = rejected;
    // Channel-space patterns of the removed components, for scoring against
    // a known artifact topography.
    Json patterns = Json::array();
    for (int i : rejected) {
      std::vector<double> pattern(static_cast<std::size_t>(dec.n_channels_total), 0.0);
      for (std::size_t c = 0; c < dec.channel_index_map.size(); ++c) {
        pattern[static_cast<std::size_t>(dec.channel_index_map[c])] = dec.mixing(static_cast<Eigen::Index>(c), i);
      }
      patterns.push_back(pattern);
    }
    report.details["rejected_patterns"] = patterns;
  }
  report.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return {std::move(out), std::move(report)};
}

}  // namespace neuroclean::mara
