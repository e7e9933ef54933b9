#include "neuroclean/qa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "neuroclean/cluster_mara.hpp"
#include "neuroclean/error.hpp"
#include "neuroclean/spectral.hpp"
#include "neuroclean/stats.hpp"

namespace neuroclean::qa {

double snr_db(const Recording& before, const Recording& after) {
  if (before.n_channels() != after.n_channels() || before.n_samples() != after.n_samples()) {
    throw Error(ErrorCode::ShapeMismatch, "SNR needs recordings of identical shape");
  }
  double signal = 0.0, residual = 0.0;
  for (Eigen::Index c = 0; c < after.n_channels(); ++c) {
    const auto i = static_cast<std::size_t>(c);
    if (!after.channel_mask[i] || !before.channel_mask[i]) continue;
    signal += after.data.row(c).squaredNorm();
    residual += (before.data.row(c) - after.data.row(c)).squaredNorm();
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (residual == 0.0) return inf;
  if (signal == 0.0) return -inf;
  return 10.0 * std::log10(signal / residual);
}

double one_over_f_similarity(const Recording& recording) {
  const auto channels = recording.active_channels();
  if (channels.empty()) throw Error(ErrorCode::InvalidArgument, "no active channels");
  const double fs = recording.sampling_rate_hz;
  const double hi = mara::fit_band_high_hz(fs);
  std::vector<double> row(static_cast<std::size_t>(recording.n_samples()));
  double acc = 0.0;
  for (int c : channels) {
    Eigen::Map<Eigen::RowVectorXd>(row.data(), recording.n_samples()) = recording.data.row(c);
    const auto psd = dsp::welch_psd(row, fs);
    std::vector<double> lp, lf;
    for (std::size_t k = 0; k < psd.freqs_hz.size(); ++k) {
      const double f = psd.freqs_hz[k];
      if (f >= 2.0 && f <= hi) {
        lp.push_back(std::log(std::max(psd.power[k], 1e-300)));
        lf.push_back(-std::log(f));
      }
    }
    if (lp.size() < 2) throw Error(ErrorCode::EmptyBand, "fewer than two PSD bins in the 1/f band");
    try {
      acc += dsp::pearson(lp, lf);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ConstantInput) throw;
    }
  }
  return acc / static_cast<double>(channels.size());
}

std::vector<double> artifact_probability(const Matrix& features, const ArtifactProbabilityOptions& options) {
  const Eigen::Index k = features.rows();
  if (k < 3) throw Error(ErrorCode::DegeneratePopulation, "artifact probability needs at least 3 components");
  if (features.cols() != 5) throw Error(ErrorCode::ShapeMismatch, "expected 5 MARA feature columns");
  constexpr Eigen::Index kColumns[3] = {4, 2, 3};  // skewness, lambda, fit error
  Matrix z(k, 3);
  for (int j = 0; j < 3; ++j) {
    std::vector<double> col(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < k; ++i) col[static_cast<std::size_t>(i)] = features(i, kColumns[j]);
    const double med = dsp::median(col);
    double scale = 1.4826 * dsp::mad(col);
    if (scale == 0.0) {
      // More than half the population sits on the median; fall back to the
      // mean absolute deviation (scaled to sigma for Gaussian data).
      double mean_ad = 0.0;
      for (double v : col) mean_ad += std::abs(v - med);
      scale = 1.2533 * mean_ad / static_cast<double>(k);
    }
    for (Eigen::Index i = 0; i < k; ++i) {
      z(i, j) = scale > 0.0 ? std::abs(col[static_cast<std::size_t>(i)] - med) / scale : 0.0;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) {
    const double agg = options.aggregation == Aggregation::Max ? z.row(i).maxCoeff() : z.row(i).mean();
    out[static_cast<std::size_t>(i)] = 1.0 / (1.0 + std::exp(-(agg - options.threshold)));
  }
  return out;
}

Retention retention_ratios(const std::vector<StageReport>& reports, int n_channels, int n_components) {
  std::set<int> channels, components;
  for (const auto& r : reports) {
    channels.insert(r.rejected_channel_indices.begin(), r.rejected_channel_indices.end());
    components.insert(r.rejected_component_indices.begin(), r.rejected_component_indices.end());
  }
  Retention out;
  if (n_channels > 0) {
    out.channels_retained_fraction = 1.0 - static_cast<double>(channels.size()) / n_channels;
  }
  if (n_components > 0) {
    out.components_rejected_fraction = static_cast<double>(components.size()) / n_components;
  }
  return out;
}

}  // namespace neuroclean::qa
