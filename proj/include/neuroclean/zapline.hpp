#pragma once

#include <optional>
#include <utility>

#include "neuroclean/recording.hpp"

namespace neuroclean::zapline {

struct ZaplineConfig {
  double line_freq_hz = 60.0;
  /// Number of harmonics (including the fundamental); empty = all below Nyquist.
  std::optional<int> n_harmonics;
  /// Number of DSS components to remove; empty = automatic selection.
  std::optional<int> n_remove;
  /// Full width of the band around each harmonic that biases the DSS.
  double dss_bias_bandwidth_hz = 0.5;
  /// Half-width of the spectral notch that defines the line branch. It has to
  /// be much wider than the bias band, otherwise both covariances see the
  /// same bins and the eigenvalues cannot separate line from background.
  double notch_halfwidth_hz = 5.0;

  static ZaplineConfig from_pipeline(const PipelineConfig& config, double line_freq_hz);
};

struct Branches {
  Matrix clean;  // X', line bins removed
  Matrix line;   // X'' = X - X'
};

/// Splits the recording by spectral zeroing around the line frequency and its
/// harmonics. Throws TooShort below two seconds of data.
Branches split_branches(const Recording& recording, const ZaplineConfig& config);

struct DssResult {
  Eigen::VectorXd eigenvalues;  // descending, in [0, 1]
  Matrix filters;               // one unit-norm spatial filter per column, active channels only
  Matrix covariance;            // full covariance of the line branch (active channels)
  std::vector<int> channels;    // active channel indices, in filter row order
};

/// Generalized eigendecomposition of the line-band covariance against the
/// full line-branch covariance.
DssResult dss_line_components(const Matrix& line_branch, const std::vector<bool>& channel_mask,
                              double fs, const ZaplineConfig& config);

/// Components whose eigenvalue exceeds median + 3 * MAD. The MAD is floored
/// at half the median so that a flat spectrum selects nothing.
int auto_n_remove(const Eigen::VectorXd& eigenvalues);

std::pair<Recording, StageReport> apply_zapline(const Recording& recording,
                                                const ZaplineConfig& config);

/// Mean PSD over active channels in [f_lo, f_hi), used for reporting.
double mean_band_power(const Recording& recording, double f_lo, double f_hi);

}  // namespace neuroclean::zapline
