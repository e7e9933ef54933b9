#pragma once

#include <array>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "neuroclean/ica.hpp"
#include "neuroclean/recording.hpp"
#include "neuroclean/spectral.hpp"

namespace neuroclean::mara {

/// Column order of the feature matrix.
inline constexpr std::array<std::string_view, 5> kFeatureNames{
    "spatial_range", "alpha_log_power", "lambda", "fit_error", "mean_local_skewness"};

/// Values are floored at this before taking logarithms.
inline constexpr double kLogFloor = 1e-12;

double feature_spatial_range(std::span<const double> mixing_column);

double feature_alpha_power(std::span<const double> source, double fs);

struct OneOverFFit {
  double lambda = 0.0;     // ln PSD = a - lambda * ln f
  double fit_error = 0.0;  // RMS residual in ln units
};

/// Log-log least squares over [2, min(35, 0.45 fs)] Hz. Throws EmptyBand when
/// fewer than two bins fall inside.
OneOverFFit feature_one_over_f_fit(const dsp::PsdEstimate& psd, double fs);
OneOverFFit feature_one_over_f_fit(std::span<const double> source, double fs);

/// Upper edge of the 1/f fit band at this sampling rate.
double fit_band_high_hz(double fs);

/// Mean |skewness| over consecutive non-overlapping windows. A trailing
/// partial window counts when it has at least 3 samples; constant windows
/// count as 0. Shorter signals are one window.
double feature_local_skewness(std::span<const double> source, double fs, double window_s = 15.0);

struct MaraFeatureMatrix {
  Matrix raw;           // components x 5
  Matrix standardized;  // per-column population z-scores, zero-variance columns -> 0
};

Matrix standardize_columns(const Matrix& features);

MaraFeatureMatrix compute_features(const ica::ComponentDecomposition& decomposition, double fs,
                                   double skew_window_s = 15.0);

/// DBSCAN over rows of `points` (Euclidean). A core point has at least
/// min_samples points within eps, itself included. Clusters are numbered in
/// the order of their lowest-index core point; border points join the
/// lowest-numbered adjacent cluster; noise is -1.
std::vector<int> dbscan(const Matrix& points, double eps, int min_samples);

/// Clusters the component features, zeroes the outlier components (plus any
/// labels listed in `mara_reject_labels`) and mixes back. If every component
/// would be rejected the input is returned unchanged with a warning.
std::pair<Recording, StageReport> reject_components(const Recording& recording,
                                                    const ica::ComponentDecomposition& decomposition,
                                                    const PipelineConfig& config);

}  // namespace neuroclean::mara
