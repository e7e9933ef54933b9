#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace neuroclean {

/// Row-major so that each channel is a contiguous run of samples.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Json = nlohmann::ordered_json;

struct Event {
  std::int64_t sample_index = 0;
  std::string label;
  /// Extra shift (samples) applied to the epoch window of this event.
  std::int64_t offset_samples = 0;

  bool operator==(const Event&) const = default;
};

/// Multichannel voltage recording in microvolts, one row per channel.
///
/// Rejected channels stay in place: their mask entry is false and their row
/// is exactly zero.
struct Recording {
  Matrix data;
  double sampling_rate_hz = 0.0;
  std::optional<double> line_freq_hz;
  std::vector<Event> events;
  std::vector<bool> channel_mask;

  static Recording from_data(Matrix data, double sampling_rate_hz);

  Eigen::Index n_channels() const { return data.rows(); }
  Eigen::Index n_samples() const { return data.cols(); }
  std::vector<int> active_channels() const;
  int n_active() const;

  /// Returns a copy with the given channels masked and zeroed.
  Recording with_channels_zeroed(const std::vector<int>& channels) const;

  bool operator==(const Recording& other) const;
};

struct Trial {
  Matrix data;
  std::string label;
  /// Stable identity of the trial (the event's sample index).
  std::int64_t key = 0;
};

struct EpochedData {
  std::vector<Trial> trials;
  int p = 0;
  double sampling_rate_hz = 0.0;
};

enum class BcrCriterion { Iqr, Quartile };

struct PipelineConfig {
  double bandpass_low_hz = 1.0;
  double bandpass_high_hz = 500.0;
  std::optional<double> line_freq_hz;
  double bcr_sd_low_uv = 0.1;
  double bcr_sd_high_uv = 100.0;
  int bcr_max_iters = 5;
  double dbscan_eps = 2.0;
  int dbscan_min_samples = 2;
  int epoch_len_p = 500;
  double mara_skew_window_s = 15.0;
  std::uint64_t random_seed = 0;

  int filter_order = 4;
  std::optional<int> zapline_n_remove;  // empty = auto
  double zapline_bias_bandwidth_hz = 0.5;
  double zapline_notch_halfwidth_hz = 5.0;
  BcrCriterion bcr_criterion = BcrCriterion::Iqr;
  bool mara_standardize = true;
  /// Experimental: cluster labels rejected in addition to the outliers.
  std::vector<int> mara_reject_labels;
  double ica_tol = 1e-4;
  int ica_max_iter = 200;

  bool enable_bandpass = true;
  bool enable_zapline = true;
  bool enable_channel_reject = true;
  bool enable_ica = true;
};

/// Throws Error(InvalidArgument) when the configuration is unusable.
void check_config(const PipelineConfig& config);

struct QaMetrics {
  std::optional<double> snr_db;             // against the previous stage
  std::optional<double> snr_cumulative_db;  // against the raw input
  std::optional<double> one_over_f_similarity;
  std::optional<std::vector<double>> artifact_probabilities;
  double channels_retained_fraction = 1.0;
  std::optional<double> components_rejected_fraction;
};

struct StageReport {
  std::string stage_name;
  Json params = Json::object();
  std::vector<int> rejected_channel_indices;
  std::vector<int> rejected_component_indices;
  QaMetrics qa_before;
  QaMetrics qa_after;
  double wall_time_ms = 0.0;
  std::vector<std::string> warnings;
  Json details = Json::object();
};

/// One message per violated invariant; empty when the recording is valid.
std::vector<std::string> validate(const Recording& recording);

/// Upper band edge to use at this sampling rate, or nothing when the edge is
/// at or above Nyquist and the filter degenerates to a highpass.
std::optional<double> effective_high_cutoff(const PipelineConfig& config, double sampling_rate_hz);

}  // namespace neuroclean
