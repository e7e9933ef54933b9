#include "neuroclean/recording.hpp"

#include <cmath>
#include <sstream>

#include "neuroclean/error.hpp"

namespace neuroclean {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::SignalTooShort: return "SignalTooShort";
    case ErrorCode::EmptyBand: return "EmptyBand";
    case ErrorCode::InvalidCutoff: return "InvalidCutoff";
    case ErrorCode::ConstantInput: return "ConstantInput";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::BadVersion: return "BadVersion";
    case ErrorCode::UnitError: return "UnitError";
    case ErrorCode::RaggedRows: return "RaggedRows";
    case ErrorCode::NonNumericCell: return "NonNumericCell";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::RankZero: return "RankZero";
    case ErrorCode::AllChannelsRejected: return "AllChannelsRejected";
    case ErrorCode::AllComponentsRejected: return "AllComponentsRejected";
    case ErrorCode::DegeneratePopulation: return "DegeneratePopulation";
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::SingleClassTest: return "SingleClassTest";
    case ErrorCode::NoTrialsSurvive: return "NoTrialsSurvive";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
  }
  return "Unknown";
}

Recording Recording::from_data(Matrix data, double sampling_rate_hz) {
  Recording r;
  r.channel_mask.assign(static_cast<std::size_t>(data.rows()), true);
  r.data = std::move(data);
  r.sampling_rate_hz = sampling_rate_hz;
  return r;
}

std::vector<int> Recording::active_channels() const {
  std::vector<int> out;
  for (std::size_t c = 0; c < channel_mask.size(); ++c) {
    if (channel_mask[c]) out.push_back(static_cast<int>(c));
  }
  return out;
}

int Recording::n_active() const {
  int n = 0;
  for (bool m : channel_mask) n += m ? 1 : 0;
  return n;
}

Recording Recording::with_channels_zeroed(const std::vector<int>& channels) const {
  Recording out = *this;
  for (int c : channels) {
    if (c < 0 || c >= n_channels()) {
      throw Error(ErrorCode::InvalidArgument, "channel index out of range");
    }
    out.channel_mask[static_cast<std::size_t>(c)] = false;
    out.data.row(c).setZero();
  }
  return out;
}

bool Recording::operator==(const Recording& other) const {
  return data.rows() == other.data.rows() && data.cols() == other.data.cols() &&
         data == other.data && sampling_rate_hz == other.sampling_rate_hz &&
         line_freq_hz == other.line_freq_hz && events == other.events &&
         channel_mask == other.channel_mask;
}

void check_config(const PipelineConfig& c) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidArgument, msg); };
  if (!(c.bandpass_low_hz > 0.0 && c.bandpass_low_hz < c.bandpass_high_hz)) {
    fail("require 0 < bandpass_low_hz < bandpass_high_hz");
  }
  if (c.line_freq_hz && *c.line_freq_hz != 50.0 && *c.line_freq_hz != 60.0) {
    fail("line_freq_hz must be 50 or 60");
  }
  if (!(c.bcr_sd_low_uv >= 0.0 && c.bcr_sd_low_uv < c.bcr_sd_high_uv)) {
    fail("require 0 <= bcr_sd_low_uv < bcr_sd_high_uv");
  }
  if (c.bcr_max_iters < 1) fail("bcr_max_iters must be >= 1");
  if (!(c.dbscan_eps > 0.0)) fail("dbscan_eps must be positive");
  if (c.dbscan_min_samples < 1) fail("dbscan_min_samples must be >= 1");
  if (c.epoch_len_p < 2) fail("epoch_len_p must be >= 2");
  if (!(c.mara_skew_window_s > 0.0)) fail("mara_skew_window_s must be positive");
  if (c.filter_order < 1 || c.filter_order > 16) fail("filter_order must be in [1, 16]");
  if (c.zapline_n_remove && *c.zapline_n_remove < 0) fail("zapline_n_remove must be >= 0");
  if (!(c.zapline_bias_bandwidth_hz > 0.0)) fail("zapline_bias_bandwidth_hz must be positive");
  if (!(c.zapline_notch_halfwidth_hz >= 0.5 * c.zapline_bias_bandwidth_hz)) {
    fail("zapline_notch_halfwidth_hz must cover half the bias bandwidth");
  }
  if (!(c.ica_tol > 0.0) || c.ica_max_iter < 1) fail("invalid ICA tolerance or iteration cap");
}

std::vector<std::string> validate(const Recording& r) {
  std::vector<std::string> errors;
  if (r.n_channels() < 1) errors.emplace_back("recording has no channels");
  if (r.n_samples() < 2) errors.emplace_back("recording needs at least 2 samples");
  if (!(r.sampling_rate_hz > 0.0) || !std::isfinite(r.sampling_rate_hz)) {
    errors.emplace_back("sampling rate must be positive");
  }
  if (r.line_freq_hz && *r.line_freq_hz != 50.0 && *r.line_freq_hz != 60.0) {
    errors.emplace_back("line frequency must be 50 or 60 Hz");
  }
  if (r.channel_mask.size() != static_cast<std::size_t>(r.n_channels())) {
    errors.emplace_back("channel mask length differs from channel count");
  }

  bool reported_nonfinite = false;
  for (Eigen::Index c = 0; c < r.data.rows() && !reported_nonfinite; ++c) {
    for (Eigen::Index s = 0; s < r.data.cols(); ++s) {
      if (!std::isfinite(r.data(c, s))) {
        std::ostringstream msg;
        msg << "non-finite sample at (" << c << "," << s << ")";
        errors.push_back(msg.str());
        reported_nonfinite = true;
        break;
      }
    }
  }

  if (r.channel_mask.size() == static_cast<std::size_t>(r.n_channels())) {
    for (Eigen::Index c = 0; c < r.data.rows(); ++c) {
      if (!r.channel_mask[static_cast<std::size_t>(c)] && !r.data.row(c).isZero(0.0)) {
        errors.push_back("masked channel " + std::to_string(c) + " is not all zero");
      }
    }
  }

  for (const auto& e : r.events) {
    if (e.sample_index < 0 || e.sample_index >= r.n_samples()) {
      errors.emplace_back("event out of range");
    }
    if (e.label.empty()) errors.emplace_back("event label is empty");
  }
  return errors;
}

std::optional<double> effective_high_cutoff(const PipelineConfig& config, double fs) {
  if (!(fs > 0.0)) throw Error(ErrorCode::InvalidArgument, "sampling rate must be positive");
  if (fs <= 2.0 * config.bandpass_high_hz) return std::nullopt;
  return config.bandpass_high_hz;
}

}  // namespace neuroclean
