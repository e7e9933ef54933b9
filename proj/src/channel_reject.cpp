#include "neuroclean/channel_reject.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "neuroclean/error.hpp"
#include "neuroclean/stats.hpp"

namespace neuroclean::bcr {

ChannelStats channel_sd(const Recording& recording) {
  const auto n_ch = static_cast<std::size_t>(recording.n_channels());
  const Eigen::Index n = recording.n_samples();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "channel SD needs at least two samples");
  ChannelStats stats;
  stats.sd_uv.assign(n_ch, 0.0);
  stats.normalized_sd.assign(n_ch, 0.0);
  std::vector<double> active_sd;
  for (int c : recording.active_channels()) {
    const auto row = recording.data.row(c);
    const double m = row.mean();
    const double ss = (row.array() - m).square().sum();
    stats.sd_uv[static_cast<std::size_t>(c)] = std::sqrt(ss / static_cast<double>(n - 1));
    active_sd.push_back(stats.sd_uv[static_cast<std::size_t>(c)]);
  }
  if (active_sd.empty()) return stats;
  const double med = dsp::median(active_sd);
  if (med > 0.0) {
    for (int c : recording.active_channels()) {
      stats.normalized_sd[static_cast<std::size_t>(c)] = stats.sd_uv[static_cast<std::size_t>(c)] / med;
    }
  }
  return stats;
}

std::pair<Recording, StageReport> reject_bad_channels(const Recording& recording,
                                                      const PipelineConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  if (recording.n_active() < 2) {
    throw Error(ErrorCode::InvalidArgument, "bad channel rejection needs at least two active channels");
  }
  StageReport report;
  report.stage_name = "channel_reject";
  report.params = Json{{"sd_low_uv", config.bcr_sd_low_uv},
                       {"sd_high_uv", config.bcr_sd_high_uv},
                       {"max_iters", config.bcr_max_iters},
                       {"criterion", config.bcr_criterion == BcrCriterion::Iqr ? "iqr" : "quartile"}};

  Recording out = recording;
  Json passes = Json::array();
  int iterations = 0;
  while (iterations < config.bcr_max_iters) {
    ++iterations;
    const auto stats = channel_sd(out);
    const auto active = out.active_channels();

    std::vector<double> norm;
    for (int c : active) norm.push_back(stats.normalized_sd[static_cast<std::size_t>(c)]);
    const bool has_scale = std::any_of(norm.begin(), norm.end(), [](double v) { return v > 0.0; });
    double fence = std::numeric_limits<double>::infinity();
    if (has_scale) {
      const double q75 = dsp::percentile(norm, 75.0);
      fence = config.bcr_criterion == BcrCriterion::Iqr
                  ? q75 + 1.5 * (q75 - dsp::percentile(norm, 25.0))
                  : q75;
    }

    std::vector<int> flagged;
    Json reasons = Json::object();
    for (int c : active) {
      const double sd = stats.sd_uv[static_cast<std::size_t>(c)];
      const double ns = stats.normalized_sd[static_cast<std::size_t>(c)];
      std::string reason;
      if (sd < config.bcr_sd_low_uv) {
        reason = "flat";
      } else if (sd > config.bcr_sd_high_uv) {
        reason = "high_sd";
      } else if (ns > fence) {
        reason = "outlier";
      }
      if (!reason.empty()) {
        flagged.push_back(c);
        reasons[std::to_string(c)] = reason;
      }
    }
    passes.push_back(Json{{"flagged", flagged}, {"reasons", reasons}, {"fence", has_scale ? Json(fence) : Json()}});
    if (flagged.empty()) break;
    if (out.n_active() - static_cast<int>(flagged.size()) < 2) {
      throw Error(ErrorCode::AllChannelsRejected,
                  "fewer than two channels would survive bad channel rejection");
    }
    out = out.with_channels_zeroed(flagged);
    report.rejected_channel_indices.insert(report.rejected_channel_indices.end(), flagged.begin(),
                                           flagged.end());
  }
  std::sort(report.rejected_channel_indices.begin(), report.rejected_channel_indices.end());
  report.details = Json{{"iterations", iterations}, {"passes", passes}};
  report.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return {std::move(out), std::move(report)};
}

}  // namespace neuroclean::bcr
