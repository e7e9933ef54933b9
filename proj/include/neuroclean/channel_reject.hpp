#pragma once

#include <utility>
#include <vector>

#include "neuroclean/recording.hpp"

namespace neuroclean::bcr {

struct ChannelStats {
  std::vector<double> sd_uv;          // sample SD (N - 1 denominator), 0 for masked channels
  std::vector<double> normalized_sd;  // sd / median(sd of active channels), 0 for masked channels
};

ChannelStats channel_sd(const Recording& recording);

/// Iterative SD-based bad channel rejection. Flagged channels are zeroed and
/// masked; stops after `bcr_max_iters` passes or on a pass that flags
/// nothing. Throws AllChannelsRejected when fewer than two channels survive.
std::pair<Recording, StageReport> reject_bad_channels(const Recording& recording,
                                                      const PipelineConfig& config);

}  // namespace neuroclean::bcr
