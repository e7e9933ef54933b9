#pragma once

#include <vector>

#include "neuroclean/recording.hpp"

namespace neuroclean {

/// Cuts one trial of p samples per event, starting floor(p/2) samples before
/// the event (shifted by its offset). Trials that would leave the recording
/// are dropped. Trial keys are the event's position in `events`.
/// Throws InvalidArgument for p < 2 and NoTrialsSurvive when nothing is left.
EpochedData epoch(const Recording& recording, const std::vector<Event>& events, int p);

}  // namespace neuroclean
