#include "neuroclean/epoch.hpp"

#include "neuroclean/error.hpp"

namespace neuroclean {

EpochedData epoch(const Recording& recording, const std::vector<Event>& events, int p) {
  if (p < 2) throw Error(ErrorCode::InvalidArgument, "epoch length must be >= 2");
  EpochedData out;
  out.p = p;
  out.sampling_rate_hz = recording.sampling_rate_hz;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    const std::int64_t start = e.sample_index + e.offset_samples - p / 2;
    if (start < 0 || start + p > recording.n_samples()) continue;
    Trial t;
    t.data = recording.data.middleCols(static_cast<Eigen::Index>(start), p);
    t.label = e.label;
    t.key = static_cast<std::int64_t>(i);
    out.trials.push_back(std::move(t));
  }
  if (out.trials.empty()) throw Error(ErrorCode::NoTrialsSurvive, "no event has a full window inside the recording");
  return out;
}

}  // namespace neuroclean
