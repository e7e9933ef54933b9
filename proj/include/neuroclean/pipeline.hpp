#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "neuroclean/error.hpp"
#include "neuroclean/recording.hpp"

namespace neuroclean {

/// Stage names in execution order.
inline constexpr const char* kStageOrder[] = {"bandpass", "zapline", "channel_reject", "ica_cluster_mara",
                                              "epoch"};

/// A stage failed after the run started; carries the stage name and the
/// original error code. Reports of earlier stages are already logged.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.code(), "stage " + stage + ": " + cause.what()), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct RunOptions {
  bool epoch = false;
  /// Keep every stage output in memory and, with an output directory,
  /// write it as `NN_<stage>.ncr` (input as `00_raw.ncr`).
  bool keep_intermediates = false;
  /// When set: stage log `pipeline_log.jsonl`, the final recording
  /// `cleaned.ncr` (or `epochs.ncr`) and `report.json` are written here.
  std::optional<std::filesystem::path> output_dir;
};

struct StageOutput {
  std::string stage;
  Recording recording;
};

struct PipelineRun {
  Recording recording;
  std::optional<EpochedData> epochs;
  std::vector<StageReport> reports;
  /// Input first (as "raw"), then each executed stage; only with
  /// keep_intermediates.
  std::vector<StageOutput> stages;
};

/// bandpass -> zapline -> channel_reject -> ica_cluster_mara -> epoch.
/// Disabled stages leave no report. A stage whose prerequisite is missing,
/// such as zapline without a line frequency, reports a warning and passes
/// its input through.
///
/// Errors: InvalidArgument for an invalid recording or config before any
/// stage runs; StageError for a failure inside a stage.
PipelineRun run_pipeline(const Recording& recording, const PipelineConfig& config,
                         const RunOptions& options = {});

/// Butterworth bandpass of the configured order on every active channel;
/// a highpass when the upper edge is at or above Nyquist.
Recording bandpass(const Recording& recording, const PipelineConfig& config);

/// QA block computed for one recording, optionally against a reference.
QaMetrics measure(const Recording& recording, const Recording* previous, const Recording* raw);

/// Trials laid end to end (trial k at samples [k p, (k + 1) p)), each marked
/// by an event at its centre that carries the label.
Recording concatenate_trials(const EpochedData& epochs);

/// Report JSON of a run; wall times are the only non-deterministic fields.
Json run_report(const PipelineRun& run, const PipelineConfig& config);

}  // namespace neuroclean
