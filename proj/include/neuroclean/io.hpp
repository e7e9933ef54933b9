#pragma once

#include <filesystem>

#include "neuroclean/recording.hpp"

namespace neuroclean::io {

inline constexpr int kFormatVersion = 1;
/// Infinite SNR values are clamped to +/- this many dB when serialized.
inline constexpr double kSnrCapDb = 300.0;

/// Reads a `.ncr` payload (little-endian float32, channel-major, no header)
/// and its JSON sidecar.
///
/// Errors: Io, Parse, SizeMismatch, NonFinite, BadVersion, UnitError.
Recording read_recording(const std::filesystem::path& data_path,
                         const std::filesystem::path& sidecar_path);

/// Samples are rounded to float32. For recordings read back from disk this
/// is lossless, so write/read round-trips bit-exactly.
void write_recording(const Recording& recording, const std::filesystem::path& data_path,
                     const std::filesystem::path& sidecar_path);

/// Sidecar path convention: same stem, `.json` extension.
std::filesystem::path sidecar_path_for(const std::filesystem::path& data_path);

/// One column per channel, one row per sample; every cell must be numeric.
Recording read_csv(const std::filesystem::path& path, double sampling_rate_hz);

Json to_json(const QaMetrics& qa);
Json to_json(const StageReport& report);
StageReport stage_report_from_json(const Json& j);

/// Appends one JSON line to the log file.
void append_stage_log(const StageReport& report, const std::filesystem::path& log_path);

Json to_json(const PipelineConfig& config);
/// Keys must match PipelineConfig field names; unknown keys are rejected.
PipelineConfig config_from_json(const Json& j);
PipelineConfig read_config(const std::filesystem::path& path);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const Json& j, const std::filesystem::path& path);

}  // namespace neuroclean::io
