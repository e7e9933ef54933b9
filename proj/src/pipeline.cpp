#include "neuroclean/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>

#include "neuroclean/channel_reject.hpp"
#include "neuroclean/cluster_mara.hpp"
#include "neuroclean/epoch.hpp"
#include "neuroclean/ica.hpp"
#include "neuroclean/iir.hpp"
#include "neuroclean/io.hpp"
#include "neuroclean/qa.hpp"
#include "neuroclean/zapline.hpp"

namespace fs = std::filesystem;

namespace neuroclean {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

double retained(const Recording& r) {
  return r.n_channels() == 0 ? 0.0 : static_cast<double>(r.n_active()) / static_cast<double>(r.n_channels());
}

Matrix features_from_details(const Json& details) {
  const auto& rows = details.at("features");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(mara::kFeatureNames.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t f = 0; f < mara::kFeatureNames.size(); ++f) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = rows[i].at(std::string(mara::kFeatureNames[f])).get<double>();
    }
  }
  return m;
}

std::string stage_file_stem(std::size_t index, const std::string& stage) {
  char prefix[8];
  std::snprintf(prefix, sizeof prefix, "%02zu_", index);
  return prefix + stage;
}

class Runner {
 public:
  Runner(const Recording& raw, const PipelineConfig& config, const RunOptions& options)
      : raw_(raw), config_(config), options_(options) {
    if (options_.output_dir) {
      fs::create_directories(*options_.output_dir);
      log_path_ = *options_.output_dir / "pipeline_log.jsonl";
      std::ofstream(*log_path_, std::ios::trunc);
    }
    run_.recording = raw;
    if (options_.keep_intermediates) keep("raw", raw);
  }

  /// Runs one continuous-signal stage. `body` returns the output together
  /// with a partly filled report; QA, timing and the name are added here.
  void stage(const std::string& name, const std::function<std::pair<Recording, StageReport>(const Recording&)>& body) {
    const auto start = std::chrono::steady_clock::now();
    const Recording& in = run_.recording;
    std::pair<Recording, StageReport> result;
    try {
      result = body(in);
    } catch (const StageError&) {
      throw;
    } catch (const Error& e) {
      throw StageError(name, e);
    }
    auto& [out, report] = result;
    report.stage_name = name;
    report.qa_before = measure(in, nullptr, nullptr);
    report.qa_after = measure(out, &in, &raw_);
    if (name == "ica_cluster_mara" && report.details.contains("features")) {
      const Matrix features = features_from_details(report.details);
      if (features.rows() >= 3) report.qa_after.artifact_probabilities = qa::artifact_probability(features);
      if (features.rows() > 0) {
        report.qa_after.components_rejected_fraction =
            static_cast<double>(report.rejected_component_indices.size()) / static_cast<double>(features.rows());
      }
    }
    report.wall_time_ms = elapsed_ms(start);
    finish(std::move(report));
    run_.recording = std::move(out);
    if (options_.keep_intermediates) keep(name, run_.recording);
  }

  /// A stage that could not run: logged with a warning, input passed on.
  void skip(const std::string& name, const std::string& why) {
    StageReport report;
    report.stage_name = name;
    report.warnings.push_back("skipped: " + why);
    report.details = Json{{"skipped", true}};
    report.qa_before = measure(run_.recording, nullptr, nullptr);
    report.qa_after = report.qa_before;
    finish(std::move(report));
  }

  void epoch_stage(int p) {
    const auto start = std::chrono::steady_clock::now();
    StageReport report;
    report.stage_name = "epoch";
    report.params = Json{{"epoch_len_p", p}};
    try {
      run_.epochs = epoch(run_.recording, run_.recording.events, p);
    } catch (const Error& e) {
      throw StageError("epoch", e);
    }
    const auto kept = run_.epochs->trials.size();
    report.details = Json{{"n_events", run_.recording.events.size()},
                          {"n_trials", kept},
                          {"n_dropped", run_.recording.events.size() - kept}};
    if (kept < run_.recording.events.size()) {
      report.warnings.push_back(std::to_string(run_.recording.events.size() - kept) +
                                " events too close to the recording edges were dropped");
    }
    report.qa_before = measure(run_.recording, nullptr, nullptr);
    report.qa_after = report.qa_before;
    report.wall_time_ms = elapsed_ms(start);
    finish(std::move(report));
  }

  const Recording& current() const { return run_.recording; }
  PipelineRun take() { return std::move(run_); }

 private:
  void finish(StageReport report) {
    if (log_path_) io::append_stage_log(report, *log_path_);
    run_.reports.push_back(std::move(report));
  }

  void keep(const std::string& name, const Recording& r) {
    if (options_.output_dir) {
      const auto path = *options_.output_dir / (stage_file_stem(run_.stages.size(), name) + ".ncr");
      io::write_recording(r, path, io::sidecar_path_for(path));
    }
    run_.stages.push_back({name, r});
  }

  const Recording& raw_;
  const PipelineConfig& config_;
  const RunOptions& options_;
  std::optional<fs::path> log_path_;
  PipelineRun run_;
};

}  // namespace

Recording bandpass(const Recording& recording, const PipelineConfig& config) {
  const auto hi = effective_high_cutoff(config, recording.sampling_rate_hz);
  return dsp::filtfilt(dsp::design_butterworth(config.filter_order, config.bandpass_low_hz, hi,
                                               recording.sampling_rate_hz),
                       recording);
}

QaMetrics measure(const Recording& recording, const Recording* previous, const Recording* raw) {
  QaMetrics q;
  if (previous) q.snr_db = qa::snr_db(*previous, recording);
  if (raw) q.snr_cumulative_db = qa::snr_db(*raw, recording);
  try {
    q.one_over_f_similarity = qa::one_over_f_similarity(recording);
  } catch (const Error&) {
    // Too short or too slowly sampled for the fit band: left empty.
  }
  q.channels_retained_fraction = retained(recording);
  return q;
}

PipelineRun run_pipeline(const Recording& recording, const PipelineConfig& config, const RunOptions& options) {
  if (const auto problems = validate(recording); !problems.empty()) {
    std::string msg = "invalid recording:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw Error(ErrorCode::InvalidArgument, msg);
  }
  check_config(config);
  Runner runner(recording, config, options);

  if (config.enable_bandpass) {
    runner.stage("bandpass", [&](const Recording& in) {
      const auto hi = effective_high_cutoff(config, in.sampling_rate_hz);
      StageReport r;
      r.params = Json{{"low_hz", config.bandpass_low_hz},
                      {"high_hz", hi ? Json(*hi) : Json(nullptr)},
                      {"order", config.filter_order}};
      if (!hi) r.warnings.push_back("upper edge at or above Nyquist: highpass only");
      return std::pair{bandpass(in, config), r};
    });
  }

  if (config.enable_zapline) {
    const auto line = config.line_freq_hz ? config.line_freq_hz : runner.current().line_freq_hz;
    if (!line) {
      runner.skip("zapline", "no line frequency in the config or the sidecar");
    } else {
      runner.stage("zapline", [&](const Recording& in) {
        return zapline::apply_zapline(in, zapline::ZaplineConfig::from_pipeline(config, *line));
      });
    }
  }

  if (config.enable_channel_reject) {
    runner.stage("channel_reject", [&](const Recording& in) { return bcr::reject_bad_channels(in, config); });
  }

  if (config.enable_ica) {
    if (runner.current().n_active() < 2) {
      runner.skip("ica_cluster_mara", "fewer than two active channels");
    } else {
      runner.stage("ica_cluster_mara", [&](const Recording& in) {
        const auto dec = ica::decompose(in, config);
        return mara::reject_components(in, dec, config);
      });
    }
  }

  if (options.epoch) {
    if (runner.current().events.empty()) {
      runner.skip("epoch", "the recording has no events");
    } else {
      runner.epoch_stage(config.epoch_len_p);
    }
  }

  PipelineRun run = runner.take();
  if (options.output_dir) {
    const fs::path dir = *options.output_dir;
    if (run.epochs) {
      io::write_recording(concatenate_trials(*run.epochs), dir / "epochs.ncr", io::sidecar_path_for(dir / "epochs.ncr"));
    } else {
      io::write_recording(run.recording, dir / "cleaned.ncr", io::sidecar_path_for(dir / "cleaned.ncr"));
    }
    io::write_json_file(run_report(run, config), dir / "report.json");
  }
  return run;
}

Recording concatenate_trials(const EpochedData& epochs) {
  if (epochs.trials.empty()) throw Error(ErrorCode::NoTrialsSurvive, "no trials to write");
  const Eigen::Index p = epochs.p;
  const Eigen::Index n = static_cast<Eigen::Index>(epochs.trials.size()) * p;
  Matrix data(epochs.trials.front().data.rows(), n);
  Recording out;
  for (std::size_t k = 0; k < epochs.trials.size(); ++k) {
    const auto offset = static_cast<Eigen::Index>(k) * p;
    data.middleCols(offset, p) = epochs.trials[k].data;
    out.events.push_back({offset + p / 2, epochs.trials[k].label, 0});
  }
  auto events = std::move(out.events);
  out = Recording::from_data(std::move(data), epochs.sampling_rate_hz);
  out.events = std::move(events);
  return out;
}

Json run_report(const PipelineRun& run, const PipelineConfig& config) {
  Json reports = Json::array();
  for (const auto& r : run.reports) reports.push_back(io::to_json(r));
  Json j = Json{{"config", io::to_json(config)}, {"stages", reports}};
  if (run.epochs) {
    Json trials = Json::array();
    for (const auto& t : run.epochs->trials) trials.push_back({{"key", t.key}, {"label", t.label}});
    j["epochs"] = Json{{"p", run.epochs->p}, {"trials", trials}};
  }
  j["channel_mask"] = run.recording.channel_mask;
  return j;
}

}  // namespace neuroclean
