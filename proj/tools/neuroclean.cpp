// neuroclean: command-line front end for the cleaning pipeline.
//
// Exit status 1 means the input or arguments were rejected before any stage
// ran; 2 means a stage failed part way through.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <regex>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "neuroclean/error.hpp"
#include "neuroclean/io.hpp"
#include "neuroclean/ml_eval.hpp"
#include "neuroclean/pipeline.hpp"
#include "neuroclean/synth.hpp"

namespace fs = std::filesystem;
using namespace neuroclean;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitStage = 2;

struct RunArgs {
  fs::path input, sidecar, config, output;
  bool epoch = false;
  bool keep_intermediates = false;
  std::optional<std::uint64_t> seed;
  std::optional<double> line_freq;
  std::string zapline_nremove;
  std::optional<double> dbscan_eps;
  std::optional<int> dbscan_min_samples;
  std::string mara_standardize;
};

struct QaArgs {
  fs::path before, after;
};

struct EvalArgs {
  fs::path input, report, config;
  std::vector<std::string> bands{"full"};
  int repeats = 100;
  std::optional<std::uint64_t> seed;
  bool search = false;
};

struct SynthArgs {
  fs::path spec, output;
};

Recording load(const fs::path& data, const fs::path& sidecar = {}) {
  return io::read_recording(data, sidecar.empty() ? io::sidecar_path_for(data) : sidecar);
}

std::string fmt_db(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", std::clamp(*v, -io::kSnrCapDb, io::kSnrCapDb));
  return buf;
}

int cmd_run(const RunArgs& a) {
  const Recording rec = load(a.input, a.sidecar);
  PipelineConfig cfg = a.config.empty() ? PipelineConfig{} : io::read_config(a.config);
  if (a.seed) cfg.random_seed = *a.seed;
  if (a.line_freq) cfg.line_freq_hz = *a.line_freq;
  if (a.zapline_nremove == "auto") {
    cfg.zapline_n_remove.reset();
  } else if (!a.zapline_nremove.empty()) {
    cfg.zapline_n_remove = std::stoi(a.zapline_nremove);
  }
  if (a.dbscan_eps) cfg.dbscan_eps = *a.dbscan_eps;
  if (a.dbscan_min_samples) cfg.dbscan_min_samples = *a.dbscan_min_samples;
  if (!a.mara_standardize.empty()) cfg.mara_standardize = a.mara_standardize == "on";

  RunOptions opts;
  opts.epoch = a.epoch;
  opts.keep_intermediates = a.keep_intermediates;
  opts.output_dir = a.output;
  const PipelineRun run = run_pipeline(rec, cfg, opts);

  std::printf("%-18s %10s %10s %9s %11s %10s\n", "stage", "snr_db", "snr_raw_db", "channels", "components", "time_ms");
  for (const auto& r : run.reports) {
    std::printf("%-18s %10s %10s %9zu %11zu %10.1f\n", r.stage_name.c_str(), fmt_db(r.qa_after.snr_db).c_str(),
                fmt_db(r.qa_after.snr_cumulative_db).c_str(), r.rejected_channel_indices.size(),
                r.rejected_component_indices.size(), r.wall_time_ms);
    for (const auto& w : r.warnings) std::fprintf(stderr, "warning [%s]: %s\n", r.stage_name.c_str(), w.c_str());
  }
  std::printf("output: %s\n", fs::path(a.output).string().c_str());
  return kExitOk;
}

int cmd_qa(const QaArgs& a) {
  const Recording before = load(a.before);
  const Recording after = load(a.after);
  const Json out{{"before", io::to_json(measure(before, nullptr, nullptr))},
                 {"after", io::to_json(measure(after, &before, nullptr))}};
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

/// `NN_<stage>.ncr` files of a run directory, in stage order.
std::vector<std::pair<std::string, fs::path>> stage_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, "not a directory: " + dir.string());
  static const std::regex pattern(R"(^(\d\d)_(.+)\.ncr$)");
  std::vector<std::pair<std::string, fs::path>> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && std::regex_match(name, m, pattern)) files.emplace_back(m[2].str(), entry.path());
  }
  std::sort(files.begin(), files.end(), [](const auto& x, const auto& y) { return x.second.filename() < y.second.filename(); });
  if (files.empty()) {
    throw Error(ErrorCode::Io, "no stage recordings (NN_<stage>.ncr) in " + dir.string() +
                                   "; run with --keep-intermediates");
  }
  return files;
}

int cmd_eval(const EvalArgs& a) {
  std::vector<std::pair<std::string, Recording>> staged;
  for (const auto& [stage, path] : stage_files(a.input)) staged.emplace_back(stage, load(path));
  const auto events = staged.front().second.events;

  PipelineConfig cfg;
  if (!a.config.empty()) {
    cfg = io::read_config(a.config);
  } else if (fs::exists(a.input / "report.json")) {
    cfg = io::config_from_json(io::read_json_file(a.input / "report.json").at("config"));
  }
  if (a.seed) cfg.random_seed = *a.seed;
  for (const auto& b : a.bands) ml::band_by_name(b);

  ml::EvalOptions opts;
  opts.repeats = a.repeats;
  opts.bands = a.bands;
  opts.seed = cfg.random_seed;
  opts.run_search = a.search;
  opts.search.seed = cfg.random_seed;
  const auto results = ml::evaluate_pipeline_steps(staged, events, cfg, opts);

  Json steps = Json::array();
  std::printf("%-18s %-12s %9s %9s\n", "stage", "band", "mlr_test", "shuffled");
  for (const auto& r : results) {
    steps.push_back(ml::to_json(r));
    double shuffled = 0.0;
    for (double v : r.mlr_shuffled_test_accuracy) shuffled += v;
    if (!r.mlr_shuffled_test_accuracy.empty()) shuffled /= static_cast<double>(r.mlr_shuffled_test_accuracy.size());
    std::printf("%-18s %-12s %9.3f %9.3f\n", r.stage.c_str(), r.band.c_str(), r.mean_test_accuracy(), shuffled);
  }
  io::write_json_file(Json{{"config", io::to_json(cfg)}, {"repeats", a.repeats}, {"steps", steps}}, a.report);
  return kExitOk;
}

int cmd_synth(const SynthArgs& a) {
  const auto spec = synth::spec_from_json(io::read_json_file(a.spec));
  const auto generated = synth::generate(spec);
  fs::create_directories(a.output);
  const fs::path data = a.output / "synth.ncr";
  io::write_recording(generated.recording, data, io::sidecar_path_for(data));
  io::write_json_file(generated.manifest, a.output / "manifest.json");
  std::printf("wrote %s (%ld channels x %ld samples at %g Hz) and manifest.json\n", data.string().c_str(),
              static_cast<long>(generated.recording.n_channels()), static_cast<long>(generated.recording.n_samples()),
              generated.recording.sampling_rate_hz);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NeuroClean: EEG/LFP artifact removal pipeline"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Clean a recording");
  run_cmd->add_option("--input", run.input, "Recording payload (.ncr)")->required();
  run_cmd->add_option("--sidecar", run.sidecar, "JSON sidecar (default: same stem, .json)");
  run_cmd->add_option("--config", run.config, "Pipeline config JSON (default: built-in defaults)");
  run_cmd->add_option("--output", run.output, "Output directory")->required();
  run_cmd->add_flag("--epoch", run.epoch, "Cut trials around the events");
  run_cmd->add_flag("--keep-intermediates", run.keep_intermediates, "Write every stage output as NN_<stage>.ncr");
  run_cmd->add_option("--seed", run.seed, "Random seed (overrides the config)");
  run_cmd->add_option("--line-freq", run.line_freq, "Mains frequency in Hz")->check(CLI::IsMember({50.0, 60.0}));
  run_cmd->add_option("--zapline-nremove", run.zapline_nremove, "Components removed by zapline: auto or K")
      ->check(CLI::IsMember({"auto"}) | CLI::TypeValidator<int>());
  run_cmd->add_option("--dbscan-eps", run.dbscan_eps, "DBSCAN neighbourhood radius");
  run_cmd->add_option("--dbscan-min-samples", run.dbscan_min_samples, "DBSCAN core point threshold");
  run_cmd->add_option("--mara-standardize", run.mara_standardize, "Standardize MARA features: on or off")
      ->check(CLI::IsMember({"on", "off"}));

  QaArgs qa;
  auto* qa_cmd = app.add_subcommand("qa", "Compare two recordings");
  qa_cmd->add_option("--before", qa.before, "Reference recording (.ncr)")->required();
  qa_cmd->add_option("--after", qa.after, "Processed recording (.ncr)")->required();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Decode classes from every stage of a run");
  eval_cmd->add_option("--input", ev.input, "Run directory written with --keep-intermediates")->required();
  eval_cmd->add_option("--report", ev.report, "Evaluation report JSON")->required();
  eval_cmd->add_option("--bands", ev.bands, "Frequency bands (theta alpha beta ... full)");
  eval_cmd->add_option("--repeats", ev.repeats, "Train/test splits per stage")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--config", ev.config, "Pipeline config (default: the run's report.json)");
  eval_cmd->add_option("--seed", ev.seed, "Random seed");
  eval_cmd->add_flag("--search", ev.search, "Also run the incremental feature search");

  SynthArgs sy;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic recording with ground truth");
  synth_cmd->add_option("--spec", sy.spec, "Generator spec JSON")->required();
  synth_cmd->add_option("--output", sy.output, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*qa_cmd) return cmd_qa(qa);
    if (*eval_cmd) return cmd_eval(ev);
    if (*synth_cmd) return cmd_synth(sy);
  } catch (const StageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitStage;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInvalid;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInvalid;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInvalid;
  }
  return kExitInvalid;
}
