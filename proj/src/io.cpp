#include "neuroclean/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "neuroclean/error.hpp"

namespace neuroclean::io {

namespace fs = std::filesystem;

namespace {

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xFF000000u) >> 24) | ((v & 0x00FF0000u) >> 8) | ((v & 0x0000FF00u) << 8) |
        ((v & 0x000000FFu) << 24);
  }
  return v;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json capped(std::optional<double> v) {
  if (!v) return nullptr;
  if (std::isnan(*v)) return nullptr;
  return std::clamp(*v, -kSnrCapDb, kSnrCapDb);
}

std::optional<double> opt_double(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

fs::path sidecar_path_for(const fs::path& data_path) {
  fs::path p = data_path;
  p.replace_extension(".json");
  return p;
}

Json read_json_file(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

void write_json_file(const Json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

Recording read_recording(const fs::path& data_path, const fs::path& sidecar_path) {
  const Json meta = read_json_file(sidecar_path);
  Recording rec;
  std::int64_t n_channels = 0;
  std::int64_t n_samples = 0;
  try {
    if (meta.at("format_version").get<int>() != kFormatVersion) {
      throw Error(ErrorCode::BadVersion, "unsupported format_version");
    }
    const auto unit = meta.at("unit").get<std::string>();
    if (unit != "uV") throw Error(ErrorCode::UnitError, "unit must be \"uV\", got \"" + unit + "\"");
    n_channels = meta.at("n_channels").get<std::int64_t>();
    n_samples = meta.at("n_samples").get<std::int64_t>();
    rec.sampling_rate_hz = meta.at("sampling_rate_hz").get<double>();
    rec.line_freq_hz = opt_double(meta, "line_freq_hz");
    for (const auto& e : meta.at("events")) {
      Event ev;
      ev.sample_index = e.at("sample_index").get<std::int64_t>();
      ev.label = e.at("label").get<std::string>();
      if (e.contains("offset_samples")) ev.offset_samples = e.at("offset_samples").get<std::int64_t>();
      rec.events.push_back(std::move(ev));
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, sidecar_path.string() + ": " + e.what());
  }
  if (n_channels < 1 || n_samples < 1) throw Error(ErrorCode::SizeMismatch, "empty recording shape");

  const std::string payload = read_file(data_path);
  const auto expected = static_cast<std::uint64_t>(n_channels) * static_cast<std::uint64_t>(n_samples) * 4u;
  if (payload.size() != expected) {
    throw Error(ErrorCode::SizeMismatch, "payload has " + std::to_string(payload.size()) +
                                             " bytes, sidecar implies " + std::to_string(expected));
  }

  rec.data.resize(n_channels, n_samples);
  for (std::int64_t c = 0; c < n_channels; ++c) {
    for (std::int64_t s = 0; s < n_samples; ++s) {
      std::uint32_t bits;
      std::memcpy(&bits, payload.data() + 4 * (c * n_samples + s), 4);
      const auto value = std::bit_cast<float>(to_little_endian(bits));
      if (!std::isfinite(value)) {
        throw Error(ErrorCode::NonFinite, "non-finite sample at (" + std::to_string(c) + "," +
                                              std::to_string(s) + ")");
      }
      rec.data(c, s) = static_cast<double>(value);
    }
  }

  rec.channel_mask.assign(static_cast<std::size_t>(n_channels), true);
  if (meta.contains("channel_mask")) {
    const auto& mask = meta.at("channel_mask");
    if (!mask.is_array() || mask.size() != static_cast<std::size_t>(n_channels)) {
      throw Error(ErrorCode::SizeMismatch, "channel_mask length differs from n_channels");
    }
    for (std::size_t c = 0; c < mask.size(); ++c) rec.channel_mask[c] = mask[c].get<bool>();
  }

  const auto problems = validate(rec);
  if (!problems.empty()) throw Error(ErrorCode::InvalidArgument, problems.front());
  return rec;
}

void write_recording(const Recording& rec, const fs::path& data_path, const fs::path& sidecar_path) {
  const auto problems = validate(rec);
  if (!problems.empty()) throw Error(ErrorCode::InvalidArgument, problems.front());

  std::string payload(static_cast<std::size_t>(rec.data.size()) * 4u, '\0');
  std::size_t pos = 0;
  for (Eigen::Index c = 0; c < rec.data.rows(); ++c) {
    for (Eigen::Index s = 0; s < rec.data.cols(); ++s) {
      const auto bits = to_little_endian(std::bit_cast<std::uint32_t>(static_cast<float>(rec.data(c, s))));
      std::memcpy(payload.data() + pos, &bits, 4);
      pos += 4;
    }
  }
  {
    std::ofstream out(data_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + data_path.string());
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw Error(ErrorCode::Io, "write failed for " + data_path.string());
  }

  Json meta;
  meta["format_version"] = kFormatVersion;
  meta["n_channels"] = rec.n_channels();
  meta["n_samples"] = rec.n_samples();
  meta["sampling_rate_hz"] = rec.sampling_rate_hz;
  meta["line_freq_hz"] = rec.line_freq_hz ? Json(*rec.line_freq_hz) : Json(nullptr);
  meta["unit"] = "uV";
  meta["events"] = Json::array();
  for (const auto& e : rec.events) {
    Json je{{"sample_index", e.sample_index}, {"label", e.label}};
    if (e.offset_samples != 0) je["offset_samples"] = e.offset_samples;
    meta["events"].push_back(std::move(je));
  }
  meta["channel_mask"] = Json::array();
  for (bool m : rec.channel_mask) meta["channel_mask"].push_back(m);
  write_json_file(meta, sidecar_path);
}

Recording read_csv(const fs::path& path, double sampling_rate_hz) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = trim(line);
    if (trimmed.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const auto comma = trimmed.find(',', start);
      const auto cell = trim(trimmed.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                                   : comma - start));
      double v = 0.0;
      const auto* first = cell.data();
      const auto* last = cell.data() + cell.size();
      if (!cell.empty() && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
        throw Error(ErrorCode::NonNumericCell, "line " + std::to_string(line_no) + ": \"" +
                                                   std::string(cell) + "\"");
      }
      row.push_back(v);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorCode::RaggedRows, "line " + std::to_string(line_no) + " has " +
                                             std::to_string(row.size()) + " cells, expected " +
                                             std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::SizeMismatch, "CSV has no rows");

  Matrix data(static_cast<Eigen::Index>(rows.front().size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t s = 0; s < rows.size(); ++s) {
    for (std::size_t c = 0; c < rows[s].size(); ++c) {
      data(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(s)) = rows[s][c];
    }
  }
  return Recording::from_data(std::move(data), sampling_rate_hz);
}

Json to_json(const QaMetrics& qa) {
  Json j;
  j["snr_db"] = capped(qa.snr_db);
  j["snr_cumulative_db"] = capped(qa.snr_cumulative_db);
  j["one_over_f_similarity"] = qa.one_over_f_similarity ? Json(*qa.one_over_f_similarity) : Json(nullptr);
  j["artifact_probabilities"] =
      qa.artifact_probabilities ? Json(*qa.artifact_probabilities) : Json(nullptr);
  j["channels_retained_fraction"] = qa.channels_retained_fraction;
  j["components_rejected_fraction"] =
      qa.components_rejected_fraction ? Json(*qa.components_rejected_fraction) : Json(nullptr);
  return j;
}

namespace {

QaMetrics qa_from_json(const Json& j) {
  QaMetrics qa;
  qa.snr_db = opt_double(j, "snr_db");
  qa.snr_cumulative_db = opt_double(j, "snr_cumulative_db");
  qa.one_over_f_similarity = opt_double(j, "one_over_f_similarity");
  if (j.contains("artifact_probabilities") && !j.at("artifact_probabilities").is_null()) {
    qa.artifact_probabilities = j.at("artifact_probabilities").get<std::vector<double>>();
  }
  qa.channels_retained_fraction = j.at("channels_retained_fraction").get<double>();
  qa.components_rejected_fraction = opt_double(j, "components_rejected_fraction");
  return qa;
}

}  // namespace

Json to_json(const StageReport& r) {
  Json j;
  j["stage_name"] = r.stage_name;
  j["params"] = r.params;
  j["rejected_channel_indices"] = r.rejected_channel_indices;
  j["rejected_component_indices"] = r.rejected_component_indices;
  j["qa_before"] = to_json(r.qa_before);
  j["qa_after"] = to_json(r.qa_after);
  j["wall_time_ms"] = r.wall_time_ms;
  j["warnings"] = r.warnings;
  j["details"] = r.details;
  return j;
}

StageReport stage_report_from_json(const Json& j) {
  try {
    StageReport r;
    r.stage_name = j.at("stage_name").get<std::string>();
    r.params = j.at("params");
    r.rejected_channel_indices = j.at("rejected_channel_indices").get<std::vector<int>>();
    r.rejected_component_indices = j.at("rejected_component_indices").get<std::vector<int>>();
    r.qa_before = qa_from_json(j.at("qa_before"));
    r.qa_after = qa_from_json(j.at("qa_after"));
    r.wall_time_ms = j.at("wall_time_ms").get<double>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    r.details = j.at("details");
    return r;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("stage report: ") + e.what());
  }
}

void append_stage_log(const StageReport& report, const fs::path& log_path) {
  std::ofstream out(log_path, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::Io, "cannot open log " + log_path.string());
  out << to_json(report).dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "write failed for log " + log_path.string());
}

Json to_json(const PipelineConfig& c) {
  Json j;
  j["bandpass_low_hz"] = c.bandpass_low_hz;
  j["bandpass_high_hz"] = c.bandpass_high_hz;
  j["line_freq_hz"] = c.line_freq_hz ? Json(*c.line_freq_hz) : Json(nullptr);
  j["bcr_sd_low_uv"] = c.bcr_sd_low_uv;
  j["bcr_sd_high_uv"] = c.bcr_sd_high_uv;
  j["bcr_max_iters"] = c.bcr_max_iters;
  j["dbscan_eps"] = c.dbscan_eps;
  j["dbscan_min_samples"] = c.dbscan_min_samples;
  j["epoch_len_p"] = c.epoch_len_p;
  j["mara_skew_window_s"] = c.mara_skew_window_s;
  j["random_seed"] = c.random_seed;
  j["filter_order"] = c.filter_order;
  j["zapline_n_remove"] = c.zapline_n_remove ? Json(*c.zapline_n_remove) : Json("auto");
  j["zapline_bias_bandwidth_hz"] = c.zapline_bias_bandwidth_hz;
  j["zapline_notch_halfwidth_hz"] = c.zapline_notch_halfwidth_hz;
  j["bcr_criterion"] = c.bcr_criterion == BcrCriterion::Iqr ? "iqr" : "quartile";
  j["mara_standardize"] = c.mara_standardize;
  j["mara_reject_labels"] = c.mara_reject_labels;
  j["ica_tol"] = c.ica_tol;
  j["ica_max_iter"] = c.ica_max_iter;
  j["enable_bandpass"] = c.enable_bandpass;
  j["enable_zapline"] = c.enable_zapline;
  j["enable_channel_reject"] = c.enable_channel_reject;
  j["enable_ica"] = c.enable_ica;
  return j;
}

PipelineConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Parse, "config must be a JSON object");
  PipelineConfig c;
  const Json defaults = to_json(c);
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw Error(ErrorCode::Parse, "unknown config key \"" + key + "\"");
  }
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    get("bandpass_low_hz", c.bandpass_low_hz);
    get("bandpass_high_hz", c.bandpass_high_hz);
    c.line_freq_hz = opt_double(j, "line_freq_hz");
    get("bcr_sd_low_uv", c.bcr_sd_low_uv);
    get("bcr_sd_high_uv", c.bcr_sd_high_uv);
    get("bcr_max_iters", c.bcr_max_iters);
    get("dbscan_eps", c.dbscan_eps);
    get("dbscan_min_samples", c.dbscan_min_samples);
    get("epoch_len_p", c.epoch_len_p);
    get("mara_skew_window_s", c.mara_skew_window_s);
    get("random_seed", c.random_seed);
    get("filter_order", c.filter_order);
    if (j.contains("zapline_n_remove")) {
      const auto& v = j.at("zapline_n_remove");
      if (v.is_string()) {
        if (v.get<std::string>() != "auto") throw Error(ErrorCode::Parse, "zapline_n_remove must be \"auto\" or an integer");
        c.zapline_n_remove.reset();
      } else {
        c.zapline_n_remove = v.get<int>();
      }
    }
    get("zapline_bias_bandwidth_hz", c.zapline_bias_bandwidth_hz);
    get("zapline_notch_halfwidth_hz", c.zapline_notch_halfwidth_hz);
    if (j.contains("bcr_criterion")) {
      const auto v = j.at("bcr_criterion").get<std::string>();
      if (v == "iqr") c.bcr_criterion = BcrCriterion::Iqr;
      else if (v == "quartile") c.bcr_criterion = BcrCriterion::Quartile;
      else throw Error(ErrorCode::Parse, "bcr_criterion must be \"iqr\" or \"quartile\"");
    }
    get("mara_standardize", c.mara_standardize);
    get("mara_reject_labels", c.mara_reject_labels);
    get("ica_tol", c.ica_tol);
    get("ica_max_iter", c.ica_max_iter);
    get("enable_bandpass", c.enable_bandpass);
    get("enable_zapline", c.enable_zapline);
    get("enable_channel_reject", c.enable_channel_reject);
    get("enable_ica", c.enable_ica);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("config: ") + e.what());
  }
  check_config(c);
  return c;
}

PipelineConfig read_config(const fs::path& path) { return config_from_json(read_json_file(path)); }

}  // namespace neuroclean::io
