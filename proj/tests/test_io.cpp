#include "doctest.h"

#include <cstring>
#include <fstream>
#include <random>

#include "neuroclean/error.hpp"
#include "neuroclean/io.hpp"
#include "test_util.hpp"

using namespace neuroclean;
namespace fs = std::filesystem;

namespace {

void write_bytes(const fs::path& p, const std::vector<float>& values, std::size_t n_bytes) {
  std::string buf(values.size() * 4, '\0');
  std::memcpy(buf.data(), values.data(), buf.size());
  std::ofstream out(p, std::ios::binary);
  out.write(buf.data(), static_cast<std::streamsize>(n_bytes));
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string sidecar_text(int channels, int samples, const std::string& unit = "uV", int version = 1) {
  return R"({"format_version":)" + std::to_string(version) + R"(,"n_channels":)" +
         std::to_string(channels) + R"(,"n_samples":)" + std::to_string(samples) +
         R"(,"sampling_rate_hz":250.0,"line_freq_hz":60,"unit":")" + unit + R"(","events":[{"sample_index":1,"label":"Reach"}]})";
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

Recording random_recording(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> ch(1, 6), len(2, 50);
  std::normal_distribution<float> v(0.0f, 30.0f);
  const int c = ch(rng), n = len(rng);
  Matrix m(c, n);
  // Values representable in float32, as everything read from disk is.
  for (int i = 0; i < c; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = static_cast<double>(v(rng));
  auto r = Recording::from_data(m, 100.0 + static_cast<double>(seed));
  if (seed % 2 == 0) r.line_freq_hz = 50.0;
  std::uniform_int_distribution<int> ev(0, n - 1);
  for (int k = 0; k < 3; ++k) r.events.push_back({ev(rng), "class_" + std::to_string(k)});
  if (c > 1 && seed % 3 == 0) r = r.with_channels_zeroed({0});
  return r;
}

}  // namespace

TEST_CASE("read_recording lays the payload out channel-major") {
  const auto dir = testutil::scratch_dir("io_layout");
  write_bytes(dir / "r.ncr", {1, 2, 3, 4, 5, 6}, 24);
  write_text(dir / "r.json", sidecar_text(2, 3));
  const auto r = io::read_recording(dir / "r.ncr", dir / "r.json");
  REQUIRE(r.n_channels() == 2);
  REQUIRE(r.n_samples() == 3);
  CHECK(r.data(0, 0) == 1.0);
  CHECK(r.data(0, 2) == 3.0);
  CHECK(r.data(1, 0) == 4.0);
  CHECK(r.data(1, 2) == 6.0);
  CHECK(r.line_freq_hz == 60.0);
  REQUIRE(r.events.size() == 1);
  CHECK(r.events[0].label == "Reach");
  CHECK(r.n_active() == 2);
}

TEST_CASE("read_recording error paths") {
  const auto dir = testutil::scratch_dir("io_errors");
  write_bytes(dir / "short.ncr", {1, 2, 3, 4, 5, 6}, 20);
  write_text(dir / "short.json", sidecar_text(2, 3));
  CHECK(code_of([&] { io::read_recording(dir / "short.ncr", dir / "short.json"); }) ==
        ErrorCode::SizeMismatch);

  write_bytes(dir / "mv.ncr", {1, 2, 3, 4, 5, 6}, 24);
  write_text(dir / "mv.json", sidecar_text(2, 3, "mV"));
  CHECK(code_of([&] { io::read_recording(dir / "mv.ncr", dir / "mv.json"); }) == ErrorCode::UnitError);

  write_text(dir / "v2.json", sidecar_text(2, 3, "uV", 2));
  CHECK(code_of([&] { io::read_recording(dir / "mv.ncr", dir / "v2.json"); }) == ErrorCode::BadVersion);

  write_bytes(dir / "nan.ncr", {1, 2, std::numeric_limits<float>::quiet_NaN(), 4, 5, 6}, 24);
  write_text(dir / "ok.json", sidecar_text(2, 3));
  CHECK(code_of([&] { io::read_recording(dir / "nan.ncr", dir / "ok.json"); }) == ErrorCode::NonFinite);

  CHECK(code_of([&] { io::read_recording(dir / "missing.ncr", dir / "ok.json"); }) == ErrorCode::Io);
  write_text(dir / "bad.json", "{not json");
  CHECK(code_of([&] { io::read_recording(dir / "mv.ncr", dir / "bad.json"); }) == ErrorCode::Parse);
}

TEST_CASE("write_recording then read_recording is the identity (property)") {
  const auto dir = testutil::scratch_dir("io_roundtrip");
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto r = random_recording(seed);
    io::write_recording(r, dir / "r.ncr", dir / "r.json");
    const auto back = io::read_recording(dir / "r.ncr", dir / "r.json");
    CHECK(back == r);
  }
}

TEST_CASE("writing rounds to float32 and the result is a fixed point") {
  const auto dir = testutil::scratch_dir("io_fixed_point");
  Matrix m(1, 3);
  m << 0.1, 1.0 / 3.0, 1e-7;
  io::write_recording(Recording::from_data(m, 100.0), dir / "a.ncr", dir / "a.json");
  const auto once = io::read_recording(dir / "a.ncr", dir / "a.json");
  CHECK(once.data(0, 0) == static_cast<double>(0.1f));
  io::write_recording(once, dir / "b.ncr", dir / "b.json");
  CHECK(io::read_recording(dir / "b.ncr", dir / "b.json") == once);
}

TEST_CASE("zeroing a channel changes only its payload row") {
  const auto dir = testutil::scratch_dir("io_zeroed");
  Matrix m = Matrix::Constant(4, 5, 2.5);
  auto r = Recording::from_data(m, 500.0);
  io::write_recording(r, dir / "a.ncr", dir / "a.json");
  r.data.row(3).setZero();
  io::write_recording(r, dir / "b.ncr", dir / "b.json");
  CHECK(io::read_json_file(dir / "a.json") == io::read_json_file(dir / "b.json"));
  const auto back = io::read_recording(dir / "b.ncr", dir / "b.json");
  CHECK(back.data.row(3).isZero(0.0));
  CHECK(back.data.row(2) == m.row(2));
}

TEST_CASE("empty events serialize as an empty array") {
  const auto dir = testutil::scratch_dir("io_events");
  io::write_recording(Recording::from_data(Matrix::Ones(1, 4), 100.0), dir / "a.ncr", dir / "a.json");
  const auto meta = io::read_json_file(dir / "a.json");
  CHECK(meta.at("events").is_array());
  CHECK(meta.at("events").empty());
  CHECK(meta.at("unit") == "uV");
  CHECK(meta.at("format_version") == 1);
  CHECK(io::sidecar_path_for(dir / "a.ncr") == dir / "a.json");
}

TEST_CASE("read_csv transposes samples x channels into channels x samples") {
  const auto dir = testutil::scratch_dir("io_csv");
  write_text(dir / "a.csv", "1,2\n3,4\n5,6\n");
  const auto r = io::read_csv(dir / "a.csv", 100.0);
  REQUIRE(r.n_channels() == 2);
  REQUIRE(r.n_samples() == 3);
  CHECK(r.data(0, 0) == 1.0);
  CHECK(r.data(0, 2) == 5.0);
  CHECK(r.data(1, 1) == 4.0);

  write_text(dir / "b.csv", " 1.5 , -2e3\r\n3,+4\n");
  const auto b = io::read_csv(dir / "b.csv", 100.0);
  CHECK(b.data(1, 0) == -2000.0);
  CHECK(b.data(1, 1) == 4.0);

  write_text(dir / "ragged.csv", "1,2\n3\n");
  CHECK(code_of([&] { io::read_csv(dir / "ragged.csv", 100.0); }) == ErrorCode::RaggedRows);
  write_text(dir / "abc.csv", "1,abc\n3,4\n");
  CHECK(code_of([&] { io::read_csv(dir / "abc.csv", 100.0); }) == ErrorCode::NonNumericCell);
  write_text(dir / "empty_cell.csv", "1,\n3,4\n");
  CHECK(code_of([&] { io::read_csv(dir / "empty_cell.csv", 100.0); }) == ErrorCode::NonNumericCell);
}

TEST_CASE("append_stage_log writes one JSON object per line, in order") {
  const auto dir = testutil::scratch_dir("io_log");
  const auto log = dir / "run.log.jsonl";
  StageReport a;
  a.stage_name = "bandpass";
  a.qa_after.snr_db = std::numeric_limits<double>::infinity();
  StageReport b;
  b.stage_name = "channel_reject";
  for (int i = 0; i < 27; ++i) b.rejected_channel_indices.push_back(i * 9);
  b.qa_after.channels_retained_fraction = 229.0 / 256.0;
  io::append_stage_log(a, log);
  io::append_stage_log(b, log);

  std::ifstream in(log);
  std::string line;
  std::vector<Json> lines;
  while (std::getline(in, line)) lines.push_back(Json::parse(line));
  REQUIRE(lines.size() == 2);
  CHECK(lines[0].at("stage_name") == "bandpass");
  CHECK(lines[0].at("qa_after").at("snr_db") == io::kSnrCapDb);
  CHECK(lines[1].at("stage_name") == "channel_reject");
  CHECK(lines[1].at("rejected_channel_indices").size() == 27);

  const auto parsed = io::stage_report_from_json(lines[1]);
  CHECK(parsed.rejected_channel_indices == b.rejected_channel_indices);
  CHECK(parsed.qa_after.channels_retained_fraction == doctest::Approx(229.0 / 256.0));

  std::vector<std::string> keys;
  for (const auto& [k, v] : lines[0].items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"stage_name", "params", "rejected_channel_indices",
                                         "rejected_component_indices", "qa_before", "qa_after",
                                         "wall_time_ms", "warnings", "details"});
}

TEST_CASE("config JSON mirrors PipelineConfig and rejects unknown keys") {
  PipelineConfig c;
  c.line_freq_hz = 50.0;
  c.zapline_n_remove = 2;
  c.bcr_criterion = BcrCriterion::Quartile;
  const auto back = io::config_from_json(io::to_json(c));
  CHECK(back.line_freq_hz == 50.0);
  CHECK(back.zapline_n_remove == 2);
  CHECK(back.bcr_criterion == BcrCriterion::Quartile);
  CHECK(io::to_json(back) == io::to_json(c));

  const auto partial = io::config_from_json(Json::parse(R"({"dbscan_eps": 3.5, "zapline_n_remove": "auto"})"));
  CHECK(partial.dbscan_eps == 3.5);
  CHECK_FALSE(partial.zapline_n_remove.has_value());
  CHECK(partial.bandpass_high_hz == 500.0);

  CHECK(code_of([] { io::config_from_json(Json::parse(R"({"dbscan_epsilon": 2})")); }) == ErrorCode::Parse);
  CHECK(code_of([] { io::config_from_json(Json::parse(R"({"bandpass_low_hz": 900})")); }) ==
        ErrorCode::InvalidArgument);
}
