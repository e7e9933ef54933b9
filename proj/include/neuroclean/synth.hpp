#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "neuroclean/recording.hpp"

namespace neuroclean::synth {

struct LineSpec {
  double freq_hz = 60.0;
  double amplitude_uv = 0.0;
  std::uint64_t pattern_seed = 1;
};

struct BadChannelSpec {
  std::vector<int> flat;
  std::vector<int> hot;
  double flat_sd_uv = 0.01;
  double hot_sd_uv = 300.0;
};

/// Blink-like transients: one-sided exponential decays at Poisson onsets,
/// mixed into the data through a pattern confined to `component_channels`.
struct SpikeSpec {
  std::vector<int> component_channels;
  double rate_hz = 0.25;
  double amplitude_uv = 0.0;
  double decay_s = 0.08;
  /// Mains hum riding on the same source (line-leak), peak amplitude.
  double line_leak_uv = 0.0;
};

/// Sources whose rhythm lies in [lo_hz, hi_hz) are scaled by `gain` during
/// the trials of one class.
struct BandSignature {
  double lo_hz = 0.0;
  double hi_hz = 0.0;
  double gain = 1.0;
};

struct ClassSpec {
  int n_classes = 0;
  int trials_per_class = 0;
  double trial_spacing_s = 1.5;
  double trial_length_s = 1.0;
  /// One entry per class; empty picks a default that boosts family c.
  std::vector<BandSignature> band_signature;
};

struct SynthSpec {
  int n_channels = 16;
  double fs = 1000.0;
  double duration_s = 60.0;
  double pink_exponent = 1.0;

  /// Brain sources: constant-envelope rhythms (one family per entry) with a
  /// pink background share, mixed through an orthogonal circulant pattern.
  std::vector<double> family_rhythms_hz{6.0, 10.0, 20.0, 40.0};
  /// Phase-locked second harmonic per family (relative amplitude). It makes
  /// the waveform asymmetric, the way arch-shaped rhythms are; missing
  /// entries mean a pure sinusoid.
  std::vector<double> family_harmonic{0.6, 0.0, 0.3, 0.15};
  std::optional<int> n_sources;  // empty = good channels minus artifact sources
  double brain_amplitude_uv = 10.0;
  double pink_fraction = 0.3;
  double rhythm_jitter_hz = 1.0;
  double gain_jitter = 0.3;
  double sensor_noise_uv = 0.5;
  double drift_uv = 0.0;

  std::optional<LineSpec> line;
  BadChannelSpec bad_channels;
  std::optional<SpikeSpec> spikes;
  std::optional<ClassSpec> classes;
  std::uint64_t seed = 0;
};

/// Throws Error(InvalidArgument) for an unusable spec.
void check_spec(const SynthSpec& spec);

SynthSpec spec_from_json(const Json& j);
Json to_json(const SynthSpec& spec);

/// Pink noise with PSD ~ 1/f^exponent: white Gaussian noise shaped in the
/// frequency domain, zero mean and unit variance.
std::vector<double> pink_noise(std::size_t n, double exponent, std::mt19937_64& rng);

struct Generated {
  Recording recording;
  /// Exact record of what was injected, where and with which parameters.
  Json manifest;
};

/// Deterministic in `spec` (seed included).
Generated generate(const SynthSpec& spec);

struct TruthScore {
  double channel_precision = 1.0;
  double channel_recall = 1.0;
  std::vector<int> false_channels;
  std::vector<int> missed_channels;
  double component_precision = 1.0;
  double component_recall = 1.0;
  int components_rejected = 0;
  std::optional<double> line_reduction_db;
  std::optional<double> offband_distortion_db;
};

/// A rejected component counts as the injected artifact when its channel
/// pattern correlates with the artifact pattern at |r| >= this value.
inline constexpr double kPatternMatch = 0.9;

/// Scores stage reports of a pipeline run against a generator manifest.
/// Vacuous precision/recall (nothing rejected / nothing injected) is 1.
TruthScore score_against_truth(const std::vector<StageReport>& reports, const Json& manifest);

Json to_json(const TruthScore& score);

}  // namespace neuroclean::synth
