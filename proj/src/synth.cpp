#include "neuroclean/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "neuroclean/error.hpp"
#include "neuroclean/fft.hpp"
#include "neuroclean/stats.hpp"

namespace neuroclean::synth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Sub-stream tags, so each ingredient draws from its own generator.
enum Stream : std::uint64_t {
  kGains = 1,
  kMixing = 2,
  kSpikes = 3,
  kClassOrder = 4,
  kSourceBase = 1000,
  kSensorBase = 5000,
  kDriftBase = 7000,
  kBadBase = 9000,
};

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t tag) {
  return std::mt19937_64(dsp::seed_mix(seed, tag));
}

void normalize(std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double ss = 0.0;
  for (auto& v : x) {
    v -= m;
    ss += v * v;
  }
  const double sd = std::sqrt(ss / static_cast<double>(x.size()));
  if (sd > 0.0) {
    for (auto& v : x) v /= sd;
  }
}

// Slow wander below `f_max_hz`, unit variance.
std::vector<double> drift_noise(std::size_t n, double fs, double f_max_hz, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> white(n);
  for (auto& v : white) v = g(rng);
  auto spec = dsp::rfft(white);
  spec[0] = 0.0;
  for (std::size_t k = 1; k < spec.size(); ++k) {
    const double f = dsp::bin_frequency(k, n, fs);
    spec[k] = f < f_max_hz ? spec[k] / f : dsp::Complex(0.0);
  }
  auto x = dsp::irfft(spec, n);
  normalize(x);
  return x;
}

// Constant-envelope oscillation whose instantaneous frequency wanders
// around `f0` as an AR(1) process with a half-second memory. `harmonic`
// adds b*cos(2 phase), which skews the waveform; output has unit variance.
std::vector<double> rhythm(std::size_t n, double fs, double f0, double jitter_hz, double harmonic,
                           std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  const double a = std::exp(-1.0 / (0.5 * fs));
  const double innovation = std::sqrt(1.0 - a * a) * jitter_hz;
  double df = jitter_hz * g(rng);
  double phase = u(rng);
  const double scale = std::sqrt(2.0 / (1.0 + harmonic * harmonic));
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) {
    x[t] = scale * (std::sin(phase) + harmonic * std::cos(2.0 * phase));
    df = a * df + innovation * g(rng);
    phase = std::fmod(phase + kTwoPi * (f0 + df) / fs, kTwoPi);
  }
  return x;
}

// First column of an orthogonal circulant matrix: unit-magnitude spectrum
// with random phases.
std::vector<double> circulant_pattern(std::size_t m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  std::bernoulli_distribution coin(0.5);
  std::vector<dsp::Complex> spec(m / 2 + 1);
  for (std::size_t k = 0; k < spec.size(); ++k) spec[k] = std::polar(1.0, u(rng));
  spec[0] = coin(rng) ? 1.0 : -1.0;
  if (m % 2 == 0) spec.back() = coin(rng) ? 1.0 : -1.0;
  return dsp::irfft(spec, m);
}

std::vector<BandSignature> signatures(const SynthSpec& spec) {
  const auto& cls = *spec.classes;
  if (!cls.band_signature.empty()) return cls.band_signature;
  std::vector<BandSignature> out;
  for (int c = 0; c < cls.n_classes; ++c) {
    const double f = spec.family_rhythms_hz[static_cast<std::size_t>(c) % spec.family_rhythms_hz.size()];
    out.push_back({f - 1.0, f + 1.0, 2.0});
  }
  return out;
}

std::vector<int> good_channels(const SynthSpec& spec) {
  std::set<int> bad(spec.bad_channels.flat.begin(), spec.bad_channels.flat.end());
  bad.insert(spec.bad_channels.hot.begin(), spec.bad_channels.hot.end());
  std::vector<int> good;
  for (int c = 0; c < spec.n_channels; ++c) {
    if (!bad.contains(c)) good.push_back(c);
  }
  return good;
}

std::vector<int> spike_channels(const SynthSpec& spec, const std::vector<int>& good) {
  if (!spec.spikes->component_channels.empty()) return spec.spikes->component_channels;
  return std::vector<int>(good.begin(), good.begin() + std::min<std::ptrdiff_t>(4, std::ssize(good)));
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidArgument, "synth spec: " + what);
}

void reject_unknown(const Json& j, const Json& defaults, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::Parse, where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw Error(ErrorCode::Parse, "unknown key \"" + key + "\" in " + where);
  }
}

template <typename T>
void get(const Json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

Json line_json(const LineSpec& l) {
  return {{"freq_hz", l.freq_hz}, {"amplitude_uv", l.amplitude_uv}, {"pattern_seed", l.pattern_seed}};
}

Json spikes_json(const SpikeSpec& s) {
  return {{"component_channels", s.component_channels}, {"rate_hz", s.rate_hz},
          {"amplitude_uv", s.amplitude_uv},             {"decay_s", s.decay_s},
          {"line_leak_uv", s.line_leak_uv}};
}

Json classes_json(const ClassSpec& c) {
  Json sig = Json::array();
  for (const auto& b : c.band_signature) sig.push_back({{"lo_hz", b.lo_hz}, {"hi_hz", b.hi_hz}, {"gain", b.gain}});
  return {{"n_classes", c.n_classes},           {"trials_per_class", c.trials_per_class},
          {"trial_spacing_s", c.trial_spacing_s}, {"trial_length_s", c.trial_length_s},
          {"band_signature", sig}};
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return (aa > 0.0 && bb > 0.0) ? ab / std::sqrt(aa * bb) : 0.0;
}

}  // namespace

void check_spec(const SynthSpec& spec) {
  require(spec.n_channels >= 2, "n_channels must be >= 2");
  require(spec.fs > 0.0 && std::isfinite(spec.fs), "fs must be positive");
  require(spec.duration_s > 0.0 && spec.duration_s * spec.fs >= 16.0, "duration too short");
  require(spec.pink_exponent >= 0.0, "pink_exponent must be >= 0");
  require(!spec.family_rhythms_hz.empty(), "at least one rhythm family is required");
  for (double f : spec.family_rhythms_hz) require(f > 0.0 && f < 0.5 * spec.fs, "rhythm outside (0, fs/2)");
  require(spec.brain_amplitude_uv >= 0.0 && spec.sensor_noise_uv >= 0.0 && spec.drift_uv >= 0.0 &&
              spec.rhythm_jitter_hz >= 0.0,
          "amplitudes must be >= 0");
  require(spec.pink_fraction >= 0.0 && spec.pink_fraction <= 1.0, "pink_fraction must be in [0, 1]");
  require(spec.gain_jitter >= 0.0 && spec.gain_jitter < 1.0, "gain_jitter must be in [0, 1)");

  const auto& bad = spec.bad_channels;
  require(bad.flat_sd_uv >= 0.0 && bad.hot_sd_uv >= 0.0, "bad channel SDs must be >= 0");
  std::set<int> seen;
  for (const auto* list : {&bad.flat, &bad.hot}) {
    for (int c : *list) {
      require(c >= 0 && c < spec.n_channels, "bad channel index out of range");
      require(seen.insert(c).second, "channel listed twice among bad channels");
    }
  }
  const auto good = good_channels(spec);
  require(!good.empty(), "no healthy channels left");

  if (spec.line) {
    require(spec.line->freq_hz > 0.0 && spec.line->freq_hz < 0.5 * spec.fs, "line frequency outside (0, fs/2)");
    require(spec.line->amplitude_uv >= 0.0, "line amplitude must be >= 0");
  }
  int n_artifact = 0;
  if (spec.spikes) {
    const auto& s = *spec.spikes;
    require(s.rate_hz >= 0.0 && s.amplitude_uv >= 0.0 && s.line_leak_uv >= 0.0 && s.decay_s > 0.0,
            "spike rate, amplitude and decay must be >= 0");
    for (int c : s.component_channels) {
      require(std::find(good.begin(), good.end(), c) != good.end(), "spike channels must be healthy channels");
    }
    n_artifact = 1;
  }
  const int n_sources = spec.n_sources.value_or(static_cast<int>(good.size()) - n_artifact);
  require(n_sources >= 1 && n_sources + n_artifact <= static_cast<int>(good.size()),
          "source count must be between 1 and the healthy channel count");

  if (spec.classes) {
    const auto& c = *spec.classes;
    require(c.n_classes >= 2 && c.trials_per_class >= 1, "classes need n_classes >= 2 and trials_per_class >= 1");
    require(c.trial_spacing_s > 0.0 && c.trial_length_s > 0.0, "trial spacing and length must be positive");
    require(c.band_signature.empty() || std::ssize(c.band_signature) == c.n_classes,
            "band_signature needs one entry per class");
    for (const auto& b : c.band_signature) require(b.gain >= 0.0 && b.hi_hz > b.lo_hz, "bad band signature");
    const double needed = (c.n_classes * c.trials_per_class + 1) * c.trial_spacing_s;
    require(needed <= spec.duration_s, "trials do not fit into the recording");
  }
}

SynthSpec spec_from_json(const Json& j) {
  SynthSpec s;
  reject_unknown(j, to_json(s), "synth spec");
  try {
    get(j, "n_channels", s.n_channels);
    get(j, "fs", s.fs);
    get(j, "duration_s", s.duration_s);
    get(j, "pink_exponent", s.pink_exponent);
    get(j, "family_rhythms_hz", s.family_rhythms_hz);
    get(j, "family_harmonic", s.family_harmonic);
    if (j.contains("n_sources") && !j.at("n_sources").is_null()) s.n_sources = j.at("n_sources").get<int>();
    get(j, "brain_amplitude_uv", s.brain_amplitude_uv);
    get(j, "pink_fraction", s.pink_fraction);
    get(j, "rhythm_jitter_hz", s.rhythm_jitter_hz);
    get(j, "gain_jitter", s.gain_jitter);
    get(j, "sensor_noise_uv", s.sensor_noise_uv);
    get(j, "drift_uv", s.drift_uv);
    get(j, "seed", s.seed);
    if (j.contains("line") && !j.at("line").is_null()) {
      const Json& l = j.at("line");
      LineSpec line;
      reject_unknown(l, line_json(line), "line");
      get(l, "freq_hz", line.freq_hz);
      get(l, "amplitude_uv", line.amplitude_uv);
      get(l, "pattern_seed", line.pattern_seed);
      s.line = line;
    }
    if (j.contains("bad_channels")) {
      const Json& b = j.at("bad_channels");
      reject_unknown(b, Json{{"flat", 0}, {"hot", 0}, {"flat_sd_uv", 0}, {"hot_sd_uv", 0}}, "bad_channels");
      get(b, "flat", s.bad_channels.flat);
      get(b, "hot", s.bad_channels.hot);
      get(b, "flat_sd_uv", s.bad_channels.flat_sd_uv);
      get(b, "hot_sd_uv", s.bad_channels.hot_sd_uv);
    }
    if (j.contains("spikes") && !j.at("spikes").is_null()) {
      const Json& sp = j.at("spikes");
      SpikeSpec spikes;
      reject_unknown(sp, spikes_json(spikes), "spikes");
      get(sp, "component_channels", spikes.component_channels);
      get(sp, "rate_hz", spikes.rate_hz);
      get(sp, "amplitude_uv", spikes.amplitude_uv);
      get(sp, "decay_s", spikes.decay_s);
      get(sp, "line_leak_uv", spikes.line_leak_uv);
      s.spikes = spikes;
    }
    if (j.contains("classes") && !j.at("classes").is_null()) {
      const Json& c = j.at("classes");
      ClassSpec cls;
      reject_unknown(c, classes_json(cls), "classes");
      get(c, "n_classes", cls.n_classes);
      get(c, "trials_per_class", cls.trials_per_class);
      get(c, "trial_spacing_s", cls.trial_spacing_s);
      get(c, "trial_length_s", cls.trial_length_s);
      if (c.contains("band_signature")) {
        for (const auto& b : c.at("band_signature")) {
          cls.band_signature.push_back({b.at("lo_hz").get<double>(), b.at("hi_hz").get<double>(),
                                        b.value("gain", 1.0)});
        }
      }
      s.classes = cls;
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("synth spec: ") + e.what());
  }
  check_spec(s);
  return s;
}

Json to_json(const SynthSpec& s) {
  return {{"n_channels", s.n_channels},
          {"fs", s.fs},
          {"duration_s", s.duration_s},
          {"pink_exponent", s.pink_exponent},
          {"family_rhythms_hz", s.family_rhythms_hz},
          {"family_harmonic", s.family_harmonic},
          {"n_sources", s.n_sources ? Json(*s.n_sources) : Json(nullptr)},
          {"brain_amplitude_uv", s.brain_amplitude_uv},
          {"pink_fraction", s.pink_fraction},
          {"rhythm_jitter_hz", s.rhythm_jitter_hz},
          {"gain_jitter", s.gain_jitter},
          {"sensor_noise_uv", s.sensor_noise_uv},
          {"drift_uv", s.drift_uv},
          {"line", s.line ? line_json(*s.line) : Json(nullptr)},
          {"bad_channels",
           {{"flat", s.bad_channels.flat},
            {"hot", s.bad_channels.hot},
            {"flat_sd_uv", s.bad_channels.flat_sd_uv},
            {"hot_sd_uv", s.bad_channels.hot_sd_uv}}},
          {"spikes", s.spikes ? spikes_json(*s.spikes) : Json(nullptr)},
          {"classes", s.classes ? classes_json(*s.classes) : Json(nullptr)},
          {"seed", s.seed}};
}

std::vector<double> pink_noise(std::size_t n, double exponent, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> white(n);
  for (auto& v : white) v = g(rng);
  auto spec = dsp::rfft(white);
  spec[0] = 0.0;
  for (std::size_t k = 1; k < spec.size(); ++k) spec[k] *= std::pow(static_cast<double>(k), -0.5 * exponent);
  auto x = dsp::irfft(spec, n);
  normalize(x);
  return x;
}

Generated generate(const SynthSpec& spec) {
  check_spec(spec);
  const double fs = spec.fs;
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * fs));
  const auto ni = static_cast<Eigen::Index>(n);
  const auto good = good_channels(spec);
  const auto mg = static_cast<Eigen::Index>(good.size());
  const int n_artifact = spec.spikes ? 1 : 0;
  const int nb = spec.n_sources.value_or(static_cast<int>(mg) - n_artifact);
  const auto& rhythms = spec.family_rhythms_hz;

  Json manifest = Json::object();
  manifest["spec"] = to_json(spec);
  manifest["n_samples"] = n;
  manifest["good_channels"] = good;
  manifest["bad_channels"] = {{"flat", spec.bad_channels.flat}, {"hot", spec.bad_channels.hot}};

  // Trial layout and per-sample gain envelopes, one per class.
  std::vector<Event> events;
  std::vector<int> trial_class;
  std::vector<std::vector<double>> class_window;
  std::vector<BandSignature> sigs;
  if (spec.classes) {
    const auto& cls = *spec.classes;
    sigs = signatures(spec);
    for (int c = 0; c < cls.n_classes; ++c) {
      for (int t = 0; t < cls.trials_per_class; ++t) trial_class.push_back(c);
    }
    auto rng = stream(spec.seed, kClassOrder);
    std::shuffle(trial_class.begin(), trial_class.end(), rng);
    const auto spacing = static_cast<std::int64_t>(std::llround(cls.trial_spacing_s * fs));
    const auto len = static_cast<std::int64_t>(std::llround(cls.trial_length_s * fs));
    const auto ramp = static_cast<std::int64_t>(std::llround(0.05 * fs));
    class_window.assign(static_cast<std::size_t>(cls.n_classes), std::vector<double>(n, 0.0));
    Json trials = Json::array();
    for (std::size_t k = 0; k < trial_class.size(); ++k) {
      const int c = trial_class[k];
      const std::int64_t t = spacing * static_cast<std::int64_t>(k + 1);
      events.push_back({t, "class_" + std::to_string(c), 0});
      trials.push_back({{"sample_index", t}, {"label", events.back().label}, {"class", c}});
      const std::int64_t start = t - len / 2;
      auto& w = class_window[static_cast<std::size_t>(c)];
      for (std::int64_t s = start - ramp; s < start + len + ramp; ++s) {
        if (s < 0 || s >= static_cast<std::int64_t>(n)) continue;
        double v = 1.0;
        if (s < start) v = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(s - (start - ramp)) / static_cast<double>(ramp));
        if (s >= start + len) v = 0.5 + 0.5 * std::cos(std::numbers::pi * static_cast<double>(s - (start + len)) / static_cast<double>(ramp));
        w[static_cast<std::size_t>(s)] = std::max(w[static_cast<std::size_t>(s)], v);
      }
    }
    Json sig_json = Json::array();
    for (const auto& b : sigs) sig_json.push_back({{"lo_hz", b.lo_hz}, {"hi_hz", b.hi_hz}, {"gain", b.gain}});
    manifest["trials"] = trials;
    manifest["class_signatures"] = sig_json;
  }

  // Brain sources.
  Matrix sources(nb, ni);
  Json source_json = Json::array();
  const double a_osc = std::sqrt(1.0 - spec.pink_fraction);
  const double a_pink = std::sqrt(spec.pink_fraction);
  for (int j = 0; j < nb; ++j) {
    const std::size_t family = static_cast<std::size_t>(j) % rhythms.size();
    auto rng = stream(spec.seed, kSourceBase + static_cast<std::uint64_t>(j));
    const double harmonic = family < spec.family_harmonic.size() ? spec.family_harmonic[family] : 0.0;
    const auto osc = rhythm(n, fs, rhythms[family], spec.rhythm_jitter_hz, harmonic, rng);
    const auto bg = pink_noise(n, spec.pink_exponent, rng);
    std::vector<double> gain(n, 1.0);
    for (std::size_t c = 0; c < sigs.size(); ++c) {
      if (rhythms[family] < sigs[c].lo_hz || rhythms[family] >= sigs[c].hi_hz) continue;
      for (std::size_t t = 0; t < n; ++t) gain[t] += (sigs[c].gain - 1.0) * class_window[c][t];
    }
    for (std::size_t t = 0; t < n; ++t) sources(j, static_cast<Eigen::Index>(t)) = a_osc * gain[t] * osc[t] + a_pink * bg[t];
    source_json.push_back({{"family", family}, {"rhythm_hz", rhythms[family]}, {"harmonic", harmonic}});
  }
  manifest["sources"] = source_json;

  // Orthogonal circulant mixing over the healthy channels, with bounded
  // per-channel gains.
  auto mix_rng = stream(spec.seed, kMixing);
  const auto q = circulant_pattern(static_cast<std::size_t>(mg), mix_rng);
  auto gain_rng = stream(spec.seed, kGains);
  std::uniform_real_distribution<double> gain_dist(1.0 - spec.gain_jitter, 1.0 + spec.gain_jitter);
  const double scale = spec.brain_amplitude_uv * std::sqrt(static_cast<double>(mg) / nb);
  Matrix mixing(mg, nb);
  std::vector<double> gains;
  for (Eigen::Index c = 0; c < mg; ++c) {
    gains.push_back(gain_dist(gain_rng));
    for (Eigen::Index j = 0; j < nb; ++j) {
      mixing(c, j) = scale * gains.back() * q[static_cast<std::size_t>((c - j + mg) % mg)];
    }
  }
  manifest["channel_gains"] = gains;
  const Matrix brain = mixing * sources;

  Matrix data = Matrix::Zero(spec.n_channels, ni);
  for (Eigen::Index c = 0; c < mg; ++c) data.row(good[static_cast<std::size_t>(c)]) = brain.row(c);

  std::optional<double> line_freq;
  if (spec.line) {
    const auto& l = *spec.line;
    line_freq = l.freq_hz;
    std::mt19937_64 rng(l.pattern_seed);
    std::uniform_real_distribution<double> w(0.5, 1.5);
    std::uniform_real_distribution<double> ph(0.0, kTwoPi);
    const double phase = ph(rng);
    std::vector<double> weights(static_cast<std::size_t>(spec.n_channels), 0.0);
    for (int c : good) weights[static_cast<std::size_t>(c)] = w(rng);
    for (int c : good) {
      const double a = l.amplitude_uv * weights[static_cast<std::size_t>(c)];
      for (Eigen::Index t = 0; t < ni; ++t) data(c, t) += a * std::sin(kTwoPi * l.freq_hz * static_cast<double>(t) / fs + phase);
    }
    manifest["line"] = {{"freq_hz", l.freq_hz}, {"amplitude_uv", l.amplitude_uv}, {"phase", phase}, {"weights", weights}};
  } else {
    manifest["line"] = nullptr;
  }

  if (spec.spikes) {
    const auto& s = *spec.spikes;
    auto rng = stream(spec.seed, kSpikes);
    std::vector<double> src(n, 0.0);
    std::vector<std::int64_t> onsets;
    if (s.rate_hz > 0.0) {
      std::exponential_distribution<double> gap(s.rate_hz);
      const auto tail = static_cast<std::size_t>(std::ceil(6.0 * s.decay_s * fs));
      for (double t = gap(rng); t < spec.duration_s; t += gap(rng)) {
        const auto t0 = static_cast<std::size_t>(t * fs);
        onsets.push_back(static_cast<std::int64_t>(t0));
        for (std::size_t k = t0; k < std::min(n, t0 + tail); ++k) {
          src[k] += s.amplitude_uv * std::exp(-static_cast<double>(k - t0) / (s.decay_s * fs));
        }
      }
    }
    const double leak_freq = line_freq.value_or(60.0);
    if (s.line_leak_uv > 0.0) {
      for (std::size_t t = 0; t < n; ++t) src[t] += s.line_leak_uv * std::sin(kTwoPi * leak_freq * static_cast<double>(t) / fs);
    }
    std::uniform_real_distribution<double> w(0.5, 1.0);
    std::vector<double> pattern(static_cast<std::size_t>(spec.n_channels), 0.0);
    for (int c : spike_channels(spec, good)) pattern[static_cast<std::size_t>(c)] = w(rng);
    for (int c = 0; c < spec.n_channels; ++c) {
      const double p = pattern[static_cast<std::size_t>(c)];
      if (p == 0.0) continue;
      for (std::size_t t = 0; t < n; ++t) data(c, static_cast<Eigen::Index>(t)) += p * src[t];
    }
    manifest["spikes"] = {{"pattern", pattern},
                          {"onsets", onsets},
                          {"n_spikes", onsets.size()},
                          {"line_leak_hz", leak_freq},
                          {"line_leak_uv", s.line_leak_uv}};
  } else {
    manifest["spikes"] = nullptr;
  }

  for (int c : good) {
    if (spec.sensor_noise_uv > 0.0) {
      auto rng = stream(spec.seed, kSensorBase + static_cast<std::uint64_t>(c));
      std::normal_distribution<double> g(0.0, spec.sensor_noise_uv);
      for (Eigen::Index t = 0; t < ni; ++t) data(c, t) += g(rng);
    }
    if (spec.drift_uv > 0.0) {
      auto rng = stream(spec.seed, kDriftBase + static_cast<std::uint64_t>(c));
      const auto d = drift_noise(n, fs, 0.3, rng);
      for (Eigen::Index t = 0; t < ni; ++t) data(c, t) += spec.drift_uv * d[static_cast<std::size_t>(t)];
    }
  }

  auto fill_bad = [&](const std::vector<int>& channels, double sd) {
    for (int c : channels) {
      auto rng = stream(spec.seed, kBadBase + static_cast<std::uint64_t>(c));
      std::normal_distribution<double> g(0.0, 1.0);
      for (Eigen::Index t = 0; t < ni; ++t) data(c, t) = sd * g(rng);
    }
  };
  fill_bad(spec.bad_channels.flat, spec.bad_channels.flat_sd_uv);
  fill_bad(spec.bad_channels.hot, spec.bad_channels.hot_sd_uv);

  Generated out{Recording::from_data(std::move(data), fs), std::move(manifest)};
  out.recording.line_freq_hz = line_freq;
  out.recording.events = std::move(events);
  return out;
}

TruthScore score_against_truth(const std::vector<StageReport>& reports, const Json& manifest) {
  TruthScore score;
  std::set<int> truth;
  for (const char* key : {"flat", "hot"}) {
    for (int c : manifest.at("bad_channels").at(key).get<std::vector<int>>()) truth.insert(c);
  }
  std::set<int> rejected;
  for (const auto& r : reports) rejected.insert(r.rejected_channel_indices.begin(), r.rejected_channel_indices.end());
  int hits = 0;
  for (int c : rejected) {
    if (truth.contains(c)) ++hits;
    else score.false_channels.push_back(c);
  }
  for (int c : truth) {
    if (!rejected.contains(c)) score.missed_channels.push_back(c);
  }
  if (!rejected.empty()) score.channel_precision = static_cast<double>(hits) / static_cast<double>(rejected.size());
  if (!truth.empty()) score.channel_recall = static_cast<double>(hits) / static_cast<double>(truth.size());

  const Json& spikes = manifest.at("spikes");
  const bool injected = !spikes.is_null() &&
                        (spikes.at("n_spikes").get<int>() > 0 || spikes.at("line_leak_uv").get<double>() > 0.0);
  const auto artifact = injected ? spikes.at("pattern").get<std::vector<double>>() : std::vector<double>{};
  int matched = 0;
  for (const auto& r : reports) {
    score.components_rejected += static_cast<int>(r.rejected_component_indices.size());
    if (!injected || !r.details.contains("rejected_patterns")) continue;
    for (const auto& p : r.details.at("rejected_patterns")) {
      if (std::abs(cosine(p.get<std::vector<double>>(), artifact)) >= kPatternMatch) ++matched;
    }
  }
  if (score.components_rejected > 0) {
    score.component_precision = static_cast<double>(matched) / static_cast<double>(score.components_rejected);
  }
  if (injected) score.component_recall = matched > 0 ? 1.0 : 0.0;

  for (const auto& r : reports) {
    if (r.stage_name != "zapline") continue;
    if (r.details.contains("line_band_reduction_db")) score.line_reduction_db = r.details.at("line_band_reduction_db").get<double>();
    if (r.details.contains("offband_change_db")) score.offband_distortion_db = r.details.at("offband_change_db").get<double>();
  }
  return score;
}

Json to_json(const TruthScore& s) {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  return {{"channel_precision", s.channel_precision},
          {"channel_recall", s.channel_recall},
          {"false_channels", s.false_channels},
          {"missed_channels", s.missed_channels},
          {"component_precision", s.component_precision},
          {"component_recall", s.component_recall},
          {"components_rejected", s.components_rejected},
          {"line_reduction_db", opt(s.line_reduction_db)},
          {"offband_distortion_db", opt(s.offband_distortion_db)}};
}

}  // namespace neuroclean::synth
