#pragma once

// Deterministic synthetic speech-like corpus: "speakers" read sequences of
// ten tonal "digits". Each digit is a harmonic source with a tone contour
// (pitch FM), an attack/release envelope (AM) and moving formants; speakers
// differ in pitch register, vocal-tract scale and loudness. Digits are
// separated by exact digital silence.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "cgpse/error.hpp"
#include "cgpse/signal_io.hpp"

namespace cgpse {

struct SynthConfig {
  std::uint64_t seed = 2017;
  int train_speakers = 8;
  int test_speakers = 6;
  int sample_rate = 8000;
  /// Digit onsets and silences are multiples of this many samples.
  int frame_grid = 256;
  int digits_per_utterance = 6;
  double min_seconds = 2.0;
  double max_seconds = 4.0;
  /// Relative spread of the speakers' pitch around the shared register.
  double pitch_spread = 0.0;
  /// Relative per-digit pitch variation within a speaker (prosody).
  double digit_pitch_jitter = 0.0;
  int max_harmonics = 40;
};

struct SynthUtterance {
  std::string name;
  bool train = false;
  int speaker = 0;
  std::vector<int> digits;
  AudioSignal signal;
  /// Largest number of simultaneously sounding partials.
  int max_partials = 0;
};

namespace detail {

struct DigitShape {
  int tone;                       // 1 flat, 2 rising, 3 dipping, 4 falling
  int frames;                     // duration in frame-grid units
  std::array<double, 3> f_start;  // formant frequencies at onset (Hz)
  std::array<double, 3> f_end;    // at offset
};

inline const std::array<DigitShape, 10>& digit_table() {
  static const std::array<DigitShape, 10> table{{
      {2, 11, {{350, 2200, 2900}}, {{650, 1300, 2500}}},  // ling
      {1, 9, {{300, 2300, 3000}}, {{300, 2300, 3000}}},   // yi
      {4, 10, {{700, 1200, 2600}}, {{450, 1700, 2600}}},  // er
      {1, 11, {{600, 1400, 2500}}, {{700, 1200, 2500}}},  // san
      {4, 10, {{350, 1900, 2700}}, {{450, 1500, 2600}}},  // si
      {3, 12, {{400, 900, 2400}}, {{350, 700, 2300}}},    // wu
      {4, 10, {{320, 800, 2300}}, {{550, 1000, 2400}}},   // liu
      {1, 9, {{320, 2200, 2900}}, {{350, 2000, 2800}}},   // qi
      {1, 10, {{750, 1300, 2500}}, {{650, 1100, 2500}}},  // ba
      {3, 12, {{350, 2100, 2800}}, {{500, 900, 2400}}},   // jiu
  }};
  return table;
}

/// Pitch multiplier over normalised time u in [0, 1].
inline double tone_contour(int tone, double u) {
  switch (tone) {
    case 1: return 1.0;
    case 2: return 0.85 + 0.3 * u;
    case 3: return 0.95 - 0.35 * std::sin(std::numbers::pi * u);
    default: return 1.2 - 0.4 * u;
  }
}

struct Speaker {
  double f0;
  double formant_scale;
  double gain;
  double tilt;  // dB per kHz
};

inline double envelope(std::size_t n, std::size_t len, int sample_rate) {
  const double attack = 0.03 * sample_rate;
  const double release = 0.06 * sample_rate;
  const double x = static_cast<double>(n);
  double e = 1.0;
  if (x < attack) e = 0.5 - 0.5 * std::cos(std::numbers::pi * x / attack);
  const double rem = static_cast<double>(len - n);
  if (rem < release) e *= 0.5 - 0.5 * std::cos(std::numbers::pi * rem / release);
  return e * (0.85 + 0.15 * std::cos(std::numbers::pi * x / static_cast<double>(len)));
}

inline double formant_gain(double freq, const std::array<double, 3>& formants, double tilt_db) {
  static constexpr std::array<double, 3> bandwidth{90.0, 120.0, 180.0};
  static constexpr std::array<double, 3> weight{1.0, 0.6, 0.3};
  double g = 0.02;
  for (int i = 0; i < 3; ++i) {
    const double d = (freq - formants[i]) / bandwidth[i];
    g += weight[i] / (1.0 + d * d);
  }
  return g * std::pow(10.0, -tilt_db * freq / 1000.0 / 20.0);
}

/// Renders one digit; returns the number of partials used.
inline int render_digit(const DigitShape& d, const Speaker& spk, int sample_rate, int grid,
                        int max_harmonics, std::vector<double>& out) {
  const std::size_t len = static_cast<std::size_t>(d.frames) * static_cast<std::size_t>(grid);
  const double nyquist_guard = 0.95 * sample_rate / 2.0;
  const double peak_f0 = spk.f0 * 1.2;
  const int harmonics = std::min(max_harmonics, static_cast<int>(nyquist_guard / peak_f0));
  std::array<double, 3> formants{};
  double cycle = 0.0;
  for (std::size_t n = 0; n < len; ++n) {
    const double u = static_cast<double>(n) / static_cast<double>(len);
    const double f0 = spk.f0 * tone_contour(d.tone, u);
    for (int i = 0; i < 3; ++i) {
      formants[i] = spk.formant_scale * (d.f_start[i] + (d.f_end[i] - d.f_start[i]) * u);
    }
    double s = 0.0;
    for (int h = 1; h <= harmonics; ++h) {
      s += formant_gain(h * f0, formants, spk.tilt) * std::cos(h * cycle);
    }
    out.push_back(spk.gain * envelope(n, len, sample_rate) * s);
    cycle += 2.0 * std::numbers::pi * f0 / sample_rate;
  }
  return harmonics;
}

}  // namespace detail

inline std::vector<SynthUtterance> synthesize_corpus(const SynthConfig& cfg = {}) {
  require(cfg.train_speakers >= 1 && cfg.test_speakers >= 1, "synth: need train and test speakers");
  require(cfg.frame_grid > 0 && cfg.sample_rate > 0, "synth: invalid rate or grid");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const auto& table = detail::digit_table();
  const int grid = cfg.frame_grid;
  const auto min_len = static_cast<std::size_t>(cfg.min_seconds * cfg.sample_rate);
  const auto max_len = static_cast<std::size_t>(cfg.max_seconds * cfg.sample_rate);

  std::vector<SynthUtterance> corpus;
  const int speakers = cfg.train_speakers + cfg.test_speakers;
  for (int s = 0; s < speakers; ++s) {
    const bool female = s % 2 == 1;
    detail::Speaker spk;
    const double register_f0 = female ? 200.0 : 125.0;
    spk.f0 = register_f0 * (1.0 + cfg.pitch_spread * (2.0 * uni(rng) - 1.0));
    spk.formant_scale = (female ? 1.1 : 0.95) + 0.08 * (uni(rng) - 0.5);
    spk.gain = 0.12 + 0.08 * uni(rng);
    spk.tilt = 1.0 + 2.0 * uni(rng);

    SynthUtterance utt;
    utt.train = s < cfg.train_speakers;
    utt.speaker = s;
    utt.name = (utt.train ? "train_spk" : "test_spk") + std::to_string(s);
    utt.signal.sample_rate = cfg.sample_rate;
    auto& x = utt.signal.samples;
    auto silence = [&](int units) { x.insert(x.end(), static_cast<std::size_t>(units * grid), 0.0); };

    silence(6 + static_cast<int>(uni(rng) * 3));
    const int start_digit = static_cast<int>(uni(rng) * 10);
    for (int k = 0; k < cfg.digits_per_utterance; ++k) {
      const int digit = (start_digit + k) % 10;
      const auto& shape = table[static_cast<std::size_t>(digit)];
      const std::size_t planned = x.size() + static_cast<std::size_t>(shape.frames * grid) +
                                  static_cast<std::size_t>(6 * grid);
      if (k > 0 && planned > max_len) break;
      utt.digits.push_back(digit);
      detail::Speaker voiced = spk;
      voiced.f0 *= 1.0 + cfg.digit_pitch_jitter * (2.0 * uni(rng) - 1.0);
      utt.max_partials = std::max(
          utt.max_partials,
          detail::render_digit(shape, voiced, cfg.sample_rate, grid, cfg.max_harmonics, x));
      silence(4 + static_cast<int>(uni(rng) * 3));
    }
    while (x.size() < min_len) silence(1);
    silence(2);
    if (x.size() > max_len) x.resize(max_len);
    double peak = 0.0;
    for (double v : x) peak = std::max(peak, std::abs(v));
    if (peak > 0.0) {
      const double scale = 2.0 * spk.gain / peak;
      for (double& v : x) v *= scale;
    }
    corpus.push_back(std::move(utt));
  }
  return corpus;
}

/// Writes `<dir>/<name>.wav` files and `<dir>/manifest.json` listing the
/// train/test split.
inline void write_corpus(const std::vector<SynthUtterance>& corpus,
                         const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCategory::io, "cannot create corpus directory: " + dir.string());
  nlohmann::json manifest;
  manifest["sample_rate"] = corpus.empty() ? 8000 : corpus.front().signal.sample_rate;
  manifest["train"] = nlohmann::json::array();
  manifest["test"] = nlohmann::json::array();
  for (const auto& u : corpus) {
    const std::string file = u.name + ".wav";
    write_wav(dir / file, u.signal);
    manifest[u.train ? "train" : "test"].push_back(file);
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) fail(ErrorCategory::io, "cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

}  // namespace cgpse
