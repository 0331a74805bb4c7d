#pragma once

// WAV file I/O, white-noise generation and SNR-controlled mixing.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "cgpse/error.hpp"

namespace cgpse {

struct AudioSignal {
  std::vector<double> samples;
  int sample_rate = 8000;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

/// Mean squared sample value; zero for an empty signal.
inline double mean_power(const std::vector<double>& x, std::size_t n) {
  n = std::min(n, x.size());
  if (n == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc / static_cast<double>(n);
}

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

inline void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
}

}  // namespace detail

/// Reads a 16-bit PCM mono WAV file. Samples are scaled by 1/32768.
inline AudioSignal read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::io, "cannot open wav file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    fail(ErrorCategory::format, "not a RIFF/WAVE file: " + path.string());
  }

  bool have_fmt = false;
  std::uint16_t format_tag = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    std::uint32_t chunk_size = detail::read_u32(chunk + 4);
    std::size_t body = pos + 8;
    std::size_t avail = std::min<std::size_t>(chunk_size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) fail(ErrorCategory::format, "truncated fmt chunk: " + path.string());
      format_tag = detail::read_u16(bytes.data() + body);
      channels = detail::read_u16(bytes.data() + body + 2);
      rate = detail::read_u32(bytes.data() + body + 4);
      bits = detail::read_u16(bytes.data() + body + 14);
      if (format_tag == 0xFFFE && avail >= 26) {
        // WAVE_FORMAT_EXTENSIBLE: the sub-format GUID starts with the real tag.
        format_tag = detail::read_u16(bytes.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = avail;
    }
    pos = body + chunk_size + (chunk_size & 1u);
  }

  if (!have_fmt) fail(ErrorCategory::format, "missing fmt chunk: " + path.string());
  if (channels != 1) fail(ErrorCategory::format, "non-mono input: " + path.string());
  if (format_tag != 1 || bits != 16) {
    fail(ErrorCategory::format, "unsupported encoding (need 16-bit PCM): " + path.string());
  }
  if (data == nullptr) fail(ErrorCategory::format, "missing data chunk: " + path.string());
  if (rate == 0) fail(ErrorCategory::format, "zero sample rate: " + path.string());

  AudioSignal sig;
  sig.sample_rate = static_cast<int>(rate);
  std::size_t n = data_size / 2;
  sig.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto v = static_cast<std::int16_t>(detail::read_u16(data + 2 * i));
    sig.samples[i] = static_cast<double>(v) / 32768.0;
  }
  return sig;
}

/// Writes 16-bit PCM mono. Returns the number of samples hard-clipped to
/// the representable range.
inline std::size_t write_wav(const std::filesystem::path& path, const AudioSignal& signal) {
  std::size_t clipped = 0;
  std::vector<unsigned char> out;
  const auto n = static_cast<std::uint32_t>(signal.samples.size());
  out.reserve(44 + 2 * n);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  detail::put_u32(out, 36 + 2 * n);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);
  detail::put_u16(out, 1);
  detail::put_u32(out, static_cast<std::uint32_t>(signal.sample_rate));
  detail::put_u32(out, static_cast<std::uint32_t>(signal.sample_rate) * 2);
  detail::put_u16(out, 2);
  detail::put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  detail::put_u32(out, 2 * n);
  for (double x : signal.samples) {
    require(std::isfinite(x), "write_wav: non-finite sample");
    double scaled = std::nearbyint(x * 32768.0);
    if (scaled > 32767.0 || scaled < -32768.0) {
      if (x > 1.0 || x < -1.0) ++clipped;
      scaled = std::clamp(scaled, -32768.0, 32767.0);
    }
    detail::put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) fail(ErrorCategory::io, "cannot write wav file: " + path.string());
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) fail(ErrorCategory::io, "write failed: " + path.string());
  return clipped;
}

/// I.i.d. zero-mean Gaussian samples; a pure function of (length, seed, variance).
inline AudioSignal generate_white_noise(std::size_t length, std::uint64_t seed,
                                        double variance = 1.0, int sample_rate = 8000) {
  require(length > 0, "generate_white_noise: length must be positive");
  require(variance >= 0.0, "generate_white_noise: negative variance");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(variance));
  AudioSignal sig;
  sig.sample_rate = sample_rate;
  sig.samples.resize(length);
  for (double& s : sig.samples) s = normal(rng);
  return sig;
}

/// Gain applied to `noise` so that clean/noise power ratio over the clean
/// support equals `snr_db`.
inline double snr_noise_gain(const AudioSignal& clean, const AudioSignal& noise, double snr_db) {
  require(clean.sample_rate == noise.sample_rate, "mix_at_snr: sample-rate mismatch");
  require(!clean.empty(), "mix_at_snr: empty clean signal");
  require(noise.size() >= clean.size(), "mix_at_snr: noise shorter than clean signal");
  const double p_clean = mean_power(clean.samples, clean.size());
  if (p_clean <= 0.0) fail(ErrorCategory::invalid_argument, "mix_at_snr: silent reference");
  const double p_noise = mean_power(noise.samples, clean.size());
  require(p_noise > 0.0, "mix_at_snr: silent noise");
  return std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));
}

/// clean + gain * noise, noise truncated to the clean length.
inline AudioSignal mix_at_snr(const AudioSignal& clean, const AudioSignal& noise, double snr_db) {
  const double gain = snr_noise_gain(clean, noise, snr_db);
  AudioSignal out;
  out.sample_rate = clean.sample_rate;
  out.samples.resize(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    out.samples[i] = clean.samples[i] + gain * noise.samples[i];
  }
  return out;
}

}  // namespace cgpse
