#pragma once

// Objective quality measures: segmental SNR with perceptual clamping and
// log-spectral distance.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <string>
#include <tuple>
#include <vector>

#include "cgpse/error.hpp"
#include "cgpse/signal_io.hpp"
#include "cgpse/stft.hpp"

namespace cgpse {

inline constexpr double kSsnrFloor = -10.0;
inline constexpr double kSsnrCeiling = 35.0;

/// Mean over frames of clamp(10 log10(|s_t|^2 / |s_t - e_t|^2), -10, 35).
/// Frames where the clean signal is exactly silent are skipped.
inline double ssnr(const AudioSignal& clean, const AudioSignal& enhanced, int frame_len = 512,
                   int hop = 256) {
  require(frame_len > 0 && hop > 0, "ssnr: frame length and hop must be positive");
  const std::size_t n = std::min(clean.size(), enhanced.size());
  const auto L = static_cast<std::size_t>(frame_len);
  const std::size_t frames = n >= L ? 1 + (n - L) / static_cast<std::size_t>(hop) : (n > 0 ? 1 : 0);
  double acc = 0.0;
  std::size_t used = 0;
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t start = t * static_cast<std::size_t>(hop);
    const std::size_t stop = std::min(start + L, n);
    double sig = 0.0, err = 0.0;
    for (std::size_t i = start; i < stop; ++i) {
      const double s = clean.samples[i];
      const double e = s - enhanced.samples[i];
      sig += s * s;
      err += e * e;
    }
    if (sig == 0.0) continue;
    const double db = err == 0.0 ? kSsnrCeiling : 10.0 * std::log10(sig / err);
    acc += std::clamp(db, kSsnrFloor, kSsnrCeiling);
    ++used;
  }
  if (used == 0) fail(ErrorCategory::invalid_argument, "ssnr: clean signal has no nonzero frame");
  return acc / static_cast<double>(used);
}

/// Mean over frames of the RMS (over bins) difference of log magnitudes in dB.
inline double log_spectral_distance(const AudioSignal& clean, const AudioSignal& enhanced,
                                    const StftConfig& cfg = {}) {
  const std::size_t n = std::min(clean.size(), enhanced.size());
  AudioSignal a = clean, b = enhanced;
  a.samples.resize(n);
  b.samples.resize(n);
  b.sample_rate = a.sample_rate;
  const Spectrogram sa = stft(a, cfg), sb = stft(b, cfg);
  constexpr double eps = 1e-10;
  double acc = 0.0;
  for (Eigen::Index t = 0; t < sa.num_frames(); ++t) {
    double frame = 0.0;
    for (Eigen::Index f = 0; f < sa.num_bins(); ++f) {
      const double d = 20.0 * std::log10(std::abs(sa.bins(f, t)) + eps) -
                       20.0 * std::log10(std::abs(sb.bins(f, t)) + eps);
      frame += d * d;
    }
    acc += std::sqrt(frame / static_cast<double>(sa.num_bins()));
  }
  return acc / static_cast<double>(sa.num_frames());
}

/// Share of reliable, speech-active bins whose enhanced phase differs from
/// the noisy phase by more than `min_radians`. Speech-active means the clean
/// magnitude is within `active_db` of the utterance peak.
struct PhaseChange {
  double fraction_changed = 0.0;
  Eigen::Index bins_considered = 0;
};

inline double wrapped_phase_difference(cdouble a, cdouble b) {
  return std::abs(std::arg(a * std::conj(b)));
}

inline PhaseChange phase_change(const Spectrogram& enhanced, const Spectrogram& noisy,
                                const Eigen::MatrixXd& mask, const Spectrogram& clean,
                                double min_radians = 0.1, double active_db = 40.0) {
  const Eigen::MatrixXd clean_mag = clean.bins.cwiseAbs();
  const double floor = clean_mag.maxCoeff() * std::pow(10.0, -active_db / 20.0);
  PhaseChange pc;
  Eigen::Index changed = 0;
  for (Eigen::Index t = 0; t < noisy.num_frames(); ++t) {
    for (Eigen::Index f = 0; f < noisy.num_bins(); ++f) {
      if (mask(f, t) == 0.0 || clean_mag(f, t) <= floor) continue;
      if (std::abs(enhanced.bins(f, t)) == 0.0 || std::abs(noisy.bins(f, t)) == 0.0) continue;
      ++pc.bins_considered;
      if (wrapped_phase_difference(enhanced.bins(f, t), noisy.bins(f, t)) > min_radians) ++changed;
    }
  }
  if (pc.bins_considered > 0) {
    pc.fraction_changed = static_cast<double>(changed) / static_cast<double>(pc.bins_considered);
  }
  return pc;
}

/// Largest phase deviation from the noisy spectrogram over bins where both
/// are nonzero.
inline double max_phase_deviation(const Spectrogram& enhanced, const Spectrogram& noisy) {
  double worst = 0.0;
  for (Eigen::Index t = 0; t < noisy.num_frames(); ++t)
    for (Eigen::Index f = 0; f < noisy.num_bins(); ++f) {
      if (std::abs(enhanced.bins(f, t)) == 0.0 || std::abs(noisy.bins(f, t)) == 0.0) continue;
      worst = std::max(worst, wrapped_phase_difference(enhanced.bins(f, t), noisy.bins(f, t)));
    }
  return worst;
}

struct ReportKey {
  std::string method;
  double snr_db = 0.0;
  double threshold = 0.0;
  int latent_dim = 0;

  auto tie() const { return std::tie(method, snr_db, threshold, latent_dim); }
  bool operator<(const ReportKey& o) const { return tie() < o.tie(); }
  bool operator==(const ReportKey& o) const { return tie() == o.tie(); }
};

struct ReportCell {
  double ssnr_mean = 0.0, ssnr_sd = 0.0;
  double lsd_mean = 0.0, lsd_sd = 0.0;
  int utterances = 0;
};

namespace detail {
inline std::pair<double, double> mean_sd(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0};
}
}  // namespace detail

/// Per-utterance scores aggregated by (method, SNR, threshold, latent dim).
class EnhancementReport {
 public:
  void add(const ReportKey& key, double ssnr_db, double lsd_db) {
    auto& s = samples_[key];
    s.first.push_back(std::clamp(ssnr_db, kSsnrFloor, kSsnrCeiling));
    s.second.push_back(std::max(lsd_db, 0.0));
  }

  std::map<ReportKey, ReportCell> cells() const {
    std::map<ReportKey, ReportCell> out;
    for (const auto& [key, s] : samples_) {
      ReportCell c;
      std::tie(c.ssnr_mean, c.ssnr_sd) = detail::mean_sd(s.first);
      std::tie(c.lsd_mean, c.lsd_sd) = detail::mean_sd(s.second);
      c.utterances = static_cast<int>(s.first.size());
      out.emplace(key, c);
    }
    return out;
  }

  bool empty() const { return samples_.empty(); }

  /// Columns: method,snr_db,c,K,ssnr,lsd,n_utt,ssnr_sd,lsd_sd
  void write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) fail(ErrorCategory::io, "cannot write report: " + path.string());
    out << "method,snr_db,c,K,ssnr,lsd,n_utt,ssnr_sd,lsd_sd\n";
    out.precision(6);
    out << std::fixed;
    for (const auto& [k, c] : cells()) {
      out << k.method << ',' << k.snr_db << ',' << k.threshold << ',' << k.latent_dim << ','
          << c.ssnr_mean << ',' << c.lsd_mean << ',' << c.utterances << ',' << c.ssnr_sd << ','
          << c.lsd_sd << '\n';
    }
  }

 private:
  std::map<ReportKey, std::pair<std::vector<double>, std::vector<double>>> samples_;
};

}  // namespace cgpse
