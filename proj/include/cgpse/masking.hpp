#pragma once

// Training-free noise PSD tracking and the binary reliability mask.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>

#include "cgpse/error.hpp"
#include "cgpse/stft.hpp"

namespace cgpse {

/// Minimum-statistics tracker settings: fixed recursive smoothing, a
/// trailing minimum search window and a multiplicative bias correction.
struct PsdConfig {
  double smoothing = 0.85;
  double window_seconds = 0.75;
  double bias = 1.5;

  int window_frames(int sample_rate, int hop) const {
    const double frames = window_seconds * sample_rate / hop;
    return std::max(1, static_cast<int>(std::lround(frames)));
  }
};

struct NoisePsd {
  Eigen::MatrixXd psd;  // F x T, linear power
};

struct BinaryMask {
  Eigen::MatrixXd mask;  // F x T, entries exactly 0 or 1
  double threshold = 0.0;

  Eigen::Index reliable_count() const {
    return static_cast<Eigen::Index>(mask.sum());
  }
};

struct MaskedSpectrogram {
  Spectrogram complex_bins;        // M (x) X
  Eigen::MatrixXd magnitude_bins;  // M (x) |X|
  BinaryMask mask;
};

struct ComponentEstimates {
  Eigen::MatrixXd speech;  // |S_hat|
  Eigen::MatrixXd noise;   // |N_hat|
};

inline NoisePsd estimate_noise_psd(const Spectrogram& spec, const PsdConfig& cfg = {}) {
  require(cfg.smoothing >= 0.0 && cfg.smoothing < 1.0, "PsdConfig: smoothing must be in [0,1)");
  require(cfg.bias > 0.0, "PsdConfig: bias must be positive");
  const int D = cfg.window_frames(spec.sample_rate, spec.config.hop);
  const Eigen::Index F = spec.num_bins();
  const Eigen::Index T = spec.num_frames();
  if (T < D) {
    fail(ErrorCategory::invalid_argument,
         "estimate_noise_psd: too few frames (" + std::to_string(T) + " < " +
             std::to_string(D) + ")");
  }

  NoisePsd out;
  out.psd.resize(F, T);
  const double eta = cfg.smoothing;
  std::deque<std::pair<Eigen::Index, double>> window;  // monotone queue of (frame, P)
  for (Eigen::Index f = 0; f < F; ++f) {
    window.clear();
    double p = std::norm(spec.bins(f, 0));
    for (Eigen::Index t = 0; t < T; ++t) {
      const double periodogram = std::norm(spec.bins(f, t));
      if (t > 0) p = eta * p + (1.0 - eta) * periodogram;
      while (!window.empty() && window.back().second >= p) window.pop_back();
      window.emplace_back(t, p);
      while (window.front().first <= t - D) window.pop_front();
      out.psd(f, t) = cfg.bias * window.front().second;
    }
  }
  return out;
}

/// Power spectral subtraction with a zero floor.
inline ComponentEstimates estimate_components(const Spectrogram& spec, const NoisePsd& psd) {
  require(psd.psd.rows() == spec.num_bins() && psd.psd.cols() == spec.num_frames(),
          "estimate_components: shape mismatch");
  ComponentEstimates est;
  const Eigen::MatrixXd power = spec.bins.cwiseAbs2();
  est.noise = psd.psd.cwiseSqrt();
  est.speech = (power - psd.psd).cwiseMax(0.0).cwiseSqrt();
  return est;
}

/// mask = 1 iff s / (s + n) >= c; a 0/0 ratio counts as unreliable.
inline BinaryMask compute_mask(const Eigen::MatrixXd& speech, const Eigen::MatrixXd& noise,
                               double c) {
  if (!(c > 0.0 && c < 1.0)) {
    fail(ErrorCategory::invalid_argument, "compute_mask: threshold must be in (0,1)");
  }
  require(speech.rows() == noise.rows() && speech.cols() == noise.cols(),
          "compute_mask: shape mismatch");
  BinaryMask m;
  m.threshold = c;
  m.mask.resize(speech.rows(), speech.cols());
  for (Eigen::Index t = 0; t < speech.cols(); ++t) {
    for (Eigen::Index f = 0; f < speech.rows(); ++f) {
      const double s = speech(f, t);
      const double total = s + noise(f, t);
      m.mask(f, t) = (total > 0.0 && s / total >= c) ? 1.0 : 0.0;
    }
  }
  return m;
}

inline MaskedSpectrogram apply_mask(const Spectrogram& spec, const BinaryMask& mask) {
  if (mask.mask.rows() != spec.num_bins() || mask.mask.cols() != spec.num_frames()) {
    fail(ErrorCategory::invalid_argument, "apply_mask: shape mismatch");
  }
  MaskedSpectrogram out;
  out.mask = mask;
  out.complex_bins = spec;
  out.complex_bins.bins = spec.bins.cwiseProduct(mask.mask.cast<cdouble>());
  out.magnitude_bins = spec.bins.cwiseAbs().cwiseProduct(mask.mask);
  return out;
}

inline void dump_mask_csv(const BinaryMask& mask, const Spectrogram& spec,
                          const std::filesystem::path& path) {
  detail::write_matrix_csv(path, detail::dump_header(spec, "mask"), mask.mask);
}

}  // namespace cgpse
