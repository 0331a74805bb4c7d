#pragma once

// Short-time Fourier analysis/synthesis with a periodic Hamming window.

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <string>
#include <vector>

#include "cgpse/error.hpp"
#include "cgpse/signal_io.hpp"

namespace cgpse {

using cdouble = std::complex<double>;

enum class WindowKind { hamming, hann };

struct StftConfig {
  int fft_size = 512;
  int hop = 256;
  WindowKind window = WindowKind::hamming;

  int num_bins() const { return fft_size / 2 + 1; }

  void validate() const {
    require(fft_size >= 2 && (fft_size & (fft_size - 1)) == 0,
            "StftConfig: fft_size must be a power of two >= 2");
    require(hop > 0 && hop <= fft_size, "StftConfig: hop must be in [1, fft_size]");
  }
};

/// F x T complex STFT coefficients (rows = bins, columns = frames).
struct Spectrogram {
  Eigen::MatrixXcd bins;
  StftConfig config;
  std::size_t signal_length = 0;
  int sample_rate = 8000;

  Eigen::Index num_bins() const { return bins.rows(); }
  Eigen::Index num_frames() const { return bins.cols(); }
  Eigen::MatrixXd magnitude() const { return bins.cwiseAbs(); }
};

/// Periodic (DFT-even) window of length fft_size.
inline std::vector<double> analysis_window(const StftConfig& config) {
  require(config.fft_size >= 2, "analysis_window: fft_size must be >= 2");
  const int n = config.fft_size;
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) {
    const double c = std::cos(2.0 * std::numbers::pi * i / n);
    w[i] = config.window == WindowKind::hamming ? 0.54 - 0.46 * c : 0.5 - 0.5 * c;
  }
  return w;
}

inline Eigen::Index frame_count(std::size_t length, const StftConfig& config) {
  const auto L = static_cast<std::size_t>(config.fft_size);
  const auto hop = static_cast<std::size_t>(config.hop);
  if (length < L) return 0;
  return static_cast<Eigen::Index>(1 + (length - L + hop - 1) / hop);
}

inline Spectrogram stft(const AudioSignal& signal, const StftConfig& config = {}) {
  config.validate();
  const int L = config.fft_size;
  require(signal.size() >= static_cast<std::size_t>(L), "stft: signal shorter than one frame");
  const Eigen::Index T = frame_count(signal.size(), config);
  const int F = config.num_bins();
  const auto window = analysis_window(config);

  Spectrogram spec;
  spec.config = config;
  spec.signal_length = signal.size();
  spec.sample_rate = signal.sample_rate;
  spec.bins.resize(F, T);

  Eigen::FFT<double> fft;
  std::vector<cdouble> frame(L), out(L);
  for (Eigen::Index t = 0; t < T; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * config.hop;
    for (int n = 0; n < L; ++n) {
      const std::size_t idx = start + n;
      const double x = idx < signal.size() ? signal.samples[idx] : 0.0;
      frame[n] = cdouble(x * window[n], 0.0);
    }
    fft.fwd(out, frame);
    for (int f = 0; f < F; ++f) spec.bins(f, t) = out[f];
  }
  return spec;
}

/// Overlap-add synthesis normalised by the accumulated window envelope, so
/// istft(stft(x)) == x. The imaginary parts of the DC and Nyquist bins are
/// discarded when the Hermitian-symmetric spectrum is rebuilt.
inline AudioSignal istft(const Spectrogram& spec) {
  const StftConfig& config = spec.config;
  config.validate();
  const int L = config.fft_size;
  const int F = config.num_bins();
  if (spec.num_bins() != F) {
    fail(ErrorCategory::invalid_argument, "istft: bin count does not match fft_size");
  }
  const Eigen::Index T = spec.num_frames();
  const std::size_t padded = T == 0 ? 0 : static_cast<std::size_t>(T - 1) * config.hop + L;
  const auto window = analysis_window(config);

  std::vector<double> acc(padded, 0.0), env(padded, 0.0);
  Eigen::FFT<double> fft;
  std::vector<cdouble> full(L), time(L);
  for (Eigen::Index t = 0; t < T; ++t) {
    full[0] = cdouble(spec.bins(0, t).real(), 0.0);
    for (int f = 1; f < F - 1; ++f) {
      full[f] = spec.bins(f, t);
      full[L - f] = std::conj(spec.bins(f, t));
    }
    full[L / 2] = cdouble(spec.bins(F - 1, t).real(), 0.0);
    fft.inv(time, full);
    const std::size_t start = static_cast<std::size_t>(t) * config.hop;
    for (int n = 0; n < L; ++n) {
      acc[start + n] += time[n].real();
      env[start + n] += window[n];
    }
  }

  AudioSignal out;
  out.sample_rate = spec.sample_rate;
  const std::size_t length = spec.signal_length > 0 ? spec.signal_length : padded;
  out.samples.assign(length, 0.0);
  for (std::size_t i = 0; i < std::min(length, padded); ++i) {
    out.samples[i] = env[i] > 0.0 ? acc[i] / env[i] : 0.0;
  }
  return out;
}

/// Frobenius energy of STFT(iSTFT(S)) - S relative to that of S. Zero for
/// spectrograms that are the STFT of some signal.
inline double inconsistency_ratio(const Spectrogram& spec) {
  const double denom = spec.bins.squaredNorm();
  if (denom == 0.0) return 0.0;
  const Spectrogram again = stft(istft(spec), spec.config);
  return (again.bins - spec.bins).squaredNorm() / denom;
}

namespace detail {

inline void write_matrix_csv(const std::filesystem::path& path, const std::string& header,
                             const Eigen::MatrixXd& m) {
  std::ofstream out(path);
  if (!out) fail(ErrorCategory::io, "cannot write csv: " + path.string());
  out << header << '\n' << std::setprecision(10);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << m(r, c);
    }
    out << '\n';
  }
}

inline std::string dump_header(const Spectrogram& spec, const char* what) {
  return std::string("# ") + what + " fft_size=" + std::to_string(spec.config.fft_size) +
         ",hop=" + std::to_string(spec.config.hop) +
         ",sample_rate=" + std::to_string(spec.sample_rate);
}

}  // namespace detail

/// Writes `<stem>_mag.csv` and `<stem>_phase.csv` (rows = bins, columns = frames).
inline void dump_spectrogram_csv(const Spectrogram& spec, const std::filesystem::path& stem) {
  Eigen::MatrixXd phase(spec.bins.rows(), spec.bins.cols());
  for (Eigen::Index t = 0; t < spec.bins.cols(); ++t)
    for (Eigen::Index f = 0; f < spec.bins.rows(); ++f) phase(f, t) = std::arg(spec.bins(f, t));
  detail::write_matrix_csv(stem.string() + "_mag.csv", detail::dump_header(spec, "magnitude"),
                           spec.magnitude());
  detail::write_matrix_csv(stem.string() + "_phase.csv", detail::dump_header(spec, "phase_rad"),
                           phase);
}

}  // namespace cgpse
