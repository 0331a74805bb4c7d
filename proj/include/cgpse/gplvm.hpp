#pragma once

// Real-valued GPLVM over magnitude spectra: each frequency band is an
// independent GP over shared latent points.

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "cgpse/gp_core.hpp"
#include "cgpse/masking.hpp"
#include "cgpse/stft.hpp"

namespace cgpse {

class GplvmModel {
 public:
  static constexpr int kVersion = 1;

  GplvmModel() = default;

  /// Builds the solve caches for fixed latents and hyperparameters.
  static GplvmModel assemble(Eigen::MatrixXd Y, Eigen::MatrixXd Z, const KernelParams& p) {
    require(Y.cols() == Z.cols(), "GplvmModel: Y and Z column counts differ");
    require((Y.array() >= 0.0).all(), "GplvmModel: magnitudes must be nonnegative");
    GplvmModel m;
    m.gp_ = detail::FrozenGp::build(LatentKind::real, Z, Y, p);
    m.Y_ = std::move(Y);
    m.Z_ = std::move(Z);
    return m;
  }

  const Eigen::MatrixXd& latents() const { return Z_; }
  const Eigen::MatrixXd& data() const { return Y_; }
  const KernelParams& params() const { return gp_.params; }
  Eigen::Index latent_dim() const { return Z_.rows(); }
  Eigen::Index num_bins() const { return Y_.rows(); }
  Eigen::Index num_frames() const { return Y_.cols(); }
  double log_likelihood() const { return gp_.train_log_likelihood; }
  const detail::FrozenGp& core() const { return gp_; }

 private:
  Eigen::MatrixXd Y_;
  Eigen::MatrixXd Z_;
  detail::FrozenGp gp_;
};

struct GplvmTraining {
  GplvmModel model;
  OptimizeResult optimization;
  double initial_objective = 0.0;
  double final_objective = 0.0;
};

/// Top-K principal components of the centred columns of Y, each scaled to
/// unit variance.
inline Eigen::MatrixXd pca_latents(const Eigen::MatrixXd& Y, Eigen::Index K) {
  const Eigen::VectorXd mean = Y.rowwise().mean();
  const Eigen::MatrixXd centered = Y.colwise() - mean;
  const Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(Y.cols());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::MatrixXd basis = eig.eigenvectors().rightCols(K).rowwise().reverse();
  Eigen::MatrixXd Z = basis.transpose() * centered;
  for (Eigen::Index k = 0; k < K; ++k) {
    const double var = Z.row(k).squaredNorm() / static_cast<double>(Z.cols());
    if (var > 1e-300) Z.row(k) /= std::sqrt(var);
  }
  return Z;
}

inline GplvmTraining train_gplvm(const Eigen::MatrixXd& Y, int K, const TrainConfig& cfg = {}) {
  require(K >= 1, "train_gplvm: latent dimension must be >= 1");
  require(Y.cols() >= 2, "train_gplvm: need at least two training frames");
  require(K < std::min(Y.rows(), Y.cols()), "train_gplvm: latent dimension must be < min(F, M)");
  require(Y.allFinite() && (Y.array() >= 0.0).all(),
          "train_gplvm: magnitudes must be finite and nonnegative");
  if (Y.squaredNorm() == 0.0) fail(ErrorCategory::invalid_argument, "train_gplvm: all-zero data");

  const Eigen::MatrixXd Z0 = pca_latents(Y, K);
  const KernelParams init = detail::initial_params(LatentKind::real, Y, K, cfg);
  auto outcome = detail::train(LatentKind::real, Z0, Y, init, cfg);

  GplvmTraining out;
  out.model = GplvmModel::assemble(Y, outcome.X, outcome.params);
  out.initial_objective = outcome.initial_objective;
  out.final_objective = outcome.optimization.value;
  out.optimization = std::move(outcome.optimization);
  return out;
}

struct RealLatentInference {
  Eigen::VectorXd latent;
  double objective = 0.0;
  std::vector<double> start_objectives;
};

inline std::vector<Eigen::Index> reliable_rows(const Eigen::VectorXd& mask_col) {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index f = 0; f < mask_col.size(); ++f) {
    if (mask_col(f) != 0.0) rows.push_back(f);
  }
  return rows;
}

/// Latent point maximising the joint likelihood of the training data and
/// the reliable bins of `frame`.
inline RealLatentInference infer_latent_real(const GplvmModel& model, const Eigen::VectorXd& frame,
                                             const Eigen::VectorXd& mask_col,
                                             const InferenceConfig& cfg = {}) {
  require(frame.size() == model.num_bins() && mask_col.size() == model.num_bins(),
          "infer_latent_real: frame size does not match model");
  auto res = detail::infer(model.core(), frame, reliable_rows(mask_col), cfg);
  return {std::move(res.coords), res.objective, std::move(res.start_objectives)};
}

/// GP posterior mean per band, floored at zero.
inline Eigen::VectorXd reconstruct_magnitude(const GplvmModel& model, const Eigen::VectorXd& z) {
  require(z.size() == model.latent_dim(), "reconstruct_magnitude: latent size mismatch");
  return model.core().predict_rows(z).cwiseMax(0.0);
}

struct EnhancedSpectrogram {
  Spectrogram spec;
  int fallback_frames = 0;
};

/// mag * exp(j * phase(noisy)); zero-magnitude noisy bins take phase 0.
inline cdouble with_noisy_phase(double mag, cdouble noisy) {
  if (mag == 0.0) return {0.0, 0.0};
  const double r = std::abs(noisy);
  if (r == 0.0) return {mag, 0.0};
  return noisy * (mag / r);
}

inline EnhancedSpectrogram enhance_gplvm(const GplvmModel& model, const Spectrogram& noisy,
                                         const BinaryMask& mask, const InferenceConfig& cfg = {}) {
  require(noisy.num_bins() == model.num_bins(), "enhance_gplvm: bin count does not match model");
  require(mask.mask.rows() == noisy.num_bins() && mask.mask.cols() == noisy.num_frames(),
          "enhance_gplvm: mask shape mismatch");
  EnhancedSpectrogram out;
  out.spec = noisy;
  out.spec.bins.setZero();
  const Eigen::MatrixXd magnitude = noisy.bins.cwiseAbs().cwiseProduct(mask.mask);
  for (Eigen::Index t = 0; t < noisy.num_frames(); ++t) {
    const Eigen::VectorXd mcol = mask.mask.col(t);
    if (mcol.sum() == 0.0) {
      ++out.fallback_frames;  // masked observation is all zero
      continue;
    }
    const auto inf = infer_latent_real(model, magnitude.col(t), mcol, cfg);
    const Eigen::VectorXd mag = reconstruct_magnitude(model, inf.latent);
    for (Eigen::Index f = 0; f < noisy.num_bins(); ++f) {
      out.spec.bins(f, t) = with_noisy_phase(mag(f), noisy.bins(f, t));
    }
  }
  return out;
}

}  // namespace cgpse
