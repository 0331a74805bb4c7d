#pragma once

// Complex-valued GPLVM: every frequency band of the complex STFT is a proper
// complex GP over complex latent points, with the real-valued kernel
//   k(v, w) = theta1 * exp(-(v - w)^H (v - w) / theta2) + theta3.
// Enhancement predicts complex frames, so magnitude and phase both change.

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "cgpse/gp_core.hpp"
#include "cgpse/gplvm.hpp"
#include "cgpse/masking.hpp"
#include "cgpse/stft.hpp"

namespace cgpse {

class CgplvmModel {
 public:
  static constexpr int kVersion = 1;

  CgplvmModel() = default;

  static CgplvmModel assemble(Eigen::MatrixXcd U, Eigen::MatrixXcd V, const KernelParams& p) {
    require(U.cols() == V.cols(), "CgplvmModel: U and V column counts differ");
    require(U.allFinite(), "CgplvmModel: non-finite training spectra");
    CgplvmModel m;
    m.gp_ = detail::FrozenGp::build(LatentKind::complex, to_coordinates(V), to_rows(U), p);
    m.U_ = std::move(U);
    m.V_ = std::move(V);
    return m;
  }

  const Eigen::MatrixXcd& latents() const { return V_; }
  const Eigen::MatrixXcd& data() const { return U_; }
  const KernelParams& params() const { return gp_.params; }
  Eigen::Index latent_dim() const { return V_.rows(); }
  Eigen::Index num_bins() const { return U_.rows(); }
  Eigen::Index num_frames() const { return U_.cols(); }
  double log_likelihood() const { return gp_.train_log_likelihood; }
  const detail::FrozenGp& core() const { return gp_; }

 private:
  Eigen::MatrixXcd U_;
  Eigen::MatrixXcd V_;
  detail::FrozenGp gp_;
};

struct CgplvmTraining {
  CgplvmModel model;
  OptimizeResult optimization;
  double initial_objective = 0.0;
  double final_objective = 0.0;
};

/// Complex PCA: projections of the centred columns of U onto the top-K
/// eigenvectors of the Hermitian band covariance, scaled to unit average
/// squared modulus per dimension.
inline Eigen::MatrixXcd complex_pca_latents(const Eigen::MatrixXcd& U, Eigen::Index K) {
  const Eigen::VectorXcd mean = U.rowwise().mean();
  const Eigen::MatrixXcd centered = U.colwise() - mean;
  const Eigen::MatrixXcd cov = centered * centered.adjoint() / static_cast<double>(U.cols());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(cov);
  const Eigen::MatrixXcd basis = eig.eigenvectors().rightCols(K).rowwise().reverse();
  Eigen::MatrixXcd V = basis.adjoint() * centered;
  for (Eigen::Index k = 0; k < K; ++k) {
    const double power = V.row(k).squaredNorm() / static_cast<double>(V.cols());
    if (power > 1e-300) V.row(k) /= std::sqrt(power);
  }
  return V;
}

inline CgplvmTraining train_cgplvm(const Eigen::MatrixXcd& U, int K,
                                   const TrainConfig& cfg = {}) {
  require(K >= 1, "train_cgplvm: latent dimension must be >= 1");
  require(U.cols() >= 2, "train_cgplvm: need at least two training frames");
  require(K < std::min(U.rows(), U.cols()), "train_cgplvm: latent dimension must be < min(F, M)");
  require(U.allFinite(), "train_cgplvm: non-finite training spectra");
  if (U.squaredNorm() == 0.0) fail(ErrorCategory::invalid_argument, "train_cgplvm: all-zero data");

  const Eigen::MatrixXcd V0 = complex_pca_latents(U, K);
  const Eigen::MatrixXd R = to_rows(U);
  const KernelParams init = detail::initial_params(LatentKind::complex, R, 2 * K, cfg);
  auto outcome = detail::train(LatentKind::complex, to_coordinates(V0), R, init, cfg);

  CgplvmTraining out;
  out.model = CgplvmModel::assemble(U, complex_from_coordinates(outcome.X), outcome.params);
  out.initial_objective = outcome.initial_objective;
  out.final_objective = outcome.optimization.value;
  out.optimization = std::move(outcome.optimization);
  return out;
}

struct ComplexLatentInference {
  Eigen::VectorXcd latent;
  double objective = 0.0;
  std::vector<double> start_objectives;
};

/// Solves argmax_v ln p(U, s | V, v) over the 2K real coordinates of v,
/// where only the reliable bins of the frame s enter the likelihood.
inline ComplexLatentInference infer_latent_complex(const CgplvmModel& model,
                                                   const Eigen::VectorXcd& frame,
                                                   const Eigen::VectorXd& mask_col,
                                                   const InferenceConfig& cfg = {}) {
  const Eigen::Index F = model.num_bins();
  require(frame.size() == F && mask_col.size() == F,
          "infer_latent_complex: frame size does not match model");
  std::vector<Eigen::Index> rows;
  for (Eigen::Index f = 0; f < F; ++f) {
    if (mask_col(f) != 0.0) rows.push_back(f);
  }
  const std::size_t n = rows.size();
  for (std::size_t i = 0; i < n; ++i) rows.push_back(rows[i] + F);  // imaginary rows
  Eigen::VectorXd r(2 * F);
  r.head(F) = frame.real();
  r.tail(F) = frame.imag();
  auto res = detail::infer(model.core(), r, rows, cfg);
  const Eigen::Index K = model.latent_dim();
  Eigen::VectorXcd v(K);
  v.real() = res.coords.head(K);
  v.imag() = res.coords.tail(K);
  return {std::move(v), res.objective, std::move(res.start_objectives)};
}

/// Per-band posterior mean sum_m [A^{-1} k]_m U(f, m), i.e. U A^{-1} k.
/// Predicting at a training latent with negligible noise returns that
/// training column.
inline Eigen::VectorXcd predict_frame(const CgplvmModel& model, const Eigen::VectorXcd& v) {
  require(v.size() == model.latent_dim(), "predict_frame: latent size mismatch");
  const Eigen::Index K = v.size();
  Eigen::VectorXd x(2 * K);
  x.head(K) = v.real();
  x.tail(K) = v.imag();
  const Eigen::VectorXd rows = model.core().predict_rows(x);
  const Eigen::Index F = model.num_bins();
  Eigen::VectorXcd out(F);
  out.real() = rows.head(F);
  out.imag() = rows.tail(F);
  return out;
}

inline EnhancedSpectrogram enhance_cgplvm(const CgplvmModel& model, const MaskedSpectrogram& masked,
                                          const InferenceConfig& cfg = {}) {
  const Spectrogram& in = masked.complex_bins;
  require(in.num_bins() == model.num_bins(), "enhance_cgplvm: bin count does not match model");
  EnhancedSpectrogram out;
  out.spec = in;
  for (Eigen::Index t = 0; t < in.num_frames(); ++t) {
    const Eigen::VectorXd mcol = masked.mask.mask.col(t);
    if (mcol.sum() == 0.0) {
      ++out.fallback_frames;  // keep the masked observation
      continue;
    }
    const auto inf = infer_latent_complex(model, in.bins.col(t), mcol, cfg);
    out.spec.bins.col(t) = predict_frame(model, inf.latent);
  }
  return out;
}

}  // namespace cgpse
