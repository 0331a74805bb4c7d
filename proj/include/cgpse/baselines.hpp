#pragma once

// Magnitude-domain comparison systems: NMF with a pre-trained basis and
// sparse coding against an exemplar dictionary via orthogonal matching
// pursuit. Both resynthesise with the noisy phase.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "cgpse/error.hpp"
#include "cgpse/gplvm.hpp"
#include "cgpse/stft.hpp"

namespace cgpse {

inline constexpr double kNmfEpsilon = 1e-12;

struct NmfBasis {
  Eigen::MatrixXd W;  // F x R, nonnegative, unit-norm columns
};

struct NmfTraining {
  NmfBasis basis;
  std::vector<double> objective;  // ||Y - WH||_F before the first and after each iteration
};

struct NmfActivations {
  Eigen::MatrixXd H;  // R x T
  std::vector<double> objective;
};

/// Multiplicative-update NMF under the Euclidean cost.
inline NmfTraining train_nmf_basis(const Eigen::MatrixXd& Y, int R, int iters = 200,
                                   std::uint64_t seed = 7) {
  require(R >= 1, "train_nmf_basis: basis count must be >= 1");
  require(R <= Y.cols(), "train_nmf_basis: basis count exceeds frame count");
  require((Y.array() >= 0.0).all() && Y.allFinite(),
          "train_nmf_basis: data must be finite and nonnegative");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.1, 1.0);
  const double scale = std::sqrt(std::max(Y.mean(), kNmfEpsilon) / R);
  Eigen::MatrixXd W(Y.rows(), R), H(R, Y.cols());
  for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = scale * uni(rng);
  for (Eigen::Index i = 0; i < H.size(); ++i) H.data()[i] = scale * uni(rng);

  NmfTraining out;
  out.objective.push_back((Y - W * H).norm());
  for (int it = 0; it < iters; ++it) {
    H.array() *= (W.transpose() * Y).array() / ((W.transpose() * W) * H).array().max(kNmfEpsilon);
    W.array() *= (Y * H.transpose()).array() / (W * (H * H.transpose())).array().max(kNmfEpsilon);
    out.objective.push_back((Y - W * H).norm());
  }
  for (Eigen::Index r = 0; r < R; ++r) {
    const double n = W.col(r).norm();
    if (n > 0.0) W.col(r) /= n;
  }
  out.basis.W = std::move(W);
  return out;
}

/// Multiplicative updates on H only, W fixed.
inline NmfActivations nmf_activations(const Eigen::MatrixXd& S, const NmfBasis& basis,
                                      int iters = 40) {
  const Eigen::MatrixXd& W = basis.W;
  if (S.rows() != W.rows()) fail(ErrorCategory::invalid_argument, "nmf_activations: shape mismatch");
  NmfActivations out;
  out.H = Eigen::MatrixXd::Ones(W.cols(), S.cols());
  const Eigen::MatrixXd WtS = W.transpose() * S;
  const Eigen::MatrixXd WtW = W.transpose() * W;
  out.objective.push_back((S - W * out.H).norm());
  for (int it = 0; it < iters; ++it) {
    out.H.array() *= WtS.array() / (WtW * out.H).array().max(kNmfEpsilon);
    out.objective.push_back((S - W * out.H).norm());
  }
  return out;
}

struct SparseDictionary {
  Eigen::MatrixXd D;  // F x P, unit-norm columns
  int dropped_frames = 0;
};

/// Concatenates nonzero training frames as unit-norm atoms.
inline SparseDictionary build_dictionary(const Eigen::MatrixXd& Y) {
  require((Y.array() >= 0.0).all(), "build_dictionary: magnitudes must be nonnegative");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index m = 0; m < Y.cols(); ++m) {
    if (Y.col(m).norm() > 0.0) keep.push_back(m);
  }
  if (static_cast<Eigen::Index>(keep.size()) < Y.rows()) {
    fail(ErrorCategory::invalid_argument,
         "build_dictionary: fewer nonzero frames than bins (dictionary not overcomplete)");
  }
  SparseDictionary dict;
  dict.dropped_frames = static_cast<int>(Y.cols()) - static_cast<int>(keep.size());
  dict.D.resize(Y.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    dict.D.col(static_cast<Eigen::Index>(i)) = Y.col(keep[i]) / Y.col(keep[i]).norm();
  }
  return dict;
}

struct SparseCodes {
  Eigen::MatrixXd A;  // P x T, at most L nonzeros per column
  std::vector<std::vector<double>> residual_norms;  // per column, after each selection
};

/// Orthogonal matching pursuit, column by column.
inline SparseCodes omp_code(const Eigen::MatrixXd& S, const SparseDictionary& dict, int L = 5,
                            int iters = 50) {
  const Eigen::MatrixXd& D = dict.D;
  if (D.cols() == 0) fail(ErrorCategory::invalid_argument, "omp_code: empty dictionary");
  require(L >= 1 && iters >= L, "omp_code: need L >= 1 and iters >= L");
  require(S.rows() == D.rows(), "omp_code: shape mismatch");
  constexpr double kResidualStop = 1e-9;

  SparseCodes out;
  out.A = Eigen::MatrixXd::Zero(D.cols(), S.cols());
  out.residual_norms.resize(static_cast<std::size_t>(S.cols()));
  for (Eigen::Index t = 0; t < S.cols(); ++t) {
    const Eigen::VectorXd s = S.col(t);
    Eigen::VectorXd residual = s;
    std::vector<Eigen::Index> support;
    Eigen::VectorXd coef;
    auto& norms = out.residual_norms[static_cast<std::size_t>(t)];
    double rnorm = residual.norm();
    for (int it = 0; it < iters && static_cast<int>(support.size()) < L; ++it) {
      if (rnorm < kResidualStop) break;
      const Eigen::VectorXd corr = D.transpose() * residual;
      Eigen::Index best = -1;
      double best_val = 0.0;
      for (Eigen::Index p = 0; p < corr.size(); ++p) {
        if (std::find(support.begin(), support.end(), p) != support.end()) continue;
        if (std::abs(corr(p)) > best_val) {
          best_val = std::abs(corr(p));
          best = p;
        }
      }
      if (best < 0 || best_val <= 1e-14 * rnorm) break;
      support.push_back(best);
      Eigen::MatrixXd sub(D.rows(), static_cast<Eigen::Index>(support.size()));
      for (std::size_t i = 0; i < support.size(); ++i) sub.col(static_cast<Eigen::Index>(i)) = D.col(support[i]);
      coef = sub.colPivHouseholderQr().solve(s);
      residual = s - sub * coef;
      rnorm = residual.norm();
      norms.push_back(rnorm);
    }
    for (std::size_t i = 0; i < support.size(); ++i) {
      out.A(support[i], t) = coef(static_cast<Eigen::Index>(i));
    }
  }
  return out;
}

/// mag * exp(j * phase(noisy)); undefined noisy phase is taken as 0.
inline Spectrogram reconstruct_with_noisy_phase(const Eigen::MatrixXd& mag,
                                                const Spectrogram& noisy) {
  require(mag.rows() == noisy.num_bins() && mag.cols() == noisy.num_frames(),
          "reconstruct_with_noisy_phase: shape mismatch");
  if ((mag.array() < 0.0).any()) {
    fail(ErrorCategory::invalid_argument, "reconstruct_with_noisy_phase: negative magnitude");
  }
  Spectrogram out = noisy;
  for (Eigen::Index t = 0; t < mag.cols(); ++t)
    for (Eigen::Index f = 0; f < mag.rows(); ++f)
      out.bins(f, t) = with_noisy_phase(mag(f, t), noisy.bins(f, t));
  return out;
}

}  // namespace cgpse
