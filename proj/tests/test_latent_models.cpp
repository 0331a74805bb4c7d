#include <gtest/gtest.h>

#include "cgpse/cgplvm.hpp"
#include "cgpse/gplvm.hpp"
#include "cgpse/metrics.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cgpse;
using cdouble = std::complex<double>;

namespace {

KernelParams sharp_params(double beta) {
  KernelParams p;
  p.theta1 = 1.0;
  p.theta2 = 1.0;
  p.theta3 = 0.0;
  p.beta = beta;
  return p;
}

/// Well-separated latents on a grid so the Gram matrix is well conditioned.
Eigen::MatrixXd grid_latents(Eigen::Index K, Eigen::Index M) {
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(K, M);
  for (Eigen::Index m = 0; m < M; ++m) Z(m % K, m) = 1.5 * static_cast<double>(m / K + 1);
  return Z;
}

Eigen::MatrixXd toy_magnitudes(Eigen::Index F, Eigen::Index M, std::mt19937_64& rng) {
  // Smooth low-dimensional family: bumps whose centre drifts with the frame.
  Eigen::MatrixXd Y(F, M);
  std::normal_distribution<double> n(0.0, 0.01);
  for (Eigen::Index m = 0; m < M; ++m) {
    const double centre = 2.0 + (F - 4.0) * static_cast<double>(m) / static_cast<double>(M - 1);
    for (Eigen::Index f = 0; f < F; ++f) {
      Y(f, m) = std::exp(-0.5 * std::pow((f - centre) / 1.5, 2.0)) + std::abs(n(rng));
    }
  }
  return Y;
}

Eigen::MatrixXcd toy_spectra(Eigen::Index F, Eigen::Index M, std::mt19937_64& rng) {
  const Eigen::MatrixXd mag = toy_magnitudes(F, M, rng);
  Eigen::MatrixXcd U(F, M);
  for (Eigen::Index m = 0; m < M; ++m)
    for (Eigen::Index f = 0; f < F; ++f)
      U(f, m) = std::polar(mag(f, m), 0.3 * static_cast<double>(f) + 0.1 * static_cast<double>(m));
  return U;
}

}  // namespace

TEST(Gplvm, InterpolatesTrainingColumns) {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd Y = toy_magnitudes(10, 8, rng);
  const auto model = GplvmModel::assemble(Y, grid_latents(2, 8), sharp_params(1e6));
  for (Eigen::Index m = 0; m < 8; ++m) {
    const Eigen::VectorXd y = reconstruct_magnitude(model, model.latents().col(m));
    EXPECT_LE((y - Y.col(m)).norm() / Y.col(m).norm(), 1e-3);
  }
}

TEST(Gplvm, PriorMeanFarAwayAndLinearity) {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd Y = toy_magnitudes(10, 8, rng);
  const Eigen::MatrixXd Z = grid_latents(2, 8);
  const auto model = GplvmModel::assemble(Y, Z, sharp_params(100.0));
  Eigen::VectorXd far = Eigen::VectorXd::Constant(2, 1e3);
  EXPECT_EQ(reconstruct_magnitude(model, far).norm(), 0.0);

  const auto doubled = GplvmModel::assemble(2.0 * Y, Z, sharp_params(100.0));
  Eigen::VectorXd z(2);
  z << 0.7, 1.1;
  EXPECT_LE((reconstruct_magnitude(doubled, z) - 2.0 * reconstruct_magnitude(model, z)).norm(),
            1e-12 * reconstruct_magnitude(model, z).norm() + 1e-15);
}

TEST(Gplvm, TrainingPreconditions) {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd Y = toy_magnitudes(10, 8, rng);
  EXPECT_THROW(train_gplvm(Y, 0), Error);
  EXPECT_THROW(train_gplvm(Y, 8), Error);
  EXPECT_THROW(train_gplvm(-Y, 2), Error);
}

TEST(Gplvm, TrainingTraceMonotone) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd Y = toy_magnitudes(12, 15, rng);
  TrainConfig cfg;
  cfg.optimizer.max_iterations = 200;
  const auto t = train_gplvm(Y, 2, cfg);
  ASSERT_GT(t.optimization.trace.size(), 1u);
  for (std::size_t i = 1; i < t.optimization.trace.size(); ++i) {
    EXPECT_GE(t.optimization.trace[i].objective, t.optimization.trace[i - 1].objective);
  }
  EXPECT_GT(t.final_objective, t.initial_objective);
  EXPECT_NEAR(t.final_objective, log_marginal_real(Y, t.model.latents(), t.model.params()), 1e-9);
}

TEST(Gplvm, InferenceSelfConsistency) {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd Y = toy_magnitudes(12, 15, rng);
  TrainConfig cfg;
  cfg.optimizer.max_iterations = 300;
  const auto model = train_gplvm(Y, 2, cfg).model;
  const Eigen::VectorXd full = Eigen::VectorXd::Ones(12);
  for (Eigen::Index m : {0, 7, 14}) {
    const auto inf = infer_latent_real(model, Y.col(m), full);
    const Eigen::VectorXd y = reconstruct_magnitude(model, inf.latent);
    EXPECT_LE((y - Y.col(m)).norm() / Y.col(m).norm(), 0.1);
    for (double s : inf.start_objectives) EXPECT_GE(inf.objective, s);
  }
  EXPECT_THROW(infer_latent_real(model, Y.col(0), Eigen::VectorXd::Zero(12)), Error);
}

TEST(Gplvm, EnhanceKeepsNoisyPhase) {
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd Y = toy_magnitudes(6, 10, rng);
  const auto model = GplvmModel::assemble(Y, grid_latents(2, 10), sharp_params(100.0));
  Spectrogram noisy;
  noisy.bins = testutil::crandn(6, 5, rng);
  noisy.bins(2, 1) = 0.0;
  BinaryMask mask{Eigen::MatrixXd::Ones(6, 5), 0.9};
  mask.mask.col(3).setZero();
  const auto out = enhance_gplvm(model, noisy, mask);
  EXPECT_EQ(out.fallback_frames, 1);
  for (Eigen::Index t = 0; t < 5; ++t)
    for (Eigen::Index f = 0; f < 6; ++f) {
      const cdouble e = out.spec.bins(f, t), x = noisy.bins(f, t);
      if (e == 0.0 || x == 0.0) continue;
      EXPECT_LE(wrapped_phase_difference(e, x), 1e-12);
    }
  EXPECT_EQ(out.spec.bins.col(3).norm(), 0.0);
  EXPECT_EQ(with_noisy_phase(0.0, cdouble(0.3, -0.2)), cdouble(0.0));
  EXPECT_EQ(with_noisy_phase(2.0, cdouble(0.0, 1.0)), cdouble(0.0, 2.0));
  EXPECT_EQ(with_noisy_phase(2.0, cdouble(0.0, 0.0)), cdouble(2.0, 0.0));
}

TEST(Gplvm, EnhanceCleanUtteranceBeatsMask) {
  AudioSignal clean = testutil::tone(500.0, 8000, 0.3);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    clean.samples[i] *= 0.6 + 0.4 * std::sin(2.0 * M_PI * 1.5 * i / 8000.0);
  }
  const Spectrogram spec = stft(clean);
  TrainConfig cfg;
  cfg.optimizer.max_iterations = 200;
  const auto model = train_gplvm(spec.magnitude(), 3, cfg).model;
  BinaryMask ones{Eigen::MatrixXd::Ones(spec.num_bins(), spec.num_frames()), 0.9};
  const auto out = enhance_gplvm(model, spec, ones);
  const double masked_ssnr = ssnr(clean, istft(apply_mask(spec, ones).complex_bins));
  EXPECT_GE(ssnr(clean, istft(out.spec)), masked_ssnr - 1e-9);
}

TEST(Cgplvm, InterpolatesTrainingColumns) {
  std::mt19937_64 rng(7);
  const Eigen::MatrixXcd U = toy_spectra(10, 8, rng);
  Eigen::MatrixXcd V = grid_latents(2, 8).cast<cdouble>();
  V.row(1) *= cdouble(0.0, 1.0);
  const auto model = CgplvmModel::assemble(U, V, sharp_params(1e6));
  for (Eigen::Index m = 0; m < 8; ++m) {
    const Eigen::VectorXcd u = predict_frame(model, V.col(m));
    EXPECT_LE((u - U.col(m)).norm() / U.col(m).norm(), 1e-3);
  }
}

TEST(Cgplvm, PriorMeanAndConjugation) {
  std::mt19937_64 rng(8);
  const Eigen::MatrixXcd U = toy_spectra(6, 8, rng);
  const Eigen::MatrixXcd V = testutil::crandn(2, 8, rng);
  const auto model = CgplvmModel::assemble(U, V, sharp_params(50.0));
  EXPECT_EQ(predict_frame(model, Eigen::VectorXcd::Constant(2, cdouble(1e3, 1e3))).norm(), 0.0);
  const auto conj_model = CgplvmModel::assemble(U.conjugate(), V, sharp_params(50.0));
  const Eigen::VectorXcd v = testutil::crandn(2, 1, rng);
  EXPECT_LE((predict_frame(conj_model, v) - predict_frame(model, v).conjugate()).norm(), 1e-12);
}

TEST(Cgplvm, TrainingTraceMonotoneAndRealDataStaysReal) {
  std::mt19937_64 rng(9);
  const Eigen::MatrixXcd U = toy_magnitudes(12, 15, rng).cast<cdouble>();
  TrainConfig cfg;
  cfg.optimizer.max_iterations = 200;
  const auto t = train_cgplvm(U, 2, cfg);
  for (std::size_t i = 1; i < t.optimization.trace.size(); ++i) {
    EXPECT_GE(t.optimization.trace[i].objective, t.optimization.trace[i - 1].objective);
  }
  EXPECT_NEAR(t.final_objective, log_marginal_complex(U, t.model.latents(), t.model.params()), 1e-9);
  double imag = 0.0, total = 0.0;
  for (Eigen::Index m = 0; m < U.cols(); ++m) {
    const Eigen::VectorXcd u = predict_frame(t.model, t.model.latents().col(m));
    imag += u.imag().squaredNorm();
    total += u.squaredNorm();
  }
  EXPECT_LE(imag, 0.01 * total);
}

TEST(Cgplvm, InferenceSelfConsistency) {
  std::mt19937_64 rng(10);
  const Eigen::MatrixXcd U = toy_spectra(12, 15, rng);
  TrainConfig cfg;
  cfg.optimizer.max_iterations = 300;
  const auto model = train_cgplvm(U, 2, cfg).model;
  const Eigen::VectorXd full = Eigen::VectorXd::Ones(12);
  for (Eigen::Index m : {0, 7, 14}) {
    const auto inf = infer_latent_complex(model, U.col(m), full);
    const Eigen::VectorXcd u = predict_frame(model, inf.latent);
    EXPECT_LE((u - U.col(m)).norm() / U.col(m).norm(), 0.1);
    for (double s : inf.start_objectives) EXPECT_GE(inf.objective, s);
  }
  EXPECT_THROW(infer_latent_complex(model, U.col(0), Eigen::VectorXd::Zero(12)), Error);
}

TEST(Cgplvm, ZeroMaskFallsBack) {
  std::mt19937_64 rng(11);
  const Eigen::MatrixXcd U = toy_spectra(6, 8, rng);
  const auto model = CgplvmModel::assemble(U, testutil::crandn(2, 8, rng), sharp_params(50.0));
  Spectrogram spec;
  spec.bins = testutil::crandn(6, 4, rng);
  const auto masked = apply_mask(spec, BinaryMask{Eigen::MatrixXd::Zero(6, 4), 0.9});
  const auto out = enhance_cgplvm(model, masked);
  EXPECT_EQ(out.fallback_frames, 4);
  EXPECT_EQ(out.spec.bins, masked.complex_bins.bins);
}

TEST(Cgplvm, SelfReconstructionOfCleanUtterance) {
  AudioSignal clean = testutil::tone(437.5, 16000, 0.2);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    clean.samples[i] += 0.1 * std::cos(2.0 * M_PI * 875.0 * i / 8000.0 + 0.4);
    clean.samples[i] *= 0.7 + 0.3 * std::sin(2.0 * M_PI * 0.8 * i / 8000.0);
  }
  const Spectrogram spec = stft(clean);
  TrainConfig cfg;
  cfg.optimizer.max_iterations = 300;
  const auto model = train_cgplvm(spec.bins, 5, cfg).model;
  const auto masked =
      apply_mask(spec, BinaryMask{Eigen::MatrixXd::Ones(spec.num_bins(), spec.num_frames()), 0.9});
  const auto out = enhance_cgplvm(model, masked);
  EXPECT_GE(ssnr(clean, istft(out.spec)), 20.0);
}

TEST(GeneratorOracle, TrainedLikelihoodNotBelowTruth) {
  for (const bool complex_model : {false, true}) {
    std::mt19937_64 rng(complex_model ? 21 : 20);
    KernelParams truth;
    truth.theta1 = 1.0;
    truth.theta2 = complex_model ? 2.0 : 0.5;
    truth.theta3 = 0.05;
    truth.beta = 100.0;
    TrainConfig cfg;
    if (complex_model) {
      const Eigen::MatrixXcd V = testutil::crandn(2, 20, rng, std::sqrt(0.5));
      const Eigen::MatrixXd A = oracle::complex_cov(V, truth).real();
      const Eigen::MatrixXcd U = oracle::sample_complex(A, 8, rng);
      const auto t = train_cgplvm(U, 2, cfg);
      EXPECT_GE(t.final_objective, log_marginal_complex(U, V, truth) - 1e-3);
    } else {
      const Eigen::MatrixXd Z = testutil::randn(2, 20, rng);
      const Eigen::MatrixXd Y = oracle::sample_real(oracle::real_cov(Z, truth), 8, rng).cwiseAbs();
      const auto t = train_gplvm(Y, 2, cfg);
      EXPECT_GE(t.final_objective, log_marginal_real(Y, Z, truth) - 1e-3);
    }
  }
}
