#include <gtest/gtest.h>

#include "cgpse/baselines.hpp"
#include "test_util.hpp"

using namespace cgpse;
using cdouble = std::complex<double>;

TEST(Nmf, RankOneExact) {
  std::mt19937_64 rng(1);
  const Eigen::VectorXd a = testutil::randn(20, 1, rng).cwiseAbs();
  const Eigen::VectorXd b = testutil::randn(30, 1, rng).cwiseAbs();
  const Eigen::MatrixXd Y = a * b.transpose();
  const auto t = train_nmf_basis(Y, 1, 200);
  EXPECT_LE(t.objective.back(), 1e-6 * Y.norm());
  for (std::size_t i = 1; i < t.objective.size(); ++i) {
    EXPECT_LE(t.objective[i], t.objective[i - 1] + 1e-12 * t.objective.front());
  }
  EXPECT_NEAR(t.basis.W.col(0).norm(), 1.0, 1e-12);
  EXPECT_TRUE((t.basis.W.array() >= 0.0).all());
  EXPECT_THROW(train_nmf_basis(Y, 0), Error);
}

TEST(Nmf, ObjectiveNonIncreasingOnRandomData) {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd Y = testutil::randn(30, 40, rng).cwiseAbs();
  const auto t = train_nmf_basis(Y, 8, 300);
  for (std::size_t i = 1; i < t.objective.size(); ++i) {
    EXPECT_LE(t.objective[i], t.objective[i - 1] + 1e-12 * t.objective.front());
  }
  const auto act = nmf_activations(testutil::randn(30, 10, rng).cwiseAbs(), t.basis, 100);
  for (std::size_t i = 1; i < act.objective.size(); ++i) {
    EXPECT_LE(act.objective[i], act.objective[i - 1] + 1e-12 * act.objective.front());
  }
  EXPECT_TRUE((act.H.array() >= 0.0).all());
}

TEST(Nmf, ActivationsRecoverConsistentSystem) {
  std::mt19937_64 rng(3);
  // Overlapping spectral bumps.
  NmfBasis bumps{Eigen::MatrixXd(20, 4)};
  for (int f = 0; f < 20; ++f)
    for (int r = 0; r < 4; ++r) bumps.W(f, r) = std::exp(-0.5 * std::pow((f - 2.0 - 5.0 * r) / 2.0, 2));
  const Eigen::MatrixXd H = testutil::randn(4, 6, rng).cwiseAbs();
  Eigen::MatrixXd S = bumps.W * H;
  auto act = nmf_activations(S, bumps, 200);
  EXPECT_LE((bumps.W * act.H - S).norm(), 1e-4 * S.norm());

  // Dense positive columns are strongly correlated; convergence is slower.
  NmfBasis dense{testutil::randn(20, 4, rng).cwiseAbs()};
  S = dense.W * H;
  act = nmf_activations(S, dense, 5000);
  EXPECT_LE((dense.W * act.H - S).norm(), 1e-4 * S.norm());
}

TEST(Nmf, ScalarAndZeroCases) {
  NmfBasis one{Eigen::MatrixXd::Ones(1, 1)};
  EXPECT_NEAR(nmf_activations(Eigen::MatrixXd::Constant(1, 1, 2.0), one, 10).H(0, 0), 2.0, 1e-12);
  std::mt19937_64 rng(4);
  NmfBasis basis{testutil::randn(5, 2, rng).cwiseAbs()};
  const auto act = nmf_activations(Eigen::MatrixXd::Zero(5, 3), basis, 5);
  EXPECT_EQ(act.H.maxCoeff(), 0.0);
  EXPECT_TRUE(act.H.allFinite());
}

TEST(Dictionary, Construction) {
  std::mt19937_64 rng(5);
  Eigen::MatrixXd Y = testutil::randn(257, 300, rng).cwiseAbs();
  Y.col(10).setZero();
  Y.col(20) = Y.col(21);
  const auto d = build_dictionary(Y);
  EXPECT_EQ(d.D.rows(), 257);
  EXPECT_EQ(d.D.cols(), 299);
  EXPECT_EQ(d.dropped_frames, 1);
  for (Eigen::Index p = 0; p < d.D.cols(); ++p) EXPECT_NEAR(d.D.col(p).norm(), 1.0, 1e-12);
  EXPECT_EQ(d.D.col(19), d.D.col(20));  // duplicates kept (column 10 dropped shifts indices)
  EXPECT_THROW(build_dictionary(Eigen::MatrixXd::Ones(10, 5)), Error);
}

TEST(Omp, OrthonormalAndTwoAtomRecovery) {
  SparseDictionary id{Eigen::MatrixXd::Identity(6, 6)};
  Eigen::VectorXd s = 3.0 * Eigen::VectorXd::Unit(6, 0);
  auto codes = omp_code(s, id, 1, 50);
  EXPECT_EQ(codes.A.col(0), (3.0 * Eigen::VectorXd::Unit(6, 0)).eval());

  std::mt19937_64 rng(6);
  SparseDictionary d{testutil::randn(40, 60, rng)};
  for (Eigen::Index p = 0; p < 60; ++p) d.D.col(p).normalize();
  const Eigen::VectorXd two = 2.0 * d.D.col(5) - 1.5 * d.D.col(33);
  codes = omp_code(two, d, 2, 50);
  EXPECT_LE((d.D * codes.A.col(0) - two).norm(), 1e-9);
  EXPECT_NEAR(codes.A(5, 0), 2.0, 1e-9);
  EXPECT_NEAR(codes.A(33, 0), -1.5, 1e-9);
}

TEST(Omp, SparsityBound) {
  std::mt19937_64 rng(7);
  SparseDictionary d{testutil::randn(30, 50, rng).cwiseAbs()};
  for (Eigen::Index p = 0; p < 50; ++p) d.D.col(p).normalize();
  const auto codes = omp_code(testutil::randn(30, 20, rng).cwiseAbs(), d, 5, 50);
  for (Eigen::Index t = 0; t < 20; ++t) EXPECT_LE((codes.A.col(t).array() != 0.0).count(), 5);
}

TEST(NoisyPhase, Cases) {
  std::mt19937_64 rng(8);
  Spectrogram noisy;
  noisy.bins = testutil::crandn(4, 3, rng);
  EXPECT_EQ(reconstruct_with_noisy_phase(noisy.bins.cwiseAbs(), noisy).bins, noisy.bins);
  EXPECT_EQ(reconstruct_with_noisy_phase(Eigen::MatrixXd::Zero(4, 3), noisy).bins.norm(), 0.0);
  Spectrogram one;
  one.bins = Eigen::MatrixXcd::Constant(1, 1, cdouble(0.0, 1.0));
  EXPECT_EQ(reconstruct_with_noisy_phase(Eigen::MatrixXd::Constant(1, 1, 2.0), one).bins(0, 0),
            cdouble(0.0, 2.0));
  EXPECT_THROW(reconstruct_with_noisy_phase(-Eigen::MatrixXd::Ones(4, 3), noisy), Error);
}
