#include <gtest/gtest.h>
#include <fstream>

#include "cgpse/metrics.hpp"
#include "test_util.hpp"

using namespace cgpse;

namespace {

AudioSignal scaled(const AudioSignal& x, double a) {
  AudioSignal y = x;
  for (double& v : y.samples) v *= a;
  return y;
}

}  // namespace

TEST(Ssnr, IdenticalClampsAtCeiling) {
  auto x = generate_white_noise(8000, 1);
  EXPECT_EQ(ssnr(x, x), 35.0);
}

TEST(Ssnr, TenDbPerFrame) {
  auto x = generate_white_noise(8192, 2);
  // enhanced = clean * (1 - sqrt(0.1)) gives error energy 0.1 x clean in every frame.
  auto e = scaled(x, 1.0 - std::sqrt(0.1));
  EXPECT_NEAR(ssnr(x, e), 10.0, 1e-9);
}

TEST(Ssnr, NegatedSignal) {
  auto x = generate_white_noise(8192, 3);
  EXPECT_NEAR(ssnr(x, scaled(x, -1.0)), 10.0 * std::log10(0.25), 1e-6);
  EXPECT_NEAR(ssnr(x, scaled(x, -1.0)), -6.0206, 1e-4);
}

TEST(Ssnr, ClampFloorAndSilenceExclusion) {
  auto x = generate_white_noise(8192, 4);
  EXPECT_EQ(ssnr(x, scaled(x, -100.0)), -10.0);
  // Silent leading half: only frames touching the second half count.
  AudioSignal y = x;
  std::fill(y.samples.begin(), y.samples.begin() + 4096, 0.0);
  auto e = scaled(y, 1.0 - std::sqrt(0.1));
  EXPECT_NEAR(ssnr(y, e), 10.0, 1e-9);
  AudioSignal z;
  z.samples.assign(2048, 0.0);
  EXPECT_THROW(ssnr(z, z), Error);
}

TEST(Ssnr, JointScaleInvariance) {
  auto x = generate_white_noise(8192, 5);
  auto e = generate_white_noise(8192, 6);
  for (std::size_t i = 0; i < e.size(); ++i) e.samples[i] = x.samples[i] + 0.3 * e.samples[i];
  EXPECT_NEAR(ssnr(x, e), ssnr(scaled(x, 7.5), scaled(e, 7.5)), 1e-9);
}

TEST(Lsd, Cases) {
  auto x = generate_white_noise(8192, 7);
  EXPECT_EQ(log_spectral_distance(x, x), 0.0);
  EXPECT_NEAR(log_spectral_distance(x, scaled(x, 2.0)), 20.0 * std::log10(2.0), 1e-6);
  auto y = generate_white_noise(8192, 8);
  EXPECT_DOUBLE_EQ(log_spectral_distance(x, y), log_spectral_distance(y, x));
}

TEST(PhaseChange, CountsOnlyReliableActiveBins) {
  Spectrogram noisy, enhanced, clean;
  noisy.bins = Eigen::MatrixXcd::Constant(2, 2, cdouble(1.0, 0.0));
  clean.bins = noisy.bins;
  clean.bins(1, 1) = 0.0;  // inactive
  enhanced.bins = noisy.bins;
  enhanced.bins(0, 0) = std::polar(1.0, 0.5);
  enhanced.bins(1, 1) = std::polar(1.0, 0.5);
  Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(2, 2);
  mask(0, 1) = 0.0;
  auto pc = phase_change(enhanced, noisy, mask, clean);
  EXPECT_EQ(pc.bins_considered, 2);
  EXPECT_DOUBLE_EQ(pc.fraction_changed, 0.5);
  EXPECT_NEAR(max_phase_deviation(enhanced, noisy), 0.5, 1e-15);
  EXPECT_NEAR(wrapped_phase_difference(std::polar(1.0, 3.0), std::polar(1.0, -3.0)),
              2.0 * M_PI - 6.0, 1e-12);
}

TEST(Report, AggregatesMeanAndSd) {
  EnhancementReport r;
  ReportKey k{"gplvm", 10.0, 0.95, 30};
  r.add(k, 1.0, 2.0);
  r.add(k, 3.0, 4.0);
  r.add({"nmf", 10.0, 0.95, 30}, 5.0, 6.0);
  ASSERT_EQ(r.cells().size(), 2u);
  const auto& c = r.cells().at(k);
  EXPECT_DOUBLE_EQ(c.ssnr_mean, 2.0);
  EXPECT_DOUBLE_EQ(c.lsd_mean, 3.0);
  EXPECT_EQ(c.utterances, 2);
  EXPECT_NEAR(c.ssnr_sd, std::sqrt(2.0), 1e-12);
  auto dir = testutil::temp_dir("report");
  r.write_csv(dir / "r.csv");
  std::ifstream in(dir / "r.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "method,snr_db,c,K,ssnr,lsd,n_utt,ssnr_sd,lsd_sd");
}
