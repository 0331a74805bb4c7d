#include <gtest/gtest.h>

#include "cgpse/stft.hpp"
#include "cgpse/synth.hpp"
#include "test_util.hpp"

using namespace cgpse;

TEST(Synth, DefaultCorpusShape) {
  const auto corpus = synthesize_corpus();
  ASSERT_GE(corpus.size(), 12u);
  int train = 0;
  for (const auto& u : corpus) {
    train += u.train;
    const double seconds = static_cast<double>(u.signal.size()) / u.signal.sample_rate;
    EXPECT_GE(seconds, 2.0) << u.name;
    EXPECT_LE(seconds, 4.0) << u.name;
    EXPECT_LE(u.max_partials, 40) << u.name;
    EXPECT_GT(u.max_partials, 0) << u.name;
    double peak = 0.0;
    for (double v : u.signal.samples) peak = std::max(peak, std::abs(v));
    EXPECT_LT(peak, 1.0) << u.name;

    const Spectrogram spec = stft(u.signal);
    int silent = 0;
    for (Eigen::Index t = 0; t < spec.num_frames(); ++t) silent += spec.bins.col(t).squaredNorm() == 0.0;
    EXPECT_GE(silent, 0.1 * static_cast<double>(spec.num_frames())) << u.name;
  }
  EXPECT_GT(train, 0);
  EXPECT_LT(train, static_cast<int>(corpus.size()));
}

TEST(Synth, Deterministic) {
  const auto a = synthesize_corpus();
  const auto b = synthesize_corpus();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].signal.samples, b[i].signal.samples);
  SynthConfig other;
  other.seed = 7;
  EXPECT_NE(synthesize_corpus(other)[0].signal.samples, a[0].signal.samples);
}

TEST(Synth, WritesManifest) {
  SynthConfig cfg;
  cfg.train_speakers = 1;
  cfg.test_speakers = 1;
  const auto dir = testutil::temp_dir("synth");
  write_corpus(synthesize_corpus(cfg), dir);
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "train_spk0.wav"));
  EXPECT_TRUE(std::filesystem::exists(dir / "test_spk1.wav"));
}
