#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cgpse/experiment.hpp"
#include "cgpse/model_io.hpp"
#include "cgpse/synth.hpp"
#include "test_util.hpp"

using namespace cgpse;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run cli(const std::string& args, const fs::path& dir) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string(CGPSE_CLI) + " " + args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = testutil::temp_dir("cli");
    SynthConfig sc;
    sc.train_speakers = 1;
    sc.test_speakers = 1;
    write_corpus(synthesize_corpus(sc), dir_ / "corpus");
    std::ofstream(dir_ / "cfg.json") << R"({"corpus": "corpus", "max_training_frames": 30, "nmf": {"basis": 10},
      "train": {"optimizer": {"max_iterations": 15}},
      "inference": {"starts": 2, "optimizer": {"max_iterations": 15}}})";
    const AudioSignal clean = read_wav(dir_ / "corpus" / "test_spk1.wav");
    write_wav(dir_ / "noisy.wav", mix_at_snr(clean, generate_white_noise(clean.size(), 5), 10.0));
  }
  static fs::path dir_;
};

fs::path Cli::dir_;

}  // namespace

TEST_F(Cli, TrainPrintsRecomputableObjective) {
  const auto r = cli("train -c " + (dir_ / "cfg.json").string() + " -m gplvm -K 2 -o " +
                         (dir_ / "g.model").string(),
                     dir_);
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_EQ(r.out.rfind("objective ", 0), 0u) << r.out;
  const double printed = std::stod(r.out.substr(10));
  const auto model = std::get<GplvmModel>(load_model(dir_ / "g.model"));
  EXPECT_EQ(model.num_frames(), 30);
  const double recomputed = log_marginal_real(model.data(), model.latents(), model.params());
  EXPECT_LE(std::abs(printed - recomputed), 1e-9 * std::max(1.0, std::abs(recomputed)));
}

TEST_F(Cli, TrainRejectsLatentDimAboveFrames) {
  const auto r = cli("train -c " + (dir_ / "cfg.json").string() + " -m cgplvm -K 30 -o " +
                         (dir_ / "bad.model").string(),
                     dir_);
  EXPECT_EQ(r.code, static_cast<int>(ErrorCategory::invalid_argument));
  EXPECT_NE(r.err.find("error[invalid_argument]"), std::string::npos) << r.err;
}

TEST_F(Cli, MaskedEnhancementMatchesLibrary) {
  const auto out = dir_ / "masked.wav";
  const auto r = cli("enhance -i " + (dir_ / "noisy.wav").string() + " -o " + out.string() +
                         " -t 0.85 --dump " + (dir_ / "dump").string(),
                     dir_);
  ASSERT_EQ(r.code, 0) << r.err;
  const AudioSignal noisy = read_wav(dir_ / "noisy.wav");
  const Spectrogram spec = stft(noisy);
  const AudioSignal expected = istft(mask_stage(spec, 0.85, PsdConfig{}).complex_bins);
  const AudioSignal got = read_wav(out);
  ASSERT_EQ(got.size(), expected.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    ASSERT_NEAR(got.samples[i], std::clamp(expected.samples[i], -1.0, 32767.0 / 32768.0), 1.0 / 32768.0);
  }
  EXPECT_TRUE(fs::exists(dir_ / "dump_mask.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "dump_noisy_mag.csv"));
}

TEST_F(Cli, EnhanceWithModelIsDeterministic) {
  ASSERT_EQ(cli("train -c " + (dir_ / "cfg.json").string() + " -m nmf -o " + (dir_ / "n.model").string(),
                dir_)
                .code,
            0);
  for (const char* name : {"a.wav", "b.wav"}) {
    const auto r = cli("enhance -c " + (dir_ / "cfg.json").string() + " --model " +
                           (dir_ / "n.model").string() + " -i " + (dir_ / "noisy.wav").string() +
                           " -o " + (dir_ / name).string(),
                       dir_);
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(slurp(dir_ / "a.wav"), slurp(dir_ / "b.wav"));
  const auto wrong = cli("enhance --model " + (dir_ / "n.model").string() + " -m gplvm -i " +
                             (dir_ / "noisy.wav").string() + " -o " + (dir_ / "c.wav").string(),
                         dir_);
  EXPECT_EQ(wrong.code, static_cast<int>(ErrorCategory::invalid_argument));
}

TEST_F(Cli, AllZeroInputWritesSilence) {
  AudioSignal zero;
  zero.samples.assign(4000, 0.0);
  write_wav(dir_ / "zero.wav", zero);
  const auto r = cli("enhance -i " + (dir_ / "zero.wav").string() + " -o " + (dir_ / "z.wav").string(), dir_);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("warning"), std::string::npos);
  const AudioSignal out = read_wav(dir_ / "z.wav");
  EXPECT_EQ(out.size(), zero.size());
  for (double v : out.samples) EXPECT_EQ(v, 0.0);
}

TEST_F(Cli, EvaluateAndErrors) {
  const auto clean = (dir_ / "corpus" / "test_spk1.wav").string();
  const auto r = cli("evaluate --clean " + clean + " --enhanced " + clean, dir_);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("35.000000,0.000000"), std::string::npos) << r.out;
  EXPECT_EQ(cli("evaluate --clean " + clean + " --enhanced " + (dir_ / "missing.wav").string(), dir_).code,
            static_cast<int>(ErrorCategory::io));
  std::ofstream(dir_ / "bad.json") << R"({"snr": [5]})";
  EXPECT_EQ(cli("experiment -c " + (dir_ / "bad.json").string() + " -o " + (dir_ / "x").string(), dir_).code,
            static_cast<int>(ErrorCategory::config));
}

TEST_F(Cli, SynthWritesCorpus) {
  const auto r = cli("synth -o " + (dir_ / "synth").string() + " --train-speakers 1 --test-speakers 1", dir_);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "synth" / "manifest.json"));
  EXPECT_EQ(load_corpus(dir_ / "synth").test.size(), 1u);
}
