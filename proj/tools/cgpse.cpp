// cgpse command-line front end.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "cgpse/experiment.hpp"
#include "cgpse/synth.hpp"

namespace fs = std::filesystem;
using namespace cgpse;

namespace {

int verbosity = 0;

void info(const std::string& msg) {
  if (verbosity > 0) std::cerr << msg << '\n';
}

ExperimentConfig config_or_default(const std::string& path) {
  return path.empty() ? ExperimentConfig{} : load_config(path);
}

int cmd_train(const std::string& config_path, const std::string& method, int K,
              const std::string& output, const std::string& trace_csv) {
  ExperimentConfig cfg = config_or_default(config_path);
  if (method == "masked") fail(ErrorCategory::invalid_argument, "method 'masked' has no model");
  if (std::find(known_methods().begin(), known_methods().end(), method) == known_methods().end()) {
    fail(ErrorCategory::invalid_argument, "unknown method: " + method);
  }
  if (cfg.corpus.empty()) fail(ErrorCategory::config, "config has no corpus");
  const Corpus corpus = load_corpus(cfg.corpus);
  if (corpus.train.empty()) fail(ErrorCategory::invalid_argument, "empty training corpus");
  std::vector<AudioSignal> signals;
  for (const auto& u : corpus.train) signals.push_back(u.signal);
  const Eigen::MatrixXcd U = collect_training_frames(signals, cfg.stft, cfg.max_training_frames);
  info("training " + method + " on " + std::to_string(U.cols()) + " frames");
  cfg.train.trace_csv = trace_csv;
  double objective = std::numeric_limits<double>::quiet_NaN();
  bool degraded = false;
  const AnyModel model = train_model(method, U, K, cfg, &objective, &degraded);
  save_model(output, model);
  if (degraded) std::cerr << "warning: optimizer line search failed before convergence\n";
  std::printf("objective %.17g\n", objective);
  return 0;
}

int cmd_enhance(const std::string& config_path, const std::string& model_path,
                const std::string& method_in, const std::string& input, const std::string& output,
                double c, const std::string& dump_stem) {
  const ExperimentConfig cfg = config_or_default(config_path);
  const AudioSignal noisy_sig = read_wav(input);
  std::optional<AnyModel> model;
  std::string method = method_in;
  if (!model_path.empty()) {
    model = load_model(model_path);
    const std::string kind = model_kind_name(kind_of(*model));
    if (method.empty()) method = kind;
    if (method != kind) {
      fail(ErrorCategory::invalid_argument, "model file holds " + kind + ", not " + method);
    }
  }
  if (method.empty()) method = "masked";
  if (method != "masked" && !model) fail(ErrorCategory::invalid_argument, method + " needs --model");

  if (model) {
    const Eigen::Index F = std::visit(
        [](const auto& m) -> Eigen::Index {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, NmfBasis>) return m.W.rows();
          else if constexpr (std::is_same_v<T, SparseDictionary>) return m.D.rows();
          else return m.num_bins();
        },
        *model);
    if (F != cfg.stft.num_bins()) {
      fail(ErrorCategory::invalid_argument,
           "model has " + std::to_string(F) + " bins, STFT gives " + std::to_string(cfg.stft.num_bins()));
    }
  }
  if (noisy_sig.sample_rate != cfg.sample_rate) {
    fail(ErrorCategory::invalid_argument,
         "sample rate mismatch: input is " + std::to_string(noisy_sig.sample_rate) + " Hz, expected " +
             std::to_string(cfg.sample_rate) + " Hz");
  }

  const bool all_zero = std::all_of(noisy_sig.samples.begin(), noisy_sig.samples.end(),
                              [](double v) { return v == 0.0; });
  if (all_zero) {
    std::cerr << "warning: input is all zeros, writing silence\n";
    write_wav(output, noisy_sig);
    return 0;
  }

  const Spectrogram noisy = stft(noisy_sig, cfg.stft);
  const MaskedSpectrogram masked = mask_stage(noisy, c, cfg.psd);
  const MethodOutput mo = reconstruct(method, model ? &*model : nullptr, noisy, masked, cfg);
  if (mo.fallback_frames > 0) {
    std::cerr << "warning: " << mo.fallback_frames << " frames had no reliable bins\n";
  }
  const std::size_t clipped = write_wav(output, istft(mo.spec));
  if (clipped > 0) std::cerr << "warning: " << clipped << " samples clipped\n";
  if (!dump_stem.empty()) {
    dump_mask_csv(masked.mask, noisy, dump_stem + "_mask.csv");
    dump_spectrogram_csv(noisy, dump_stem + "_noisy");
    dump_spectrogram_csv(mo.spec, dump_stem + "_enhanced");
  }
  return 0;
}

int cmd_evaluate(const std::string& config_path, const std::string& clean_path,
                 const std::string& enhanced_path) {
  const ExperimentConfig cfg = config_or_default(config_path);
  const AudioSignal clean = read_wav(clean_path);
  AudioSignal enhanced = read_wav(enhanced_path);
  if (clean.sample_rate != enhanced.sample_rate) {
    fail(ErrorCategory::invalid_argument, "sample rate mismatch between clean and enhanced");
  }
  if (enhanced.size() != clean.size()) {
    fail(ErrorCategory::invalid_argument, "clean and enhanced lengths differ");
  }
  std::printf("ssnr,lsd\n%.6f,%.6f\n", ssnr(clean, enhanced, cfg.stft.fft_size, cfg.stft.hop),
              log_spectral_distance(clean, enhanced, cfg.stft));
  return 0;
}

int cmd_experiment(const std::string& config_path, const std::string& out_dir) {
  const ExperimentConfig cfg = load_config(config_path);
  if (cfg.corpus.empty()) fail(ErrorCategory::config, "config has no corpus");
  const Corpus corpus = load_corpus(cfg.corpus);
  info("corpus: " + std::to_string(corpus.train.size()) + " train, " +
       std::to_string(corpus.test.size()) + " test");
  const ExperimentResult res = run_experiment(cfg, corpus);
  for (const auto& [key, msg] : res.training_errors) {
    std::cerr << "warning: training " << key << " failed: " << msg << '\n';
  }
  std::size_t failures = 0;
  for (const auto& c : res.cells) failures += c.ok ? 0 : 1;
  if (failures > 0) std::cerr << "warning: " << failures << " cells failed, see details.csv\n";
  write_experiment_outputs(out_dir, cfg, res);
  std::printf("%zu cells, %zu failed, report in %s\n", res.cells.size(), failures,
              (fs::path(out_dir) / "report.csv").c_str());
  return 0;
}

int cmd_synth(const std::string& out_dir, std::uint64_t seed, int train_speakers,
              int test_speakers, double pitch_spread) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.train_speakers = train_speakers;
  cfg.test_speakers = test_speakers;
  cfg.pitch_spread = pitch_spread;
  const auto corpus = synthesize_corpus(cfg);
  write_corpus(corpus, out_dir);
  std::printf("%zu utterances written to %s\n", corpus.size(), out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speech enhancement with masked GPLVM / CGPLVM reconstruction"};
  app.require_subcommand(1);
  app.add_flag("-v,--verbose", verbosity, "Print progress to stderr");

  std::string config_path, method, output, model_path, input, trace_csv, dump_stem, out_dir;
  std::string clean_path, enhanced_path;
  int K = 30;
  double c = 0.95;

  auto* train = app.add_subcommand("train", "Train a model on the corpus training split");
  train->add_option("-c,--config", config_path, "Experiment config (JSON)")->required();
  train->add_option("-m,--method", method, "gplvm, cgplvm, nmf or sr")->required();
  train->add_option("-K,--latent-dim", K, "Latent dimension")->capture_default_str();
  train->add_option("-o,--output", output, "Model file")->required();
  train->add_option("--trace", trace_csv, "Write the optimizer trace CSV here");

  auto* enhance = app.add_subcommand("enhance", "Enhance one noisy wav");
  enhance->add_option("-c,--config", config_path, "Experiment config (JSON)");
  enhance->add_option("--model", model_path, "Model file from `train`");
  enhance->add_option("-m,--method", method, "masked, or the model's method");
  enhance->add_option("-i,--input", input, "Noisy wav")->required();
  enhance->add_option("-o,--output", output, "Enhanced wav")->required();
  enhance->add_option("-t,--threshold", c, "Mask threshold c")->capture_default_str();
  enhance->add_option("--dump", dump_stem, "Write mask and spectrogram CSVs with this prefix");

  auto* evaluate = app.add_subcommand("evaluate", "Score an enhanced wav against the clean one");
  evaluate->add_option("-c,--config", config_path, "Experiment config (JSON)");
  evaluate->add_option("--clean", clean_path, "Clean wav")->required();
  evaluate->add_option("--enhanced", enhanced_path, "Enhanced wav")->required();

  auto* experiment = app.add_subcommand("experiment", "Run the full evaluation grid");
  experiment->add_option("-c,--config", config_path, "Experiment config (JSON)")->required();
  experiment->add_option("-o,--output-dir", out_dir, "Output directory")->required();

  std::uint64_t seed = SynthConfig{}.seed;
  int train_speakers = SynthConfig{}.train_speakers;
  int test_speakers = SynthConfig{}.test_speakers;
  double pitch_spread = SynthConfig{}.pitch_spread;
  auto* synth = app.add_subcommand("synth", "Generate the synthetic corpus");
  synth->add_option("-o,--output-dir", out_dir, "Corpus directory")->required();
  synth->add_option("--seed", seed)->capture_default_str();
  synth->add_option("--train-speakers", train_speakers)->capture_default_str();
  synth->add_option("--test-speakers", test_speakers)->capture_default_str();
  synth->add_option("--pitch-spread", pitch_spread)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*train) return cmd_train(config_path, method, K, output, trace_csv);
    if (*enhance) return cmd_enhance(config_path, model_path, method, input, output, c, dump_stem);
    if (*evaluate) return cmd_evaluate(config_path, clean_path, enhanced_path);
    if (*experiment) return cmd_experiment(config_path, out_dir);
    if (*synth) return cmd_synth(out_dir, seed, train_speakers, test_speakers, pitch_spread);
  } catch (const Error& e) {
    std::cerr << "error[" << category_name(e.category()) << "]: " << e.what() << '\n';
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
