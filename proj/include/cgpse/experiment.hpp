#pragma once

// Batch harness: corpus loading, model training, two-stage enhancement
// (mask, then reconstruct) and SSNR/LSD scoring over a parameter grid.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "cgpse/baselines.hpp"
#include "cgpse/cgplvm.hpp"
#include "cgpse/error.hpp"
#include "cgpse/gplvm.hpp"
#include "cgpse/masking.hpp"
#include "cgpse/metrics.hpp"
#include "cgpse/model_io.hpp"
#include "cgpse/signal_io.hpp"
#include "cgpse/stft.hpp"

namespace cgpse {

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m{"masked", "sr", "nmf", "gplvm", "cgplvm"};
  return m;
}

inline bool method_uses_latent_dim(const std::string& m) { return m == "gplvm" || m == "cgplvm"; }

struct ExperimentConfig {
  std::filesystem::path corpus;  // directory holding manifest.json
  std::vector<double> snr_db{5, 10, 15, 20};
  std::vector<double> thresholds{0.75, 0.85, 0.95};
  std::vector<int> latent_dims{10, 20, 30, 40};
  std::vector<std::string> methods{"masked", "sr", "nmf", "gplvm", "cgplvm"};
  int sample_rate = 8000;
  StftConfig stft{};
  PsdConfig psd{};
  std::uint64_t seed = 1;
  int max_training_frames = 512;
  int max_test_utterances = 0;  // 0 = all
  TrainConfig train{};
  InferenceConfig inference{};
  int nmf_basis = 80;
  int nmf_train_iterations = 200;
  int nmf_iterations = 40;
  int sr_sparsity = 5;
  int sr_iterations = 50;
  int threads = 0;  // 0 = hardware concurrency
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                           const std::string& where) {
  if (!j.is_object()) fail(ErrorCategory::config, where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      fail(ErrorCategory::config, where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::config, std::string("config key '") + key + "': " + e.what());
  }
}

inline void read_optimizer(const nlohmann::json& j, OptimizerConfig& o, const std::string& where) {
  reject_unknown(j, {"max_iterations", "relative_tolerance", "gradient_tolerance", "max_halvings"},
                 where);
  read_opt(j, "max_iterations", o.max_iterations);
  read_opt(j, "relative_tolerance", o.relative_tolerance);
  read_opt(j, "gradient_tolerance", o.gradient_tolerance);
  read_opt(j, "max_halvings", o.max_halvings);
}

inline nlohmann::json optimizer_json(const OptimizerConfig& o) {
  return {{"max_iterations", o.max_iterations},
          {"relative_tolerance", o.relative_tolerance},
          {"gradient_tolerance", o.gradient_tolerance},
          {"max_halvings", o.max_halvings}};
}

}  // namespace detail

/// Parses an experiment config; unknown keys are rejected at every level.
inline ExperimentConfig config_from_json(const nlohmann::json& j,
                                         const std::filesystem::path& base_dir = {}) {
  using detail::read_opt;
  detail::reject_unknown(j,
                         {"corpus", "sample_rate", "snr_db", "thresholds", "latent_dims", "methods", "stft", "psd",
                          "seed", "max_training_frames", "max_test_utterances", "train",
                          "inference", "nmf", "sr", "threads"},
                         "config");
  ExperimentConfig c;
  if (j.contains("corpus")) {
    std::filesystem::path p = j.at("corpus").get<std::string>();
    c.corpus = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  }
  read_opt(j, "sample_rate", c.sample_rate);
  read_opt(j, "snr_db", c.snr_db);
  read_opt(j, "thresholds", c.thresholds);
  read_opt(j, "latent_dims", c.latent_dims);
  read_opt(j, "methods", c.methods);
  read_opt(j, "seed", c.seed);
  read_opt(j, "max_training_frames", c.max_training_frames);
  read_opt(j, "max_test_utterances", c.max_test_utterances);
  read_opt(j, "threads", c.threads);
  if (j.contains("stft")) {
    detail::reject_unknown(j["stft"], {"fft_size", "hop"}, "config.stft");
    read_opt(j["stft"], "fft_size", c.stft.fft_size);
    read_opt(j["stft"], "hop", c.stft.hop);
  }
  if (j.contains("psd")) {
    detail::reject_unknown(j["psd"], {"smoothing", "window_seconds", "bias"}, "config.psd");
    read_opt(j["psd"], "smoothing", c.psd.smoothing);
    read_opt(j["psd"], "window_seconds", c.psd.window_seconds);
    read_opt(j["psd"], "bias", c.psd.bias);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    detail::reject_unknown(t,
                           {"optimizer", "optimize_hyperparameters", "optimize_bias",
                            "initial_bias_ratio", "initial_noise_ratio"},
                           "config.train");
    if (t.contains("optimizer")) detail::read_optimizer(t["optimizer"], c.train.optimizer, "config.train.optimizer");
    read_opt(t, "optimize_hyperparameters", c.train.optimize_hyperparameters);
    read_opt(t, "optimize_bias", c.train.optimize_bias);
    read_opt(t, "initial_bias_ratio", c.train.initial_bias_ratio);
    read_opt(t, "initial_noise_ratio", c.train.initial_noise_ratio);
  }
  if (j.contains("inference")) {
    const auto& t = j["inference"];
    detail::reject_unknown(t, {"starts", "optimizer"}, "config.inference");
    read_opt(t, "starts", c.inference.starts);
    if (t.contains("optimizer")) {
      detail::read_optimizer(t["optimizer"], c.inference.optimizer, "config.inference.optimizer");
    }
  }
  if (j.contains("nmf")) {
    detail::reject_unknown(j["nmf"], {"basis", "train_iterations", "iterations"}, "config.nmf");
    read_opt(j["nmf"], "basis", c.nmf_basis);
    read_opt(j["nmf"], "train_iterations", c.nmf_train_iterations);
    read_opt(j["nmf"], "iterations", c.nmf_iterations);
  }
  if (j.contains("sr")) {
    detail::reject_unknown(j["sr"], {"sparsity", "iterations"}, "config.sr");
    read_opt(j["sr"], "sparsity", c.sr_sparsity);
    read_opt(j["sr"], "iterations", c.sr_iterations);
  }

  for (const auto& m : c.methods) {
    if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end()) {
      fail(ErrorCategory::config, "config: unknown method '" + m + "'");
    }
  }
  for (double t : c.thresholds) {
    if (!(t > 0.0 && t < 1.0)) fail(ErrorCategory::config, "config: thresholds must be in (0,1)");
  }
  for (int k : c.latent_dims) {
    if (k < 1) fail(ErrorCategory::config, "config: latent dims must be >= 1");
  }
  if (c.sample_rate <= 0) fail(ErrorCategory::config, "config: sample_rate must be positive");
  if (c.max_training_frames < 2) fail(ErrorCategory::config, "config: max_training_frames < 2");
  try {
    c.stft.validate();
  } catch (const Error& e) {
    fail(ErrorCategory::config, e.what());
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCategory::io, "cannot open config: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::config, "config is not valid JSON: " + std::string(e.what()));
  }
  return config_from_json(j, path.parent_path());
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  return {
      {"corpus", c.corpus.string()},
      {"sample_rate", c.sample_rate},
      {"snr_db", c.snr_db},
      {"thresholds", c.thresholds},
      {"latent_dims", c.latent_dims},
      {"methods", c.methods},
      {"stft", {{"fft_size", c.stft.fft_size}, {"hop", c.stft.hop}}},
      {"psd",
       {{"smoothing", c.psd.smoothing},
        {"window_seconds", c.psd.window_seconds},
        {"bias", c.psd.bias}}},
      {"seed", c.seed},
      {"max_training_frames", c.max_training_frames},
      {"max_test_utterances", c.max_test_utterances},
      {"train",
       {{"optimizer", detail::optimizer_json(c.train.optimizer)},
        {"optimize_hyperparameters", c.train.optimize_hyperparameters},
        {"optimize_bias", c.train.optimize_bias},
        {"initial_bias_ratio", c.train.initial_bias_ratio},
        {"initial_noise_ratio", c.train.initial_noise_ratio}}},
      {"inference",
       {{"starts", c.inference.starts}, {"optimizer", detail::optimizer_json(c.inference.optimizer)}}},
      {"nmf",
       {{"basis", c.nmf_basis},
        {"train_iterations", c.nmf_train_iterations},
        {"iterations", c.nmf_iterations}}},
      {"sr", {{"sparsity", c.sr_sparsity}, {"iterations", c.sr_iterations}}},
      {"threads", c.threads},
  };
}

// ---------------------------------------------------------------------------
// Corpus

struct Utterance {
  std::string name;
  AudioSignal signal;
};

struct Corpus {
  std::vector<Utterance> train;
  std::vector<Utterance> test;
};

inline Corpus load_corpus(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) fail(ErrorCategory::io, "cannot open corpus manifest: " + manifest_path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::config, "manifest is not valid JSON: " + std::string(e.what()));
  }
  detail::reject_unknown(j, {"sample_rate", "train", "test"}, "manifest");
  Corpus c;
  for (const char* split : {"train", "test"}) {
    if (!j.contains(split)) continue;
    for (const auto& f : j[split]) {
      const std::string file = f.get<std::string>();
      Utterance u{std::filesystem::path(file).stem().string(), read_wav(dir / file)};
      (std::string(split) == "train" ? c.train : c.test).push_back(std::move(u));
    }
  }
  return c;
}

/// Concatenated complex training frames. Frames with zero energy are
/// dropped; if more than `cap` remain, the most energetic ones are kept in
/// their original order.
inline Eigen::MatrixXcd collect_training_frames(const std::vector<AudioSignal>& signals,
                                                const StftConfig& cfg, int cap) {
  std::vector<Eigen::VectorXcd> frames;
  std::vector<double> energy;
  for (const auto& s : signals) {
    if (s.size() < static_cast<std::size_t>(cfg.fft_size)) continue;
    const Spectrogram spec = stft(s, cfg);
    for (Eigen::Index t = 0; t < spec.num_frames(); ++t) {
      const double e = spec.bins.col(t).squaredNorm();
      if (e <= 0.0) continue;
      frames.emplace_back(spec.bins.col(t));
      energy.push_back(e);
    }
  }
  if (frames.empty()) fail(ErrorCategory::invalid_argument, "training corpus has no nonzero frames");
  std::vector<std::size_t> idx(frames.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (cap > 0 && idx.size() > static_cast<std::size_t>(cap)) {
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return energy[a] > energy[b]; });
    idx.resize(static_cast<std::size_t>(cap));
    std::sort(idx.begin(), idx.end());
  }
  Eigen::MatrixXcd U(cfg.num_bins(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) U.col(static_cast<Eigen::Index>(i)) = frames[idx[i]];
  return U;
}

// ---------------------------------------------------------------------------
// Models and enhancement

struct TrainedModels {
  std::map<int, GplvmModel> gplvm;
  std::map<int, CgplvmModel> cgplvm;
  std::optional<NmfBasis> nmf;
  std::optional<SparseDictionary> dictionary;
  std::map<std::string, std::string> errors;  // "<method>/K" -> message
};

/// Trains one model for `method` ("gplvm", "cgplvm", "nmf" or "sr").
/// `objective` receives the final training objective where one exists.
inline AnyModel train_model(const std::string& method, const Eigen::MatrixXcd& U, int K,
                            const ExperimentConfig& cfg, double* objective = nullptr,
                            bool* degraded = nullptr) {
  const Eigen::MatrixXd Y = U.cwiseAbs();
  if (method == "gplvm") {
    auto t = train_gplvm(Y, K, cfg.train);
    if (objective) *objective = t.final_objective;
    if (degraded) *degraded = t.optimization.degraded;
    return std::move(t.model);
  }
  if (method == "cgplvm") {
    auto t = train_cgplvm(U, K, cfg.train);
    if (objective) *objective = t.final_objective;
    if (degraded) *degraded = t.optimization.degraded;
    return std::move(t.model);
  }
  if (method == "nmf") {
    auto t = train_nmf_basis(Y, cfg.nmf_basis, cfg.nmf_train_iterations, cfg.seed);
    if (objective) *objective = t.objective.back();
    return std::move(t.basis);
  }
  if (method == "sr") return build_dictionary(Y);
  fail(ErrorCategory::invalid_argument, "unknown trainable method: " + method);
}

inline TrainedModels train_models(const Eigen::MatrixXcd& U, const ExperimentConfig& cfg) {
  TrainedModels tm;
  auto wants = [&](const char* m) {
    return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end();
  };
  auto guarded = [&](const std::string& key, const std::function<void()>& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      tm.errors[key] = e.what();
    }
  };
  if (wants("nmf")) guarded("nmf", [&] { tm.nmf = std::get<NmfBasis>(train_model("nmf", U, 0, cfg)); });
  if (wants("sr")) {
    guarded("sr", [&] { tm.dictionary = std::get<SparseDictionary>(train_model("sr", U, 0, cfg)); });
  }
  for (int K : cfg.latent_dims) {
    const std::string suffix = "/" + std::to_string(K);
    if (wants("gplvm")) {
      guarded("gplvm" + suffix,
              [&] { tm.gplvm.emplace(K, std::get<GplvmModel>(train_model("gplvm", U, K, cfg))); });
    }
    if (wants("cgplvm")) {
      guarded("cgplvm" + suffix,
              [&] { tm.cgplvm.emplace(K, std::get<CgplvmModel>(train_model("cgplvm", U, K, cfg))); });
    }
  }
  return tm;
}

/// Stage one: noise PSD, component estimates and the binary mask.
inline MaskedSpectrogram mask_stage(const Spectrogram& noisy, double c, const PsdConfig& psd_cfg) {
  const NoisePsd psd = estimate_noise_psd(noisy, psd_cfg);
  const ComponentEstimates est = estimate_components(noisy, psd);
  return apply_mask(noisy, compute_mask(est.speech, est.noise, c));
}

struct MethodOutput {
  Spectrogram spec;
  int fallback_frames = 0;
  bool nmf_monotone = true;
  int omp_max_support = 0;
};

/// Stage two for one method.
inline MethodOutput reconstruct(const std::string& method, const AnyModel* model,
                                const Spectrogram& noisy, const MaskedSpectrogram& masked,
                                const ExperimentConfig& cfg) {
  MethodOutput out;
  if (method == "masked") {
    out.spec = masked.complex_bins;
    return out;
  }
  if (model == nullptr) fail(ErrorCategory::invalid_argument, "no trained model for " + method);
  if (method == "nmf") {
    const auto& basis = std::get<NmfBasis>(*model);
    const auto act = nmf_activations(masked.magnitude_bins, basis, cfg.nmf_iterations);
    for (std::size_t i = 1; i < act.objective.size(); ++i) {
      if (act.objective[i] > act.objective[i - 1] + 1e-12 * act.objective.front()) {
        out.nmf_monotone = false;
      }
    }
    out.spec = reconstruct_with_noisy_phase((basis.W * act.H).cwiseMax(0.0), noisy);
  } else if (method == "sr") {
    const auto& dict = std::get<SparseDictionary>(*model);
    const auto codes = omp_code(masked.magnitude_bins, dict, cfg.sr_sparsity, cfg.sr_iterations);
    for (Eigen::Index t = 0; t < codes.A.cols(); ++t) {
      out.omp_max_support = std::max(
          out.omp_max_support, static_cast<int>((codes.A.col(t).array() != 0.0).count()));
    }
    out.spec = reconstruct_with_noisy_phase((dict.D * codes.A).cwiseMax(0.0), noisy);
  } else if (method == "gplvm") {
    auto e = enhance_gplvm(std::get<GplvmModel>(*model), noisy, masked.mask, cfg.inference);
    out.spec = std::move(e.spec);
    out.fallback_frames = e.fallback_frames;
  } else if (method == "cgplvm") {
    auto e = enhance_cgplvm(std::get<CgplvmModel>(*model), masked, cfg.inference);
    out.spec = std::move(e.spec);
    out.fallback_frames = e.fallback_frames;
  } else {
    fail(ErrorCategory::invalid_argument, "unknown method: " + method);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grid

struct CellResult {
  std::string utterance;
  std::size_t utterance_index = 0;
  ReportKey key;
  bool ok = false;
  std::string error;
  double ssnr = 0.0;
  double lsd = 0.0;
  int fallback_frames = 0;
  bool nmf_monotone = true;
  int omp_max_support = 0;
  double phase_changed_fraction = 0.0;
  double max_phase_deviation = 0.0;
  double inconsistency = 0.0;
};

struct ExperimentResult {
  std::vector<CellResult> cells;
  EnhancementReport report;
  std::map<std::string, std::string> training_errors;
  int training_frames = 0;
};

/// Per-utterance noise seed derived from the corpus seed and utterance index.
inline std::uint64_t utterance_seed(std::uint64_t seed, std::size_t index) {
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ull + (index + 1) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Runs fn(i) for i in [0, n) on a bounded pool of threads.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers =
      std::min<std::size_t>(n, threads > 0 ? static_cast<std::size_t>(threads) : hw);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

/// Scores every (utterance, SNR, threshold, K, method) cell. Methods that do
/// not depend on K are computed once per (utterance, SNR, threshold) and
/// reported under every K. Cell failures are recorded and do not stop the run.
inline std::vector<CellResult> evaluate_grid(const std::vector<Utterance>& test,
                                             const TrainedModels& models,
                                             const ExperimentConfig& cfg) {
  struct Job {
    std::size_t utt;
    std::size_t snr;
  };
  std::vector<Job> jobs;
  for (std::size_t u = 0; u < test.size(); ++u)
    for (std::size_t s = 0; s < cfg.snr_db.size(); ++s) jobs.push_back({u, s});

  std::vector<std::vector<CellResult>> per_job(jobs.size());
  parallel_for(jobs.size(), cfg.threads, [&](std::size_t j) {
    const auto& utt = test[jobs[j].utt];
    const double snr = cfg.snr_db[jobs[j].snr];
    auto& out = per_job[j];
    auto record_failure = [&](const ReportKey& key, const std::string& msg) {
      CellResult r;
      r.utterance = utt.name;
      r.utterance_index = jobs[j].utt;
      r.key = key;
      r.error = msg;
      out.push_back(std::move(r));
    };

    AudioSignal noisy_sig;
    Spectrogram noisy, clean_spec;
    try {
      const AudioSignal noise = generate_white_noise(utt.signal.size(),
                                                     utterance_seed(cfg.seed, jobs[j].utt), 1.0,
                                                     utt.signal.sample_rate);
      noisy_sig = mix_at_snr(utt.signal, noise, snr);
      noisy = stft(noisy_sig, cfg.stft);
      clean_spec = stft(utt.signal, cfg.stft);
    } catch (const std::exception& e) {
      for (double c : cfg.thresholds)
        for (const auto& m : cfg.methods)
          for (int K : cfg.latent_dims) record_failure({m, snr, c, K}, e.what());
      return;
    }

    for (double c : cfg.thresholds) {
      std::optional<MaskedSpectrogram> masked;
      std::string mask_error;
      try {
        masked = mask_stage(noisy, c, cfg.psd);
      } catch (const std::exception& e) {
        mask_error = e.what();
      }
      for (const auto& method : cfg.methods) {
        const bool per_k = method_uses_latent_dim(method);
        std::optional<CellResult> shared;
        for (int K : cfg.latent_dims) {
          const ReportKey key{method, snr, c, K};
          if (!masked) {
            record_failure(key, mask_error);
            continue;
          }
          if (!per_k && shared) {
            CellResult r = *shared;
            r.key = key;
            out.push_back(std::move(r));
            continue;
          }
          CellResult r;
          r.utterance = utt.name;
          r.utterance_index = jobs[j].utt;
          r.key = key;
          try {
            AnyModel holder;
            const AnyModel* model = nullptr;
            if (method == "gplvm" && models.gplvm.count(K)) {
              holder = models.gplvm.at(K);
              model = &holder;
            } else if (method == "cgplvm" && models.cgplvm.count(K)) {
              holder = models.cgplvm.at(K);
              model = &holder;
            } else if (method == "nmf" && models.nmf) {
              holder = *models.nmf;
              model = &holder;
            } else if (method == "sr" && models.dictionary) {
              holder = *models.dictionary;
              model = &holder;
            }
            const MethodOutput mo = reconstruct(method, model, noisy, *masked, cfg);
            AudioSignal enhanced = istft(mo.spec);
            r.ssnr = ssnr(utt.signal, enhanced, cfg.stft.fft_size, cfg.stft.hop);
            r.lsd = log_spectral_distance(utt.signal, enhanced, cfg.stft);
            r.fallback_frames = mo.fallback_frames;
            r.nmf_monotone = mo.nmf_monotone;
            r.omp_max_support = mo.omp_max_support;
            r.phase_changed_fraction =
                phase_change(mo.spec, noisy, masked->mask.mask, clean_spec).fraction_changed;
            r.max_phase_deviation = max_phase_deviation(mo.spec, noisy);
            r.inconsistency = inconsistency_ratio(mo.spec);
            r.ok = true;
          } catch (const std::exception& e) {
            r.error = e.what();
          }
          if (!per_k) shared = r;
          out.push_back(std::move(r));
        }
      }
    }
  });

  std::vector<CellResult> cells;
  for (auto& v : per_job)
    for (auto& r : v) cells.push_back(std::move(r));
  std::stable_sort(cells.begin(), cells.end(), [](const CellResult& a, const CellResult& b) {
    if (a.key.method != b.key.method) return a.key.method < b.key.method;
    if (a.key.snr_db != b.key.snr_db) return a.key.snr_db < b.key.snr_db;
    if (a.key.threshold != b.key.threshold) return a.key.threshold < b.key.threshold;
    if (a.key.latent_dim != b.key.latent_dim) return a.key.latent_dim < b.key.latent_dim;
    return a.utterance_index < b.utterance_index;
  });
  return cells;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const Corpus& corpus) {
  if (corpus.train.empty()) fail(ErrorCategory::invalid_argument, "empty training corpus");
  if (corpus.test.empty()) fail(ErrorCategory::invalid_argument, "empty test corpus");
  for (const auto* split : {&corpus.train, &corpus.test}) {
    for (const auto& u : *split) {
      if (u.signal.sample_rate != cfg.sample_rate) {
        fail(ErrorCategory::invalid_argument, "sample rate mismatch in " + u.name);
      }
    }
  }
  std::vector<AudioSignal> train_signals;
  for (const auto& u : corpus.train) train_signals.push_back(u.signal);
  const Eigen::MatrixXcd U = collect_training_frames(train_signals, cfg.stft, cfg.max_training_frames);

  ExperimentResult res;
  res.training_frames = static_cast<int>(U.cols());
  const TrainedModels models = train_models(U, cfg);
  res.training_errors = models.errors;

  std::vector<Utterance> test = corpus.test;
  if (cfg.max_test_utterances > 0 && test.size() > static_cast<std::size_t>(cfg.max_test_utterances)) {
    test.resize(static_cast<std::size_t>(cfg.max_test_utterances));
  }
  res.cells = evaluate_grid(test, models, cfg);
  for (const auto& c : res.cells) {
    if (c.ok) res.report.add(c.key, c.ssnr, c.lsd);
  }
  return res;
}

inline void write_details_csv(const std::filesystem::path& path, const std::vector<CellResult>& cells) {
  std::ofstream out(path);
  if (!out) fail(ErrorCategory::io, "cannot write " + path.string());
  out << "utterance,method,snr_db,c,K,status,ssnr,lsd,fallback_frames,nmf_monotone,"
         "omp_max_support,phase_changed_fraction,max_phase_deviation,inconsistency,error\n";
  out.precision(6);
  out << std::fixed;
  for (const auto& c : cells) {
    std::string err = c.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << c.utterance << ',' << c.key.method << ',' << c.key.snr_db << ',' << c.key.threshold
        << ',' << c.key.latent_dim << ',' << (c.ok ? "ok" : "error") << ',' << c.ssnr << ','
        << c.lsd << ',' << c.fallback_frames << ',' << (c.nmf_monotone ? 1 : 0) << ','
        << c.omp_max_support << ',' << c.phase_changed_fraction << ',' << c.max_phase_deviation
        << ',' << c.inconsistency << ',' << err << '\n';
  }
}

/// Latent dimension versus SSNR for the latent-variable methods.
inline void write_k_sweep_csv(const std::filesystem::path& path, const EnhancementReport& report) {
  std::ofstream out(path);
  if (!out) fail(ErrorCategory::io, "cannot write " + path.string());
  out << "method,snr_db,c,K,ssnr\n";
  out.precision(6);
  out << std::fixed;
  for (const auto& [k, c] : report.cells()) {
    if (!method_uses_latent_dim(k.method)) continue;
    out << k.method << ',' << k.snr_db << ',' << k.threshold << ',' << k.latent_dim << ','
        << c.ssnr_mean << '\n';
  }
}

/// report.csv, details.csv, k_sweep.csv and config.json into `dir`.
inline void write_experiment_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                                     const ExperimentResult& res) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCategory::io, "cannot create output directory: " + dir.string());
  res.report.write_csv(dir / "report.csv");
  write_details_csv(dir / "details.csv", res.cells);
  write_k_sweep_csv(dir / "k_sweep.csv", res.report);
  std::ofstream cfg_out(dir / "config.json");
  if (!cfg_out) fail(ErrorCategory::io, "cannot write config.json in " + dir.string());
  cfg_out << config_to_json(cfg).dump(2) << '\n';
}

}  // namespace cgpse
