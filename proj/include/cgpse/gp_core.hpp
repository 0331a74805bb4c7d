#pragma once

// Shared Gaussian-process numerics for the real and complex latent variable
// models: kernels, Gram matrices, log marginal likelihoods with analytic
// gradients, and a monotone gradient-ascent optimizer.
//
// Both models reduce to the same computation over a real coordinate matrix
// X (D x M). A real latent matrix Z (K x M) is used as is; a complex latent
// matrix V (K x M) is stacked as [Re V; Im V] (2K x M), since the complex
// kernel only depends on the Hermitian distance, which equals the Euclidean
// distance of the stacked coordinates. Observed data are handled the same
// way: a complex band contributes two real rows, each distributed as a real
// GP with half the covariance.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "cgpse/error.hpp"

namespace cgpse {

enum class LatentKind { real, complex };

/// theta1: signal variance, theta2: length-scale parameter, theta3: bias,
/// beta: noise precision.
struct KernelParams {
  double theta1 = 1.0;
  double theta2 = 1.0;
  double theta3 = 0.0;
  double beta = 100.0;

  bool valid() const {
    return theta1 >= 0.0 && theta2 > 0.0 && theta3 >= 0.0 && beta > 0.0 &&
           std::isfinite(theta1) && std::isfinite(theta2) && std::isfinite(theta3) &&
           std::isfinite(beta);
  }
};

/// Multiplier of the squared distance inside the exponential: the real RBF
/// uses exp(-theta2 d^2), the complex kernel exp(-d^2 / theta2).
inline double se_gain(LatentKind kind, const KernelParams& p) {
  return kind == LatentKind::real ? p.theta2 : 1.0 / p.theta2;
}

/// theta1 * exp(-theta2 * |a - b|^2) + theta3
inline double rbf_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                         const KernelParams& p) {
  require(a.size() == b.size(), "rbf_kernel: dimension mismatch");
  return p.theta1 * std::exp(-p.theta2 * (a - b).squaredNorm()) + p.theta3;
}

/// theta1 * exp(-(a - b)^H (a - b) / theta2) + theta3; always real.
inline double cplx_kernel(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b,
                          const KernelParams& p) {
  require(a.size() == b.size(), "cplx_kernel: dimension mismatch");
  return p.theta1 * std::exp(-(a - b).squaredNorm() / p.theta2) + p.theta3;
}

/// Stacks a latent matrix into real coordinates.
inline Eigen::MatrixXd to_coordinates(const Eigen::MatrixXd& Z) { return Z; }

inline Eigen::MatrixXd to_coordinates(const Eigen::MatrixXcd& V) {
  Eigen::MatrixXd X(2 * V.rows(), V.cols());
  X.topRows(V.rows()) = V.real();
  X.bottomRows(V.rows()) = V.imag();
  return X;
}

inline Eigen::MatrixXcd complex_from_coordinates(const Eigen::MatrixXd& X) {
  const Eigen::Index K = X.rows() / 2;
  Eigen::MatrixXcd V(K, X.cols());
  V.real() = X.topRows(K);
  V.imag() = X.bottomRows(K);
  return V;
}

/// Real data rows: Y itself, or [Re U; Im U] for complex spectra.
inline Eigen::MatrixXd to_rows(const Eigen::MatrixXd& Y) { return Y; }

inline Eigen::MatrixXd to_rows(const Eigen::MatrixXcd& U) {
  Eigen::MatrixXd R(2 * U.rows(), U.cols());
  R.topRows(U.rows()) = U.real();
  R.bottomRows(U.rows()) = U.imag();
  return R;
}

struct GramMatrix {
  Eigen::MatrixXd k;
  bool with_noise = false;
  double jitter = 0.0;  // extra diagonal loading applied to make k factorizable
};

/// Cholesky factor of A + jitter * I.
struct CholeskyFactor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;

  double log_det() const {
    const auto& L = llt.matrixLLT();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < L.rows(); ++i) acc += std::log(L(i, i));
    return 2.0 * acc;
  }
};

namespace detail {

inline bool factor_ok(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  if (llt.info() != Eigen::Success) return false;
  const auto& L = llt.matrixLLT();
  for (Eigen::Index i = 0; i < L.rows(); ++i) {
    if (!(L(i, i) > 0.0) || !std::isfinite(L(i, i))) return false;
  }
  return true;
}

}  // namespace detail

/// Jitter schedule: try A as is, then add 1e-8 * mean(diag A) and grow it
/// tenfold per failure, at most six times.
inline CholeskyFactor robust_cholesky(const Eigen::MatrixXd& A) {
  CholeskyFactor out;
  out.llt.compute(A);
  if (detail::factor_ok(out.llt)) return out;
  const double mean_diag = std::max(A.diagonal().mean(), std::numeric_limits<double>::min());
  double jitter = 1e-8 * mean_diag;
  for (int attempt = 0; attempt < 6; ++attempt, jitter *= 10.0) {
    Eigen::MatrixXd loaded = A;
    loaded.diagonal().array() += jitter;
    out.llt.compute(loaded);
    if (detail::factor_ok(out.llt)) {
      out.jitter = jitter;
      return out;
    }
  }
  fail(ErrorCategory::numerical,
       "Cholesky factorization failed after maximum jitter (ill-conditioned hyperparameters)");
}

namespace detail {

/// Squared-exponential part theta1 * exp(-gain * d^2) and the squared
/// distances, both M x M.
inline void se_matrices(const Eigen::MatrixXd& X, double theta1, double gain,
                        Eigen::MatrixXd& se, Eigen::MatrixXd& d2) {
  const Eigen::Index M = X.cols();
  const Eigen::Index D = X.rows();
  se.resize(M, M);
  d2.resize(M, M);
  for (Eigen::Index m = 0; m < M; ++m) {
    se(m, m) = theta1;
    d2(m, m) = 0.0;
    for (Eigen::Index n = m + 1; n < M; ++n) {
      double acc = 0.0;
      for (Eigen::Index d = 0; d < D; ++d) {
        const double diff = X(d, n) - X(d, m);
        acc += diff * diff;
      }
      d2(n, m) = d2(m, n) = acc;
      se(n, m) = se(m, n) = theta1 * std::exp(-gain * acc);
    }
  }
}

inline GramMatrix gram_from_coordinates(const Eigen::MatrixXd& X, LatentKind kind,
                                        const KernelParams& p, bool add_noise) {
  require(X.cols() >= 1, "kernel_matrix: need at least one point");
  Eigen::MatrixXd se, d2;
  se_matrices(X, p.theta1, se_gain(kind, p), se, d2);
  GramMatrix g;
  g.k = se.array() + p.theta3;
  g.with_noise = add_noise;
  if (add_noise) {
    g.k.diagonal().array() += 1.0 / p.beta;
    g.jitter = robust_cholesky(g.k).jitter;
    g.k.diagonal().array() += g.jitter;
  }
  return g;
}

/// Row-model constants. Real bands: each row ~ N(0, A). Complex bands: each
/// of the two real rows ~ N(0, A/2), which reproduces the proper complex
/// Gaussian density of the band.
struct RowScale {
  double variance_scale;  // 1 (real) or 1/2 (complex)
  double log_norm;        // ln(2*pi*variance_scale)
};

inline RowScale row_scale(LatentKind kind) {
  return kind == LatentKind::real ? RowScale{1.0, std::log(2.0 * std::numbers::pi)}
                                  : RowScale{0.5, std::log(std::numbers::pi)};
}

struct Evaluation {
  double value = 0.0;
  Eigen::MatrixXd grad_coords;    // D x M
  Eigen::Vector4d grad_log_params = Eigen::Vector4d::Zero();  // theta1, theta2, theta3, beta
  double jitter = 0.0;
};

/// Log marginal likelihood of rows R (n x M) given coordinates X (D x M):
///   sum_rows [ -M/2 ln(2 pi s) - 1/2 ln|A| - r^T A^{-1} r / (2 s) ]
/// with A = K + beta^{-1} I, and optionally its gradient.
inline Evaluation evaluate(const Eigen::MatrixXd& X, const Eigen::MatrixXd& R, LatentKind kind,
                           const KernelParams& p, bool want_gradient) {
  require(X.cols() == R.cols(), "log marginal: latent/data column count mismatch");
  const Eigen::Index M = X.cols();
  const double n_rows = static_cast<double>(R.rows());
  const RowScale rs = row_scale(kind);
  const double gain = se_gain(kind, p);

  Eigen::MatrixXd se, d2;
  se_matrices(X, p.theta1, gain, se, d2);
  Eigen::MatrixXd A = se.array() + p.theta3;
  A.diagonal().array() += 1.0 / p.beta;
  const CholeskyFactor chol = robust_cholesky(A);

  const Eigen::MatrixXd W = chol.llt.solve(R.transpose());  // A^{-1} R^T, M x n
  const double quad = (R.transpose().array() * W.array()).sum();

  Evaluation ev;
  ev.jitter = chol.jitter;
  ev.value = -0.5 * n_rows * static_cast<double>(M) * rs.log_norm -
             0.5 * n_rows * chol.log_det() - quad / (2.0 * rs.variance_scale);
  if (!want_gradient) return ev;

  const Eigen::MatrixXd Ainv = chol.llt.solve(Eigen::MatrixXd::Identity(M, M));
  // dL/dA
  Eigen::MatrixXd G = (W * W.transpose()) / (2.0 * rs.variance_scale) - 0.5 * n_rows * Ainv;

  const Eigen::MatrixXd GE = G.cwiseProduct(se);
  ev.grad_log_params(0) = GE.sum();
  const double dlog_gain = -gain * GE.cwiseProduct(d2).sum();  // d/d ln(gain)
  ev.grad_log_params(1) = kind == LatentKind::real ? dlog_gain : -dlog_gain;
  ev.grad_log_params(2) = p.theta3 * G.sum();
  ev.grad_log_params(3) = -G.trace() / p.beta;

  const Eigen::VectorXd row_sums = GE.rowwise().sum();
  ev.grad_coords = -4.0 * gain * (X * row_sums.asDiagonal() - X * GE);
  return ev;
}

}  // namespace detail

/// Pairwise kernel values over real latent points (RBF plus bias).
inline GramMatrix kernel_matrix(const Eigen::MatrixXd& Z, const KernelParams& p,
                                bool add_noise) {
  return detail::gram_from_coordinates(to_coordinates(Z), LatentKind::real, p, add_noise);
}

/// Pairwise kernel values over complex latent points (real-valued kernel).
inline GramMatrix kernel_matrix(const Eigen::MatrixXcd& V, const KernelParams& p,
                                bool add_noise) {
  return detail::gram_from_coordinates(to_coordinates(V), LatentKind::complex, p, add_noise);
}

/// sum_f ln N(Y_f | 0, K + beta^{-1} I) for Y (F x M), Z (K x M).
inline double log_marginal_real(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Z,
                                const KernelParams& p) {
  return detail::evaluate(to_coordinates(Z), to_rows(Y), LatentKind::real, p, false).value;
}

/// -F M ln(pi) - F ln|K_c + beta^{-1} I| - trace((K_c + beta^{-1} I)^{-1} U^T conj(U))
/// for U (F x M), V (K x M); the trace runs over the F band rows of U.
inline double log_marginal_complex(const Eigen::MatrixXcd& U, const Eigen::MatrixXcd& V,
                                   const KernelParams& p) {
  return detail::evaluate(to_coordinates(V), to_rows(U), LatentKind::complex, p, false).value;
}

/// Gradient of a log marginal likelihood. `latent` is K x M for the real
/// model and 2K x M for the complex model (rows 0..K-1 hold d/dRe v,
/// rows K..2K-1 hold d/dIm v). `log_params` is with respect to
/// (ln theta1, ln theta2, ln theta3, ln beta).
struct LogMarginalGradient {
  double value = 0.0;
  Eigen::MatrixXd latent;
  Eigen::Vector4d log_params = Eigen::Vector4d::Zero();
};

inline LogMarginalGradient grad_log_marginal_real(const Eigen::MatrixXd& Y,
                                                  const Eigen::MatrixXd& Z,
                                                  const KernelParams& p) {
  auto ev = detail::evaluate(to_coordinates(Z), to_rows(Y), LatentKind::real, p, true);
  return {ev.value, std::move(ev.grad_coords), ev.grad_log_params};
}

inline LogMarginalGradient grad_log_marginal_complex(const Eigen::MatrixXcd& U,
                                                     const Eigen::MatrixXcd& V,
                                                     const KernelParams& p) {
  auto ev = detail::evaluate(to_coordinates(V), to_rows(U), LatentKind::complex, p, true);
  return {ev.value, std::move(ev.grad_coords), ev.grad_log_params};
}

// ---------------------------------------------------------------------------
// Optimizer

struct OptimizerConfig {
  int max_iterations = 500;
  double relative_tolerance = 1e-6;
  double gradient_tolerance = 1e-5;
  int max_halvings = 60;
};

struct TraceEntry {
  int iteration = 0;
  double objective = 0.0;
  double gradient_norm = 0.0;
  double step = 0.0;
};

enum class StopReason { relative_change, gradient_norm, max_iterations, line_search_failed };

struct OptimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  std::vector<TraceEntry> trace;
  StopReason reason = StopReason::max_iterations;
  bool degraded = false;
  int evaluations = 0;
};

/// Returns f(x) and writes the gradient when `grad` is non-null.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

/// Gradient ascent. The trial step is a Barzilai-Borwein estimate, halved
/// until the objective strictly improves, so the trace never decreases.
inline OptimizeResult maximize(const Objective& objective, Eigen::VectorXd init,
                               const OptimizerConfig& cfg = {}) {
  OptimizeResult res;
  res.x = std::move(init);
  res.gradient.resize(res.x.size());
  res.value = objective(res.x, &res.gradient);
  res.evaluations = 1;
  if (!std::isfinite(res.value) || !res.gradient.allFinite()) {
    fail(ErrorCategory::numerical, "maximize: objective not finite at the initial point");
  }
  double gnorm = res.gradient.norm();
  res.trace.push_back({0, res.value, gnorm, 0.0});

  double step = gnorm > 0.0 ? 1.0 / gnorm : 1.0;
  Eigen::VectorXd x_new(res.x.size()), g_new(res.x.size());
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    if (gnorm < cfg.gradient_tolerance) {
      res.reason = StopReason::gradient_norm;
      return res;
    }
    bool accepted = false;
    double f_new = 0.0;
    double trial = step;
    for (int h = 0; h <= cfg.max_halvings; ++h, trial *= 0.5) {
      x_new = res.x + trial * res.gradient;
      f_new = objective(x_new, &g_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && f_new > res.value && g_new.allFinite()) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.reason = StopReason::line_search_failed;
      res.degraded = true;
      return res;
    }

    const Eigen::VectorXd dx = x_new - res.x;
    const Eigen::VectorXd dg = g_new - res.gradient;
    const double curvature = -dx.dot(dg);
    step = curvature > 0.0 ? dx.squaredNorm() / curvature : 2.0 * trial;
    step = std::clamp(step, 1e-3 * trial, 1e3 * trial);

    const double change = std::abs(f_new - res.value) / std::max(std::abs(res.value), 1.0);
    res.x.swap(x_new);
    res.gradient.swap(g_new);
    res.value = f_new;
    gnorm = res.gradient.norm();
    res.trace.push_back({it, res.value, gnorm, trial});
    if (change < cfg.relative_tolerance) {
      res.reason = StopReason::relative_change;
      return res;
    }
  }
  res.reason = gnorm < cfg.gradient_tolerance ? StopReason::gradient_norm
                                              : StopReason::max_iterations;
  return res;
}

inline void write_trace_csv(const std::filesystem::path& path,
                            const std::vector<TraceEntry>& trace) {
  std::ofstream out(path);
  if (!out) fail(ErrorCategory::io, "cannot write trace: " + path.string());
  out << "iteration,objective,gradient_norm,step\n";
  out.precision(17);
  for (const auto& e : trace) {
    out << e.iteration << ',' << e.objective << ',' << e.gradient_norm << ',' << e.step << '\n';
  }
}

// ---------------------------------------------------------------------------
// Training and frozen-model inference shared by both latent variable models.

struct TrainConfig {
  OptimizerConfig optimizer{};
  bool optimize_hyperparameters = true;
  bool optimize_bias = true;
  /// Initial bias relative to the initial signal variance.
  double initial_bias_ratio = 1e-2;
  /// Initial noise variance relative to the initial signal variance.
  double initial_noise_ratio = 1e-2;
  std::filesystem::path trace_csv{};
};

struct InferenceConfig {
  int starts = 5;
  OptimizerConfig optimizer{200, 1e-7, 1e-6, 60};
};

namespace detail {

/// Trained model with everything needed for test-time inference cached.
struct FrozenGp {
  LatentKind kind = LatentKind::real;
  Eigen::MatrixXd X;  // D x M coordinates
  Eigen::MatrixXd R;  // n_rows x M data rows
  KernelParams params;
  double jitter = 0.0;
  Eigen::MatrixXd Ainv;   // (K + beta^{-1} I + jitter I)^{-1}
  Eigen::MatrixXd alpha;  // A^{-1} R^T, M x n_rows
  double train_log_likelihood = 0.0;

  static FrozenGp build(LatentKind kind, Eigen::MatrixXd X, Eigen::MatrixXd R,
                        const KernelParams& p) {
    FrozenGp g;
    g.kind = kind;
    g.params = p;
    const auto ev = evaluate(X, R, kind, p, false);
    g.train_log_likelihood = ev.value;
    const GramMatrix gram = gram_from_coordinates(X, kind, p, true);
    g.jitter = gram.jitter;
    const CholeskyFactor chol = robust_cholesky(gram.k);
    const Eigen::Index M = X.cols();
    g.Ainv = chol.llt.solve(Eigen::MatrixXd::Identity(M, M));
    g.alpha = chol.llt.solve(R.transpose());
    g.X = std::move(X);
    g.R = std::move(R);
    return g;
  }

  Eigen::Index dim() const { return X.rows(); }
  Eigen::Index size() const { return X.cols(); }

  /// Cross-kernel vector k(x) and its squared-exponential part.
  void cross_kernel(const Eigen::VectorXd& x, Eigen::VectorXd& k, Eigen::VectorXd& se) const {
    const double gain = se_gain(kind, params);
    const Eigen::Index M = size();
    k.resize(M);
    se.resize(M);
    for (Eigen::Index m = 0; m < M; ++m) {
      se(m) = params.theta1 * std::exp(-gain * (x - X.col(m)).squaredNorm());
      k(m) = se(m) + params.theta3;
    }
  }

  /// Posterior mean of all rows at x.
  Eigen::VectorXd predict_rows(const Eigen::VectorXd& x) const {
    Eigen::VectorXd k, se;
    cross_kernel(x, k, se);
    return alpha.transpose() * k;
  }

  /// Conditional log density of the observed rows of a new column at x,
  /// i.e. ln p(R, r_obs | X, x) - ln p(R | X); adds its gradient w.r.t. x.
  double conditional(const Eigen::VectorXd& x, const Eigen::MatrixXd& alpha_obs,
                     const Eigen::VectorXd& r_obs, Eigen::VectorXd* grad) const {
    const RowScale rs = row_scale(kind);
    const double gain = se_gain(kind, params);
    Eigen::VectorXd k, se;
    cross_kernel(x, k, se);
    const Eigen::VectorXd q = Ainv * k;
    const double prior = params.theta1 + params.theta3 + 1.0 / params.beta + jitter;
    const double var = std::max(prior - k.dot(q), 1e-12 * prior);
    const Eigen::VectorXd resid = r_obs - alpha_obs.transpose() * k;
    const double n = static_cast<double>(r_obs.size());
    const double sv = rs.variance_scale * var;
    const double value = -0.5 * n * (rs.log_norm + std::log(var)) -
                         resid.squaredNorm() / (2.0 * sv);
    if (grad) {
      const double dvar = -0.5 * n / var + resid.squaredNorm() / (2.0 * sv * var);
      const Eigen::VectorXd gk = alpha_obs * (resid / sv) - 2.0 * dvar * q;
      const Eigen::VectorXd w = gk.cwiseProduct(se);
      *grad = -2.0 * gain * (x * w.sum() - X * w);
    }
    return value;
  }
};

struct InferenceResult {
  Eigen::VectorXd coords;
  double objective = 0.0;  // joint log-likelihood of training data and frame
  std::vector<double> start_objectives;
};

/// argmax_x ln p(R, r | X, x) using only the reliable rows of the test
/// column. Starts from the training points closest to the observation on
/// those rows.
inline InferenceResult infer(const FrozenGp& gp, const Eigen::VectorXd& rows,
                             const std::vector<Eigen::Index>& observed,
                             const InferenceConfig& cfg) {
  if (observed.empty()) {
    fail(ErrorCategory::invalid_argument, "latent inference: no reliable evidence");
  }
  const Eigen::Index M = gp.size();
  const auto n_obs = static_cast<Eigen::Index>(observed.size());
  Eigen::MatrixXd alpha_obs(M, n_obs);
  Eigen::VectorXd r_obs(n_obs);
  for (Eigen::Index i = 0; i < n_obs; ++i) {
    alpha_obs.col(i) = gp.alpha.col(observed[i]);
    r_obs(i) = rows(observed[i]);
  }

  std::vector<double> dist(M, 0.0);
  for (Eigen::Index m = 0; m < M; ++m) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n_obs; ++i) {
      const double d = r_obs(i) - gp.R(observed[i], m);
      acc += d * d;
    }
    dist[m] = acc;
  }
  std::vector<Eigen::Index> order(M);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto n_starts = std::min<Eigen::Index>(std::max(cfg.starts, 1), M);
  std::partial_sort(order.begin(), order.begin() + n_starts, order.end(),
                    [&](Eigen::Index a, Eigen::Index b) {
                      return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
                    });

  const Objective fn = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    return gp.conditional(x, alpha_obs, r_obs, g);
  };
  InferenceResult best;
  best.objective = -std::numeric_limits<double>::infinity();
  for (Eigen::Index s = 0; s < n_starts; ++s) {
    Eigen::VectorXd start = gp.X.col(order[s]);
    best.start_objectives.push_back(gp.train_log_likelihood + fn(start, nullptr));
    const OptimizeResult r = maximize(fn, std::move(start), cfg.optimizer);
    const double total = gp.train_log_likelihood + r.value;
    if (total > best.objective) {
      best.objective = total;
      best.coords = r.x;
    }
  }
  return best;
}

/// Packs coordinates and log-hyperparameters into one optimizer vector.
struct TrainingProblem {
  LatentKind kind;
  Eigen::MatrixXd R;
  Eigen::Index D, M;
  KernelParams fixed;  // values of frozen parameters
  bool optimize_hyper;
  bool optimize_bias;

  Eigen::VectorXd pack(const Eigen::MatrixXd& X, const KernelParams& p) const {
    Eigen::VectorXd v(D * M + 4);
    v.head(D * M) = Eigen::Map<const Eigen::VectorXd>(X.data(), D * M);
    v(D * M + 0) = std::log(p.theta1);
    v(D * M + 1) = std::log(p.theta2);
    v(D * M + 2) = p.theta3 > 0.0 ? std::log(p.theta3) : 0.0;
    v(D * M + 3) = std::log(p.beta);
    return v;
  }

  Eigen::MatrixXd coords(const Eigen::VectorXd& v) const {
    return Eigen::Map<const Eigen::MatrixXd>(v.data(), D, M);
  }

  KernelParams params(const Eigen::VectorXd& v) const {
    if (!optimize_hyper) return fixed;
    KernelParams p;
    p.theta1 = std::exp(v(D * M + 0));
    p.theta2 = std::exp(v(D * M + 1));
    p.theta3 = optimize_bias ? std::exp(v(D * M + 2)) : fixed.theta3;
    p.beta = std::exp(v(D * M + 3));
    return p;
  }

  double operator()(const Eigen::VectorXd& v, Eigen::VectorXd* grad) const {
    const KernelParams p = params(v);
    if (!p.valid()) return -std::numeric_limits<double>::infinity();
    Evaluation ev;
    try {
      ev = evaluate(coords(v), R, kind, p, grad != nullptr);
    } catch (const Error&) {
      return -std::numeric_limits<double>::infinity();
    }
    if (grad) {
      grad->resize(v.size());
      grad->head(D * M) = Eigen::Map<const Eigen::VectorXd>(ev.grad_coords.data(), D * M);
      grad->tail(4) = optimize_hyper ? Eigen::VectorXd(ev.grad_log_params)
                                     : Eigen::VectorXd::Zero(4);
      if (!optimize_bias) (*grad)(D * M + 2) = 0.0;
    }
    return ev.value;
  }
};

struct TrainingOutcome {
  Eigen::MatrixXd X;
  KernelParams params;
  OptimizeResult optimization;
  double initial_objective = 0.0;
};

inline TrainingOutcome train(LatentKind kind, Eigen::MatrixXd X0, Eigen::MatrixXd R,
                             const KernelParams& init, const TrainConfig& cfg) {
  TrainingProblem prob{kind, std::move(R), X0.rows(), X0.cols(), init,
                       cfg.optimize_hyperparameters,
                       cfg.optimize_bias && init.theta3 > 0.0};
  const Eigen::VectorXd v0 = prob.pack(X0, init);
  const Objective fn = [&](const Eigen::VectorXd& v, Eigen::VectorXd* g) { return prob(v, g); };
  TrainingOutcome out;
  out.optimization = maximize(fn, v0, cfg.optimizer);
  out.initial_objective = out.optimization.trace.front().objective;
  out.X = prob.coords(out.optimization.x);
  out.params = prob.params(out.optimization.x);
  if (!cfg.trace_csv.empty()) write_trace_csv(cfg.trace_csv, out.optimization.trace);
  return out;
}

/// Initial hyperparameters for latents with unit variance per coordinate.
inline KernelParams initial_params(LatentKind kind, const Eigen::MatrixXd& R, Eigen::Index D,
                                   const TrainConfig& cfg) {
  const double row_var_scale = kind == LatentKind::real ? 1.0 : 2.0;
  double signal = R.squaredNorm() / static_cast<double>(R.size()) * row_var_scale;
  if (!(signal > 0.0)) signal = 1.0;
  KernelParams p;
  p.theta1 = signal;
  // Expected squared distance between two initial latents: 2 per latent
  // dimension (real coordinates of a complex dimension carry half each).
  const double mean_d2 = (kind == LatentKind::real ? 2.0 : 1.0) * static_cast<double>(D);
  p.theta2 = kind == LatentKind::real ? 1.0 / mean_d2 : mean_d2;
  p.theta3 = cfg.initial_bias_ratio * signal;
  p.beta = 1.0 / (cfg.initial_noise_ratio * signal);
  return p;
}

}  // namespace detail
}  // namespace cgpse
