#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "survbal/dataset.hpp"

namespace survbal {

/// Multi-task logistic regression weights for n bins over d features:
/// one weight row and bias per interior threshold (n-1 of each).
struct MtlrParams {
  Eigen::MatrixXd W;  // (n-1) x d
  Eigen::VectorXd b;  // n-1

  MtlrParams() = default;
  MtlrParams(std::size_t n_bins, std::size_t dim);

  [[nodiscard]] std::size_t n_bins() const { return static_cast<std::size_t>(b.size()) + 1; }
  [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(W.cols()); }
  [[nodiscard]] std::size_t flat_size() const { return static_cast<std::size_t>(W.size() + b.size()); }

  /// Layout: W row-major, then b.
  [[nodiscard]] Eigen::VectorXd flatten() const;
  static MtlrParams unflatten(const Eigen::VectorXd& theta, std::size_t n_bins, std::size_t dim);
};

/// Bin scores: score_r = sum_{j >= r} (W_j . x + b_j) for r < n-1, score_{n-1} = 0.
Eigen::VectorXd mtlr_logits(const MtlrParams& params, std::span<const double> x);
/// softmax(mtlr_logits).
Eigen::VectorXd mtlr_probs(const MtlrParams& params, std::span<const double> x);

/// Uncensored: log p(bin_of(t_obs)); censored: log sum_{j >= bin_of(t_obs)} p(j).
double log_likelihood(const MtlrParams& params, const SurvivalInstance& inst, const TimeBins& bins);

/// Mean-field Gaussian q(theta) over flattened MTLR parameters.
struct VariationalPosterior {
  Eigen::VectorXd mu;
  Eigen::VectorXd log_sigma;
  std::size_t n_bins = 0;
  std::size_t feature_dim = 0;
  std::uint64_t seed = 0;

  [[nodiscard]] Eigen::VectorXd sigma() const { return log_sigma.array().exp(); }
  [[nodiscard]] MtlrParams mean_params() const { return MtlrParams::unflatten(mu, n_bins, feature_dim); }

  void save(const std::filesystem::path& path) const;
  static VariationalPosterior load(const std::filesystem::path& path);
  [[nodiscard]] std::string to_json() const;
  static VariationalPosterior from_json(const std::string& text);
};

enum class PriorKind { Gaussian, SpikeAndSlab };

struct PriorConfig {
  PriorKind kind = PriorKind::Gaussian;
  double sigma = 1.0;           // Gaussian prior std (also the slab std and the bias prior)
  double spike_sigma = 0.05;    // spike component std
  double spike_weight = 0.5;    // mixture weight of the spike
};

struct FitConfig {
  std::size_t epochs = 5000;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t mc_samples = 1;     // reparameterized draws per step
  double init_log_sigma = -2.3;
  PriorConfig prior;
  std::size_t trace_every = 0;    // 0 disables the ELBO trace
  std::size_t trace_samples = 16; // frozen draws used to evaluate the trace
};

struct FitResult {
  VariationalPosterior posterior;
  std::vector<double> elbo_trace;  // evaluated with a frozen noise set
};

/// Closed-form KL(q || p) between diagonal Gaussians.
double kl_diag_gaussians(const Eigen::VectorXd& mu_q, const Eigen::VectorXd& log_sigma_q,
                         const Eigen::VectorXd& mu_p, const Eigen::VectorXd& log_sigma_p);

/// KL term against the configured prior, with gradients.
struct KlTerm {
  double value = 0.0;
  Eigen::VectorXd d_mu;
  Eigen::VectorXd d_log_sigma;
};
KlTerm prior_kl(const Eigen::VectorXd& mu, const Eigen::VectorXd& log_sigma, const PriorConfig& prior,
                std::size_t n_weights);

/// Training labels in the form the likelihood needs.
struct TrainingSet {
  Eigen::MatrixXd X;                // N x d
  std::vector<std::size_t> bin;     // bin_of(t_obs)
  std::vector<bool> censored;
  std::size_t n_bins = 0;

  static TrainingSet from(const Dataset& ds);
};

/// Total log-likelihood and its gradient w.r.t. flattened parameters.
struct LikelihoodEval {
  double value = 0.0;
  Eigen::VectorXd grad;
};
LikelihoodEval total_log_likelihood(const TrainingSet& data, const Eigen::VectorXd& theta, bool want_grad = true);

/// Reparameterized ELBO estimate for a fixed set of standard-normal draws
/// (one column per draw), with exact gradients w.r.t. (mu, log_sigma).
struct ElboEval {
  double value = 0.0;
  Eigen::VectorXd d_mu;
  Eigen::VectorXd d_log_sigma;
};
ElboEval elbo(const TrainingSet& data, const Eigen::VectorXd& mu, const Eigen::VectorXd& log_sigma,
              const Eigen::MatrixXd& eps, const PriorConfig& prior);

/// Stochastic gradient ascent (Adam) on the ELBO. Deterministic given seed.
/// Throws TrainingError if the ELBO becomes non-finite.
FitResult fit(const Dataset& ds, const FitConfig& config, std::uint64_t seed);

struct PosteriorSampleSet {
  std::vector<MtlrParams> samples;
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t size() const { return samples.size(); }
};

/// theta_s = mu + sigma * eps_s with eps_s ~ N(0, I).
PosteriorSampleSet sample_posterior(const VariationalPosterior& q, std::size_t n_samples, std::uint64_t seed);

/// Bin probabilities laid out [instance][sample][bin].
class BinProbTensor {
 public:
  BinProbTensor() = default;
  BinProbTensor(std::size_t n_instances, std::size_t n_samples, std::size_t n_bins);

  [[nodiscard]] std::size_t instances() const { return n_inst_; }
  [[nodiscard]] std::size_t samples() const { return n_samp_; }
  [[nodiscard]] std::size_t bins() const { return n_bins_; }

  [[nodiscard]] std::span<const double> row(std::size_t i, std::size_t s) const {
    return {data_.data() + (i * n_samp_ + s) * n_bins_, n_bins_};
  }
  [[nodiscard]] std::span<double> row(std::size_t i, std::size_t s) {
    return {data_.data() + (i * n_samp_ + s) * n_bins_, n_bins_};
  }
  /// Mean over posterior samples of instance i's bin distribution.
  [[nodiscard]] std::vector<double> mean_row(std::size_t i) const;

 private:
  std::size_t n_inst_ = 0, n_samp_ = 0, n_bins_ = 0;
  std::vector<double> data_;
};

BinProbTensor predict(const PosteriorSampleSet& samples, const Eigen::MatrixXd& X);

/// Survival at the start of each bin: S_j = sum_{r >= j} p_r (so S_0 = 1).
std::vector<double> survival_at_bin_starts(std::span<const double> probs);

}  // namespace survbal
