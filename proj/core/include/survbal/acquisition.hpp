#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "survbal/dataset.hpp"
#include "survbal/mtlr.hpp"

namespace survbal {

// ---------------------------------------------------------------------------
// Censoring transforms

/// Model distribution conditioned on surviving past the start of the censor
/// bin: probs[i] == 0 for i < censor_bin, the rest renormalized.
struct CensoredProbRow {
  std::vector<double> probs;
  std::size_t censor_bin = 0;
};

inline constexpr std::size_t kUnknowableClass = std::numeric_limits<std::size_t>::max();

/// Distribution over the bins a probe can still resolve, plus one merged
/// class for everything beyond the probe horizon.
struct KnowableProbRow {
  std::vector<double> probs;
  /// Original bin of each class; kUnknowableClass marks the merged class,
  /// which is always last when present.
  std::vector<std::size_t> class_map;

  [[nodiscard]] bool has_unknowable() const {
    return !class_map.empty() && class_map.back() == kUnknowableClass;
  }
};

inline constexpr double kDegenerateTailMass = 1e-12;

/// Throws DegenerateRowError if less than 1e-12 mass lies at or after censor_bin.
CensoredProbRow to_p_cens(std::span<const double> row, std::size_t censor_bin);

/// Keeps the bins from the censor bin through bin_of(c + k) and merges the
/// later ones into the unknowable class. When c + k lands in the last bin
/// nothing is merged.
KnowableProbRow to_p_final(const CensoredProbRow& row, double c, double k, const TimeBins& bins);

// ---------------------------------------------------------------------------
// Batch mutual information

/// Per-instance class probabilities: one row per posterior sample, one
/// column per class. Instances in a batch may have different class counts.
using ClassMatrix = Eigen::MatrixXd;

enum class MiMode { Exact, Sampled, Auto };

struct MiOptions {
  MiMode mode = MiMode::Auto;
  /// Largest joint configuration space enumerated exactly.
  std::size_t exact_limit = 100000;
  /// Configurations drawn when estimating the joint entropy by sampling.
  std::size_t n_configs = 10000;
  std::uint64_t seed = 0;
};

/// Shannon entropy in bits; 0 log 0 = 0.
double entropy_bits(std::span<const double> p);

/// Mean over samples of the per-sample entropy of one instance (bits).
double expected_conditional_entropy(const ClassMatrix& m);

/// I(y_1..y_b ; omega) in bits, estimated from the posterior samples:
/// joint entropy of the sample-averaged product distribution minus the
/// expected conditional entropies. Exact mode throws
/// ConfigurationOverflowError when the product of class counts exceeds
/// exact_limit. Clamped at 0.
double batch_mutual_information(std::span<const ClassMatrix> rows, const MiOptions& options = {});

/// Incremental batch-MI evaluator for greedy selection. Keeps the joint of
/// the committed batch (exact while small, sampled configurations after) so
/// each candidate's marginal gain costs one matrix product.
class BatchMiOracle {
 public:
  BatchMiOracle(std::vector<ClassMatrix> candidates, MiOptions options);

  [[nodiscard]] std::size_t size() const { return candidates_.size(); }
  /// MI of the committed batch.
  [[nodiscard]] double value() const { return value_; }
  /// MI(batch + {c}) - MI(batch).
  [[nodiscard]] double gain(std::size_t c) const;
  void commit(std::size_t c);
  [[nodiscard]] const std::vector<std::size_t>& batch() const { return batch_; }
  [[nodiscard]] bool sampled() const { return sampled_; }

 private:
  [[nodiscard]] double joint_entropy_with(const ClassMatrix& p) const;
  void switch_to_sampled();
  void refresh_value();

  std::vector<ClassMatrix> candidates_;
  std::vector<double> cond_entropy_;
  MiOptions options_;
  std::size_t n_samples_ = 0;

  std::vector<std::size_t> batch_;
  double batch_cond_entropy_ = 0.0;
  double value_ = 0.0;

  bool sampled_ = false;
  // Exact mode: one row per joint configuration, one column per sample.
  // Sampled mode: one row per drawn configuration, scaled by exp(log_scale_).
  Eigen::MatrixXd joint_;
  Eigen::VectorXd log_scale_;
  std::vector<std::size_t> config_sample_;  // omega index each configuration was drawn under
  std::uint64_t draw_counter_ = 0;
};

// ---------------------------------------------------------------------------
// Per-instance class matrices from model predictions

/// p_cens restricted to bins >= the censor bin of t_obs, one row per sample.
ClassMatrix censored_class_matrix(const BinProbTensor& probs, std::size_t i, double t_obs, const TimeBins& bins);
/// p_final classes (knowable bins + merged class) for censor time c and probe depth k.
ClassMatrix knowable_class_matrix(const BinProbTensor& probs, std::size_t i, double c, double k, const TimeBins& bins);

/// Mean-over-samples p_cens row over all n bins.
CensoredProbRow mean_censored_row(const BinProbTensor& probs, std::size_t i, double t_obs, const TimeBins& bins);

struct BatchScore {
  double value = 0.0;  // bits
  std::vector<std::size_t> batch;
};

/// Batch MI of p_final rows. Every batch member must be censored in `pool`.
BatchScore score_bb_surv(std::span<const std::size_t> batch, const Dataset& pool, const BinProbTensor& probs,
                         double k, const MiOptions& options = {});
BatchScore score_bb_surv(std::span<const std::size_t> batch, const Dataset& pool,
                         const PosteriorSampleSet& samples, double k, const MiOptions& options = {});
/// Batch MI of p_cens rows.
BatchScore score_batchbald(std::span<const std::size_t> batch, const Dataset& pool, const BinProbTensor& probs,
                           const MiOptions& options = {});
BatchScore score_batchbald(std::span<const std::size_t> batch, const Dataset& pool,
                           const PosteriorSampleSet& samples, const MiOptions& options = {});

// ---------------------------------------------------------------------------
// Baseline scores. All take the mean-over-samples p_cens row unless noted.

/// Shannon entropy (bits); higher is better.
double score_entropy(std::span<const double> p_cens);
/// (1/n) sum (p_i - mean)^2; higher is better.
double score_variance(std::span<const double> p_cens);
/// |p_window - 0.5| with p_window the mass of bins bin_of(c)..bin_of(c+k); lower is better.
double score_cth(std::span<const double> p_cens, double c, double k, const TimeBins& bins);
/// |expected 1-based bin index - (n+1)/2|; lower is better.
double score_mctm(std::span<const double> p_cens);

struct CbaldOptions {
  double censor_weight = 1.5;
};
/// Single-instance BALD on p_cens, weighted by censor_weight for censored instances.
double score_cbald(const ClassMatrix& p_cens_by_sample, bool censored, const CbaldOptions& options = {});

struct IdealOptions {
  double exploration = 1.0;  // d in s^2(x) + d z(x)
};
/// Variance across posterior samples of the expected (1-based) bin index.
double ideal_uncertainty(const ClassMatrix& p_cens_by_sample, std::size_t first_bin);
/// Inverse-distance-weighting exploration term (2/pi) atan(1 / sum_i 1/d_i^2);
/// 0 at a queried point, 1 when nothing has been queried.
double ideal_exploration(std::span<const double> x, std::span<const std::vector<double>> queried);
double score_ideal(double uncertainty, std::span<const double> x, std::span<const std::vector<double>> queried,
                   const IdealOptions& options = {});

/// Sequential sampling without replacement with probability proportional to
/// 1/cost. Returns all candidates in draw order.
std::vector<std::size_t> score_random(std::span<const std::size_t> candidates, const Dataset& pool,
                                      std::uint64_t seed);

// ---------------------------------------------------------------------------
// Clusters-to-form-batches

struct PcaResult {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // d x k, columns ordered by descending variance
  Eigen::VectorXd variances;   // k
};
PcaResult pca(const Eigen::MatrixXd& X, std::size_t n_components);
Eigen::MatrixXd pca_transform(const PcaResult& p, const Eigen::MatrixXd& X);

struct KMeansResult {
  Eigen::MatrixXd centroids;  // k x d
  std::vector<std::size_t> assignment;
  std::size_t iterations = 0;
};
/// Lloyd's iterations from a fixed-seed k-means++ initialisation. Empty
/// clusters are re-seeded at the point farthest from its centroid.
KMeansResult kmeans(const Eigen::MatrixXd& X, std::size_t k, std::uint64_t seed, std::size_t max_iter = 100);

struct CfbOptions {
  std::size_t pca_dims = 2;
  std::size_t n_clusters = 5;
};
/// PCA + k-means over the whole pool; clusters ranked by their censored
/// fraction (descending), members by distance to centroid (ascending).
/// Returns censored instances only.
std::vector<std::size_t> score_cfb(const Dataset& pool, const CfbOptions& options, std::uint64_t seed);

}  // namespace survbal
