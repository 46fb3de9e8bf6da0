#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace survbal {

/// One right-censored survival record.
///
/// `t_true`/`delta_true` hold what the simulated oracle knows; the learner
/// only sees `t_obs`/`delta_obs`. Invariants: t_obs <= t_true, and
/// delta_obs == 1 implies t_obs == t_true and delta_true == 1.
struct SurvivalInstance {
  std::size_t id = 0;
  std::vector<double> x;
  double t_true = 0.0;
  bool delta_true = false;
  double t_obs = 0.0;
  bool delta_obs = false;
  double cost = 1.0;

  [[nodiscard]] bool censored() const { return !delta_obs; }
};

/// Ordered interior boundaries of n time bins. Bin j < n-1 (0-based) is
/// [e_{j-1}, e_j) with e_{-1} = 0; the last bin is [e_{n-2}, inf).
class TimeBins {
 public:
  TimeBins() = default;
  explicit TimeBins(std::vector<double> edges);

  [[nodiscard]] std::size_t count() const { return edges_.size() + 1; }
  [[nodiscard]] const std::vector<double>& edges() const { return edges_; }

  /// 0-based index of the bin containing t (t >= 0).
  [[nodiscard]] std::size_t bin_of(double t) const;
  /// Left boundary of bin j.
  [[nodiscard]] double lower(std::size_t j) const;
  /// Right boundary of bin j; for the open last bin this is a pseudo end one
  /// previous-bin width past the last edge.
  [[nodiscard]] double upper(std::size_t j) const;

 private:
  std::vector<double> edges_;
};

struct Dataset {
  std::vector<SurvivalInstance> instances;
  TimeBins bins;
  std::vector<std::string> feature_names;

  [[nodiscard]] std::size_t size() const { return instances.size(); }
  [[nodiscard]] std::size_t dim() const { return feature_names.size(); }
  [[nodiscard]] Eigen::MatrixXd covariates() const;
  [[nodiscard]] std::size_t censored_count() const;
};

struct CsvSchema {
  std::string time_column = "time";
  std::string event_column = "event";
  std::string cost_column = "cost";
  /// Audit columns written by write_csv; when present they carry the oracle's
  /// ground truth and `time`/`event` are the learner-visible label.
  std::string true_time_column = "t_true";
  std::string true_event_column = "delta_true";
  bool standardize = true;
};

inline constexpr double kStdFloor = 1e-12;

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
Dataset read_csv(std::istream& in, const CsvSchema& schema = {});
void write_csv(const Dataset& ds, std::ostream& out);
void write_csv(const Dataset& ds, const std::filesystem::path& path);

/// Quantile bins over the given event times (j/n quantiles, linear
/// interpolation). Duplicate quantiles are nudged upward to stay strictly
/// increasing.
TimeBins make_bins(std::vector<double> event_times, std::size_t n);
/// Bins from the uncensored ground-truth times of a dataset.
TimeBins make_bins(const Dataset& ds, std::size_t n);

/// Z-score the covariates of `fit_on`, applying the same transform to each
/// dataset in `also`. Population standard deviation, floored at kStdFloor.
void standardize(Dataset& fit_on, std::vector<Dataset*> also = {});

struct Split {
  Dataset train;
  Dataset test;
};

/// Stratified (by delta_true) split; features re-standardized on train
/// statistics, bins rebuilt from train event times.
Split train_test_split(const Dataset& ds, double train_fraction, std::uint64_t seed,
                       std::size_t n_bins = 10);

struct PoolSpec {
  std::size_t n_uncensored = 100;
  std::size_t n_censored = 900;
};

/// Largest pool with the given censored:uncensored ratio drawable from ds.
PoolSpec pool_spec_for_ratio(const Dataset& ds, double censored_per_uncensored = 9.0);

/// Draws a learner pool: n_uncensored true events kept as observed, and
/// n_censored other instances re-censored at Uniform(0, t_true) with
/// delta_obs = 0. Already-censored records get censored further.
Dataset artificial_censor(const Dataset& ds, const PoolSpec& spec, std::uint64_t seed);

struct SynthConfig {
  std::size_t n = 1000;
  std::size_t dim = 10;
  std::uint64_t seed = 0;
  double base_rate = 0.2;     // events per year at x = 0
  double beta_scale = 0.5;    // per-coefficient std of the log-hazard weights
  double censor_rate = 0.05;  // independent exponential censoring; 0 disables
  std::size_t n_bins = 10;
};

/// Exponential proportional-hazards data with independent censoring.
Dataset synth_generate(const SynthConfig& cfg);
Dataset synth_generate(std::size_t n, std::size_t dim, std::uint64_t seed);

/// The log-hazard weights synth_generate draws for a given config.
std::vector<double> synth_beta(const SynthConfig& cfg);

/// Throws ValidationError if any instance violates the label invariants.
void validate(const Dataset& ds);

}  // namespace survbal
