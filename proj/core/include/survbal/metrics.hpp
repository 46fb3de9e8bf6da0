#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "survbal/dataset.hpp"
#include "survbal/mtlr.hpp"

namespace survbal {

/// Kaplan-Meier product-limit curve: surv[k] holds S(t) for
/// times[k] <= t < times[k+1]; S(t) = 1 before the first event time.
struct KmCurve {
  std::vector<double> times;
  std::vector<double> surv;

  /// Right-continuous value S(t).
  [[nodiscard]] double at(double t) const;
  /// Left limit S(t-).
  [[nodiscard]] double before(double t) const;
  /// Integral of S over [0, tau].
  [[nodiscard]] double restricted_mean(double tau) const;
};

KmCurve km_fit(std::span<const double> times, std::span<const char> events);

/// Piecewise-linear survival curve through (knots[k], surv[k]); flat after
/// the last knot. Repeated knots encode jumps.
struct SurvivalCurve {
  std::vector<double> knots;
  std::vector<double> surv;

  [[nodiscard]] double at(double t) const;
};

/// ISD through the bin starts, falling linearly to 0 across the last bin's
/// pseudo width.
SurvivalCurve isd_from_bins(std::span<const double> probs, const TimeBins& bins);

/// Median of the ISD, interpolated linearly inside the crossing bin; the
/// midpoint of the last bin when the survival at its start is still above 0.5.
double predict_time(std::span<const double> probs, const TimeBins& bins);

/// Jackknife pseudo-observations of the KM restricted mean (restricted at the
/// largest observed time), clamped at 0. Requires at least 2 instances.
std::vector<double> pseudo_observations(std::span<const double> times, std::span<const char> events);

/// Mean over instances of |t - pred| (events) or |pseudo - pred| (censored).
double mae_po(std::span<const double> preds, std::span<const double> times, std::span<const char> events);
double mae_po(std::span<const double> preds, std::span<const double> times, std::span<const char> events,
              std::span<const double> pseudo);
double mae_po(std::span<const double> preds, const Dataset& test);

/// Mean |t - pred| over uncensored instances only.
double mae_uncensored(std::span<const double> preds, std::span<const double> times, std::span<const char> events);

/// Harrell's concordance over pairs with an observed event first; prediction
/// ties count one half. Throws UndefinedMetricError with no comparable pairs.
double c_index(std::span<const double> preds, std::span<const double> times, std::span<const char> events);

struct BrierOptions {
  double weight_floor = 1e-3;
};

/// IPCW Brier score averaged over the grid by the trapezoid rule.
double integrated_brier(std::span<const SurvivalCurve> isds, std::span<const double> times,
                        std::span<const char> events, std::span<const double> grid, const BrierOptions& options = {});

/// n equally spaced points from 0 to the 95th percentile of observed times.
std::vector<double> default_brier_grid(std::span<const double> times, std::size_t n = 100);

/// 1.96 * sample std / sqrt(m).
double ci95(std::span<const double> values);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p_two_sided = 1.0;
  double p_less = 0.5;  // one-sided: mean(a) < mean(b)
};

/// Welch's two-sample t-test.
TTestResult welch_t_test(std::span<const double> a, std::span<const double> b);

struct MetricReport {
  double mae_po = 0.0;
  double mae_uncensored = 0.0;
  double c_index = 0.0;
  double ibs = 0.0;
  struct {
    double mae_po = 0.0, mae_uncensored = 0.0, c_index = 0.0, ibs = 0.0;
  } ci95;
};

/// Cached per-test-set quantities.
struct TestSetSummary {
  std::vector<double> times;
  std::vector<char> events;  // 1 = event observed
  std::vector<double> pseudo;
  std::vector<double> grid;

  static TestSetSummary from(const Dataset& test);
};

/// Metrics for each posterior sample's predictions, averaged across samples
/// with ci95 half-widths.
MetricReport evaluate_posterior(const BinProbTensor& probs, const TestSetSummary& test, const TimeBins& bins);

}  // namespace survbal
