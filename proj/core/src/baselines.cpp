#include <algorithm>
#include <cmath>
#include <numbers>

#include "survbal/acquisition.hpp"
#include "survbal/error.hpp"
#include "survbal/rng.hpp"

namespace survbal {

double score_entropy(std::span<const double> p_cens) { return entropy_bits(p_cens); }

double score_variance(std::span<const double> p_cens) {
  const auto n = static_cast<double>(p_cens.size());
  double mean = 0.0;
  for (double v : p_cens) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : p_cens) var += (v - mean) * (v - mean);
  return var / n;
}

double score_cth(std::span<const double> p_cens, double c, double k, const TimeBins& bins) {
  if (bins.count() != p_cens.size()) throw ShapeError("bin count does not match probability row");
  const std::size_t first = bins.bin_of(c);
  const std::size_t last = bins.bin_of(c + k);
  double window = 0.0;
  for (std::size_t r = first; r <= last && r < p_cens.size(); ++r) window += p_cens[r];
  return std::abs(window - 0.5);
}

double score_mctm(std::span<const double> p_cens) {
  double mean_bin = 0.0;
  for (std::size_t r = 0; r < p_cens.size(); ++r) mean_bin += static_cast<double>(r + 1) * p_cens[r];
  return std::abs(mean_bin - (static_cast<double>(p_cens.size()) + 1.0) / 2.0);
}

double score_cbald(const ClassMatrix& p_cens_by_sample, bool censored, const CbaldOptions& options) {
  const ClassMatrix rows[] = {p_cens_by_sample};
  MiOptions exact;
  exact.mode = MiMode::Exact;
  const double bald = batch_mutual_information(rows, exact);
  return censored ? options.censor_weight * bald : bald;
}

double ideal_uncertainty(const ClassMatrix& p_cens_by_sample, std::size_t first_bin) {
  const Eigen::Index S = p_cens_by_sample.rows();
  Eigen::VectorXd expected(S);
  for (Eigen::Index s = 0; s < S; ++s) {
    double e = 0.0;
    for (Eigen::Index y = 0; y < p_cens_by_sample.cols(); ++y)
      e += static_cast<double>(first_bin + static_cast<std::size_t>(y) + 1) * p_cens_by_sample(s, y);
    expected(s) = e;
  }
  const double mean = expected.mean();
  return (expected.array() - mean).square().sum() / static_cast<double>(S);
}

double ideal_exploration(std::span<const double> x, std::span<const std::vector<double>> queried) {
  if (queried.empty()) return 1.0;
  double inv_sum = 0.0;
  for (const auto& q : queried) {
    if (q.size() != x.size()) throw ShapeError("covariate dimension mismatch");
    double d2 = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) d2 += (x[c] - q[c]) * (x[c] - q[c]);
    if (d2 == 0.0) return 0.0;
    inv_sum += 1.0 / d2;
  }
  return 2.0 / std::numbers::pi * std::atan(1.0 / inv_sum);
}

double score_ideal(double uncertainty, std::span<const double> x, std::span<const std::vector<double>> queried,
                   const IdealOptions& options) {
  return uncertainty + options.exploration * ideal_exploration(x, queried);
}

std::vector<std::size_t> score_random(std::span<const std::size_t> candidates, const Dataset& pool,
                                      std::uint64_t seed) {
  std::vector<std::size_t> left(candidates.begin(), candidates.end());
  std::vector<double> weight;
  weight.reserve(left.size());
  for (auto id : left) {
    const double c = pool.instances.at(id).cost;
    if (!(c > 0.0)) throw ValidationError("costs must be > 0");
    weight.push_back(1.0 / c);
  }
  auto rng = make_rng({seed, 0x7a4d});
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<std::size_t> order;
  order.reserve(left.size());
  while (!left.empty()) {
    double total = 0.0;
    for (double w : weight) total += w;
    const double u = u01(rng) * total;
    double acc = 0.0;
    std::size_t pick = left.size() - 1;
    for (std::size_t r = 0; r < left.size(); ++r) {
      acc += weight[r];
      if (u < acc) {
        pick = r;
        break;
      }
    }
    order.push_back(left[pick]);
    left.erase(left.begin() + static_cast<std::ptrdiff_t>(pick));
    weight.erase(weight.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return order;
}

}  // namespace survbal
