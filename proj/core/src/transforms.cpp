#include <cmath>

#include "survbal/acquisition.hpp"
#include "survbal/error.hpp"

namespace survbal {

CensoredProbRow to_p_cens(std::span<const double> row, std::size_t censor_bin) {
  if (censor_bin >= row.size())
    throw ValidationError("censor bin " + std::to_string(censor_bin) + " outside " + std::to_string(row.size()) +
                          " bins");
  double tail = 0.0;
  for (std::size_t r = censor_bin; r < row.size(); ++r) tail += row[r];
  if (!(tail >= kDegenerateTailMass))
    throw DegenerateRowError("no probability mass at or after the censor bin");
  CensoredProbRow out;
  out.censor_bin = censor_bin;
  out.probs.assign(row.size(), 0.0);
  if (censor_bin == 0) {
    out.probs.assign(row.begin(), row.end());
    return out;
  }
  for (std::size_t r = censor_bin; r < row.size(); ++r) out.probs[r] = row[r] / tail;
  return out;
}

KnowableProbRow to_p_final(const CensoredProbRow& row, double c, double k, const TimeBins& bins) {
  if (!(c >= 0.0) || !(k >= 0.0)) throw ValidationError("censor time and probe depth must be >= 0");
  const std::size_t n = row.probs.size();
  if (bins.count() != n) throw ShapeError("bin count does not match probability row");
  const std::size_t start = row.censor_bin;
  const std::size_t horizon = std::max(bins.bin_of(c + k), start);

  KnowableProbRow out;
  for (std::size_t r = start; r <= horizon && r < n; ++r) {
    out.probs.push_back(row.probs[r]);
    out.class_map.push_back(r);
  }
  if (horizon + 1 < n) {
    double merged = 0.0;
    for (std::size_t r = horizon + 1; r < n; ++r) merged += row.probs[r];
    out.probs.push_back(merged);
    out.class_map.push_back(kUnknowableClass);
  }
  return out;
}

ClassMatrix censored_class_matrix(const BinProbTensor& probs, std::size_t i, double t_obs, const TimeBins& bins) {
  const std::size_t n = probs.bins();
  const std::size_t j = bins.bin_of(t_obs);
  ClassMatrix m(static_cast<Eigen::Index>(probs.samples()), static_cast<Eigen::Index>(n - j));
  for (std::size_t s = 0; s < probs.samples(); ++s) {
    const auto pc = to_p_cens(probs.row(i, s), j);
    for (std::size_t r = j; r < n; ++r) m(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(r - j)) = pc.probs[r];
  }
  return m;
}

ClassMatrix knowable_class_matrix(const BinProbTensor& probs, std::size_t i, double c, double k,
                                  const TimeBins& bins) {
  const std::size_t j = bins.bin_of(c);
  ClassMatrix m;
  for (std::size_t s = 0; s < probs.samples(); ++s) {
    const auto pf = to_p_final(to_p_cens(probs.row(i, s), j), c, k, bins);
    if (s == 0) m.resize(static_cast<Eigen::Index>(probs.samples()), static_cast<Eigen::Index>(pf.probs.size()));
    for (std::size_t r = 0; r < pf.probs.size(); ++r)
      m(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(r)) = pf.probs[r];
  }
  return m;
}

CensoredProbRow mean_censored_row(const BinProbTensor& probs, std::size_t i, double t_obs, const TimeBins& bins) {
  const std::size_t j = bins.bin_of(t_obs);
  CensoredProbRow out;
  out.censor_bin = j;
  out.probs.assign(probs.bins(), 0.0);
  for (std::size_t s = 0; s < probs.samples(); ++s) {
    const auto pc = to_p_cens(probs.row(i, s), j);
    for (std::size_t r = 0; r < pc.probs.size(); ++r) out.probs[r] += pc.probs[r];
  }
  for (auto& v : out.probs) v /= static_cast<double>(probs.samples());
  return out;
}

namespace {

void require_censored(std::span<const std::size_t> batch, const Dataset& pool) {
  for (auto id : batch) {
    if (id >= pool.size()) throw ValidationError("batch id " + std::to_string(id) + " out of range");
    if (!pool.instances[id].censored())
      throw ValidationError("batch member " + std::to_string(id) + " is not censored");
  }
}

}  // namespace

BatchScore score_bb_surv(std::span<const std::size_t> batch, const Dataset& pool, const BinProbTensor& probs,
                         double k, const MiOptions& options) {
  BatchScore out;
  out.batch.assign(batch.begin(), batch.end());
  if (batch.empty()) return out;
  require_censored(batch, pool);
  std::vector<ClassMatrix> rows;
  rows.reserve(batch.size());
  for (auto id : batch) rows.push_back(knowable_class_matrix(probs, id, pool.instances[id].t_obs, k, pool.bins));
  out.value = batch_mutual_information(rows, options);
  return out;
}

BatchScore score_bb_surv(std::span<const std::size_t> batch, const Dataset& pool, const PosteriorSampleSet& samples,
                         double k, const MiOptions& options) {
  return score_bb_surv(batch, pool, predict(samples, pool.covariates()), k, options);
}

BatchScore score_batchbald(std::span<const std::size_t> batch, const Dataset& pool, const BinProbTensor& probs,
                           const MiOptions& options) {
  BatchScore out;
  out.batch.assign(batch.begin(), batch.end());
  if (batch.empty()) return out;
  require_censored(batch, pool);
  std::vector<ClassMatrix> rows;
  rows.reserve(batch.size());
  for (auto id : batch) rows.push_back(censored_class_matrix(probs, id, pool.instances[id].t_obs, pool.bins));
  out.value = batch_mutual_information(rows, options);
  return out;
}

BatchScore score_batchbald(std::span<const std::size_t> batch, const Dataset& pool, const PosteriorSampleSet& samples,
                           const MiOptions& options) {
  return score_batchbald(batch, pool, predict(samples, pool.covariates()), options);
}

}  // namespace survbal
