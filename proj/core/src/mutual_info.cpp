#include <algorithm>
#include <cmath>
#include <limits>

#include "survbal/acquisition.hpp"
#include "survbal/error.hpp"
#include "survbal/rng.hpp"

namespace survbal {

namespace {

constexpr double kLn2 = 0.69314718055994530942;

double xlog2x(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

std::size_t draw_class(const ClassMatrix& m, std::size_t sample, double u) {
  const Eigen::Index cols = m.cols();
  double acc = 0.0;
  for (Eigen::Index y = 0; y < cols; ++y) {
    acc += m(static_cast<Eigen::Index>(sample), y);
    if (u < acc) return static_cast<std::size_t>(y);
  }
  // u landed in rounding slack; take the last class with mass
  for (Eigen::Index y = cols; y-- > 0;)
    if (m(static_cast<Eigen::Index>(sample), y) > 0.0) return static_cast<std::size_t>(y);
  return 0;
}

void check_rows(std::span<const ClassMatrix> rows) {
  const Eigen::Index s = rows.front().rows();
  if (s < 1) throw ValidationError("class matrices need at least one posterior sample");
  for (const auto& m : rows) {
    if (m.rows() != s) throw ShapeError("all instances need the same number of posterior samples");
    if (m.cols() < 1) throw ShapeError("instance with zero classes");
  }
}

// Product of class counts, saturating at max+1.
std::size_t config_count(std::span<const ClassMatrix> rows, std::size_t cap) {
  std::size_t c = 1;
  for (const auto& m : rows) {
    const auto k = static_cast<std::size_t>(m.cols());
    if (c > cap / k) return cap + 1;
    c *= k;
  }
  return c;
}

double exact_joint_entropy(std::span<const ClassMatrix> rows) {
  const Eigen::Index S = rows.front().rows();
  Eigen::MatrixXd joint = Eigen::MatrixXd::Ones(1, S);
  for (const auto& m : rows) {
    Eigen::MatrixXd next(joint.rows() * m.cols(), S);
    for (Eigen::Index c = 0; c < joint.rows(); ++c)
      for (Eigen::Index y = 0; y < m.cols(); ++y)
        next.row(c * m.cols() + y) = joint.row(c).cwiseProduct(m.col(y).transpose());
    joint.swap(next);
  }
  const Eigen::VectorXd p = joint.rowwise().mean();
  double h = 0.0;
  for (Eigen::Index c = 0; c < p.size(); ++c) h -= xlog2x(p(c));
  return h;
}

double sampled_joint_entropy(std::span<const ClassMatrix> rows, const MiOptions& options) {
  const auto S = static_cast<std::size_t>(rows.front().rows());
  auto rng = make_rng({options.seed, 0x3a3});
  std::uniform_int_distribution<std::size_t> pick(0, S - 1);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<double> logp(S);
  double acc = 0.0;
  for (std::size_t m = 0; m < options.n_configs; ++m) {
    const std::size_t j = pick(rng);
    std::fill(logp.begin(), logp.end(), 0.0);
    for (const auto& mat : rows) {
      const auto y = static_cast<Eigen::Index>(draw_class(mat, j, u01(rng)));
      for (std::size_t s = 0; s < S; ++s) logp[s] += std::log(mat(static_cast<Eigen::Index>(s), y));
    }
    const double top = *std::max_element(logp.begin(), logp.end());
    double sum = 0.0;
    for (double v : logp) sum += std::exp(v - top);
    acc += (top + std::log(sum / static_cast<double>(S))) / kLn2;
  }
  return -acc / static_cast<double>(options.n_configs);
}

}  // namespace

double entropy_bits(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) h -= xlog2x(v);
  return h;
}

double expected_conditional_entropy(const ClassMatrix& m) {
  double h = 0.0;
  for (Eigen::Index s = 0; s < m.rows(); ++s)
    for (Eigen::Index y = 0; y < m.cols(); ++y) h -= xlog2x(m(s, y));
  return h / static_cast<double>(m.rows());
}

double batch_mutual_information(std::span<const ClassMatrix> rows, const MiOptions& options) {
  if (rows.empty()) return 0.0;
  check_rows(rows);
  double cond = 0.0;
  for (const auto& m : rows) cond += expected_conditional_entropy(m);

  const std::size_t configs = config_count(rows, options.exact_limit);
  bool exact = options.mode == MiMode::Exact || (options.mode == MiMode::Auto && configs <= options.exact_limit);
  if (options.mode == MiMode::Exact && configs > options.exact_limit)
    throw ConfigurationOverflowError("joint configuration space exceeds " + std::to_string(options.exact_limit) +
                                     "; use sampled mode");
  const double joint = exact ? exact_joint_entropy(rows) : sampled_joint_entropy(rows, options);
  return std::max(0.0, joint - cond);
}

// ---------------------------------------------------------------------------

BatchMiOracle::BatchMiOracle(std::vector<ClassMatrix> candidates, MiOptions options)
    : candidates_(std::move(candidates)), options_(options) {
  if (!candidates_.empty()) {
    check_rows(candidates_);
    n_samples_ = static_cast<std::size_t>(candidates_.front().rows());
  }
  cond_entropy_.reserve(candidates_.size());
  for (const auto& m : candidates_) cond_entropy_.push_back(expected_conditional_entropy(m));
  joint_ = Eigen::MatrixXd::Ones(1, static_cast<Eigen::Index>(std::max<std::size_t>(1, n_samples_)));
  log_scale_ = Eigen::VectorXd::Zero(1);
  if (options_.mode == MiMode::Sampled) switch_to_sampled();
}

double BatchMiOracle::joint_entropy_with(const ClassMatrix& p) const {
  const auto S = static_cast<double>(n_samples_);
  const Eigen::MatrixXd q = joint_ * p;  // rows x classes, sums over samples
  double h = 0.0;
  if (!sampled_) {
    for (Eigen::Index r = 0; r < q.rows(); ++r)
      for (Eigen::Index y = 0; y < q.cols(); ++y) h -= xlog2x(q(r, y) / S);
    return h;
  }
  const Eigen::VectorXd base = joint_.rowwise().sum();
  for (Eigen::Index r = 0; r < q.rows(); ++r) {
    const double shift = log_scale_(r) / kLn2;
    for (Eigen::Index y = 0; y < q.cols(); ++y) {
      const double v = q(r, y);
      if (v > 0.0) h -= (v / base(r)) * (std::log2(v / S) + shift);
    }
  }
  return h / static_cast<double>(q.rows());
}

double BatchMiOracle::gain(std::size_t c) const {
  const double mi = joint_entropy_with(candidates_.at(c)) - batch_cond_entropy_ - cond_entropy_[c];
  return std::max(0.0, mi) - value_;
}

void BatchMiOracle::switch_to_sampled() {
  sampled_ = true;
  const auto M = static_cast<Eigen::Index>(options_.n_configs);
  const auto S = static_cast<Eigen::Index>(n_samples_);
  auto rng = make_rng({options_.seed, 0x5a9, draw_counter_++});
  std::uniform_int_distribution<std::size_t> pick(0, n_samples_ - 1);
  joint_ = Eigen::MatrixXd::Ones(M, S);
  log_scale_ = Eigen::VectorXd::Zero(M);
  config_sample_.resize(static_cast<std::size_t>(M));
  for (auto& j : config_sample_) j = pick(rng);
  // Replay the committed members onto freshly drawn configurations.
  std::vector<std::size_t> members;
  members.swap(batch_);
  for (auto c : members) {
    batch_.push_back(c);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const auto& p = candidates_[c];
    for (Eigen::Index r = 0; r < M; ++r) {
      const auto y = static_cast<Eigen::Index>(draw_class(p, config_sample_[static_cast<std::size_t>(r)], u01(rng)));
      joint_.row(r) = joint_.row(r).cwiseProduct(p.col(y).transpose());
      const double top = joint_.row(r).maxCoeff();
      joint_.row(r) /= top;
      log_scale_(r) += std::log(top);
    }
  }
}

void BatchMiOracle::commit(std::size_t c) {
  const auto& p = candidates_.at(c);
  if (std::find(batch_.begin(), batch_.end(), c) != batch_.end())
    throw DuplicateIdError("candidate " + std::to_string(c) + " already in batch");
  batch_cond_entropy_ += cond_entropy_[c];

  if (!sampled_) {
    const auto configs = static_cast<std::size_t>(joint_.rows()) * static_cast<std::size_t>(p.cols());
    if (configs > options_.exact_limit) {
      if (options_.mode == MiMode::Exact)
        throw ConfigurationOverflowError("joint configuration space exceeds " +
                                         std::to_string(options_.exact_limit) + "; use sampled mode");
      batch_.push_back(c);
      switch_to_sampled();
      refresh_value();
      return;
    }
    Eigen::MatrixXd next(joint_.rows() * p.cols(), joint_.cols());
    for (Eigen::Index r = 0; r < joint_.rows(); ++r)
      for (Eigen::Index y = 0; y < p.cols(); ++y)
        next.row(r * p.cols() + y) = joint_.row(r).cwiseProduct(p.col(y).transpose());
    joint_.swap(next);
    batch_.push_back(c);
    refresh_value();
    return;
  }

  batch_.push_back(c);
  auto rng = make_rng({options_.seed, 0x5a9, draw_counter_++});
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (Eigen::Index r = 0; r < joint_.rows(); ++r) {
    const auto y = static_cast<Eigen::Index>(draw_class(p, config_sample_[static_cast<std::size_t>(r)], u01(rng)));
    joint_.row(r) = joint_.row(r).cwiseProduct(p.col(y).transpose());
    const double top = joint_.row(r).maxCoeff();
    joint_.row(r) /= top;
    log_scale_(r) += std::log(top);
  }
  refresh_value();
}

void BatchMiOracle::refresh_value() {
  double h = 0.0;
  if (!sampled_) {
    const Eigen::VectorXd p = joint_.rowwise().mean();
    for (Eigen::Index r = 0; r < p.size(); ++r) h -= xlog2x(p(r));
  } else {
    const Eigen::VectorXd p = joint_.rowwise().mean();
    for (Eigen::Index r = 0; r < p.size(); ++r) h -= std::log2(p(r)) + log_scale_(r) / kLn2;
    h /= static_cast<double>(p.size());
  }
  value_ = std::max(0.0, h - batch_cond_entropy_);
}

}  // namespace survbal
