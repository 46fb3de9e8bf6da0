#include "survbal/mtlr.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "survbal/error.hpp"
#include "survbal/rng.hpp"

namespace survbal {

MtlrParams::MtlrParams(std::size_t n_bins, std::size_t dim)
    : W(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_bins - 1), static_cast<Eigen::Index>(dim))),
      b(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_bins - 1))) {
  if (n_bins < 2) throw ShapeError("MTLR needs at least 2 bins");
}

Eigen::VectorXd MtlrParams::flatten() const {
  Eigen::VectorXd theta(static_cast<Eigen::Index>(flat_size()));
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < W.rows(); ++j)
    for (Eigen::Index c = 0; c < W.cols(); ++c) theta(k++) = W(j, c);
  for (Eigen::Index j = 0; j < b.size(); ++j) theta(k++) = b(j);
  return theta;
}

MtlrParams MtlrParams::unflatten(const Eigen::VectorXd& theta, std::size_t n_bins, std::size_t dim) {
  MtlrParams p(n_bins, dim);
  if (static_cast<std::size_t>(theta.size()) != p.flat_size())
    throw ShapeError("parameter vector has " + std::to_string(theta.size()) + " entries, expected " +
                     std::to_string(p.flat_size()));
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < p.W.rows(); ++j)
    for (Eigen::Index c = 0; c < p.W.cols(); ++c) p.W(j, c) = theta(k++);
  for (Eigen::Index j = 0; j < p.b.size(); ++j) p.b(j) = theta(k++);
  return p;
}

namespace {

double log_sum_exp(const double* s, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < n; ++r) m = std::max(m, s[r]);
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (std::size_t r = 0; r < n; ++r) acc += std::exp(s[r] - m);
  return m + std::log(acc);
}

// Reverse cumulative sum of threshold activations into bin scores.
void scores_from_activations(const double* a, std::size_t n_bins, double* s) {
  s[n_bins - 1] = 0.0;
  for (std::size_t r = n_bins - 1; r-- > 0;) s[r] = s[r + 1] + a[r];
}

void softmax_inplace(double* s, std::size_t n) {
  const double lz = log_sum_exp(s, n);
  for (std::size_t r = 0; r < n; ++r) s[r] = std::exp(s[r] - lz);
}

}  // namespace

Eigen::VectorXd mtlr_logits(const MtlrParams& params, std::span<const double> x) {
  if (x.size() != params.dim())
    throw ShapeError("covariate vector has " + std::to_string(x.size()) + " entries, model expects " +
                     std::to_string(params.dim()));
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::VectorXd a = params.W * xv + params.b;
  Eigen::VectorXd s(static_cast<Eigen::Index>(params.n_bins()));
  scores_from_activations(a.data(), params.n_bins(), s.data());
  return s;
}

Eigen::VectorXd mtlr_probs(const MtlrParams& params, std::span<const double> x) {
  Eigen::VectorXd s = mtlr_logits(params, x);
  softmax_inplace(s.data(), static_cast<std::size_t>(s.size()));
  return s;
}

double log_likelihood(const MtlrParams& params, const SurvivalInstance& inst, const TimeBins& bins) {
  if (bins.count() != params.n_bins()) throw ShapeError("bin count does not match model");
  const Eigen::VectorXd s = mtlr_logits(params, inst.x);
  const auto n = static_cast<std::size_t>(s.size());
  const std::size_t j = bins.bin_of(inst.t_obs);
  const double lz = log_sum_exp(s.data(), n);
  if (inst.delta_obs) return s(static_cast<Eigen::Index>(j)) - lz;
  return log_sum_exp(s.data() + j, n - j) - lz;
}

// ---------------------------------------------------------------------------

double kl_diag_gaussians(const Eigen::VectorXd& mu_q, const Eigen::VectorXd& log_sigma_q,
                         const Eigen::VectorXd& mu_p, const Eigen::VectorXd& log_sigma_p) {
  const auto var_q = (2.0 * log_sigma_q.array()).exp();
  const auto var_p = (2.0 * log_sigma_p.array()).exp();
  return ((log_sigma_p - log_sigma_q).array() + (var_q + (mu_q - mu_p).array().square()) / (2.0 * var_p) - 0.5)
      .sum();
}

KlTerm prior_kl(const Eigen::VectorXd& mu, const Eigen::VectorXd& log_sigma, const PriorConfig& prior,
                std::size_t n_weights) {
  const Eigen::Index n = mu.size();
  KlTerm kl;
  kl.d_mu.resize(n);
  kl.d_log_sigma.resize(n);
  const double slab_var = prior.sigma * prior.sigma;
  const double log_slab = std::log(prior.sigma);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double ls = log_sigma(k);
    const double var = std::exp(2.0 * ls);
    const double m = mu(k);
    const double k_slab = log_slab - ls + (var + m * m) / (2.0 * slab_var) - 0.5;
    const bool mixture = prior.kind == PriorKind::SpikeAndSlab && static_cast<std::size_t>(k) < n_weights;
    if (!mixture) {
      kl.value += k_slab;
      kl.d_mu(k) = m / slab_var;
      kl.d_log_sigma(k) = var / slab_var - 1.0;
      continue;
    }
    // Variational approximation KL(q || sum_b pi_b p_b) ~= -log sum_b pi_b exp(-KL(q || p_b)).
    const double spike_var = prior.spike_sigma * prior.spike_sigma;
    const double k_spike = std::log(prior.spike_sigma) - ls + (var + m * m) / (2.0 * spike_var) - 0.5;
    const double l_spike = std::log(prior.spike_weight) - k_spike;
    const double l_slab = std::log1p(-prior.spike_weight) - k_slab;
    const double top = std::max(l_spike, l_slab);
    const double lse = top + std::log(std::exp(l_spike - top) + std::exp(l_slab - top));
    const double w_spike = std::exp(l_spike - lse);
    const double w_slab = std::exp(l_slab - lse);
    kl.value += -lse;
    kl.d_mu(k) = w_spike * m / spike_var + w_slab * m / slab_var;
    kl.d_log_sigma(k) = w_spike * (var / spike_var - 1.0) + w_slab * (var / slab_var - 1.0);
  }
  return kl;
}

TrainingSet TrainingSet::from(const Dataset& ds) {
  TrainingSet t;
  t.X = ds.covariates();
  t.n_bins = ds.bins.count();
  t.bin.reserve(ds.size());
  t.censored.reserve(ds.size());
  for (const auto& s : ds.instances) {
    t.bin.push_back(ds.bins.bin_of(s.t_obs));
    t.censored.push_back(!s.delta_obs);
  }
  return t;
}

LikelihoodEval total_log_likelihood(const TrainingSet& data, const Eigen::VectorXd& theta, bool want_grad) {
  const std::size_t n_bins = data.n_bins;
  const auto dim = static_cast<std::size_t>(data.X.cols());
  const MtlrParams p = MtlrParams::unflatten(theta, n_bins, dim);
  const Eigen::Index N = data.X.rows();

  // Row-major so each instance's activations are contiguous.
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMat A = data.X * p.W.transpose();
  A.rowwise() += p.b.transpose();
  RowMat G;
  if (want_grad) G.resize(N, static_cast<Eigen::Index>(n_bins - 1));

  std::vector<double> s(n_bins), g(n_bins);
  LikelihoodEval out;
  for (Eigen::Index i = 0; i < N; ++i) {
    scores_from_activations(A.row(i).data(), n_bins, s.data());
    const double lz = log_sum_exp(s.data(), n_bins);
    const std::size_t j = data.bin[static_cast<std::size_t>(i)];
    const bool cens = data.censored[static_cast<std::size_t>(i)];
    double ltail = 0.0;
    if (cens) {
      ltail = log_sum_exp(s.data() + j, n_bins - j);
      out.value += ltail - lz;
    } else {
      out.value += s[j] - lz;
    }
    if (!want_grad) continue;
    for (std::size_t r = 0; r < n_bins; ++r) {
      const double pr = std::exp(s[r] - lz);
      double target = 0.0;
      if (cens)
        target = r >= j ? std::exp(s[r] - ltail) : 0.0;
      else
        target = r == j ? 1.0 : 0.0;
      g[r] = target - pr;
    }
    double acc = 0.0;
    for (std::size_t t = 0; t + 1 < n_bins; ++t) {
      acc += g[t];
      G(i, static_cast<Eigen::Index>(t)) = acc;
    }
  }
  if (want_grad) {
    const Eigen::MatrixXd gW = G.transpose() * data.X;
    const Eigen::VectorXd gb = G.colwise().sum().transpose();
    MtlrParams gp(n_bins, dim);
    gp.W = gW;
    gp.b = gb;
    out.grad = gp.flatten();
  }
  return out;
}

ElboEval elbo(const TrainingSet& data, const Eigen::VectorXd& mu, const Eigen::VectorXd& log_sigma,
              const Eigen::MatrixXd& eps, const PriorConfig& prior) {
  if (eps.rows() != mu.size() || eps.cols() < 1) throw ShapeError("noise matrix shape mismatch");
  const Eigen::VectorXd sigma = log_sigma.array().exp();
  const double inv_s = 1.0 / static_cast<double>(eps.cols());
  const std::size_t n_weights = (data.n_bins - 1) * static_cast<std::size_t>(data.X.cols());

  ElboEval out;
  out.d_mu = Eigen::VectorXd::Zero(mu.size());
  out.d_log_sigma = Eigen::VectorXd::Zero(mu.size());
  for (Eigen::Index c = 0; c < eps.cols(); ++c) {
    const Eigen::VectorXd theta = mu + sigma.cwiseProduct(eps.col(c));
    const auto ll = total_log_likelihood(data, theta, true);
    out.value += inv_s * ll.value;
    out.d_mu += inv_s * ll.grad;
    out.d_log_sigma += inv_s * ll.grad.cwiseProduct(eps.col(c)).cwiseProduct(sigma);
  }
  const auto kl = prior_kl(mu, log_sigma, prior, n_weights);
  out.value -= kl.value;
  out.d_mu -= kl.d_mu;
  out.d_log_sigma -= kl.d_log_sigma;
  return out;
}

namespace {

Eigen::MatrixXd normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = nd(rng);
  return m;
}

}  // namespace

FitResult fit(const Dataset& ds, const FitConfig& config, std::uint64_t seed) {
  if (ds.size() == 0) throw TrainingError("empty training pool");
  if (ds.bins.count() < 2) throw TrainingError("dataset has no time bins");
  const TrainingSet data = TrainingSet::from(ds);
  const std::size_t n_params = (data.n_bins - 1) * (ds.dim() + 1);
  const auto P = static_cast<Eigen::Index>(n_params);

  FitResult result;
  auto& q = result.posterior;
  q.mu = Eigen::VectorXd::Zero(P);
  q.log_sigma = Eigen::VectorXd::Constant(P, config.init_log_sigma);
  q.n_bins = data.n_bins;
  q.feature_dim = ds.dim();
  q.seed = seed;

  auto rng = make_rng({seed, 0xf17});
  auto trace_rng = make_rng({seed, 0x7ace});
  Eigen::MatrixXd trace_eps;
  if (config.trace_every > 0)
    trace_eps = normal_matrix(trace_rng, P, static_cast<Eigen::Index>(std::max<std::size_t>(1, config.trace_samples)));

  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(2 * P), m2 = Eigen::VectorXd::Zero(2 * P);
  double b1t = 1.0, b2t = 1.0;
  auto record_trace = [&](std::size_t epoch) {
    const double v = elbo(data, q.mu, q.log_sigma, trace_eps, config.prior).value;
    if (!std::isfinite(v))
      throw TrainingError("ELBO became non-finite at epoch " + std::to_string(epoch));
    result.elbo_trace.push_back(v);
  };
  if (config.trace_every > 0) record_trace(0);

  double last_finite = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const Eigen::MatrixXd eps = normal_matrix(rng, P, static_cast<Eigen::Index>(std::max<std::size_t>(1, config.mc_samples)));
    const auto e = elbo(data, q.mu, q.log_sigma, eps, config.prior);
    if (!std::isfinite(e.value) || !e.d_mu.allFinite() || !e.d_log_sigma.allFinite()) {
      std::ostringstream msg;
      msg << "ELBO diverged at epoch " << epoch << " (last finite value " << last_finite
          << ", max |mu| " << q.mu.cwiseAbs().maxCoeff() << ", max log_sigma " << q.log_sigma.maxCoeff() << ")";
      throw TrainingError(msg.str());
    }
    last_finite = e.value;

    Eigen::VectorXd g(2 * P);
    g << e.d_mu, e.d_log_sigma;
    b1t *= config.beta1;
    b2t *= config.beta2;
    m1 = config.beta1 * m1 + (1.0 - config.beta1) * g;
    m2 = config.beta2 * m2 + (1.0 - config.beta2) * g.cwiseProduct(g);
    const Eigen::VectorXd step =
        config.learning_rate * (m1 / (1.0 - b1t)).cwiseQuotient(((m2 / (1.0 - b2t)).cwiseSqrt().array() + config.adam_eps).matrix());
    q.mu += step.head(P);
    q.log_sigma += step.tail(P);

    if (config.trace_every > 0 && epoch % config.trace_every == 0) record_trace(epoch);
  }
  return result;
}

PosteriorSampleSet sample_posterior(const VariationalPosterior& q, std::size_t n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw ValidationError("need at least one posterior sample");
  auto rng = make_rng({seed, 0x5a3b});
  std::normal_distribution<double> nd(0.0, 1.0);
  const Eigen::VectorXd sigma = q.sigma();
  PosteriorSampleSet out;
  out.seed = seed;
  out.samples.reserve(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) {
    Eigen::VectorXd theta(q.mu.size());
    for (Eigen::Index k = 0; k < theta.size(); ++k) theta(k) = q.mu(k) + sigma(k) * nd(rng);
    out.samples.push_back(MtlrParams::unflatten(theta, q.n_bins, q.feature_dim));
  }
  return out;
}

BinProbTensor::BinProbTensor(std::size_t n_instances, std::size_t n_samples, std::size_t n_bins)
    : n_inst_(n_instances), n_samp_(n_samples), n_bins_(n_bins), data_(n_instances * n_samples * n_bins, 0.0) {}

std::vector<double> BinProbTensor::mean_row(std::size_t i) const {
  std::vector<double> m(n_bins_, 0.0);
  for (std::size_t s = 0; s < n_samp_; ++s) {
    const auto r = row(i, s);
    for (std::size_t j = 0; j < n_bins_; ++j) m[j] += r[j];
  }
  for (auto& v : m) v /= static_cast<double>(n_samp_);
  return m;
}

BinProbTensor predict(const PosteriorSampleSet& samples, const Eigen::MatrixXd& X) {
  if (samples.size() == 0) throw ValidationError("empty posterior sample set");
  const std::size_t n_bins = samples.samples.front().n_bins();
  const auto N = static_cast<std::size_t>(X.rows());
  BinProbTensor out(N, samples.size(), n_bins);
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto& p = samples.samples[s];
    if (p.dim() != static_cast<std::size_t>(X.cols()) || p.n_bins() != n_bins)
      throw ShapeError("posterior sample shape does not match covariates");
    RowMat A = X * p.W.transpose();
    A.rowwise() += p.b.transpose();
    for (std::size_t i = 0; i < N; ++i) {
      auto r = out.row(i, s);
      scores_from_activations(A.row(static_cast<Eigen::Index>(i)).data(), n_bins, r.data());
      softmax_inplace(r.data(), n_bins);
    }
  }
  return out;
}

std::vector<double> survival_at_bin_starts(std::span<const double> probs) {
  std::vector<double> s(probs.size(), 0.0);
  double acc = 0.0;
  for (std::size_t j = probs.size(); j-- > 0;) {
    acc += probs[j];
    s[j] = acc;
  }
  return s;
}

// ---------------------------------------------------------------------------

std::string VariationalPosterior::to_json() const {
  nlohmann::json j;
  j["mu"] = std::vector<double>(mu.data(), mu.data() + mu.size());
  j["log_sigma"] = std::vector<double>(log_sigma.data(), log_sigma.data() + log_sigma.size());
  j["n_bins"] = n_bins;
  j["feature_dim"] = feature_dim;
  j["seed"] = seed;
  return j.dump();
}

VariationalPosterior VariationalPosterior::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("posterior checkpoint: ") + e.what());
  }
  VariationalPosterior q;
  const auto mu = j.at("mu").get<std::vector<double>>();
  const auto ls = j.at("log_sigma").get<std::vector<double>>();
  q.n_bins = j.at("n_bins").get<std::size_t>();
  q.feature_dim = j.at("feature_dim").get<std::size_t>();
  q.seed = j.value("seed", std::uint64_t{0});
  if (mu.size() != ls.size() || q.n_bins < 2 || mu.size() != (q.n_bins - 1) * (q.feature_dim + 1))
    throw ShapeError("posterior checkpoint has inconsistent shapes");
  q.mu = Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size()));
  q.log_sigma = Eigen::Map<const Eigen::VectorXd>(ls.data(), static_cast<Eigen::Index>(ls.size()));
  return q;
}

void VariationalPosterior::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json() << '\n';
}

VariationalPosterior VariationalPosterior::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace survbal
