#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "testutil.hpp"
#include "survbal/error.hpp"
#include "survbal/mtlr.hpp"

using namespace survbal;

namespace {

MtlrParams random_params(std::mt19937_64& rng, std::size_t n_bins, std::size_t dim, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  MtlrParams p(n_bins, dim);
  for (Eigen::Index j = 0; j < p.W.size(); ++j) p.W.data()[j] = nd(rng);
  for (Eigen::Index j = 0; j < p.b.size(); ++j) p.b(j) = nd(rng);
  return p;
}

// Three instances, four bins, two features: one event, two censored.
Dataset small_problem() {
  Dataset ds;
  ds.feature_names = {"a", "b"};
  ds.bins = TimeBins({1.0, 2.0, 3.0});
  ds.instances.push_back(testutil::make_instance(0, {0.5, -1.0}, 1.5, true, 1.5, true));
  ds.instances.push_back(testutil::make_instance(1, {-0.3, 0.8}, 4.0, true, 2.5, false));
  ds.instances.push_back(testutil::make_instance(2, {1.2, 0.1}, 0.7, false, 0.4, false));
  return ds;
}

}  // namespace

TEST_CASE("zero parameters give uniform bin probabilities") {
  const MtlrParams p(7, 3);
  const auto probs = mtlr_probs(p, std::vector<double>{0.3, -1.0, 2.0});
  for (Eigen::Index j = 0; j < 7; ++j) CHECK(probs(j) == doctest::Approx(1.0 / 7).epsilon(1e-14));
}

TEST_CASE("two bins reduce to logistic regression") {
  MtlrParams p(2, 2);
  p.W << 0.7, -1.1;
  p.b << 0.4;
  const std::vector<double> x{1.5, 0.25};
  const double s = 0.7 * 1.5 - 1.1 * 0.25 + 0.4;
  const auto probs = mtlr_probs(p, x);
  CHECK(probs(0) == doctest::Approx(1.0 / (1.0 + std::exp(-s))).epsilon(1e-14));
  CHECK(probs(1) == doctest::Approx(1.0 - 1.0 / (1.0 + std::exp(-s))).epsilon(1e-14));
}

TEST_CASE("bin probabilities match sequence enumeration") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 25; ++trial) {
    const auto p = random_params(rng, 5, 3);
    std::vector<double> x{nd(rng), nd(rng), nd(rng)};
    const auto probs = mtlr_probs(p, x);
    const auto ref = oracle::mtlr_by_sequences(p.W, p.b, x);
    for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(probs(static_cast<Eigen::Index>(j)) - ref[j]) < 1e-12);
  }
}

TEST_CASE("shape mismatches are rejected") {
  const MtlrParams p(4, 2);
  CHECK_THROWS_AS(mtlr_logits(p, std::vector<double>{1.0}), ShapeError);
  CHECK_THROWS_AS(MtlrParams::unflatten(Eigen::VectorXd::Zero(5), 4, 2), ShapeError);
}

TEST_CASE("flatten and unflatten are inverse") {
  std::mt19937_64 rng(2);
  const auto p = random_params(rng, 6, 4);
  const auto q = MtlrParams::unflatten(p.flatten(), 6, 4);
  CHECK(q.W == p.W);
  CHECK(q.b == p.b);
}

TEST_CASE("log likelihood reads single bins and tail sums") {
  // scores log p shifted so the last is 0: p = [0.2, 0.3, 0.5]
  const double s0 = std::log(0.2 / 0.5), s1 = std::log(0.3 / 0.5);
  MtlrParams p(3, 1);
  p.b << s0 - s1, s1;
  const TimeBins bins({1.0, 2.0});
  const auto unc = testutil::make_instance(0, {0.0}, 1.5, true, 1.5, true);
  const auto cen = testutil::make_instance(0, {0.0}, 9.0, true, 1.5, false);
  const auto last = testutil::make_instance(0, {0.0}, 9.0, true, 5.0, false);
  CHECK(log_likelihood(p, unc, bins) == doctest::Approx(std::log(0.3)).epsilon(1e-13));
  CHECK(log_likelihood(p, cen, bins) == doctest::Approx(std::log(0.8)).epsilon(1e-13));
  CHECK(log_likelihood(p, last, bins) == doctest::Approx(std::log(0.5)).epsilon(1e-13));
}

TEST_CASE("censored log likelihood dominates the uncensored one") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 6.0);
  const TimeBins bins({1.0, 2.0, 3.0, 4.0});
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = random_params(rng, 5, 2, 2.0);
    const double t = u(rng);
    const auto cen = testutil::make_instance(0, {u(rng) - 3, u(rng) - 3}, t + 1, true, t, false);
    auto unc = cen;
    unc.delta_obs = true;
    CHECK(log_likelihood(p, cen, bins) >= log_likelihood(p, unc, bins) - 1e-15);
  }
}

TEST_CASE("log likelihood survives extreme scores") {
  MtlrParams p(3, 1);
  p.b << 800.0, -800.0;
  const TimeBins bins({1.0, 2.0});
  const auto inst = testutil::make_instance(0, {0.0}, 2.5, true, 2.5, true);
  CHECK(std::isfinite(log_likelihood(p, inst, bins)));
}

TEST_CASE("closed-form KL matches numerical integration") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd mq(3), lq(3), mp(3), lp(3);
    for (int k = 0; k < 3; ++k) {
      mq(k) = nd(rng);
      lq(k) = 0.3 * nd(rng);
      mp(k) = nd(rng);
      lp(k) = 0.3 * nd(rng);
    }
    double quad = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double sq = std::exp(lq(k)), sp = std::exp(lp(k));
      auto logpdf = [](double x, double m, double s) {
        return -0.5 * std::log(2 * M_PI) - std::log(s) - 0.5 * (x - m) * (x - m) / (s * s);
      };
      const double lo = mq(k) - 12 * sq, hi = mq(k) + 12 * sq;
      const int steps = 20000;
      const double h = (hi - lo) / steps;
      for (int i = 0; i <= steps; ++i) {
        const double x = lo + i * h;
        const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
        const double lqx = logpdf(x, mq(k), sq);
        quad += w * h * std::exp(lqx) * (lqx - logpdf(x, mp(k), sp));
      }
    }
    CHECK(kl_diag_gaussians(mq, lq, mp, lp) == doctest::Approx(quad).epsilon(1e-7));
  }
}

TEST_CASE("prior KL gradients match finite differences") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  Eigen::VectorXd mu(6), ls(6);
  for (int k = 0; k < 6; ++k) {
    mu(k) = nd(rng);
    ls(k) = -1.0 + 0.4 * nd(rng);
  }
  for (auto kind : {PriorKind::Gaussian, PriorKind::SpikeAndSlab}) {
    PriorConfig prior;
    prior.kind = kind;
    const auto kl = prior_kl(mu, ls, prior, 4);
    const auto g_mu = oracle::fd_gradient([&](const Eigen::VectorXd& m) { return prior_kl(m, ls, prior, 4).value; }, mu);
    const auto g_ls = oracle::fd_gradient([&](const Eigen::VectorXd& l) { return prior_kl(mu, l, prior, 4).value; }, ls);
    CHECK(oracle::relative_error(kl.d_mu, g_mu) < 1e-6);
    CHECK(oracle::relative_error(kl.d_log_sigma, g_ls) < 1e-6);
  }
  PriorConfig gauss;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(6);
  CHECK(prior_kl(mu, ls, gauss, 4).value == doctest::Approx(kl_diag_gaussians(mu, ls, zero, zero)).epsilon(1e-13));
}

TEST_CASE("likelihood gradient matches finite differences") {
  const auto ds = small_problem();
  const auto data = TrainingSet::from(ds);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  Eigen::VectorXd theta(9);
  for (int k = 0; k < 9; ++k) theta(k) = nd(rng);
  const auto ll = total_log_likelihood(data, theta);
  const auto fd = oracle::fd_gradient([&](const Eigen::VectorXd& t) { return total_log_likelihood(data, t, false).value; }, theta);
  CHECK(oracle::relative_error(ll.grad, fd) < 1e-6);

  double direct = 0.0;
  const auto p = MtlrParams::unflatten(theta, 4, 2);
  for (const auto& s : ds.instances) direct += log_likelihood(p, s, ds.bins);
  CHECK(ll.value == doctest::Approx(direct).epsilon(1e-13));
}

TEST_CASE("ELBO gradient matches finite differences on a 3-instance 4-bin problem") {
  const auto ds = small_problem();
  const auto data = TrainingSet::from(ds);
  std::mt19937_64 rng(21);
  std::normal_distribution<double> nd;
  for (auto kind : {PriorKind::Gaussian, PriorKind::SpikeAndSlab}) {
    PriorConfig prior;
    prior.kind = kind;
    Eigen::VectorXd mu(9), ls(9);
    Eigen::MatrixXd eps(9, 3);
    for (int k = 0; k < 9; ++k) {
      mu(k) = nd(rng);
      ls(k) = -1.0 + 0.3 * nd(rng);
      for (int c = 0; c < 3; ++c) eps(k, c) = nd(rng);
    }
    const auto e = elbo(data, mu, ls, eps, prior);
    const auto g_mu = oracle::fd_gradient([&](const Eigen::VectorXd& m) { return elbo(data, m, ls, eps, prior).value; }, mu);
    const auto g_ls = oracle::fd_gradient([&](const Eigen::VectorXd& l) { return elbo(data, mu, l, eps, prior).value; }, ls);
    CHECK(oracle::relative_error(e.d_mu, g_mu) < 1e-4);
    CHECK(oracle::relative_error(e.d_log_sigma, g_ls) < 1e-4);
  }
}

TEST_CASE("fit increases the ELBO and is deterministic") {
  SynthConfig sc;
  sc.n = 300;
  sc.dim = 4;
  sc.seed = 6;
  auto ds = synth_generate(sc);
  FitConfig cfg;
  cfg.epochs = 600;
  cfg.trace_every = 50;
  const auto a = fit(ds, cfg, 3);
  const auto& tr = a.elbo_trace;
  REQUIRE(tr.size() == 13);
  CHECK(tr.back() > tr.front());
  for (std::size_t i = 1; i < tr.size(); ++i) CHECK(tr[i] >= tr[i - 1] - 0.05 * std::abs(tr[i - 1]));

  const auto b = fit(ds, cfg, 3);
  CHECK(a.posterior.mu == b.posterior.mu);
  CHECK(a.posterior.log_sigma == b.posterior.log_sigma);
}

TEST_CASE("pure-noise labels keep the weights near zero") {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> nd;
  std::exponential_distribution<double> ex(1.0);
  Dataset ds;
  ds.feature_names = {"a", "b", "c"};
  std::vector<double> ev;
  for (std::size_t i = 0; i < 60; ++i) {
    const double t = ex(rng);
    ds.instances.push_back(testutil::make_instance(i, {nd(rng), nd(rng), nd(rng)}, t, true, t, true));
    ev.push_back(t);
  }
  ds.bins = make_bins(ev, 4);
  FitConfig cfg;
  cfg.epochs = 1500;
  const auto q = fit(ds, cfg, 1).posterior;
  const auto p = q.mean_params();
  CHECK(p.W.cwiseAbs().maxCoeff() < 0.5);
}

TEST_CASE("sample_posterior collapses, centres and repeats") {
  VariationalPosterior q;
  q.n_bins = 3;
  q.feature_dim = 1;
  q.mu = Eigen::Vector4d(0.5, -1.0, 2.0, 0.25);
  q.log_sigma = Eigen::VectorXd::Constant(4, -60.0);
  for (const auto& s : sample_posterior(q, 5, 1).samples) CHECK((s.flatten() - q.mu).cwiseAbs().maxCoeff() < 1e-20);

  q.log_sigma = Eigen::Vector4d(0.0, -0.5, 0.3, -1.0);
  const auto set = sample_posterior(q, 100000, 7);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(4);
  for (const auto& s : set.samples) mean += s.flatten();
  mean /= 100000.0;
  for (int k = 0; k < 4; ++k) CHECK(std::abs(mean(k) - q.mu(k)) < 3.0 * std::exp(q.log_sigma(k)) / std::sqrt(100000.0));

  const auto a = sample_posterior(q, 10, 42), b = sample_posterior(q, 10, 42);
  for (std::size_t s = 0; s < 10; ++s) CHECK(a.samples[s].flatten() == b.samples[s].flatten());
}

TEST_CASE("predict rows are simplices with monotone survival") {
  std::mt19937_64 rng(13);
  PosteriorSampleSet set;
  for (int s = 0; s < 8; ++s) set.samples.push_back(random_params(rng, 10, 3, 1.5));
  std::normal_distribution<double> nd;
  Eigen::MatrixXd X(20, 3);
  for (Eigen::Index k = 0; k < X.size(); ++k) X.data()[k] = 2.0 * nd(rng);
  const auto probs = predict(set, X);
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t s = 0; s < 8; ++s) {
      const auto r = probs.row(i, s);
      double sum = 0.0;
      for (double v : r) {
        CHECK(v >= 0.0);
        sum += v;
      }
      CHECK(std::abs(sum - 1.0) < 1e-9);
      const auto surv = survival_at_bin_starts(r);
      for (std::size_t j = 1; j < surv.size(); ++j) CHECK(surv[j] <= surv[j - 1]);
    }

  PosteriorSampleSet zero;
  zero.samples.emplace_back(5, 3);
  const auto u = predict(zero, X);
  for (double v : u.row(3, 0)) CHECK(v == doctest::Approx(0.2).epsilon(1e-14));
}

TEST_CASE("predict agrees with per-instance probabilities") {
  std::mt19937_64 rng(14);
  PosteriorSampleSet set;
  for (int s = 0; s < 3; ++s) set.samples.push_back(random_params(rng, 6, 2));
  Eigen::MatrixXd X(4, 2);
  X << 0.1, 0.2, -1, 1, 2, 0, 0.5, -0.5;
  const auto probs = predict(set, X);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (std::size_t s = 0; s < 3; ++s) {
      const std::vector<double> x{X(i, 0), X(i, 1)};
      const auto ref = mtlr_probs(set.samples[s], x);
      const auto r = probs.row(static_cast<std::size_t>(i), s);
      for (std::size_t j = 0; j < 6; ++j) CHECK(std::abs(r[j] - ref(static_cast<Eigen::Index>(j))) < 1e-14);
    }
}

TEST_CASE("survival past the first bin of the worked row") {
  const std::vector<double> row{0.20, 0.25, 0.20, 0.05, 0.30};
  const auto s = survival_at_bin_starts(row);
  CHECK(s[0] == doctest::Approx(1.0));
  CHECK(s[1] == doctest::Approx(0.80).epsilon(1e-14));
}

TEST_CASE("posterior checkpoints round-trip") {
  VariationalPosterior q;
  q.n_bins = 4;
  q.feature_dim = 2;
  q.seed = 99;
  q.mu = Eigen::VectorXd::LinSpaced(9, -1.0, 1.0 / 3.0);
  q.log_sigma = Eigen::VectorXd::LinSpaced(9, -3.0, 0.1);
  const auto back = VariationalPosterior::from_json(q.to_json());
  CHECK(back.mu == q.mu);
  CHECK(back.log_sigma == q.log_sigma);
  CHECK(back.n_bins == 4);
  CHECK(back.feature_dim == 2);
  CHECK(back.seed == 99);

  const auto path = std::filesystem::temp_directory_path() / "survbal_test_posterior.json";
  q.save(path);
  CHECK(VariationalPosterior::load(path).mu == q.mu);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(VariationalPosterior::from_json("{not json"), ParseError);
  CHECK_THROWS_AS(VariationalPosterior::from_json(R"({"mu":[1],"log_sigma":[1],"n_bins":4,"feature_dim":2})"), ShapeError);
}
