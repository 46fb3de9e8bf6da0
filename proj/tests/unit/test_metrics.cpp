#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "testutil.hpp"
#include "survbal/error.hpp"
#include "survbal/metrics.hpp"

using namespace survbal;

namespace {

struct Sample {
  std::vector<double> times;
  std::vector<char> events;
};

Sample random_sample(std::mt19937_64& rng, std::size_t n, double censor_p, bool ties = false) {
  std::exponential_distribution<double> ex(0.5);
  std::bernoulli_distribution cens(censor_p);
  Sample s;
  for (std::size_t i = 0; i < n; ++i) {
    double t = ex(rng);
    if (ties) t = std::ceil(t);
    s.times.push_back(t);
    s.events.push_back(cens(rng) ? 0 : 1);
  }
  return s;
}

}  // namespace

TEST_CASE("KM on hand examples") {
  const std::vector<double> t{1, 2, 3};
  const std::vector<char> all{1, 1, 1};
  const auto km = km_fit(t, all);
  CHECK(km.at(0.5) == 1.0);
  CHECK(km.at(1.0) == doctest::Approx(2.0 / 3));
  CHECK(km.at(2.0) == doctest::Approx(1.0 / 3));
  CHECK(km.at(3.0) == doctest::Approx(0.0));
  CHECK(km.before(2.0) == doctest::Approx(2.0 / 3));

  const std::vector<char> none{0, 0, 0};
  const auto flat = km_fit(t, none);
  for (double x : {0.0, 1.5, 10.0}) CHECK(flat.at(x) == 1.0);

  const std::vector<double> five{5.0};
  const std::vector<char> one{1};
  const auto step = km_fit(five, one);
  CHECK(step.at(4.999) == 1.0);
  CHECK(step.at(5.0) == 0.0);
  CHECK(step.restricted_mean(7.0) == doctest::Approx(5.0));
}

TEST_CASE("KM matches the product-limit oracle and is non-increasing") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = random_sample(rng, 30, 0.4, trial % 2 == 0);
    const auto km = km_fit(s.times, s.events);
    const auto ref = oracle::km(s.times, s.events);
    for (std::size_t k = 1; k < km.surv.size(); ++k) CHECK(km.surv[k] <= km.surv[k - 1]);
    for (double x = 0.0; x < 12.0; x += 0.37) {
      CHECK(std::abs(km.at(x) - ref.at(x)) < 1e-12);
      CHECK(std::abs(km.before(x) - ref.before(x)) < 1e-12);
    }
    const double tau = *std::max_element(s.times.begin(), s.times.end());
    CHECK(std::abs(km.restricted_mean(tau) - ref.area(tau)) < 1e-9);
  }
}

TEST_CASE("KM without censoring is the empirical survival") {
  std::mt19937_64 rng(4);
  const auto s = random_sample(rng, 40, 0.0);
  const auto km = km_fit(s.times, s.events);
  for (double x = 0.0; x < 10.0; x += 0.25) {
    const double emp = static_cast<double>(std::count_if(s.times.begin(), s.times.end(), [&](double t) { return t > x; })) / 40.0;
    CHECK(std::abs(km.at(x) - emp) < 1e-12);
  }
}

TEST_CASE("pseudo-observations match a direct jackknife") {
  const std::vector<double> t{2.0, 3.5, 1.0, 4.0, 2.5};
  const std::vector<char> e{1, 0, 1, 1, 0};
  const auto po = pseudo_observations(t, e);
  const auto ref = oracle::jackknife(t, e);
  for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(po[i] - ref[i]) < 1e-9);

  const std::vector<double> preds{1.8, 3.0, 1.2, 3.3, 2.0};
  double mae = 0.0;
  for (std::size_t i = 0; i < 5; ++i) mae += std::abs((e[i] ? t[i] : ref[i]) - preds[i]) / 5.0;
  CHECK(std::abs(mae_po(preds, t, e) - mae) < 1e-9);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const auto s = random_sample(rng, 25, 0.5, trial % 3 == 0);
    const auto a = pseudo_observations(s.times, s.events);
    const auto b = oracle::jackknife(s.times, s.events);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(std::abs(a[i] - b[i]) < 1e-9);
      CHECK(a[i] >= 0.0);
    }
  }
  CHECK_THROWS_AS(pseudo_observations(std::vector<double>{1.0}, std::vector<char>{0}), UndefinedMetricError);
}

TEST_CASE("MAE-PO on uncensored sets is the plain MAE") {
  const std::vector<double> t{1, 2, 3, 4};
  const std::vector<char> e{1, 1, 1, 1};
  const std::vector<double> p{1.5, 2, 2, 5};
  CHECK(mae_po(p, t, e) == doctest::Approx(0.625));
  CHECK(mae_po(p, t, e) == mae_uncensored(p, t, e));
  CHECK(mae_po(t, t, e) == 0.0);
  CHECK_THROWS_AS(mae_uncensored(p, t, std::vector<char>{0, 0, 0, 0}), UndefinedMetricError);
}

TEST_CASE("C-index edge cases and invariance") {
  const std::vector<double> t{1, 2, 3, 4, 5};
  const std::vector<char> e{1, 1, 0, 1, 0};
  CHECK(c_index(t, t, e) == 1.0);
  std::vector<double> anti(t.rbegin(), t.rend());
  CHECK(c_index(anti, t, e) == 0.0);
  CHECK(c_index(std::vector<double>(5, 1.0), t, e) == 0.5);
  CHECK_THROWS_AS(c_index(t, t, std::vector<char>{0, 0, 0, 0, 0}), UndefinedMetricError);

  std::mt19937_64 rng(6);
  const auto s = random_sample(rng, 60, 0.3);
  std::vector<double> p(60);
  std::normal_distribution<double> nd;
  for (auto& v : p) v = nd(rng);
  const double c = c_index(p, s.times, s.events);
  CHECK(std::abs(c - oracle::harrell(p, s.times, s.events)) < 1e-12);
  std::vector<double> q(60);
  std::transform(p.begin(), p.end(), q.begin(), [](double v) { return std::exp(3 * v) + 2; });
  CHECK(c_index(q, s.times, s.events) == c);
}

TEST_CASE("C-index of random predictions is near one half") {
  std::mt19937_64 rng(7);
  const auto s = random_sample(rng, 200, 0.3);
  std::uniform_real_distribution<double> u;
  double acc = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> p(200);
    for (auto& v : p) v = u(rng);
    acc += c_index(p, s.times, s.events) / 20.0;
  }
  CHECK(std::abs(acc - 0.5) < 0.05);
}

TEST_CASE("Brier score: sharp, constant and hand-computed cases") {
  const std::vector<double> t{1, 2, 3, 4};
  const std::vector<char> e{1, 1, 1, 1};
  std::vector<double> grid(21);
  for (int k = 0; k <= 20; ++k) grid[k] = 4.0 * k / 20.0;

  // step curve falling exactly at the event time
  std::vector<SurvivalCurve> sharp;
  for (double ti : t) sharp.push_back({{0.0, ti, ti}, {1.0, 1.0, 0.0}});
  CHECK(integrated_brier(sharp, t, e, grid) == doctest::Approx(0.0).epsilon(1e-12));

  std::vector<SurvivalCurve> half(4, SurvivalCurve{{0.0}, {0.5}});
  CHECK(integrated_brier(half, t, e, grid) == doctest::Approx(0.25).epsilon(1e-12));

  // mixed censoring: compare each grid point against the direct IPCW sum
  const std::vector<double> tm{1.0, 2.0, 2.5, 4.0};
  const std::vector<char> em{1, 0, 1, 0};
  std::vector<SurvivalCurve> curves{{{0, 5}, {1, 0}}, {{0, 3}, {1, 0.2}}, {{0, 2, 4}, {1, 0.6, 0.1}}, {{0}, {0.7}}};
  std::vector<std::function<double(double)>> fs;
  for (const auto& c : curves) fs.push_back([c](double x) { return c.at(x); });
  const std::vector<double> g{0.0, 0.5, 1.5, 2.2, 3.0};
  double area = 0.0;
  for (std::size_t k = 1; k < g.size(); ++k)
    area += 0.5 * (oracle::brier_at(g[k], fs, tm, em) + oracle::brier_at(g[k - 1], fs, tm, em)) * (g[k] - g[k - 1]);
  CHECK(std::abs(integrated_brier(curves, tm, em, g) - area / 3.0) < 1e-9);

  // a censoring KM that reaches zero is floored
  const std::vector<double> tz{1.0, 2.0};
  const std::vector<char> ez{1, 0};
  std::vector<SurvivalCurve> cz(2, SurvivalCurve{{0.0}, {0.5}});
  CHECK(std::isfinite(integrated_brier(cz, tz, ez, std::vector<double>{0.0, 3.0})));
}

TEST_CASE("Brier score is invariant to test-set order") {
  std::mt19937_64 rng(8);
  const auto s = random_sample(rng, 30, 0.3);
  std::vector<SurvivalCurve> curves;
  std::uniform_real_distribution<double> u(0.5, 6.0);
  for (int i = 0; i < 30; ++i) curves.push_back({{0.0, u(rng)}, {1.0, 0.0}});
  const auto grid = default_brier_grid(s.times);
  const double a = integrated_brier(curves, s.times, s.events, grid);
  std::vector<std::size_t> perm(30);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<SurvivalCurve> c2;
  std::vector<double> t2;
  std::vector<char> e2;
  for (auto i : perm) {
    c2.push_back(curves[i]);
    t2.push_back(s.times[i]);
    e2.push_back(s.events[i]);
  }
  CHECK(integrated_brier(c2, t2, e2, grid) == doctest::Approx(a).epsilon(1e-12));
  CHECK(grid.size() == 100);
  CHECK(grid.front() == 0.0);
  CHECK(grid.back() == doctest::Approx(testutil::quantile7(s.times, 0.95)).epsilon(1e-12));
}

TEST_CASE("ISD and median prediction") {
  const TimeBins bins({1.0, 2.0, 3.0, 4.0});
  const std::vector<double> row{0.20, 0.25, 0.20, 0.05, 0.30};
  const auto isd = isd_from_bins(row, bins);
  CHECK(isd.at(0.0) == 1.0);
  CHECK(isd.at(1.0) == doctest::Approx(0.8));
  CHECK(isd.at(1.5) == doctest::Approx(0.675));
  CHECK(isd.at(5.0) == doctest::Approx(0.0));
  // S(2) = 0.55, S(3) = 0.35: crosses 0.5 a quarter of the way into [2, 3)
  CHECK(predict_time(row, bins) == doctest::Approx(2.25));

  const std::vector<double> edge{0.25, 0.25, 0.2, 0.1, 0.2};
  CHECK(predict_time(edge, bins) == doctest::Approx(2.0));

  std::vector<double> edges(9);
  std::iota(edges.begin(), edges.end(), 1.0);
  const TimeBins ten(edges);
  CHECK(predict_time(std::vector<double>(10, 0.1), ten) == doctest::Approx(5.0));
  for (std::size_t j = 0; j < 10; ++j) {
    std::vector<double> hot(10, 0.0);
    hot[j] = 1.0;
    CHECK(predict_time(hot, ten) == doctest::Approx(0.5 * (ten.lower(j) + ten.upper(j))));
  }
}

TEST_CASE("ci95 and Welch t-test") {
  CHECK(ci95(std::vector<double>{2, 2, 2}) == 0.0);
  CHECK_THROWS_AS(ci95(std::vector<double>{1.0}), ValidationError);

  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd(3.0, 2.0);
  std::vector<double> v(10000);
  for (auto& x : v) x = nd(rng);
  CHECK(std::abs(ci95(v) / (1.96 * 2.0 / 100.0) - 1.0) < 0.05);

  const std::vector<double> a{1.0, 1.1, 0.9, 1.05, 0.95}, b{3.0, 3.1, 2.9, 3.05, 2.95};
  const auto r = welch_t_test(a, b);
  CHECK(r.p_two_sided < 1e-6);
  CHECK(r.p_less < 1e-6);
  CHECK(welch_t_test(b, a).p_less > 0.999);

  // textbook values: t = -2.0, df = 8 for equal sizes and variances
  const std::vector<double> c{1, 2, 3, 4, 5}, d{3, 4, 5, 6, 7};
  const auto w = welch_t_test(c, d);
  CHECK(w.t == doctest::Approx(-2.0));
  CHECK(w.df == doctest::Approx(8.0));
  CHECK(w.p_two_sided == doctest::Approx(0.0805).epsilon(1e-3));
  CHECK(w.p_less == doctest::Approx(w.p_two_sided / 2));
}

TEST_CASE("test-set summary and posterior evaluation") {
  SynthConfig cfg;
  cfg.n = 200;
  cfg.dim = 2;
  cfg.censor_rate = 0.3;
  auto ds = synth_generate(cfg);
  const auto summary = TestSetSummary::from(ds);
  CHECK(summary.times.size() == 200);
  CHECK(summary.grid.size() == 100);
  const auto ref = oracle::jackknife(summary.times, summary.events);
  for (std::size_t i = 0; i < 200; ++i) CHECK(std::abs(summary.pseudo[i] - ref[i]) < 1e-9);

  PosteriorSampleSet set;
  set.samples.emplace_back(ds.bins.count(), 2);
  set.samples.emplace_back(ds.bins.count(), 2);
  set.samples[1].W.setConstant(0.2);
  const auto probs = predict(set, ds.covariates());
  const auto rep = evaluate_posterior(probs, summary, ds.bins);
  CHECK(rep.mae_po >= 0.0);
  CHECK(rep.c_index >= 0.0);
  CHECK(rep.c_index <= 1.0);
  CHECK(rep.ibs >= 0.0);
  CHECK(rep.ibs <= 1.0);
  std::vector<double> preds0;
  for (std::size_t i = 0; i < 200; ++i) preds0.push_back(predict_time(probs.row(i, 0), ds.bins));
  std::vector<double> preds1;
  for (std::size_t i = 0; i < 200; ++i) preds1.push_back(predict_time(probs.row(i, 1), ds.bins));
  const double m0 = mae_po(preds0, summary.times, summary.events, summary.pseudo);
  const double m1 = mae_po(preds1, summary.times, summary.events, summary.pseudo);
  CHECK(rep.mae_po == doctest::Approx(0.5 * (m0 + m1)).epsilon(1e-12));
  CHECK(rep.ci95.mae_po == doctest::Approx(ci95(std::vector<double>{m0, m1})).epsilon(1e-12));
}
