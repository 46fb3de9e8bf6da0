// Acceptance suite: one PASS/FAIL line per criterion.
//   survbal_acceptance            run all ten
//   survbal_acceptance --only 4   run one

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oracles.hpp"
#include "testutil.hpp"
#include "survbal/acquisition.hpp"
#include "survbal/budget_select.hpp"
#include "survbal/dataset.hpp"
#include "survbal/error.hpp"
#include "survbal/experiment.hpp"
#include "survbal/metrics.hpp"
#include "survbal/mtlr.hpp"
#include "survbal/oracle.hpp"

using namespace survbal;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double limit_seconds;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome transforms() {
  const std::vector<double> row{0.20, 0.25, 0.20, 0.05, 0.30};
  const TimeBins bins({1.0, 2.0, 3.0, 4.0});
  const auto pc = to_p_cens(row, bins.bin_of(1.3));
  const std::vector<double> want{0.0, 0.3125, 0.25, 0.0625, 0.375};
  double err = 0.0;
  for (std::size_t j = 0; j < 5; ++j) err = std::max(err, std::abs(pc.probs[j] - want[j]));
  const auto pf = to_p_final(pc, 1.3, 1.0, bins);
  const bool shape = pf.probs.size() == 3 && pf.has_unknowable();
  if (shape) {
    err = std::max(err, std::abs(pf.probs[0] - 0.3125));
    err = std::max(err, std::abs(pf.probs[1] - 0.25));
    err = std::max(err, std::abs(pf.probs[2] - 0.4375));
  }
  return {shape && err <= 1e-12, "max abs error " + fmt("%.3g", err) + " (tol 1e-12), b_uk = " +
                                     (shape ? fmt("%.17g", pf.probs[2]) : std::string("missing"))};
}

Outcome mi_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> n_inst(1, 3), n_cls(2, 4), n_samp(2, 5);
  MiOptions exact;
  exact.mode = MiMode::Exact;
  double worst = 0.0;
  for (int p = 0; p < 200; ++p) {
    const std::size_t b = n_inst(rng), S = n_samp(rng);
    std::vector<ClassMatrix> rows;
    for (std::size_t i = 0; i < b; ++i) rows.push_back(testutil::random_class_matrix(rng, S, n_cls(rng)));
    worst = std::max(worst, std::abs(batch_mutual_information(rows, exact) - oracle::brute_force_mi(rows)));
  }
  return {worst <= 1e-9, "200 problems, max |exact - brute force| " + fmt("%.3g", worst) + " bits (tol 1e-9)"};
}

Outcome submodularity() {
  std::mt19937_64 rng(77);
  MiOptions exact;
  exact.mode = MiMode::Exact;
  int sub_fail = 0, mono_fail = 0;
  for (int p = 0; p < 100; ++p) {
    std::vector<ClassMatrix> cands;
    for (int i = 0; i < 4; ++i) cands.push_back(testutil::random_class_matrix(rng, 4, 3));
    MaskFunction f = [&](std::uint32_t mask) {
      std::vector<ClassMatrix> rows;
      for (auto i : mask_to_indices(mask)) rows.push_back(cands[i]);
      return rows.empty() ? 0.0 : batch_mutual_information(rows, exact);
    };
    sub_fail += check_submodular(f, 4, 1e-9).submodular ? 0 : 1;
    mono_fail += check_monotone(f, 4, 1e-9).has_value() ? 1 : 0;
  }
  return {sub_fail == 0 && mono_fail == 0, "100 problems, submodularity violations " + std::to_string(sub_fail) +
                                               ", monotonicity violations " + std::to_string(mono_fail) + " (tol 1e-9)"};
}

Outcome k_infinity() {
  int mismatches = 0;
  double worst = 0.0;
  for (std::uint64_t p = 0; p < 50; ++p) {
    SynthConfig sc;
    sc.n = 120;
    sc.dim = 3;
    sc.seed = 1000 + p;
    sc.n_bins = 6;
    const auto pool = artificial_censor(synth_generate(sc), {12, 60}, p);
    std::mt19937_64 rng(p);
    std::normal_distribution<double> nd(0.0, 0.7);
    PosteriorSampleSet samples;
    for (int s = 0; s < 6; ++s) {
      MtlrParams m(pool.bins.count(), pool.dim());
      for (Eigen::Index k = 0; k < m.W.size(); ++k) m.W.data()[k] = nd(rng);
      for (Eigen::Index k = 0; k < m.b.size(); ++k) m.b(k) = nd(rng);
      samples.samples.push_back(m);
    }
    const auto probs = predict(samples, pool.covariates());
    std::vector<std::size_t> censored = acquisition_candidates(pool, probs);
    std::shuffle(censored.begin(), censored.end(), rng);
    censored.resize(3);
    double horizon = 0.0;
    for (const auto& s : pool.instances) horizon = std::max(horizon, s.t_true);
    const double k = horizon + pool.bins.upper(pool.bins.count() - 1);
    const double a = score_bb_surv(censored, pool, samples, k).value;
    const double b = score_batchbald(censored, pool, samples).value;
    if (a != b) ++mismatches;
    worst = std::max(worst, std::abs(a - b));
  }
  return {mismatches == 0, "50 pools, bitwise mismatches " + std::to_string(mismatches) + " (max diff " +
                               fmt("%.3g", worst) + ")"};
}

Outcome coverage() {
  const auto v = verify_coverage(100, 5);
  bool examples = v.example_optima.size() == 2 && v.example_optima[0] == 5.0 && v.example_optima[1] == 13.0;
  return {v.passed() && examples,
          "100 instances, enumerated violations " + std::to_string(v.enumerated_violations) + ", ratio violations " +
              std::to_string(v.ratio_violations) + ", worked optima " +
              (v.example_optima.size() == 2 ? fmt("%g", v.example_optima[0]) + "/" + fmt("%g", v.example_optima[1])
                                            : std::string("?"))};
}

Outcome model() {
  Dataset ds;
  ds.feature_names = {"a", "b"};
  ds.bins = TimeBins({1.0, 2.0, 3.0});
  ds.instances.push_back(testutil::make_instance(0, {0.5, -1.0}, 1.5, true, 1.5, true));
  ds.instances.push_back(testutil::make_instance(1, {-0.3, 0.8}, 4.0, true, 2.5, false));
  ds.instances.push_back(testutil::make_instance(2, {1.2, 0.1}, 0.7, false, 0.4, false));
  const auto data = TrainingSet::from(ds);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd;
  Eigen::VectorXd mu(9), ls(9);
  Eigen::MatrixXd eps(9, 2);
  for (int k = 0; k < 9; ++k) {
    mu(k) = nd(rng);
    ls(k) = -1.0 + 0.3 * nd(rng);
    for (int c = 0; c < 2; ++c) eps(k, c) = nd(rng);
  }
  PriorConfig prior;
  const auto e = elbo(data, mu, ls, eps, prior);
  const auto g_mu = oracle::fd_gradient([&](const Eigen::VectorXd& m) { return elbo(data, m, ls, eps, prior).value; }, mu);
  const auto g_ls = oracle::fd_gradient([&](const Eigen::VectorXd& l) { return elbo(data, mu, l, eps, prior).value; }, ls);
  const double rel = std::max(oracle::relative_error(e.d_mu, g_mu), oracle::relative_error(e.d_log_sigma, g_ls));

  SynthConfig sc;
  sc.n = 500;
  sc.seed = 3;
  const auto pool = synth_generate(sc);
  VariationalPosterior q;
  q.n_bins = pool.bins.count();
  q.feature_dim = pool.dim();
  q.mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>((q.n_bins - 1) * (q.feature_dim + 1)));
  for (Eigen::Index k = 0; k < q.mu.size(); ++k) q.mu(k) = 0.5 * nd(rng);
  q.log_sigma = Eigen::VectorXd::Constant(q.mu.size(), -0.5);
  const auto probs = predict(sample_posterior(q, 50, 1), pool.covariates());
  double worst_sum = 0.0;
  std::size_t non_monotone = 0;
  for (std::size_t i = 0; i < probs.instances(); ++i)
    for (std::size_t s = 0; s < probs.samples(); ++s) {
      const auto r = probs.row(i, s);
      worst_sum = std::max(worst_sum, std::abs(std::accumulate(r.begin(), r.end(), 0.0) - 1.0));
      const auto surv = survival_at_bin_starts(r);
      for (std::size_t j = 1; j < surv.size(); ++j) non_monotone += surv[j] > surv[j - 1] ? 1 : 0;
    }
  return {rel < 1e-4 && worst_sum <= 1e-9 && non_monotone == 0,
          "ELBO gradient rel error " + fmt("%.3g", rel) + " (tol 1e-4), max |row sum - 1| " + fmt("%.3g", worst_sum) +
              ", non-monotone ISD steps " + std::to_string(non_monotone)};
}

Outcome oracle_semantics() {
  int bad = 0;
  {
    BudgetLedger l(10.0);
    const auto a = probe(testutil::make_instance(0, {}, 3.2, true, 3.0, false), 1.0, l);
    bad += (a.t_new == 3.2 && a.delta_new) ? 0 : 1;
    const auto b = probe(testutil::make_instance(0, {}, 9.0, true, 3.0, false), 1.0, l);
    bad += (b.t_new == 4.0 && !b.delta_new) ? 0 : 1;
    const auto c = probe(testutil::make_instance(0, {}, 20.0, true, 2.4, false), 5.0, l);
    bad += (c.t_new == 2.4 + 5.0 && !c.delta_new) ? 0 : 1;
  }
  const int examples_bad = bad;

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t violations = 0, ops = 0;
  for (int seq = 0; seq < 500; ++seq) {
    Dataset pool;
    for (std::size_t i = 0; i < 10; ++i) {
      const double tt = 0.1 + 10 * u(rng);
      pool.instances.push_back(testutil::make_instance(i, {}, tt, u(rng) < 0.7, tt * u(rng), false, 0.1 + u(rng)));
    }
    BudgetLedger ledger(0.5 + 4 * u(rng));
    for (int op = 0; op < 20; ++op, ++ops) {
      std::vector<std::size_t> ids;
      for (std::size_t i = 0; i < pool.size(); ++i)
        if (u(rng) < 0.2) ids.push_back(i);
      const double k1 = 3 * u(rng), k2 = k1 + 3 * u(rng);
      for (auto id : ids) {
        BudgetLedger scratch(1e9);
        const auto a = probe(pool.instances[id], k1, scratch);
        const auto b = probe(pool.instances[id], k2, scratch);
        if (a.t_new > b.t_new || (a.delta_new && !b.delta_new)) ++violations;
      }
      try {
        probe_batch(ids, pool, k2, ledger);
      } catch (const BudgetExceededError&) {
      }
      if (ledger.spent() > ledger.total()) ++violations;
      for (const auto& s : pool.instances)
        if (s.t_obs > s.t_true || (s.delta_obs && (s.t_obs != s.t_true || !s.delta_true))) ++violations;
    }
  }
  return {examples_bad == 0 && violations == 0,
          "worked examples wrong " + std::to_string(examples_bad) + ", invariant violations " +
              std::to_string(violations) + " over " + std::to_string(ops) + " random operations"};
}

Outcome directional() {
  ExperimentConfig cfg;
  cfg.n_uncensored = 100;
  cfg.n_censored = 900;
  cfg.budgets = {20};
  cfg.probe_depths = {std::numeric_limits<double>::infinity()};
  cfg.methods = {Method::BbSurv, Method::Random};
  cfg.seeds.resize(20);
  std::iota(cfg.seeds.begin(), cfg.seeds.end(), 0);
  const auto table = run_experiment(cfg);
  std::vector<double> bb, rnd;
  for (const auto& c : table.cells) {
    if (c.status != CellStatus::Ok) continue;
    (c.method == Method::BbSurv ? bb : rnd).push_back(c.report.mae_po);
  }
  if (bb.size() < 2 || rnd.size() < 2) return {false, "too few completed cells"};
  const double mb = std::accumulate(bb.begin(), bb.end(), 0.0) / static_cast<double>(bb.size());
  const double mr = std::accumulate(rnd.begin(), rnd.end(), 0.0) / static_cast<double>(rnd.size());
  const auto t = welch_t_test(bb, rnd);
  return {mb <= mr && t.p_less < 0.05, "mean MAE-PO bb_surv " + fmt("%.4f", mb) + " vs random " + fmt("%.4f", mr) +
                                           ", one-sided Welch p " + fmt("%.3g", t.p_less) + " (need <= and p < 0.05; " +
                                           std::to_string(bb.size()) + "+" + std::to_string(rnd.size()) + " cells)"};
}

Outcome budget_zero() {
  ExperimentConfig cfg;
  cfg.budgets = {0};
  cfg.seeds = {7};
  const auto table = run_experiment(cfg);
  if (table.cells.size() != 10 || !table.all_completed()) return {false, "not every cell completed"};
  const auto& r0 = table.cells[0].report;
  std::size_t differing = 0;
  for (const auto& c : table.cells) {
    const auto& r = c.report;
    if (r.mae_po != r0.mae_po || r.mae_uncensored != r0.mae_uncensored || r.c_index != r0.c_index || r.ibs != r0.ibs ||
        r.ci95.mae_po != r0.ci95.mae_po || r.ci95.mae_uncensored != r0.ci95.mae_uncensored ||
        r.ci95.c_index != r0.ci95.c_index || r.ci95.ibs != r0.ci95.ibs)
      ++differing;
  }
  return {differing == 0, "10 methods, reports differing from the first " + std::to_string(differing) +
                              " (MAE-PO " + fmt("%.6f", r0.mae_po) + ")"};
}

Outcome metric_oracles() {
  std::vector<std::string> failures;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };
  {
    const std::vector<double> t{1, 2, 3};
    const std::vector<char> e{1, 1, 1};
    const auto km = km_fit(t, e);
    check(std::abs(km.at(1) - 2.0 / 3) < 1e-9 && std::abs(km.at(2) - 1.0 / 3) < 1e-9 && std::abs(km.at(3)) < 1e-9,
          "KM hand example");
    const std::vector<char> none{0, 0, 0};
    check(km_fit(t, none).at(10) == 1.0, "KM all censored");
    const std::vector<double> five{5};
    const std::vector<char> one{1};
    const auto step = km_fit(five, one);
    check(step.at(4.999) == 1.0 && step.at(5.0) == 0.0, "KM single event");
  }
  {
    const std::vector<double> t{2.0, 3.5, 1.0, 4.0, 2.5};
    const std::vector<char> e{1, 0, 1, 1, 0};
    const auto po = pseudo_observations(t, e);
    const auto ref = oracle::jackknife(t, e);
    double err = 0.0;
    for (std::size_t i = 0; i < 5; ++i) err = std::max(err, std::abs(po[i] - ref[i]));
    const std::vector<double> p{1.8, 3.0, 1.2, 3.3, 2.0};
    double mae = 0.0;
    for (std::size_t i = 0; i < 5; ++i) mae += std::abs((e[i] ? t[i] : ref[i]) - p[i]) / 5;
    check(err < 1e-9 && std::abs(mae_po(p, t, e) - mae) < 1e-9, "MAE-PO jackknife");
    const std::vector<char> all{1, 1, 1, 1, 1};
    check(std::abs(mae_po(p, t, all) - mae_uncensored(p, t, all)) < 1e-12, "MAE-PO without censoring");
    check(mae_po(t, t, all) == 0.0, "MAE-PO perfect");
  }
  {
    const std::vector<double> t{1, 2, 3, 4, 5};
    const std::vector<char> e{1, 1, 0, 1, 0};
    std::vector<double> anti(t.rbegin(), t.rend());
    check(c_index(t, t, e) == 1.0 && c_index(anti, t, e) == 0.0, "C-index ordering");
    std::mt19937_64 rng(10);
    std::exponential_distribution<double> ex(0.5);
    std::uniform_real_distribution<double> u;
    std::vector<double> tt(50), pp(50);
    std::vector<char> ee(50);
    for (int i = 0; i < 50; ++i) {
      tt[i] = ex(rng);
      ee[i] = u(rng) < 0.7;
    }
    double acc = 0.0;
    for (int rep = 0; rep < 40; ++rep) {
      for (auto& v : pp) v = u(rng);
      const double c = c_index(pp, tt, ee);
      check(std::abs(c - oracle::harrell(pp, tt, ee)) < 1e-9, "C-index vs pairwise oracle");
      acc += c / 40;
    }
    check(std::abs(acc - 0.5) < 0.05, "C-index random predictions");
  }
  {
    const std::vector<double> t{1, 2, 3, 4};
    const std::vector<char> e{1, 1, 1, 1};
    std::vector<double> grid(11);
    for (int k = 0; k <= 10; ++k) grid[k] = 0.4 * k;
    std::vector<SurvivalCurve> half(4, SurvivalCurve{{0.0}, {0.5}});
    check(std::abs(integrated_brier(half, t, e, grid) - 0.25) < 1e-9, "IBS constant predictor");
    std::vector<SurvivalCurve> sharp;
    for (double ti : t) sharp.push_back({{0.0, ti, ti}, {1.0, 1.0, 0.0}});
    check(std::abs(integrated_brier(sharp, t, e, grid)) < 1e-9, "IBS perfect predictor");

    const std::vector<double> tm{1.0, 2.0, 2.5, 4.0};
    const std::vector<char> em{1, 0, 1, 0};
    std::vector<SurvivalCurve> curves{{{0, 5}, {1, 0}}, {{0, 3}, {1, 0.2}}, {{0, 2, 4}, {1, 0.6, 0.1}}, {{0}, {0.7}}};
    std::vector<std::function<double(double)>> fs;
    for (const auto& c : curves) fs.push_back([c](double x) { return c.at(x); });
    const std::vector<double> g{0.0, 0.5, 1.5, 2.2, 3.0};
    double area = 0.0;
    for (std::size_t k = 1; k < g.size(); ++k)
      area += 0.5 * (oracle::brier_at(g[k], fs, tm, em) + oracle::brier_at(g[k - 1], fs, tm, em)) * (g[k] - g[k - 1]);
    check(std::abs(integrated_brier(curves, tm, em, g) - area / 3.0) < 1e-9, "IBS hand IPCW");
  }
  std::string detail = failures.empty() ? "KM, jackknife MAE-PO, C-index, IBS all match" : "failed:";
  for (const auto& f : failures) detail += " [" + f + "]";
  return {failures.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int only = 0;
  app.add_option("--only", only, "Run a single criterion (1-10)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all{
      {1, "transform exactness", 1.0, transforms},
      {2, "MI oracle equivalence", 10.0, mi_oracle},
      {3, "submodularity and monotonicity", 30.0, submodularity},
      {4, "k -> infinity equivalence", 30.0, k_infinity},
      {5, "coverage bounds", 120.0, coverage},
      {6, "model correctness", 30.0, model},
      {7, "oracle semantics", 10.0, oracle_semantics},
      {8, "directional end-to-end", 1800.0, directional},
      {9, "budget-0 invariance", 300.0, budget_zero},
      {10, "metric oracles", 60.0, metric_oracles},
  };

  bool all_ok = true;
  for (const auto& c : all) {
    if (only && c.id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.limit_seconds;
    const bool ok = o.ok && in_time;
    all_ok = all_ok && ok;
    std::printf("[%s] %2d %s: %s; %.2f s (limit %.0f s)%s\n", ok ? "PASS" : "FAIL", c.id, c.name.c_str(),
                o.detail.c_str(), secs, c.limit_seconds, in_time ? "" : " TOO SLOW");
    std::fflush(stdout);
  }
  return all_ok ? 0 : 1;
}
