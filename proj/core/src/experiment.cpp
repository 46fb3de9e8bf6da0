#include "survbal/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <ostream>

#include "survbal/error.hpp"
#include "survbal/rng.hpp"

namespace survbal {

namespace {

constexpr std::array<std::string_view, 10> kMethodNames = {"bb_surv", "batchbald", "entropy", "variance", "cth",
                                                            "cfb",     "mctm",      "random",  "cbald",    "ideal"};

std::uint64_t bits_of(double v) {
  std::uint64_t b = 0;
  std::memcpy(&b, &v, sizeof b);
  return b;
}

std::uint64_t derive(std::initializer_list<std::uint64_t> key) { return make_rng(key)(); }

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view s, std::string_view what) {
  const std::string text(trim(s));
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) throw ConfigError("bad number in " + std::string(what));
  return v;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string file_token(std::string s) {
  for (auto& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '.' && ch != '-') ch = '_';
  return s;
}

}  // namespace

std::string_view method_name(Method m) { return kMethodNames[static_cast<std::size_t>(m)]; }

Method parse_method(std::string_view name) {
  const auto t = trim(name);
  for (std::size_t i = 0; i < kMethodNames.size(); ++i)
    if (kMethodNames[i] == t) return kAllMethods[i];
  throw ConfigError("unknown acquisition method '" + std::string(t) + "'");
}

CostMode CostMode::parse(std::string_view text) {
  const auto t = trim(text);
  CostMode m;
  auto args = [&](std::string_view head) {
    if (t.size() < head.size() + 2 || t.substr(0, head.size()) != head || t[head.size()] != '(' || t.back() != ')')
      throw ConfigError("bad cost mode '" + std::string(t) + "'");
    return t.substr(head.size() + 1, t.size() - head.size() - 2);
  };
  if (t == "uniform") return m;
  if (t.starts_with("random")) {
    const auto inner = args("random");
    const auto comma = inner.find(',');
    if (comma == std::string_view::npos) throw ConfigError("random cost mode needs (lo,hi)");
    m.kind = Kind::Random;
    m.lo = parse_number(inner.substr(0, comma), "cost mode");
    m.hi = parse_number(inner.substr(comma + 1), "cost mode");
    return m;
  }
  if (t.starts_with("scaled")) {
    m.kind = Kind::Scaled;
    m.factor = parse_number(args("scaled"), "cost mode");
    return m;
  }
  throw ConfigError("unknown cost mode '" + std::string(t) + "'");
}

std::string CostMode::to_string() const {
  switch (kind) {
    case Kind::Uniform: return "uniform";
    case Kind::Random: return "random(" + format_number(lo) + "," + format_number(hi) + ")";
    case Kind::Scaled: return "scaled(" + format_number(factor) + ")";
  }
  return "uniform";
}

Dataset assign_costs(Dataset ds, const CostMode& mode, std::uint64_t seed) {
  switch (mode.kind) {
    case CostMode::Kind::Uniform:
      for (auto& inst : ds.instances) inst.cost = 1.0;
      break;
    case CostMode::Kind::Random: {
      if (!(mode.lo > 0.0)) throw ValidationError("random cost lower bound must be > 0");
      if (!(mode.hi >= mode.lo)) throw ValidationError("random cost bounds must satisfy lo <= hi");
      auto rng = make_rng({seed, 0xc057});
      std::uniform_real_distribution<double> u(mode.lo, mode.hi);
      for (auto& inst : ds.instances) inst.cost = mode.hi == mode.lo ? mode.lo : u(rng);
      break;
    }
    case CostMode::Kind::Scaled:
      if (!(mode.factor > 0.0)) throw ValidationError("cost scale factor must be > 0");
      for (auto& inst : ds.instances) inst.cost *= mode.factor;
      break;
  }
  return ds;
}

void ExperimentConfig::validate() const {
  if (methods.empty()) throw ConfigError("methods must be nonempty");
  if (seeds.empty()) throw ConfigError("seeds must be nonempty");
  if (budgets.empty()) throw ConfigError("budgets must be nonempty");
  if (probe_depths.empty()) throw ConfigError("probe_depths must be nonempty");
  if (cost_modes.empty()) throw ConfigError("cost_modes must be nonempty");
  for (double b : budgets)
    if (!(b >= 0.0)) throw ConfigError("budgets must be >= 0");
  for (double k : probe_depths)
    if (!(k >= 0.0)) throw ConfigError("probe depths must be >= 0");
  for (const auto& m : cost_modes) {
    if (m.kind == CostMode::Kind::Random && (!(m.lo > 0.0) || !(m.hi >= m.lo)))
      throw ConfigError("random cost mode needs 0 < lo <= hi");
    if (m.kind == CostMode::Kind::Scaled && !(m.factor > 0.0)) throw ConfigError("cost scale factor must be > 0");
  }
  if (n_bins < 2) throw ConfigError("n_bins must be >= 2");
  if (s_post < 2) throw ConfigError("s_post must be >= 2");
  if (eval_repetitions < 1) throw ConfigError("eval_repetitions must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
  if (n_uncensored + n_censored == 0) throw ConfigError("pool must be nonempty");
  if (cell_timeout_seconds < 0.0) throw ConfigError("cell_timeout_seconds must be >= 0");
}

std::vector<std::size_t> acquisition_candidates(const Dataset& pool, const BinProbTensor& probs) {
  if (probs.instances() != pool.size()) throw ShapeError("prediction tensor does not match pool");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& inst = pool.instances[i];
    if (!inst.censored()) continue;
    const std::size_t j = pool.bins.bin_of(inst.t_obs);
    bool ok = true;
    for (std::size_t s = 0; s < probs.samples() && ok; ++s) {
      const auto row = probs.row(i, s);
      double tail = 0.0;
      for (std::size_t r = j; r < row.size(); ++r) tail += row[r];
      ok = tail >= kDegenerateTailMass;
    }
    if (ok) out.push_back(i);
  }
  return out;
}

namespace {

MethodSelection fill_in_order(std::span<const std::size_t> order, std::span<const double> scores,
                              const Dataset& pool, double budget) {
  // `scores` is parallel to `order` and only feeds the trace.
  MethodSelection sel;
  const double slack = kCostSlack * std::max(1.0, budget);
  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t id = order[r];
    const double c = pool.instances[id].cost;
    const bool take = sel.total_cost + c <= budget + slack;
    sel.trace.push_back({0, id, scores[r], c, scores[r] / c, take});
    if (!take) continue;
    sel.batch.push_back(id);
    sel.total_cost += c;
  }
  return sel;
}

MethodSelection rank_and_fill(std::span<const std::size_t> cands, std::vector<double> scores, bool descending,
                              const Dataset& pool, double budget) {
  std::vector<std::size_t> idx(cands.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return descending ? scores[a] > scores[b] : scores[a] < scores[b]; });
  std::vector<std::size_t> order;
  std::vector<double> sorted;
  for (auto r : idx) {
    order.push_back(cands[r]);
    sorted.push_back(scores[r]);
  }
  return fill_in_order(order, sorted, pool, budget);
}

MethodSelection select_mi(std::vector<ClassMatrix> mats, std::span<const std::size_t> cands, const Dataset& pool,
                          double budget, std::uint64_t seed, const ExperimentConfig& cfg) {
  MiOptions mi = cfg.mi;
  mi.seed = seed;
  BatchMiOracle oracle(std::move(mats), mi);
  std::vector<double> costs;
  for (auto id : cands) costs.push_back(pool.instances[id].cost);
  GreedyOptions opts;
  opts.lazy = cfg.lazy_greedy;
  std::vector<TraceRow> trace;
  const auto res = greedy_ratio(oracle, costs, budget, opts, &trace);
  MethodSelection sel;
  for (auto c : res.batch) sel.batch.push_back(cands[c]);
  sel.total_cost = res.total_cost;
  for (auto& row : trace) row.candidate = cands[row.candidate];
  sel.trace = std::move(trace);
  return sel;
}

MethodSelection select_ideal(std::span<const std::size_t> cands, const Dataset& pool, const BinProbTensor& probs,
                             double budget, const ExperimentConfig& cfg) {
  const std::size_t n = cands.size();
  std::vector<double> uncertainty(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& inst = pool.instances[cands[r]];
    const std::size_t j = pool.bins.bin_of(inst.t_obs);
    uncertainty[r] = ideal_uncertainty(censored_class_matrix(probs, cands[r], inst.t_obs, pool.bins), j);
  }
  // Inverse squared distances to the queried set, maintained incrementally.
  std::vector<double> inv_sum(n, 0.0);
  std::vector<char> on_top(n, 0);
  bool any_queried = false;
  auto add_queried = [&](const std::vector<double>& q) {
    any_queried = true;
    for (std::size_t r = 0; r < n; ++r) {
      const auto& x = pool.instances[cands[r]].x;
      double d2 = 0.0;
      for (std::size_t c = 0; c < x.size(); ++c) d2 += (x[c] - q[c]) * (x[c] - q[c]);
      if (d2 == 0.0)
        on_top[r] = 1;
      else
        inv_sum[r] += 1.0 / d2;
    }
  };
  for (const auto& inst : pool.instances)
    if (!inst.censored()) add_queried(inst.x);

  MethodSelection sel;
  const double slack = kCostSlack * std::max(1.0, budget);
  std::vector<char> taken(n, 0);
  for (std::size_t step = 0;; ++step) {
    std::optional<std::size_t> best;
    double best_score = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      if (taken[r]) continue;
      const double c = pool.instances[cands[r]].cost;
      if (sel.total_cost + c > budget + slack) continue;
      const double z = !any_queried ? 1.0 : (on_top[r] ? 0.0 : 2.0 / std::numbers::pi * std::atan(1.0 / inv_sum[r]));
      const double a = uncertainty[r] + cfg.ideal.exploration * z;
      if (!best || a > best_score) {
        best = r;
        best_score = a;
      }
    }
    if (!best) break;
    const std::size_t id = cands[*best];
    const double c = pool.instances[id].cost;
    taken[*best] = 1;
    sel.batch.push_back(id);
    sel.total_cost += c;
    sel.trace.push_back({step, id, best_score, c, best_score / c, true});
    add_queried(pool.instances[id].x);
  }
  return sel;
}

}  // namespace

MethodSelection select_with_method(Method method, const Dataset& pool, const BinProbTensor& probs, double budget,
                                   double probe_depth, std::uint64_t seed, const ExperimentConfig& cfg) {
  if (!(budget >= 0.0)) throw ValidationError("budget must be >= 0");
  const auto cands = acquisition_candidates(pool, probs);
  const auto& bins = pool.bins;
  auto mean_rows = [&] {
    std::vector<CensoredProbRow> rows;
    for (auto id : cands) rows.push_back(mean_censored_row(probs, id, pool.instances[id].t_obs, bins));
    return rows;
  };

  switch (method) {
    case Method::BbSurv: {
      std::vector<ClassMatrix> mats;
      for (auto id : cands) mats.push_back(knowable_class_matrix(probs, id, pool.instances[id].t_obs, probe_depth, bins));
      return select_mi(std::move(mats), cands, pool, budget, seed, cfg);
    }
    case Method::BatchBald: {
      std::vector<ClassMatrix> mats;
      for (auto id : cands) mats.push_back(censored_class_matrix(probs, id, pool.instances[id].t_obs, bins));
      return select_mi(std::move(mats), cands, pool, budget, seed, cfg);
    }
    case Method::Entropy: {
      std::vector<double> s;
      for (const auto& row : mean_rows()) s.push_back(score_entropy(row.probs));
      return rank_and_fill(cands, std::move(s), true, pool, budget);
    }
    case Method::Variance: {
      std::vector<double> s;
      for (const auto& row : mean_rows()) s.push_back(score_variance(row.probs));
      return rank_and_fill(cands, std::move(s), true, pool, budget);
    }
    case Method::Cth: {
      std::vector<double> s;
      const auto rows = mean_rows();
      for (std::size_t r = 0; r < cands.size(); ++r)
        s.push_back(score_cth(rows[r].probs, pool.instances[cands[r]].t_obs, probe_depth, bins));
      return rank_and_fill(cands, std::move(s), false, pool, budget);
    }
    case Method::Mctm: {
      std::vector<double> s;
      for (const auto& row : mean_rows()) s.push_back(score_mctm(row.probs));
      return rank_and_fill(cands, std::move(s), false, pool, budget);
    }
    case Method::Cbald: {
      std::vector<double> s;
      for (auto id : cands)
        s.push_back(score_cbald(censored_class_matrix(probs, id, pool.instances[id].t_obs, bins),
                                pool.instances[id].censored(), cfg.cbald));
      return rank_and_fill(cands, std::move(s), true, pool, budget);
    }
    case Method::Ideal:
      return select_ideal(cands, pool, probs, budget, cfg);
    case Method::Cfb: {
      std::vector<char> allowed(pool.size(), 0);
      for (auto id : cands) allowed[id] = 1;
      std::vector<std::size_t> order;
      for (auto id : score_cfb(pool, cfg.cfb, seed))
        if (allowed[id]) order.push_back(id);
      std::vector<double> rank(order.size());
      for (std::size_t r = 0; r < rank.size(); ++r) rank[r] = static_cast<double>(r);
      return fill_in_order(order, rank, pool, budget);
    }
    case Method::Random: {
      const auto order = score_random(cands, pool, seed);
      std::vector<double> rank(order.size());
      for (std::size_t r = 0; r < rank.size(); ++r) rank[r] = static_cast<double>(r);
      return fill_in_order(order, rank, pool, budget);
    }
  }
  throw ConfigError("unhandled method");
}

bool CellResult::operator==(const CellResult& o) const {
  auto same = [](const MetricReport& a, const MetricReport& b) {
    return a.mae_po == b.mae_po && a.mae_uncensored == b.mae_uncensored && a.c_index == b.c_index && a.ibs == b.ibs &&
           a.ci95.mae_po == b.ci95.mae_po && a.ci95.mae_uncensored == b.ci95.mae_uncensored &&
           a.ci95.c_index == b.ci95.c_index && a.ci95.ibs == b.ci95.ibs;
  };
  const bool depth_eq = probe_depth == o.probe_depth || (std::isnan(probe_depth) && std::isnan(o.probe_depth));
  return method == o.method && dataset == o.dataset && budget == o.budget && depth_eq && cost_mode == o.cost_mode && seed == o.seed &&
         status == o.status && message == o.message && same(report, o.report) && n_probed == o.n_probed &&
         spent == o.spent;
}

std::vector<ResultRow> ResultTable::rows() const {
  std::vector<ResultRow> out;
  std::vector<std::vector<const CellResult*>> members;
  for (const auto& c : cells) {
    auto it = std::find_if(out.begin(), out.end(), [&](const ResultRow& r) {
      return r.method == c.method && r.budget == c.budget && r.probe_depth == c.probe_depth &&
             r.cost_mode == c.cost_mode;
    });
    if (it == out.end()) {
      ResultRow row;
      row.method = c.method;
      row.budget = c.budget;
      row.probe_depth = c.probe_depth;
      row.cost_mode = c.cost_mode;
      out.push_back(std::move(row));
      members.emplace_back();
      it = out.end() - 1;
    }
    members[static_cast<std::size_t>(it - out.begin())].push_back(&c);
  }
  for (std::size_t r = 0; r < out.size(); ++r) {
    std::vector<double> mae, unc, ci, ibs;
    for (const auto* c : members[r]) {
      if (c->status != CellStatus::Ok) {
        ++out[r].n_failed;
        continue;
      }
      ++out[r].n_ok;
      mae.push_back(c->report.mae_po);
      unc.push_back(c->report.mae_uncensored);
      ci.push_back(c->report.c_index);
      ibs.push_back(c->report.ibs);
    }
    if (mae.empty()) continue;
    auto mean = [](const std::vector<double>& v) {
      return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    auto half = [](const std::vector<double>& v) { return v.size() >= 2 ? ci95(v) : 0.0; };
    auto& m = out[r].mean;
    m.mae_po = mean(mae);
    m.mae_uncensored = mean(unc);
    m.c_index = mean(ci);
    m.ibs = mean(ibs);
    m.ci95 = {half(mae), half(unc), half(ci), half(ibs)};
    out[r].mae_po_by_seed = std::move(mae);
  }
  return out;
}

bool ResultTable::all_completed() const {
  return std::all_of(cells.begin(), cells.end(), [](const CellResult& c) { return c.status == CellStatus::Ok; });
}

ResultTable run_experiment(const ExperimentConfig& cfg, std::ostream* log) {
  cfg.validate();
  Dataset full = cfg.dataset == "synthetic" ? synth_generate(cfg.synth) : load_csv(cfg.dataset, cfg.schema);
  const Split split = train_test_split(full, cfg.train_fraction, cfg.data_seed, cfg.n_bins);
  const TestSetSummary summary = TestSetSummary::from(split.test);
  const Eigen::MatrixXd test_x = split.test.covariates();

  FitConfig fit_cfg;
  fit_cfg.epochs = cfg.epochs;
  fit_cfg.learning_rate = cfg.lr;
  fit_cfg.prior = cfg.prior;

  if (!cfg.output_dir.empty()) std::filesystem::create_directories(cfg.output_dir / "cells");

  using Clock = std::chrono::steady_clock;
  ResultTable table;
  for (std::size_t cm = 0; cm < cfg.cost_modes.size(); ++cm) {
    const auto& mode = cfg.cost_modes[cm];
    const std::string mode_name = mode.to_string();
    for (auto seed : cfg.seeds) {
      std::optional<Replicate> rep;
      std::string rep_error;
      try {
        Replicate r;
        r.seed = seed;
        r.pool = artificial_censor(split.train, PoolSpec{cfg.n_uncensored, cfg.n_censored}, derive({seed, 1}));
        r.pool = assign_costs(std::move(r.pool), mode, derive({seed, 2, cm}));
        r.base = fit(r.pool, fit_cfg, derive({seed, 3, cm})).posterior;
        r.acquisition_probs = predict(sample_posterior(r.base, cfg.s_post, derive({seed, 4, cm})), r.pool.covariates());
        rep = std::move(r);
      } catch (const std::exception& e) {
        rep_error = e.what();
      }

      for (double k : cfg.probe_depths) {
        for (double budget : cfg.budgets) {
          for (Method method : cfg.methods) {
            CellResult cell;
            cell.method = method;
            cell.dataset = cfg.dataset;
            cell.budget = budget;
            cell.probe_depth = k;
            cell.cost_mode = mode_name;
            cell.seed = seed;
            const auto started = Clock::now();
            auto over_time = [&] {
              if (cfg.cell_timeout_seconds <= 0.0) return false;
              return std::chrono::duration<double>(Clock::now() - started).count() > cfg.cell_timeout_seconds;
            };
            try {
              if (!rep) throw Error("replicate setup failed: " + rep_error);
              const auto method_seed = derive({seed, 10 + static_cast<std::uint64_t>(method), cm, bits_of(budget), bits_of(k)});
              const auto sel = select_with_method(method, rep->pool, rep->acquisition_probs, budget, k, method_seed, cfg);
              if (over_time()) throw Error("timeout");

              const auto cell_key = derive({seed, 5, cm, bits_of(budget), bits_of(k)});
              VariationalPosterior post = rep->base;
              std::vector<ProbeResult> probes;
              if (!sel.batch.empty()) {
                Dataset enriched = rep->pool;
                BudgetLedger ledger(budget);
                probes = probe_batch(sel.batch, enriched, k, ledger);
                cell.spent = ledger.spent();
                post = fit(enriched, fit_cfg, cell_key).posterior;
              }
              cell.n_probed = probes.size();
              if (over_time()) throw Error("timeout");

              const auto eval = predict(sample_posterior(post, cfg.eval_repetitions, derive({cell_key, 6})), test_x);
              cell.report = evaluate_posterior(eval, summary, split.train.bins);
              if (over_time()) throw Error("timeout");

              if (!cfg.output_dir.empty()) {
                const std::string stem = std::string(method_name(method)) + "_b" + format_number(budget) + "_k" +
                                         format_number(k) + "_" + file_token(mode_name) + "_s" + std::to_string(seed);
                std::ofstream audit(cfg.output_dir / "cells" / (stem + ".audit.jsonl"));
                write_audit_log(probes, audit);
                std::ofstream trace(cfg.output_dir / "cells" / (stem + ".trace.csv"));
                write_trace_csv(sel.trace, trace);
                if (!audit || !trace) throw Error("failed writing cell artifacts for " + stem);
              }
            } catch (const std::exception& e) {
              const bool timed_out = std::string_view(e.what()) == "timeout";
              cell.status = timed_out ? CellStatus::Timeout : CellStatus::Failed;
              cell.message = timed_out ? "exceeded " + format_number(cfg.cell_timeout_seconds) + " s" : e.what();
              cell.report = {};
            }
            if (log) {
              *log << method_name(method) << " budget=" << budget << " k=" << k << " cost=" << mode_name
                   << " seed=" << seed << ": ";
              if (cell.status == CellStatus::Ok)
                *log << "mae_po=" << cell.report.mae_po << " probed=" << cell.n_probed << "\n";
              else
                *log << (cell.status == CellStatus::Timeout ? "timeout " : "failed ") << cell.message << "\n";
            }
            table.cells.push_back(std::move(cell));
          }
        }
      }
    }
  }
  return table;
}

}  // namespace survbal
