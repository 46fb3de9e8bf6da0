#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include <nlohmann/json.hpp>

#include "survbal/budget_select.hpp"
#include "survbal/rng.hpp"

namespace survbal {

void CoverageInstance::validate() const {
  if (!element_labels.empty() && element_labels.size() != weights.size())
    throw ValidationError("element labels must parallel weights");
  for (double w : weights)
    if (!(w >= 0.0)) throw ValidationError("element weights must be >= 0");
  for (const auto& s : sets) {
    if (!(s.cost > 0.0)) throw ValidationError("set costs must be > 0");
    for (auto e : s.elements)
      if (e >= weights.size()) throw ValidationError("set references unknown element");
  }
  if (!(budget >= 0.0)) throw ValidationError("budget must be >= 0");
}

std::vector<double> CoverageInstance::costs() const {
  std::vector<double> c;
  c.reserve(sets.size());
  for (const auto& s : sets) c.push_back(s.cost);
  return c;
}

double CoverageInstance::weight_of(std::span<const std::size_t> chosen) const {
  std::vector<char> covered(weights.size(), 0);
  double w = 0.0;
  for (auto s : chosen)
    for (auto e : sets.at(s).elements)
      if (!covered[e]) {
        covered[e] = 1;
        w += weights[e];
      }
  return w;
}

CoverageInstance CoverageInstance::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("coverage instance: ") + e.what());
  }
  CoverageInstance inst;
  std::map<long long, std::size_t> index;
  try {
    std::vector<std::pair<long long, double>> ws;
    for (auto it = j.at("weights").begin(); it != j.at("weights").end(); ++it)
      ws.emplace_back(std::stoll(it.key()), it.value().get<double>());
    std::sort(ws.begin(), ws.end());
    for (const auto& [label, w] : ws) {
      index[label] = inst.weights.size();
      inst.element_labels.push_back(label);
      inst.weights.push_back(w);
    }
    for (const auto& s : j.at("sets")) {
      CoverageSet cs;
      cs.cost = s.at("cost").get<double>();
      for (const auto& e : s.at("elements")) {
        const auto label = e.is_string() ? std::stoll(e.get<std::string>()) : e.get<long long>();
        auto it = index.find(label);
        if (it == index.end()) throw SchemaError("set element " + std::to_string(label) + " has no weight");
        cs.elements.push_back(it->second);
      }
      inst.sets.push_back(std::move(cs));
    }
    inst.budget = j.at("budget").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("coverage instance: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw SchemaError("coverage instance: element ids must be integers");
  }
  inst.validate();
  return inst;
}

std::string CoverageInstance::to_json() const {
  nlohmann::json j;
  j["weights"] = nlohmann::json::object();
  auto label = [&](std::size_t e) {
    return element_labels.empty() ? static_cast<long long>(e) : element_labels[e];
  };
  for (std::size_t e = 0; e < weights.size(); ++e) j["weights"][std::to_string(label(e))] = weights[e];
  j["sets"] = nlohmann::json::array();
  for (const auto& s : sets) {
    nlohmann::json js;
    js["elements"] = nlohmann::json::array();
    for (auto e : s.elements) js["elements"].push_back(label(e));
    js["cost"] = s.cost;
    j["sets"].push_back(js);
  }
  j["budget"] = budget;
  return j.dump();
}

CoverageOracle::CoverageOracle(const CoverageInstance& inst) : inst_(&inst), covered_(inst.weights.size(), 0) {}

double CoverageOracle::gain(std::size_t s) const {
  double g = 0.0;
  std::vector<std::size_t> counted;
  for (auto e : inst_->sets.at(s).elements) {
    if (covered_[e] || std::find(counted.begin(), counted.end(), e) != counted.end()) continue;
    counted.push_back(e);
    g += inst_->weights[e];
  }
  return g;
}

void CoverageOracle::commit(std::size_t s) {
  for (auto e : inst_->sets.at(s).elements)
    if (!covered_[e]) {
      covered_[e] = 1;
      value_ += inst_->weights[e];
    }
}

SelectionResult greedy_ratio(const CoverageInstance& inst, const GreedyOptions& options) {
  inst.validate();
  CoverageOracle oracle(inst);
  const auto costs = inst.costs();
  auto res = greedy_ratio(oracle, costs, inst.budget, options);
  res.value = inst.weight_of(res.batch);
  return res;
}

namespace {

double cost_of(const CoverageInstance& inst, std::span<const std::size_t> chosen) {
  double c = 0.0;
  for (auto s : chosen) c += inst.sets[s].cost;
  return c;
}

bool within(const CoverageInstance& inst, double cost) {
  return cost <= inst.budget + kCostSlack * std::max(1.0, inst.budget);
}

// Calls visit(combination) for every size-r subset of 0..n-1 in lexicographic order.
void for_each_combination(std::size_t n, std::size_t r, const std::function<void(std::span<const std::size_t>)>& visit) {
  if (r > n) return;
  std::vector<std::size_t> idx(r);
  for (std::size_t i = 0; i < r; ++i) idx[i] = i;
  while (true) {
    visit(idx);
    std::size_t i = r;
    while (i > 0 && idx[i - 1] == n - r + i - 1) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t k = i; k < r; ++k) idx[k] = idx[k - 1] + 1;
  }
}

}  // namespace

SelectionResult greedy_enumerated(const CoverageInstance& inst, std::size_t z, const EnumeratedOptions& options) {
  inst.validate();
  if (z < 1) throw ValidationError("seed size z must be >= 1");
  const std::size_t n = inst.sets.size();
  if (n > options.max_sets)
    throw SizeGuardError("enumerated greedy limited to " + std::to_string(options.max_sets) + " sets");

  SelectionResult h1;
  for (std::size_t r = 1; r < z; ++r)
    for_each_combination(n, r, [&](std::span<const std::size_t> g) {
      const double c = cost_of(inst, g);
      if (!within(inst, c)) return;
      const double w = inst.weight_of(g);
      if (w > h1.value) {
        h1.batch.assign(g.begin(), g.end());
        h1.value = w;
        h1.total_cost = c;
      }
    });

  SelectionResult h2;
  bool have_h2 = false;
  for_each_combination(n, z, [&](std::span<const std::size_t> seed) {
    double spent = cost_of(inst, seed);
    if (!within(inst, spent)) return;
    CoverageOracle oracle(inst);
    std::vector<char> in_u(n, 1);
    std::vector<std::size_t> g(seed.begin(), seed.end());
    for (auto s : seed) {
      oracle.commit(s);
      in_u[s] = 0;
    }
    std::size_t left = n - z;
    while (left > 0) {
      std::size_t best = n;
      double best_ratio = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        if (!in_u[s]) continue;
        const double r = oracle.gain(s) / inst.sets[s].cost;
        if (best == n || r > best_ratio) {
          best = s;
          best_ratio = r;
        }
      }
      if (within(inst, spent + inst.sets[best].cost)) {
        oracle.commit(best);
        g.push_back(best);
        spent += inst.sets[best].cost;
      }
      in_u[best] = 0;
      --left;
    }
    if (!have_h2 || oracle.value() > h2.value) {
      have_h2 = true;
      h2.batch = g;
      h2.value = oracle.value();
      h2.total_cost = spent;
    }
  });

  if (!have_h2 || h1.value > h2.value) return h1;
  return h2;
}

SelectionResult brute_force_optimal(const CoverageInstance& inst) {
  inst.validate();
  const std::size_t n = inst.sets.size();
  if (n > 20) throw SizeGuardError("brute-force optimum limited to 20 sets");
  SelectionResult best;
  const std::uint32_t full = 1u << n;
  for (std::uint32_t m = 1; m < full; ++m) {
    const auto chosen = mask_to_indices(m);
    const double c = cost_of(inst, chosen);
    if (!within(inst, c)) continue;
    const double w = inst.weight_of(chosen);
    if (w > best.value) {
      best.batch = chosen;
      best.value = w;
      best.total_cost = c;
    }
  }
  return best;
}

CoverageInstance random_coverage_instance(std::uint64_t seed, std::size_t max_sets, std::size_t max_elements) {
  if (max_sets < 1 || max_elements < 1) throw ValidationError("random instance needs at least one set and element");
  auto rng = make_rng({seed, 0xc07e});
  std::uniform_int_distribution<std::size_t> n_sets(1, max_sets), n_elems(1, max_elements);
  std::uniform_real_distribution<double> weight(0.0, 1.0), cost(0.1, 1.0), u01(0.0, 1.0);
  CoverageInstance inst;
  const std::size_t m = n_elems(rng);
  for (std::size_t e = 0; e < m; ++e) {
    inst.weights.push_back(weight(rng));
    inst.element_labels.push_back(static_cast<long long>(e));
  }
  const std::size_t k = n_sets(rng);
  double total_cost = 0.0;
  for (std::size_t s = 0; s < k; ++s) {
    CoverageSet set;
    set.cost = cost(rng);
    for (std::size_t e = 0; e < m; ++e)
      if (u01(rng) < 0.3) set.elements.push_back(e);
    total_cost += set.cost;
    inst.sets.push_back(std::move(set));
  }
  inst.budget = total_cost * std::uniform_real_distribution<double>(0.1, 0.6)(rng);
  return inst;
}

std::vector<std::pair<CoverageInstance, double>> worked_coverage_examples() {
  CoverageInstance base;
  base.element_labels = {1, 2, 3, 4, 5, 6};
  base.weights.assign(6, 1.0);
  base.sets = {{{0, 1, 2}, 1.0}, {{1, 2, 3}, 1.0}, {{3, 4}, 1.0}, {{5}, 1.0}};
  base.budget = 2.0;
  CoverageInstance heavy = base;
  heavy.weights[5] = 10.0;
  return {{base, 5.0}, {heavy, 13.0}};
}

bool CoverageVerification::passed(double tol) const {
  if (enumerated_violations != 0 || ratio_violations != 0) return false;
  for (std::size_t i = 0; i < example_optima.size(); ++i)
    if (std::abs(example_optima[i] - example_expected[i]) > tol) return false;
  return true;
}

CoverageVerification verify_coverage(std::size_t trials, std::uint64_t seed) {
  const double full = 1.0 - std::exp(-1.0);
  const double tol = 1e-9;
  CoverageVerification out;
  out.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto inst = random_coverage_instance(make_rng({seed, t})());
    const double opt = brute_force_optimal(inst).value;
    if (opt <= 0.0) continue;
    const double enumerated = greedy_enumerated(inst, 3).value;
    const double greedy = greedy_ratio(inst).value;
    out.worst_enumerated_ratio = std::min(out.worst_enumerated_ratio, enumerated / opt);
    out.worst_greedy_ratio = std::min(out.worst_greedy_ratio, greedy / opt);
    if (enumerated < full * opt - tol) ++out.enumerated_violations;
    if (greedy < 0.5 * full * opt - tol) ++out.ratio_violations;
  }
  for (const auto& [inst, expected] : worked_coverage_examples()) {
    out.example_optima.push_back(brute_force_optimal(inst).value);
    out.example_expected.push_back(expected);
  }
  return out;
}

}  // namespace survbal
