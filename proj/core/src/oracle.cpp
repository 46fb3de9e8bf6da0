#include "survbal/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "survbal/error.hpp"

namespace survbal {

BudgetLedger::BudgetLedger(double total) : total_(total) {
  if (!(total >= 0.0) || !std::isfinite(total)) throw ValidationError("budget must be finite and >= 0");
}

bool BudgetLedger::affordable(double cost) const {
  return spent_ + cost <= total_ + kBudgetSlack * std::max(1.0, total_);
}

void BudgetLedger::charge(double cost) {
  if (!(cost >= 0.0)) throw ValidationError("cost must be >= 0");
  if (!affordable(cost))
    throw BudgetExceededError("probe cost " + std::to_string(cost) + " exceeds remaining budget " +
                              std::to_string(remaining()));
  spent_ = std::min(spent_ + cost, total_);
}

ProbeResult probe(const SurvivalInstance& inst, double k, BudgetLedger& ledger) {
  if (!(k >= 0.0)) throw ValidationError("probe depth must be >= 0");
  ledger.charge(inst.cost);

  ProbeResult r;
  r.id = inst.id;
  r.t_old = inst.t_obs;
  r.cost_charged = inst.cost;
  r.spent_after = ledger.spent();
  if (inst.delta_obs) {
    r.t_new = inst.t_obs;
    r.delta_new = true;
    r.wasted = true;
    return r;
  }
  r.t_new = std::min(inst.t_obs + k, inst.t_true);
  r.delta_new = r.t_new == inst.t_true && inst.delta_true;
  return r;
}

std::vector<ProbeResult> probe_batch(std::span<const std::size_t> ids, Dataset& pool, double k,
                                     BudgetLedger& ledger) {
  std::unordered_set<std::size_t> seen;
  double total = 0.0;
  for (auto id : ids) {
    if (id >= pool.size()) throw ValidationError("probe id " + std::to_string(id) + " out of range");
    if (!seen.insert(id).second) throw DuplicateIdError("duplicate probe id " + std::to_string(id));
    total += pool.instances[id].cost;
  }
  if (!ledger.affordable(total))
    throw BudgetExceededError("batch cost " + std::to_string(total) + " exceeds remaining budget " +
                              std::to_string(ledger.remaining()));

  std::vector<ProbeResult> out;
  out.reserve(ids.size());
  for (auto id : ids) {
    auto& inst = pool.instances[id];
    out.push_back(probe(inst, k, ledger));
    inst.t_obs = out.back().t_new;
    inst.delta_obs = out.back().delta_new;
  }
  return out;
}

void write_audit_log(std::span<const ProbeResult> results, std::ostream& out) {
  for (const auto& r : results) {
    nlohmann::json j = {{"id", r.id},       {"t_old", r.t_old},           {"t_new", r.t_new},
                        {"delta_new", r.delta_new ? 1 : 0}, {"cost", r.cost_charged},
                        {"spent_after", r.spent_after}};
    out << j.dump() << '\n';
  }
}

}  // namespace survbal
