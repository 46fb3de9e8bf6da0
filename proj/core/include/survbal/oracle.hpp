#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "survbal/dataset.hpp"

namespace survbal {

/// Outcome of a single paid probe.
struct ProbeResult {
  std::size_t id = 0;
  double t_old = 0.0;
  double t_new = 0.0;
  bool delta_new = false;
  double cost_charged = 0.0;
  double spent_after = 0.0;
  /// True when the instance was already uncensored: full cost, no new information.
  bool wasted = false;
};

/// Tracks spending against a fixed budget. spent never exceeds total.
class BudgetLedger {
 public:
  explicit BudgetLedger(double total);

  [[nodiscard]] double total() const { return total_; }
  [[nodiscard]] double spent() const { return spent_; }
  [[nodiscard]] double remaining() const { return total_ - spent_; }
  [[nodiscard]] bool affordable(double cost) const;

  /// Throws BudgetExceededError without changing state if cost does not fit.
  void charge(double cost);

 private:
  double total_;
  double spent_ = 0.0;
};

/// Relative slack used when comparing accumulated costs against a budget.
inline constexpr double kBudgetSlack = 1e-12;

/// Reveals up to k more years of follow-up:
///   t_new = min(t_obs + k, t_true), delta_new = delta_true iff t_new == t_true.
/// Does not modify `inst`.
ProbeResult probe(const SurvivalInstance& inst, double k, BudgetLedger& ledger);

/// Probes every id once and writes the revealed labels back into `pool`.
/// The whole batch is rejected (nothing charged) if it does not fit the
/// remaining budget or contains duplicates.
std::vector<ProbeResult> probe_batch(std::span<const std::size_t> ids, Dataset& pool, double k,
                                     BudgetLedger& ledger);

/// One JSON object per line: {id, t_old, t_new, delta_new, cost, spent_after}.
void write_audit_log(std::span<const ProbeResult> results, std::ostream& out);

}  // namespace survbal
