#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "survbal/error.hpp"

namespace survbal {

struct SelectionStep {
  std::size_t index = 0;
  double gain = 0.0;
  double cost = 0.0;
  double ratio = 0.0;
};

struct SelectionResult {
  std::vector<std::size_t> batch;  // in selection order
  double total_cost = 0.0;
  double value = 0.0;              // objective of the returned batch
  std::vector<SelectionStep> score_trace;
  bool singleton_fallback = false; // the best affordable singleton beat the greedy batch
};

/// One evaluated candidate, for the acquisition trace CSV.
struct TraceRow {
  std::size_t step = 0;
  std::size_t candidate = 0;
  double gain = 0.0;
  double cost = 0.0;
  double ratio = 0.0;
  bool chosen = false;
};

/// Columns: step, candidate_id, marginal_gain_bits, cost, ratio, chosen.
void write_trace_csv(std::span<const TraceRow> rows, std::ostream& out, std::span<const std::size_t> id_map = {});

/// Incremental set-function evaluator over candidates 0..size()-1.
template <class O>
concept MarginalOracle = requires(O o, const O co, std::size_t i) {
  { co.size() } -> std::convertible_to<std::size_t>;
  { co.value() } -> std::convertible_to<double>;
  { co.gain(i) } -> std::convertible_to<double>;
  o.commit(i);
};

struct GreedyOptions {
  /// Re-evaluate only candidates whose stale upper bound could still win
  /// (exact for submodular objectives).
  bool lazy = false;
  bool singleton_guard = true;
};

inline constexpr double kCostSlack = 1e-12;

/// Ratio greedy under a knapsack budget: repeatedly add the affordable
/// candidate with the largest marginal gain per unit cost (lowest index wins
/// ties) until nothing fits, then return the better of that batch and the
/// best affordable singleton.
template <MarginalOracle O>
SelectionResult greedy_ratio(O& oracle, std::span<const double> costs, double budget,
                             const GreedyOptions& options = {}, std::vector<TraceRow>* trace = nullptr) {
  const std::size_t n = oracle.size();
  if (costs.size() != n) throw ValidationError("one cost per candidate required");
  for (double c : costs)
    if (!(c > 0.0)) throw ValidationError("candidate costs must be > 0");
  if (!(budget >= 0.0)) throw ValidationError("budget must be >= 0");

  const double slack = kCostSlack * std::max(1.0, budget);
  auto fits = [&](std::size_t i, double spent) { return spent + costs[i] <= budget + slack; };

  SelectionResult res;
  const double base_value = oracle.value();
  double spent = 0.0;
  std::vector<char> taken(n, 0);
  std::optional<std::size_t> best_single;
  double best_single_value = 0.0;

  struct Entry {
    double bound;
    double gain;
    std::size_t index;
    std::size_t stamp;
    bool operator<(const Entry& o) const {  // max-heap on (bound, -index)
      if (bound != o.bound) return bound < o.bound;
      return index > o.index;
    }
  };
  std::priority_queue<Entry> heap;

  for (std::size_t step = 0;; ++step) {
    std::optional<std::size_t> pick;
    double pick_gain = 0.0, pick_ratio = 0.0;
    if (!options.lazy || step == 0) {
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i] || !fits(i, spent)) continue;
        const double g = oracle.gain(i);
        const double r = g / costs[i];
        if (trace) trace->push_back({step, i, g, costs[i], r, false});
        if (step == 0 && (!best_single || g > best_single_value)) {
          best_single = i;
          best_single_value = g;
        }
        if (options.lazy) heap.push({r, g, i, step});
        if (!pick || r > pick_ratio) {
          pick = i;
          pick_ratio = r;
          pick_gain = g;
        }
      }
    } else {
      while (!heap.empty()) {
        Entry top = heap.top();
        heap.pop();
        if (taken[top.index] || !fits(top.index, spent)) continue;
        if (top.stamp == step) {
          pick = top.index;
          pick_ratio = top.bound;
          pick_gain = top.gain;
          break;
        }
        const double g = oracle.gain(top.index);
        const double r = g / costs[top.index];
        if (trace) trace->push_back({step, top.index, g, costs[top.index], r, false});
        heap.push({r, g, top.index, step});
      }
    }
    if (!pick) break;
    if (trace) {
      for (auto it = trace->rbegin(); it != trace->rend() && it->step == step; ++it)
        if (it->candidate == *pick) {
          it->chosen = true;
          break;
        }
    }
    oracle.commit(*pick);
    taken[*pick] = 1;
    spent += costs[*pick];
    res.batch.push_back(*pick);
    res.score_trace.push_back({*pick, pick_gain, costs[*pick], pick_ratio});
  }
  res.total_cost = spent;
  res.value = oracle.value();

  if (options.singleton_guard && best_single && base_value + best_single_value > res.value) {
    res.singleton_fallback = true;
    res.batch = {*best_single};
    res.total_cost = costs[*best_single];
    res.value = base_value + best_single_value;
    res.score_trace = {{*best_single, best_single_value, costs[*best_single], best_single_value / costs[*best_single]}};
  }
  return res;
}

/// Set function over index lists, evaluated from scratch each call.
using SetFunction = std::function<double(std::span<const std::size_t>)>;

/// Adapts a SetFunction to the incremental oracle interface.
class SetFunctionOracle {
 public:
  SetFunctionOracle(SetFunction f, std::size_t n) : f_(std::move(f)), n_(n) { value_ = f_({}); }
  [[nodiscard]] std::size_t size() const { return n_; }
  [[nodiscard]] double value() const { return value_; }
  [[nodiscard]] double gain(std::size_t i) const {
    auto with = batch_;
    with.push_back(i);
    return f_(with) - value_;
  }
  void commit(std::size_t i) {
    batch_.push_back(i);
    value_ = f_(batch_);
  }

 private:
  SetFunction f_;
  std::size_t n_;
  std::vector<std::size_t> batch_;
  double value_ = 0.0;
};

SelectionResult greedy_ratio(const SetFunction& score, std::span<const double> costs, double budget,
                             const GreedyOptions& options = {});

// ---------------------------------------------------------------------------
// Budgeted maximum coverage

struct CoverageSet {
  std::vector<std::size_t> elements;  // dense element indices
  double cost = 1.0;
};

struct CoverageInstance {
  std::vector<double> weights;          // per element, >= 0
  std::vector<long long> element_labels; // external ids, parallel to weights
  std::vector<CoverageSet> sets;
  double budget = 0.0;

  void validate() const;
  [[nodiscard]] std::vector<double> costs() const;
  [[nodiscard]] double weight_of(std::span<const std::size_t> chosen) const;

  static CoverageInstance from_json(const std::string& text);
  [[nodiscard]] std::string to_json() const;
};

/// Marginal oracle over the sets of a coverage instance.
class CoverageOracle {
 public:
  explicit CoverageOracle(const CoverageInstance& inst);
  [[nodiscard]] std::size_t size() const { return inst_->sets.size(); }
  [[nodiscard]] double value() const { return value_; }
  [[nodiscard]] double gain(std::size_t s) const;
  void commit(std::size_t s);

 private:
  const CoverageInstance* inst_;
  std::vector<char> covered_;
  double value_ = 0.0;
};

SelectionResult greedy_ratio(const CoverageInstance& inst, const GreedyOptions& options = {});

struct EnumeratedOptions {
  std::size_t max_sets = 25;
};

/// Best of (a) every feasible family of fewer than z sets and (b) every
/// feasible z-set seed completed by ratio greedy.
SelectionResult greedy_enumerated(const CoverageInstance& inst, std::size_t z, const EnumeratedOptions& options = {});

/// Exhaustive optimum; refuses more than 20 sets.
SelectionResult brute_force_optimal(const CoverageInstance& inst);

/// Random budgeted-coverage instance with 1..max_sets sets over
/// 1..max_elements weighted elements.
CoverageInstance random_coverage_instance(std::uint64_t seed, std::size_t max_sets = 12, std::size_t max_elements = 10);

/// The two maximum-coverage examples with S1={1,2,3}, S2={2,3,4}, S3={4,5},
/// S4={6}, unit costs, budget 2: unit weights (optimum 5), and element 6
/// weighted 10 (optimum 13).
std::vector<std::pair<CoverageInstance, double>> worked_coverage_examples();

struct CoverageVerification {
  std::size_t trials = 0;
  std::size_t enumerated_violations = 0;  // greedy_enumerated(z=3) < (1-1/e) OPT
  std::size_t ratio_violations = 0;       // greedy_ratio < (1-1/e)/2 OPT
  double worst_enumerated_ratio = 1.0;
  double worst_greedy_ratio = 1.0;
  std::vector<double> example_optima;
  std::vector<double> example_expected;

  [[nodiscard]] bool passed(double tol = 1e-12) const;
};

CoverageVerification verify_coverage(std::size_t trials, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Submodularity checking

enum class SubmodularityViolation { Lattice, DiminishingReturns, Monotonicity };

struct SubmodularityWitness {
  SubmodularityViolation kind = SubmodularityViolation::Lattice;
  std::uint32_t a = 0;  // subset bitmasks over the ground set
  std::uint32_t b = 0;
  std::size_t x = 0;    // added element (diminishing returns / monotonicity)
  double lhs = 0.0;
  double rhs = 0.0;
};

struct SubmodularityReport {
  bool submodular = true;
  std::optional<SubmodularityWitness> witness;
};

/// Bitmask set function over a ground set of up to 10 elements.
using MaskFunction = std::function<double(std::uint32_t)>;

/// Exhaustively checks f(A)+f(B) >= f(A|B)+f(A&B) and
/// f(A+x)-f(A) >= f(B+x)-f(B) for A subset of B, x outside B.
SubmodularityReport check_submodular(const MaskFunction& f, std::size_t ground_size, double tolerance = 1e-9);
SubmodularityReport check_submodular(const SetFunction& f, std::size_t ground_size, double tolerance = 1e-9);

/// f(A + x) >= f(A) for all A, x; returns the first violation.
std::optional<SubmodularityWitness> check_monotone(const MaskFunction& f, std::size_t ground_size,
                                                   double tolerance = 1e-9);

std::vector<std::size_t> mask_to_indices(std::uint32_t mask);

}  // namespace survbal
