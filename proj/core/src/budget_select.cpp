#include "survbal/budget_select.hpp"

#include <bit>
#include <ostream>

namespace survbal {

SelectionResult greedy_ratio(const SetFunction& score, std::span<const double> costs, double budget,
                             const GreedyOptions& options) {
  SetFunctionOracle oracle(score, costs.size());
  return greedy_ratio(oracle, costs, budget, options);
}

void write_trace_csv(std::span<const TraceRow> rows, std::ostream& out, std::span<const std::size_t> id_map) {
  out << "step,candidate_id,marginal_gain_bits,cost,ratio,chosen\n";
  for (const auto& r : rows) {
    const std::size_t id = id_map.empty() ? r.candidate : id_map[r.candidate];
    out << r.step << ',' << id << ',' << r.gain << ',' << r.cost << ',' << r.ratio << ',' << (r.chosen ? 1 : 0)
        << '\n';
  }
}

std::vector<std::size_t> mask_to_indices(std::uint32_t mask) {
  std::vector<std::size_t> out;
  while (mask) {
    out.push_back(static_cast<std::size_t>(std::countr_zero(mask)));
    mask &= mask - 1;
  }
  return out;
}

namespace {

std::vector<double> tabulate(const MaskFunction& f, std::size_t ground_size) {
  if (ground_size > 10) throw SizeGuardError("exhaustive submodularity check limited to 10 elements");
  const std::uint32_t full = 1u << ground_size;
  std::vector<double> v(full);
  for (std::uint32_t m = 0; m < full; ++m) v[m] = f(m);
  return v;
}

}  // namespace

SubmodularityReport check_submodular(const MaskFunction& f, std::size_t ground_size, double tolerance) {
  const auto v = tabulate(f, ground_size);
  const auto full = static_cast<std::uint32_t>(v.size());
  SubmodularityReport rep;
  for (std::uint32_t a = 0; a < full; ++a)
    for (std::uint32_t b = 0; b < full; ++b) {
      const double lhs = v[a] + v[b];
      const double rhs = v[a | b] + v[a & b];
      if (lhs < rhs - tolerance) {
        rep.submodular = false;
        rep.witness = SubmodularityWitness{SubmodularityViolation::Lattice, a, b, 0, lhs, rhs};
        return rep;
      }
    }
  for (std::uint32_t b = 0; b < full; ++b) {
    // every submask a of b
    for (std::uint32_t a = b;; a = (a - 1) & b) {
      for (std::size_t x = 0; x < ground_size; ++x) {
        const std::uint32_t bit = 1u << x;
        if (b & bit) continue;
        const double lhs = v[a | bit] - v[a];
        const double rhs = v[b | bit] - v[b];
        if (lhs < rhs - tolerance) {
          rep.submodular = false;
          rep.witness = SubmodularityWitness{SubmodularityViolation::DiminishingReturns, a, b, x, lhs, rhs};
          return rep;
        }
      }
      if (a == 0) break;
    }
  }
  return rep;
}

SubmodularityReport check_submodular(const SetFunction& f, std::size_t ground_size, double tolerance) {
  return check_submodular(
      MaskFunction([&](std::uint32_t m) {
        const auto idx = mask_to_indices(m);
        return f(idx);
      }),
      ground_size, tolerance);
}

std::optional<SubmodularityWitness> check_monotone(const MaskFunction& f, std::size_t ground_size, double tolerance) {
  const auto v = tabulate(f, ground_size);
  const auto full = static_cast<std::uint32_t>(v.size());
  for (std::uint32_t a = 0; a < full; ++a)
    for (std::size_t x = 0; x < ground_size; ++x) {
      const std::uint32_t bit = 1u << x;
      if (a & bit) continue;
      if (v[a | bit] < v[a] - tolerance)
        return SubmodularityWitness{SubmodularityViolation::Monotonicity, a, a | bit, x, v[a | bit], v[a]};
    }
  return std::nullopt;
}

}  // namespace survbal
