#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "survbal/acquisition.hpp"
#include "survbal/budget_select.hpp"
#include "survbal/dataset.hpp"
#include "survbal/metrics.hpp"
#include "survbal/mtlr.hpp"
#include "survbal/oracle.hpp"

namespace survbal {

enum class Method { BbSurv, BatchBald, Entropy, Variance, Cth, Cfb, Mctm, Random, Cbald, Ideal };

inline constexpr std::array<Method, 10> kAllMethods = {
    Method::BbSurv, Method::BatchBald, Method::Entropy, Method::Variance, Method::Cth,
    Method::Cfb,    Method::Mctm,      Method::Random,  Method::Cbald,    Method::Ideal};

std::string_view method_name(Method m);
/// Accepts the names returned by method_name; throws ConfigError otherwise.
Method parse_method(std::string_view name);

struct CostMode {
  enum class Kind { Uniform, Random, Scaled };
  Kind kind = Kind::Uniform;
  double lo = 0.2;
  double hi = 0.8;
  double factor = 1.0;

  /// "uniform", "random(lo,hi)" or "scaled(f)".
  static CostMode parse(std::string_view text);
  [[nodiscard]] std::string to_string() const;
  bool operator==(const CostMode&) const = default;
};

/// uniform: every cost 1; random: i.i.d. Uniform(lo, hi); scaled: every
/// existing cost multiplied by factor.
Dataset assign_costs(Dataset ds, const CostMode& mode, std::uint64_t seed);

struct ExperimentConfig {
  std::string dataset = "synthetic";  // or a CSV path
  CsvSchema schema;
  SynthConfig synth{.n = 1500};
  std::uint64_t data_seed = 0;
  double train_fraction = 0.7;

  std::size_t n_uncensored = 100;
  std::size_t n_censored = 900;
  std::vector<double> budgets{0, 1, 5, 10, 15, 20};
  std::vector<double> probe_depths{1.0};
  std::vector<CostMode> cost_modes{CostMode{}};
  std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};

  std::size_t n_bins = 10;
  std::size_t s_post = 50;            // posterior samples scored during acquisition
  std::size_t eval_repetitions = 40;  // posterior samples averaged at evaluation
  std::size_t epochs = 5000;
  double lr = 1e-2;
  PriorConfig prior;

  MiOptions mi;
  bool lazy_greedy = true;
  CbaldOptions cbald;
  IdealOptions ideal;
  CfbOptions cfb;

  double cell_timeout_seconds = 0.0;  // 0 disables the cap
  std::filesystem::path output_dir;   // empty: no per-cell artifacts

  void validate() const;
};

/// Inputs shared by every method for one (seed, cost mode) replicate.
struct Replicate {
  Dataset pool;
  VariationalPosterior base;
  BinProbTensor acquisition_probs;  // pool predictions under the base posterior
  std::uint64_t seed = 0;
};

struct MethodSelection {
  std::vector<std::size_t> batch;  // pool indices, in selection order
  double total_cost = 0.0;
  std::vector<TraceRow> trace;     // candidate indices already mapped to pool ids
};

/// Censored pool instances whose p_cens rows are defined under every sample.
std::vector<std::size_t> acquisition_candidates(const Dataset& pool, const BinProbTensor& probs);

MethodSelection select_with_method(Method method, const Dataset& pool, const BinProbTensor& probs, double budget,
                                   double probe_depth, std::uint64_t seed, const ExperimentConfig& cfg);

enum class CellStatus { Ok, Failed, Timeout };

struct CellResult {
  Method method = Method::Random;
  std::string dataset;
  double budget = 0.0;
  double probe_depth = 0.0;
  std::string cost_mode;
  std::uint64_t seed = 0;
  CellStatus status = CellStatus::Ok;
  std::string message;
  MetricReport report;
  std::size_t n_probed = 0;
  double spent = 0.0;

  bool operator==(const CellResult& o) const;
};

struct ResultRow {
  Method method = Method::Random;
  double budget = 0.0;
  double probe_depth = 0.0;
  std::string cost_mode;
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
  MetricReport mean;                   // means over seeds, ci95 across seeds
  std::vector<double> mae_po_by_seed;  // completed seeds only
};

struct ResultTable {
  std::vector<CellResult> cells;

  [[nodiscard]] std::vector<ResultRow> rows() const;
  [[nodiscard]] bool all_completed() const;
  bool operator==(const ResultTable&) const = default;
};

ResultTable run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr);

enum class ReportFormat { Csv, Json, Markdown };
ReportFormat parse_report_format(std::string_view name);

void emit_report(const ResultTable& table, ReportFormat format, std::ostream& out);
void emit_report(const ResultTable& table, ReportFormat format, const std::filesystem::path& path);
ResultTable read_report(std::istream& in, ReportFormat format);
ResultTable read_report(const std::filesystem::path& path);

/// Indices (into `maes`) of the methods to bold in one markdown row: the
/// lowest mean MAE-PO and every method whose two-sided Welch test against it
/// gives p >= alpha. Empty when the group would cover a row of two or more
/// methods.
std::vector<std::size_t> bold_group(const std::vector<std::vector<double>>& maes, double alpha = 0.05);

}  // namespace survbal
