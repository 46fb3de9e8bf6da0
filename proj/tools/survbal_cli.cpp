#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "survbal/budget_select.hpp"
#include "survbal/dataset.hpp"
#include "survbal/error.hpp"
#include "survbal/experiment.hpp"

namespace {

struct RunArgs {
  survbal::ExperimentConfig cfg;
  std::vector<std::string> methods;
  std::vector<std::string> cost_modes{"uniform"};
  std::string prior = "gaussian";
  std::string output_dir = "results";
  std::string config_path;
  bool quiet = false;
};

// Config keys are the long option names of `run`; values given on the command
// line take precedence.
void apply_config(CLI::App& run, const std::string& path) {
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_file(path);
  } catch (const CLI::Error& e) {
    throw survbal::ConfigError("cannot read config " + path + ": " + e.what());
  }
  for (const auto& item : items) {
    if (!(item.parents.empty() || (item.parents.size() == 1 && item.parents[0] == "run")))
      throw survbal::ConfigError("unexpected config section for key '" + item.name + "'");
    if (item.name == "config") continue;
    auto* opt = run.get_option_no_throw("--" + item.name);
    if (!opt) throw survbal::ConfigError("unknown config key '" + item.name + "'");
    if (opt->count() > 0) continue;
    try {
      opt->add_result(item.inputs);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw survbal::ConfigError("bad value for '" + item.name + "': " + e.what());
    }
  }
}

int do_run(RunArgs& a) {
  auto& cfg = a.cfg;
  if (!a.methods.empty()) {
    cfg.methods.clear();
    for (const auto& m : a.methods) cfg.methods.push_back(survbal::parse_method(m));
  }
  cfg.cost_modes.clear();
  for (const auto& m : a.cost_modes) cfg.cost_modes.push_back(survbal::CostMode::parse(m));
  if (a.prior == "gaussian")
    cfg.prior.kind = survbal::PriorKind::Gaussian;
  else if (a.prior == "spike_and_slab")
    cfg.prior.kind = survbal::PriorKind::SpikeAndSlab;
  else
    throw survbal::ConfigError("prior must be gaussian or spike_and_slab");
  cfg.output_dir = a.output_dir;
  cfg.validate();

  const auto table = survbal::run_experiment(cfg, a.quiet ? nullptr : &std::cerr);
  const std::filesystem::path dir = a.output_dir;
  std::filesystem::create_directories(dir);
  survbal::emit_report(table, survbal::ReportFormat::Csv, dir / "results.csv");
  survbal::emit_report(table, survbal::ReportFormat::Json, dir / "results.json");
  survbal::emit_report(table, survbal::ReportFormat::Markdown, dir / "results.md");
  survbal::emit_report(table, survbal::ReportFormat::Markdown, std::cout);

  std::size_t failed = 0;
  for (const auto& c : table.cells) failed += c.status == survbal::CellStatus::Ok ? 0 : 1;
  if (failed) std::cerr << failed << " of " << table.cells.size() << " cells did not complete\n";
  return table.all_completed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budgeted active learning for censored survival data"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto& cfg = run_args.cfg;
  auto* run = app.add_subcommand("run", "Run an acquisition experiment sweep");
  run->add_option("--config", run_args.config_path, "Experiment config file (key = value)")->check(CLI::ExistingFile);
  run->add_option("--dataset", cfg.dataset, "CSV path or 'synthetic'")->capture_default_str();
  run->add_option("--time_column", cfg.schema.time_column)->capture_default_str();
  run->add_option("--event_column", cfg.schema.event_column)->capture_default_str();
  run->add_option("--cost_column", cfg.schema.cost_column)->capture_default_str();
  run->add_option("--synth_n", cfg.synth.n)->capture_default_str();
  run->add_option("--synth_dim", cfg.synth.dim)->capture_default_str();
  run->add_option("--synth_seed", cfg.synth.seed)->capture_default_str();
  run->add_option("--data_seed", cfg.data_seed)->capture_default_str();
  run->add_option("--train_fraction", cfg.train_fraction)->capture_default_str();
  run->add_option("--n_uncensored", cfg.n_uncensored)->capture_default_str();
  run->add_option("--n_censored", cfg.n_censored)->capture_default_str();
  run->add_option("--budgets", cfg.budgets)->capture_default_str();
  run->add_option("--probe_depths", cfg.probe_depths, "Probe depths k (inf allowed)")->capture_default_str();
  run->add_option("--cost_modes", run_args.cost_modes, "uniform | random(lo,hi) | scaled(f)")->capture_default_str();
  run->add_option("--methods", run_args.methods,
                  "bb_surv batchbald entropy variance cth cfb mctm random cbald ideal (default: all)");
  run->add_option("--seeds", cfg.seeds)->capture_default_str();
  run->add_option("--n_bins", cfg.n_bins)->capture_default_str();
  run->add_option("--s_post", cfg.s_post, "Posterior samples used for acquisition")->capture_default_str();
  run->add_option("--eval_repetitions", cfg.eval_repetitions)->capture_default_str();
  run->add_option("--epochs", cfg.epochs)->capture_default_str();
  run->add_option("--lr", cfg.lr)->capture_default_str();
  run->add_option("--prior", run_args.prior, "gaussian | spike_and_slab")->capture_default_str();
  run->add_option("--mi_exact_limit", cfg.mi.exact_limit)->capture_default_str();
  run->add_option("--mi_configs", cfg.mi.n_configs)->capture_default_str();
  run->add_option("--lazy_greedy", cfg.lazy_greedy)->capture_default_str();
  run->add_option("--cbald_censor_weight", cfg.cbald.censor_weight)->capture_default_str();
  run->add_option("--ideal_exploration", cfg.ideal.exploration)->capture_default_str();
  run->add_option("--cfb_pca_dims", cfg.cfb.pca_dims)->capture_default_str();
  run->add_option("--cfb_clusters", cfg.cfb.n_clusters)->capture_default_str();
  run->add_option("--cell_timeout", cfg.cell_timeout_seconds, "Per-cell wall-clock cap in seconds (0 = none)")
      ->capture_default_str();
  run->add_option("--output_dir", run_args.output_dir)->capture_default_str();
  run->add_flag("--quiet", run_args.quiet, "Suppress per-cell progress");

  survbal::SynthConfig synth;
  std::string synth_out;
  auto* syn = app.add_subcommand("synth", "Write a synthetic survival dataset as CSV");
  syn->add_option("--n", synth.n)->capture_default_str();
  syn->add_option("--dim", synth.dim)->capture_default_str();
  syn->add_option("--seed", synth.seed)->capture_default_str();
  syn->add_option("--censor_rate", synth.censor_rate)->capture_default_str();
  syn->add_option("--out", synth_out, "Output path (default: stdout)");

  std::size_t trials = 100;
  std::uint64_t verify_seed = 0;
  auto* verify = app.add_subcommand("verify-coverage", "Check greedy coverage bounds against brute force");
  verify->add_option("--trials", trials)->capture_default_str();
  verify->add_option("--seed", verify_seed)->capture_default_str();

  std::string report_in, report_format = "markdown", report_out;
  auto* report = app.add_subcommand("report", "Re-emit a saved result table");
  report->add_option("--input", report_in, "results.json or results.csv")->required();
  report->add_option("--format", report_format, "csv | json | markdown")->capture_default_str();
  report->add_option("--output", report_out, "Output path (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      if (!run_args.config_path.empty()) apply_config(*run, run_args.config_path);
      return do_run(run_args);
    }

    if (*syn) {
      const auto ds = survbal::synth_generate(synth);
      if (synth_out.empty()) {
        survbal::write_csv(ds, std::cout);
      } else {
        const std::filesystem::path out = synth_out;
        if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
        survbal::write_csv(ds, out);
      }
      return 0;
    }

    if (*verify) {
      const auto v = survbal::verify_coverage(trials, verify_seed);
      std::cout << "trials: " << v.trials << "\n"
                << "greedy_enumerated(z=3) violations of (1-1/e)*OPT: " << v.enumerated_violations
                << " (worst ratio " << v.worst_enumerated_ratio << ")\n"
                << "greedy_ratio violations of (1-1/e)/2*OPT: " << v.ratio_violations << " (worst ratio "
                << v.worst_greedy_ratio << ")\n";
      for (std::size_t i = 0; i < v.example_optima.size(); ++i)
        std::cout << "worked example " << i + 1 << ": optimum " << v.example_optima[i] << " (expected "
                  << v.example_expected[i] << ")\n";
      const bool ok = v.passed();
      std::cout << (ok ? "PASS" : "FAIL") << "\n";
      return ok ? 0 : 1;
    }

    if (*report) {
      const auto table = survbal::read_report(std::filesystem::path(report_in));
      const auto format = survbal::parse_report_format(report_format);
      if (report_out.empty())
        survbal::emit_report(table, format, std::cout);
      else
        survbal::emit_report(table, format, std::filesystem::path(report_out));
      return 0;
    }
  } catch (const survbal::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
