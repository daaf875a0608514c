#pragma once

// Grid runner for contamination sweeps, hyperparameter sensitivity and the
// loss-module ablation, plus the aggregated tables and plots.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "adl/config.hpp"
#include "adl/evaluation.hpp"

namespace adl::sweep {

struct SweepAxis {
  std::string name;  // "lambda" or "alpha"
  std::vector<double> values;
};

struct SweepSpec {
  RunConfig base;
  std::vector<double> epsilons;
  std::vector<std::string> categories;
  std::vector<std::uint64_t> seeds;
  std::optional<SweepAxis> axis;
  std::vector<std::string> variants = {"Proposed"};
  std::filesystem::path out_dir = "sweep_out";

  /// Nonempty lists, valid variant names, axis values in range.
  void validate() const;
};

/// Keys: out, base (map of run-config keys) or base_config (file), epsilons,
/// categories, seeds, axis {name, values}, variants. `default_variants` is
/// used when the file lists none.
SweepSpec parse_sweep_spec(const nlohmann::json& j, const std::vector<std::string>& default_variants);
SweepSpec load_sweep_spec(const std::filesystem::path& path, const std::vector<std::string>& default_variants);

/// The six ablation variants in table order.
std::vector<std::string> all_variants();

struct Cell {
  RunConfig config;
  std::filesystem::path dir;
};

/// Cartesian product category x variant x epsilon x axis value x seed.
std::vector<Cell> expand_grid(const SweepSpec& spec);

using CellRunner = std::function<eval::MetricsReport(const RunConfig&, const std::filesystem::path&)>;

/// Trains and evaluates one cell (train_and_evaluate).
CellRunner default_cell_runner();

/// Runs every cell; a failing cell becomes an "error" row and the sweep
/// continues. Writes metrics.csv, metrics.jsonl, summary.csv and plots/
/// under spec.out_dir.
std::vector<eval::MetricsReport> run_sweep(const SweepSpec& spec, const CellRunner& runner = default_cell_runner());

/// run_sweep plus ablation.md (module matrix with average AUC-ROC per variant).
std::vector<eval::MetricsReport> run_ablation(const SweepSpec& spec, const CellRunner& runner = default_cell_runner());

struct SummaryRow {
  std::string dataset;
  std::string category;  // "average" for the unweighted mean over categories
  std::string variant;
  double epsilon = 0.0;
  std::string axis;
  double axis_value = 0.0;
  int n_runs = 0;
  int n_ok = 0;
  double auc_roc_mean = 0.0;
  double auc_roc_std = 0.0;
  double auc_pr_mean = 0.0;
  double auc_pr_std = 0.0;
};

/// Mean and sample std over seeds per cell, plus per-dataset "average" rows
/// taking the unweighted mean of the category means. Failed runs are skipped.
std::vector<SummaryRow> summarize(const std::vector<eval::MetricsReport>& reports);
void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);

/// Metric-vs-epsilon charts (and metric-vs-axis charts per epsilon) built from
/// the rows of a metrics.csv.
void write_sweep_plots(const std::filesystem::path& plot_dir, const std::vector<eval::MetricsReport>& reports);

/// Markdown table: one row per loss module with check marks per variant,
/// then one "<dataset> (Average)" row of mean AUC-ROC.
std::string ablation_table_markdown(const std::vector<SummaryRow>& summary);

}  // namespace adl::sweep
