#pragma once

// Image-level scoring of a test split and the per-run metrics record.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adl/data_pipeline.hpp"
#include "adl/model.hpp"

namespace adl::eval {

struct ScoredSet {
  std::vector<double> scores;  // psi_K per image
  std::vector<int> labels;     // y_true
  std::vector<std::string> sources;
};

/// Scores every image in eval mode without gradients (deterministic).
ScoredSet score_test_set(AdlModel& model, std::span<const data::ImageSample> normals,
                         std::span<const data::ImageSample> anomalies, int batch_size = 16);

struct MetricsReport {
  std::string dataset;
  std::string category;
  std::string variant = "Proposed";
  std::string divergence;
  double alpha = 0.0;
  double lambda = 0.0;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  /// Hyperparameter axis of a sensitivity sweep ("" when none).
  std::string axis;
  double axis_value = 0.0;
  double auc_roc = 0.0;
  double auc_pr = 0.0;
  int n_test_normal = 0;
  int n_test_anomalous = 0;
  double train_seconds = 0.0;
  std::string status = "ok";  // "ok" or "error"
  std::string error;
  std::string run_dir;

  bool ok() const { return status == "ok"; }
  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
};

/// Column names of metrics.csv, in order.
const std::vector<std::string>& csv_columns();

/// Doubles are written with 17 significant digits so a reload is exact.
void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsReport> reports);
std::vector<MetricsReport> read_metrics_csv(const std::filesystem::path& path);
void write_metrics_jsonl(const std::filesystem::path& path, std::span<const MetricsReport> reports);

/// Computes AUC-ROC / AUC-PR of scored data into `report` (status "error" if undefined).
void fill_metrics(MetricsReport& report, const ScoredSet& scored);

void write_scores_csv(const std::filesystem::path& path, const ScoredSet& scored);

}  // namespace adl::eval
