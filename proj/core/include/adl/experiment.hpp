#pragma once

// One run end to end: data preparation, a run directory with config
// snapshot, contamination manifest, logs and checkpoints, then evaluation.

#include <filesystem>
#include <memory>
#include <string>

#include "adl/config.hpp"
#include "adl/data_pipeline.hpp"
#include "adl/evaluation.hpp"
#include "adl/noise_synth.hpp"
#include "adl/trainer.hpp"

namespace adl {

/// Train/test splits of the configured category (synthetic in memory when the
/// toy kind has no data_root).
data::CategoryData load_run_data(const RunConfig& config);

/// Pseudo-anomaly generator over texture_dir, or over procedural textures.
std::shared_ptr<const synth::PseudoAnomalySynth> make_synth(const RunConfig& config);

struct PreparedData {
  data::CategoryData category;
  data::ContaminatedSet train_set;
  std::shared_ptr<const synth::PseudoAnomalySynth> synth;
};

PreparedData prepare_data(const RunConfig& config);

/// Report skeleton carrying the identifying fields of `config`.
eval::MetricsReport report_for(const RunConfig& config);

struct RunOutcome {
  TrainResult train;
  eval::MetricsReport report;
};

/// Trains into `run_dir` and evaluates the final model on the test split.
RunOutcome train_and_evaluate(const RunConfig& config, const std::filesystem::path& run_dir);

/// Reads a run directory's config snapshot and the given checkpoint, scores
/// the test split and writes metrics.csv, metrics.jsonl, scores.csv and plots/.
eval::MetricsReport evaluate_run(const std::filesystem::path& run_dir,
                                 const std::string& checkpoint = "final.pt");

RunConfig load_run_snapshot(const std::filesystem::path& run_dir);

}  // namespace adl
