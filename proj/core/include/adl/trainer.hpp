#pragma once

// Minibatch training loop with contaminated data:
//   per batch: reference stats from the prior -> per-sample deviation, BCE and
//   segmentation losses -> importance weights (uniform until burn-in ends)
//   -> reweighted objective -> one Adam step.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/types.h>

#include "adl/data_pipeline.hpp"
#include "adl/losses.hpp"
#include "adl/model.hpp"
#include "adl/noise_synth.hpp"
#include "adl/reweighting.hpp"

namespace adl {

enum class Alternation { step, epoch };

std::string to_string(Alternation a);
Alternation parse_alternation(const std::string& name);

/// Which loss terms take part in the objective.
struct LossModules {
  bool soft_deviation = true;  // l_soft with p(x); false -> hard l_dev with y
  bool bce = true;
  bool segmentation = true;
  bool reweight = true;

  bool operator==(const LossModules&) const = default;
};

inline constexpr std::string_view kVariantNames[] = {"DL",        "Wt-DL",        "DL-CE",
                                                     "SoftDL-CE", "Wt-SoftDL-CE", "Proposed"};

/// Loss-module matrix of an ablation variant. Throws std::invalid_argument
/// for unknown names.
LossModules ablation_variant(std::string_view name);

struct TrainConfig {
  int epochs = 25;
  int batch_size = 16;
  double learning_rate = 2e-4;
  int burn_in = 2;
  DivergenceSpec divergence{};
  double gamma = 5.0;
  int64_t m_reference = 5000;
  double prior_mu = 0.0;
  double prior_sigma = 1.0;
  double focal_gamma = 2.0;
  Alternation alternation = Alternation::step;
  double pseudo_ratio = 0.5;
  double grad_clip = 5.0;
  std::uint64_t seed = 0;
  std::string variant = "Proposed";
  LossModules modules{};

  void validate() const;
};

/// Returns `base` with the loss modules of the named variant applied.
TrainConfig apply_ablation_variant(TrainConfig base, std::string_view name);

struct BatchRecord {
  int epoch = 0;
  int64_t step = 0;
  double mu_s = 0.0;
  double sigma_s = 0.0;
  bool kmeans_targets = false;
  std::vector<double> psi_k;
  std::vector<double> l_dev;  // deviation term actually used (soft or hard)
  std::vector<double> l_bce;
  std::vector<double> l_seg;
  std::vector<double> w1;
  std::vector<double> w2;
  double total = 0.0;

  nlohmann::json to_json() const;
  static BatchRecord from_json(const nlohmann::json& j);
};

struct EpochRecord {
  int epoch = 0;
  int batches = 0;
  int64_t global_step = 0;
  bool reweighted = false;
  double mean_total = 0.0;
  double mean_l_dev = 0.0;
  double mean_l_bce = 0.0;
  double mean_l_seg = 0.0;
  double max_weight = 0.0;
  int heavy_weight_batches = 0;  // batches where some weight exceeded 0.5

  nlohmann::json to_json() const;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::vector<BatchRecord> batches;
};

struct TrainState {
  int epoch = 0;
  int64_t global_step = 0;
  double best_epoch_loss = 0.0;
};

struct TrainOptions {
  /// When set: per-epoch log, per-batch log and checkpoints are written here.
  std::optional<std::filesystem::path> run_dir;
  bool keep_batch_records = true;
};

struct TrainResult {
  AdlModel model{nullptr};
  TrainLog log;
  TrainState state;
};

/// Runs the full training loop. Never reads the samples' y_true.
TrainResult train(const TrainConfig& config, const ModelConfig& model_config,
                  const std::vector<data::ImageSample>& x_n,
                  std::shared_ptr<const synth::PseudoAnomalySynth> synth,
                  const TrainOptions& options = {});

/// Per-sample losses and objective for one batch, shared by training and probes.
struct BatchLosses {
  torch::Tensor psi_k;
  torch::Tensor l_dev;
  torch::Tensor l_bce;
  torch::Tensor l_seg;
  torch::Tensor total;
  std::vector<int> bce_targets;
  WeightVector w1;
  WeightVector w2;
};

/// Forward pass plus losses. BCE targets are the batch labels y, or the
/// 2-means labels of the batch scores when `kmeans_targets` is set. Weights
/// are uniform unless `reweight` is set (and the variant reweights).
BatchLosses compute_batch_losses(AdlModel& model, const data::StackedBatch& batch,
                                 const losses::ReferenceStats& stats, const TrainConfig& config,
                                 bool kmeans_targets, bool reweight);

/// Objective on a fixed batch in eval mode with uniform weights; used to
/// check determinism and checkpoint round trips.
double probe_loss(AdlModel& model, const data::StackedBatch& batch,
                  const losses::ReferenceStats& stats, const TrainConfig& config);

void save_checkpoint(const std::filesystem::path& path, AdlModel& model, const TrainState& state);
/// Builds a model from `model_config` and loads parameters saved by save_checkpoint.
AdlModel load_checkpoint(const std::filesystem::path& path, const ModelConfig& model_config,
                         TrainState* state = nullptr);

}  // namespace adl
