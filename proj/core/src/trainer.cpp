#include "adl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "adl/log.hpp"
#include <torch/torch.h>

#include "adl/errors.hpp"

namespace adl {
namespace fs = std::filesystem;

std::string to_string(Alternation a) { return a == Alternation::step ? "step" : "epoch"; }

Alternation parse_alternation(const std::string& name) {
  if (name == "step") return Alternation::step;
  if (name == "epoch") return Alternation::epoch;
  throw std::invalid_argument("alternation must be 'step' or 'epoch'");
}

LossModules ablation_variant(std::string_view name) {
  if (name == "DL") return {false, false, false, false};
  if (name == "Wt-DL") return {false, false, false, true};
  if (name == "DL-CE") return {false, true, false, false};
  if (name == "SoftDL-CE") return {true, true, false, false};
  if (name == "Wt-SoftDL-CE") return {true, true, false, true};
  if (name == "Proposed") return {true, true, true, true};
  throw std::invalid_argument("unknown ablation variant '" + std::string(name) + "'");
}

TrainConfig apply_ablation_variant(TrainConfig base, std::string_view name) {
  base.modules = ablation_variant(name);
  base.variant = std::string(name);
  return base;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (burn_in < 0 || burn_in >= epochs) throw std::invalid_argument("burn_in must satisfy 0 <= burn_in < epochs");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (batch_size < 2) throw std::invalid_argument("batch size must be >= 2");
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  if (m_reference < 2) throw std::invalid_argument("m_reference must be >= 2");
  if (!(pseudo_ratio >= 0.0 && pseudo_ratio < 1.0)) throw std::invalid_argument("pseudo_ratio must lie in [0, 1)");
  if (!(grad_clip >= 0.0)) throw std::invalid_argument("grad_clip must be >= 0 (0 disables)");
  if (!(focal_gamma >= 0.0)) throw std::invalid_argument("focal_gamma must be >= 0");
  if (modules.reweight) divergence.validate();
}

nlohmann::json BatchRecord::to_json() const {
  return {{"epoch", epoch}, {"step", step},   {"mu_s", mu_s},   {"sigma_s", sigma_s},
          {"kmeans_targets", kmeans_targets}, {"psi_k", psi_k}, {"l_dev", l_dev},
          {"l_bce", l_bce}, {"l_seg", l_seg}, {"w1", w1},       {"w2", w2},
          {"total", total}};
}

BatchRecord BatchRecord::from_json(const nlohmann::json& j) {
  BatchRecord r;
  r.epoch = j.at("epoch").get<int>();
  r.step = j.at("step").get<int64_t>();
  r.mu_s = j.at("mu_s").get<double>();
  r.sigma_s = j.at("sigma_s").get<double>();
  r.kmeans_targets = j.at("kmeans_targets").get<bool>();
  r.psi_k = j.at("psi_k").get<std::vector<double>>();
  r.l_dev = j.at("l_dev").get<std::vector<double>>();
  r.l_bce = j.at("l_bce").get<std::vector<double>>();
  r.l_seg = j.at("l_seg").get<std::vector<double>>();
  r.w1 = j.at("w1").get<std::vector<double>>();
  r.w2 = j.at("w2").get<std::vector<double>>();
  r.total = j.at("total").get<double>();
  return r;
}

nlohmann::json EpochRecord::to_json() const {
  return {{"epoch", epoch},
          {"batches", batches},
          {"global_step", global_step},
          {"reweighted", reweighted},
          {"mean_total", mean_total},
          {"mean_l_dev", mean_l_dev},
          {"mean_l_bce", mean_l_bce},
          {"mean_l_seg", mean_l_seg},
          {"max_weight", max_weight},
          {"heavy_weight_batches", heavy_weight_batches}};
}

BatchLosses compute_batch_losses(AdlModel& model, const data::StackedBatch& batch,
                                 const losses::ReferenceStats& stats, const TrainConfig& config,
                                 bool kmeans_targets, bool reweight) {
  const auto& modules = config.modules;
  auto out = model->forward(batch.images);
  BatchLosses r;
  r.psi_k = out.psi_k.to(torch::kFloat64);
  const auto p = out.anomaly_prob.to(torch::kFloat64);
  const int64_t n = batch.labels.size(0);

  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int64_t i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>(batch.labels[i].item<int64_t>());
  r.bce_targets = kmeans_targets ? losses::kmeans_soft_targets(to_vector(r.psi_k), labels) : labels;
  const auto y = batch.labels.to(torch::kFloat64);
  const auto y_hat = torch::tensor(std::vector<int64_t>(r.bce_targets.begin(), r.bce_targets.end()))
                         .to(torch::kFloat64);

  r.l_dev = modules.soft_deviation ? losses::soft_deviation_loss(r.psi_k, p.detach(), stats, config.gamma)
                                   : losses::deviation_loss(r.psi_k, y, stats, config.gamma);
  const auto zeros = torch::zeros({n}, torch::kFloat64);
  r.l_bce = modules.bce ? losses::bce_loss(p, y_hat) : zeros;
  r.l_seg = modules.segmentation
                ? losses::focal_seg_loss_batch(out.seg_mask, batch.masks, config.focal_gamma).to(torch::kFloat64)
                : zeros;

  const auto size = static_cast<std::size_t>(n);
  if (reweight && modules.reweight) {
    r.w1 = compute_weights(to_vector(r.l_dev), config.divergence);
    r.w2 = modules.bce ? compute_weights(to_vector(r.l_bce), config.divergence) : WeightVector::uniform(size);
  } else {
    r.w1 = WeightVector::uniform(size);
    r.w2 = WeightVector::uniform(size);
  }
  r.total = combine_losses(r.l_dev, r.l_bce, r.l_seg, r.w1, r.w2);
  return r;
}

double probe_loss(AdlModel& model, const data::StackedBatch& batch,
                  const losses::ReferenceStats& stats, const TrainConfig& config) {
  const bool was_training = model->is_training();
  model->eval();
  torch::NoGradGuard no_grad;
  const double value = compute_batch_losses(model, batch, stats, config, false, false).total.item<double>();
  model->train(was_training);
  return value;
}

void save_checkpoint(const fs::path& path, AdlModel& model, const TrainState& state) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  torch::serialize::OutputArchive archive;
  model->save(archive);
  archive.write("state_epoch", torch::tensor(static_cast<int64_t>(state.epoch)));
  archive.write("state_global_step", torch::tensor(state.global_step));
  archive.write("state_best_epoch_loss", torch::tensor(state.best_epoch_loss, torch::kFloat64));
  archive.save_to(path.string());
}

AdlModel load_checkpoint(const fs::path& path, const ModelConfig& model_config, TrainState* state) {
  if (!fs::exists(path)) throw ConfigError("checkpoint not found: " + path.string());
  ModelConfig config = model_config;
  config.encoder.weights.clear();  // parameters come from the checkpoint
  AdlModel model(config);
  torch::serialize::InputArchive archive;
  archive.load_from(path.string());
  model->load(archive);
  if (state) {
    torch::Tensor t;
    archive.read("state_epoch", t);
    state->epoch = static_cast<int>(t.item<int64_t>());
    archive.read("state_global_step", t);
    state->global_step = t.item<int64_t>();
    archive.read("state_best_epoch_loss", t);
    state->best_epoch_loss = t.item<double>();
  }
  model->eval();
  return model;
}

namespace {

std::string diagnostic_dump(const BatchLosses& r, const losses::ReferenceStats& stats, int epoch, int64_t step) {
  nlohmann::json dump = {{"epoch", epoch},
                         {"step", step},
                         {"mu_s", stats.mu_s},
                         {"sigma_s", stats.sigma_s},
                         {"psi_k", to_vector(r.psi_k)},
                         {"l_dev", to_vector(r.l_dev)},
                         {"l_bce", to_vector(r.l_bce)},
                         {"l_seg", to_vector(r.l_seg)},
                         {"w1", std::vector<double>(r.w1.values().begin(), r.w1.values().end())},
                         {"w2", std::vector<double>(r.w2.values().begin(), r.w2.values().end())}};
  return dump.dump(2);
}

}  // namespace

TrainResult train(const TrainConfig& config, const ModelConfig& model_config,
                  const std::vector<data::ImageSample>& x_n,
                  std::shared_ptr<const synth::PseudoAnomalySynth> synth,
                  const TrainOptions& options) {
  config.validate();
  if (x_n.size() < 2) throw std::invalid_argument("training needs at least two samples");
  if (!synth) throw ConfigError("training needs a pseudo-anomaly generator");

  torch::manual_seed(config.seed);
  TrainResult result;
  result.model = AdlModel(model_config);
  AdlModel& model = result.model;
  model->train();

  std::vector<torch::Tensor> trainable;
  for (auto& p : model->parameters()) {
    if (p.requires_grad()) trainable.push_back(p);
  }
  torch::optim::Adam optimizer(trainable, torch::optim::AdamOptions(config.learning_rate));

  Rng shuffle_rng(derive_seed(config.seed, 1));
  Rng synth_rng(derive_seed(config.seed, 2));
  Rng reference_rng(derive_seed(config.seed, 3));

  std::ofstream epoch_log;
  std::ofstream batch_log;
  if (options.run_dir) {
    fs::create_directories(*options.run_dir / "checkpoints");
    epoch_log.open(*options.run_dir / "train_log.jsonl");
    batch_log.open(*options.run_dir / "batches.jsonl");
  }

  std::vector<std::size_t> order(x_n.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch_size = static_cast<std::size_t>(config.batch_size);
  TrainState& state = result.state;
  state.best_epoch_loss = std::numeric_limits<double>::infinity();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const bool reweight_epoch = epoch > config.burn_in;
    EpochRecord summary;
    summary.epoch = epoch;
    summary.reweighted = reweight_epoch && config.modules.reweight;

    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      if (end - start < 2) break;  // a single leftover sample cannot form a batch
      std::vector<data::ImageSample> drawn;
      drawn.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) drawn.push_back(x_n[order[i]]);

      auto samples = data::make_training_batch(drawn, config.pseudo_ratio, *synth, synth_rng);
      auto batch = data::stack_batch(samples);
      auto stats = losses::sample_reference_stats(config.m_reference, config.prior_mu,
                                                  config.prior_sigma, reference_rng);
      const int64_t parity = config.alternation == Alternation::step ? state.global_step : epoch - 1;
      const bool kmeans = parity % 2 == 1;

      auto r = compute_batch_losses(model, batch, stats, config, kmeans, reweight_epoch);
      const double total = r.total.item<double>();
      if (!std::isfinite(total)) {
        const std::string dump = diagnostic_dump(r, stats, epoch, state.global_step);
        if (options.run_dir) std::ofstream(*options.run_dir / "divergence_dump.json") << dump;
        throw TrainingDivergedError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                    std::to_string(state.global_step) + ":\n" + dump);
      }

      optimizer.zero_grad();
      r.total.backward();
      if (config.grad_clip > 0.0) torch::nn::utils::clip_grad_norm_(trainable, config.grad_clip);
      optimizer.step();

      BatchRecord record;
      record.epoch = epoch;
      record.step = state.global_step;
      record.mu_s = stats.mu_s;
      record.sigma_s = stats.sigma_s;
      record.kmeans_targets = kmeans;
      record.psi_k = to_vector(r.psi_k);
      record.l_dev = to_vector(r.l_dev);
      record.l_bce = to_vector(r.l_bce);
      record.l_seg = to_vector(r.l_seg);
      record.w1.assign(r.w1.values().begin(), r.w1.values().end());
      record.w2.assign(r.w2.values().begin(), r.w2.values().end());
      record.total = total;

      const double heaviest = std::max(r.w1.max(), r.w2.max());
      summary.max_weight = std::max(summary.max_weight, heaviest);
      if (heaviest > 0.5) ++summary.heavy_weight_batches;
      ++summary.batches;
      summary.mean_total += total;
      summary.mean_l_dev += std::accumulate(record.l_dev.begin(), record.l_dev.end(), 0.0) / record.l_dev.size();
      summary.mean_l_bce += std::accumulate(record.l_bce.begin(), record.l_bce.end(), 0.0) / record.l_bce.size();
      summary.mean_l_seg += std::accumulate(record.l_seg.begin(), record.l_seg.end(), 0.0) / record.l_seg.size();

      if (batch_log.is_open()) batch_log << record.to_json().dump() << '\n';
      if (options.keep_batch_records) result.log.batches.push_back(std::move(record));
      ++state.global_step;
    }

    if (summary.batches > 0) {
      const double count = summary.batches;
      summary.mean_total /= count;
      summary.mean_l_dev /= count;
      summary.mean_l_bce /= count;
      summary.mean_l_seg /= count;
    }
    summary.global_step = state.global_step;
    state.epoch = epoch;
    if (summary.heavy_weight_batches > 0) {
      logging::warn("epoch {}: {} batch(es) put more than half the weight on one sample (max {:.3f})",
                   epoch, summary.heavy_weight_batches, summary.max_weight);
    }
    logging::info("epoch {}/{} loss {:.4f} (dev {:.4f}, bce {:.4f}, seg {:.4f}){}", epoch,
                 config.epochs, summary.mean_total, summary.mean_l_dev, summary.mean_l_bce,
                 summary.mean_l_seg, summary.reweighted ? " reweighted" : "");

    if (epoch_log.is_open()) epoch_log << summary.to_json().dump() << std::endl;
    if (options.run_dir) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%03d.pt", epoch);
      save_checkpoint(*options.run_dir / "checkpoints" / name, model, state);
      if (summary.mean_total < state.best_epoch_loss) {
        state.best_epoch_loss = summary.mean_total;
        save_checkpoint(*options.run_dir / "checkpoints" / "best.pt", model, state);
      }
    } else {
      state.best_epoch_loss = std::min(state.best_epoch_loss, summary.mean_total);
    }
    result.log.epochs.push_back(summary);
  }

  if (options.run_dir) {
    save_checkpoint(*options.run_dir / "checkpoints" / "final.pt", model, state);
    torch::save(optimizer, (*options.run_dir / "checkpoints" / "final_optimizer.pt").string());
  }
  model->eval();
  return result;
}

}  // namespace adl
