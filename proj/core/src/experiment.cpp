#include "adl/experiment.hpp"

#include <chrono>
#include <fstream>

#include "adl/log.hpp"

#include "adl/errors.hpp"
#include "adl/plot.hpp"
#include "adl/rng.hpp"
#include "adl/toy_data.hpp"

namespace adl {
namespace fs = std::filesystem;

namespace {

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_run_outputs(const fs::path& run_dir, const eval::MetricsReport& report,
                       const eval::ScoredSet& scored) {
  const std::vector<eval::MetricsReport> rows{report};
  eval::write_metrics_csv(run_dir / "metrics.csv", rows);
  eval::write_metrics_jsonl(run_dir / "metrics.jsonl", rows);
  eval::write_scores_csv(run_dir / "scores.csv", scored);
}

void write_run_plots(const fs::path& run_dir) {
  std::ifstream log(run_dir / "train_log.jsonl");
  if (!log) return;
  plot::Series total{"total", {}, {}}, dev{"deviation", {}, {}}, bce{"bce", {}, {}}, seg{"segmentation", {}, {}};
  plot::Series max_w{"max weight", {}, {}};
  std::string line;
  while (std::getline(log, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const double e = j.at("epoch").get<double>();
    total.x.push_back(e), total.y.push_back(j.at("mean_total").get<double>());
    dev.x.push_back(e), dev.y.push_back(j.at("mean_l_dev").get<double>());
    bce.x.push_back(e), bce.y.push_back(j.at("mean_l_bce").get<double>());
    seg.x.push_back(e), seg.y.push_back(j.at("mean_l_seg").get<double>());
    max_w.x.push_back(e), max_w.y.push_back(j.at("max_weight").get<double>());
  }
  plot::write_svg(run_dir / "plots" / "train_loss.svg",
                  {"Training loss per epoch", "epoch", "mean loss", {total, dev, bce, seg}});
  plot::write_svg(run_dir / "plots" / "max_weight.svg",
                  {"Largest instance weight per epoch", "epoch", "weight", {max_w}, 0.0, 1.0});
}

}  // namespace

data::CategoryData load_run_data(const RunConfig& config) {
  const auto& d = config.data;
  if (d.dataset == data::DatasetKind::toy && d.root.empty()) {
    return data::make_toy_category(d.toy, d.category);
  }
  return data::load_category(d.root, d.dataset, d.category, d.geometry);
}

std::shared_ptr<const synth::PseudoAnomalySynth> make_synth(const RunConfig& config) {
  const int size = config.image_size();
  std::shared_ptr<const synth::TextureCorpus> corpus;
  if (!config.texture_dir.empty()) {
    corpus = std::make_shared<const synth::TextureCorpus>(
        synth::TextureCorpus::from_directory(config.texture_dir, ImageGeometry{size, size}));
  } else {
    corpus = std::make_shared<const synth::TextureCorpus>(synth::TextureCorpus::from_images(
        data::make_toy_textures(config.procedural_textures, size, derive_seed(config.train.seed, 0x7E47))));
  }
  return std::make_shared<const synth::PseudoAnomalySynth>(config.blend, corpus);
}

PreparedData prepare_data(const RunConfig& config) {
  config.validate();
  PreparedData prepared;
  prepared.category = load_run_data(config);
  prepared.train_set = data::inject_contamination(prepared.category.train_normals,
                                                  prepared.category.test_anomalies, config.contamination());
  prepared.synth = make_synth(config);
  return prepared;
}

eval::MetricsReport report_for(const RunConfig& config) {
  eval::MetricsReport r;
  r.dataset = data::to_string(config.data.dataset);
  r.category = config.data.category;
  r.variant = config.train.variant;
  r.divergence = to_string(config.train.divergence.kind);
  r.alpha = config.train.divergence.alpha;
  r.lambda = config.train.divergence.lambda;
  r.epsilon = config.epsilon;
  r.seed = config.train.seed;
  return r;
}

RunOutcome train_and_evaluate(const RunConfig& config, const fs::path& run_dir) {
  config.validate();
  fs::create_directories(run_dir);
  write_json(run_dir / "config.json", config.to_json());
  auto prepared = prepare_data(config);
  write_json(run_dir / "contamination_manifest.json",
             prepared.train_set.manifest_json(config.contamination()));

  const auto start = std::chrono::steady_clock::now();
  RunOutcome outcome;
  TrainOptions options;
  options.run_dir = run_dir;
  options.keep_batch_records = false;
  outcome.train = train(config.train, config.model, prepared.train_set.samples, prepared.synth, options);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  auto scored = eval::score_test_set(outcome.train.model, prepared.category.test_normals,
                                     prepared.category.test_anomalies);
  outcome.report = report_for(config);
  outcome.report.train_seconds = seconds;
  outcome.report.run_dir = run_dir.string();
  eval::fill_metrics(outcome.report, scored);
  write_run_outputs(run_dir, outcome.report, scored);
  write_run_plots(run_dir);
  logging::info("{} / {} eps={} seed={}: AUC-ROC {:.4f}, AUC-PR {:.4f} ({:.1f} s)", outcome.report.category,
               outcome.report.variant, config.epsilon, config.train.seed, outcome.report.auc_roc,
               outcome.report.auc_pr, seconds);
  return outcome;
}

RunConfig load_run_snapshot(const fs::path& run_dir) {
  const auto path = run_dir / "config.json";
  if (!fs::exists(path)) throw ConfigError("not a run directory (no config.json): " + run_dir.string());
  return RunConfig::from_json(load_structured_file(path));
}

eval::MetricsReport evaluate_run(const fs::path& run_dir, const std::string& checkpoint) {
  const auto config = load_run_snapshot(run_dir);
  auto model = load_checkpoint(run_dir / "checkpoints" / checkpoint, config.model);
  const auto category = load_run_data(config);
  auto scored = eval::score_test_set(model, category.test_normals, category.test_anomalies);
  auto report = report_for(config);
  report.run_dir = run_dir.string();
  eval::fill_metrics(report, scored);
  write_run_outputs(run_dir, report, scored);
  write_run_plots(run_dir);
  return report;
}

}  // namespace adl
