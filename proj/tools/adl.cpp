// adl: train, evaluate, sweep and ablate anomaly detectors on contaminated data.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "adl/config.hpp"
#include "adl/errors.hpp"
#include "adl/experiment.hpp"
#include "adl/log.hpp"
#include "adl/sweep.hpp"
#include "adl/toy_data.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TrainArgs {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::string> dataset, data_root, category, divergence, variant, backbone, texture_dir, weights;
  std::optional<double> epsilon, alpha, lambda, learning_rate;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs, batch_size, burn_in;
  bool toy = false;
  std::string out;
};

template <typename T>
void put(json& j, const char* key, const std::optional<T>& value) {
  if (value) j[key] = *value;
}

json parse_set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw adl::ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  return json{{key, value}};
}

adl::RunConfig build_config(const TrainArgs& a) {
  adl::RunConfig config = a.toy ? adl::toy_run_config() : adl::RunConfig{};
  if (!a.config_file.empty()) config = adl::RunConfig::from_json(adl::load_structured_file(a.config_file), config);
  json overrides = json::object();
  put(overrides, "dataset", a.dataset);
  put(overrides, "data_root", a.data_root);
  put(overrides, "category", a.category);
  put(overrides, "divergence", a.divergence);
  put(overrides, "variant", a.variant);
  put(overrides, "backbone", a.backbone);
  put(overrides, "texture_dir", a.texture_dir);
  put(overrides, "weights", a.weights);
  put(overrides, "epsilon", a.epsilon);
  put(overrides, "alpha", a.alpha);
  put(overrides, "lambda", a.lambda);
  put(overrides, "learning_rate", a.learning_rate);
  put(overrides, "seed", a.seed);
  put(overrides, "epochs", a.epochs);
  put(overrides, "batch_size", a.batch_size);
  put(overrides, "burn_in", a.burn_in);
  for (const auto& s : a.sets) overrides.update(parse_set(s));
  config = adl::RunConfig::from_json(overrides, config);
  config.validate();
  return config;
}

void print_report(const adl::eval::MetricsReport& r) {
  std::cout << r.to_json().dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive deviation learning for anomaly detection with contaminated training data"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "debug, info, warn, error or off");

  TrainArgs targs;
  auto* train = app.add_subcommand("train", "Train one model into a run directory, then evaluate it");
  train->add_option("--config", targs.config_file, "JSON or YAML run config");
  train->add_option("--set", targs.sets, "Override any config key: key=value (repeatable)");
  train->add_flag("--toy", targs.toy, "Start from the small synthetic-data preset");
  train->add_option("--dataset", targs.dataset, "mvtec, visa or toy");
  train->add_option("--data-root", targs.data_root, "Dataset root directory");
  train->add_option("--category", targs.category);
  train->add_option("--epsilon", targs.epsilon, "Contamination ratio");
  train->add_option("--divergence", targs.divergence, "kl, rkl or alpha");
  train->add_option("--alpha", targs.alpha);
  train->add_option("--lambda", targs.lambda);
  train->add_option("--seed", targs.seed);
  train->add_option("--epochs", targs.epochs);
  train->add_option("--batch-size", targs.batch_size);
  train->add_option("--burn-in", targs.burn_in);
  train->add_option("--lr", targs.learning_rate);
  train->add_option("--variant", targs.variant, "DL, Wt-DL, DL-CE, SoftDL-CE, Wt-SoftDL-CE or Proposed");
  train->add_option("--backbone", targs.backbone, "resnet18, resnet34 or resnet18_w<width>");
  train->add_option("--weights", targs.weights, "Backbone weights exported by tools/export_torchvision_weights.py");
  train->add_option("--texture-dir", targs.texture_dir, "Texture images for pseudo-anomalies");
  train->add_option("--out", targs.out, "Run directory")->required();

  std::string run_dir, checkpoint = "final.pt";
  auto* evaluate = app.add_subcommand("evaluate", "Score the test split with a trained run");
  evaluate->add_option("--run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint file name under checkpoints/");

  std::string spec_path;
  std::optional<std::string> out_override;
  auto* sweep = app.add_subcommand("sweep", "Grid over contamination ratios, categories, seeds and an optional lambda/alpha axis");
  sweep->add_option("--spec", spec_path, "Sweep YAML/JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", out_override, "Output directory (overrides the sweep file)");
  auto* ablate = app.add_subcommand("ablate", "Loss-module ablation over the six variants");
  ablate->add_option("--spec", spec_path, "Ablation YAML/JSON")->required()->check(CLI::ExistingFile);
  ablate->add_option("--out", out_override, "Output directory (overrides the sweep file)");

  std::string toy_out, toy_category = "toy";
  adl::data::ToySpec toy_spec;
  int toy_textures = 16;
  auto* make_toy = app.add_subcommand("make-toy", "Write the synthetic dataset (MVTec layout) and textures to disk");
  make_toy->add_option("--out", toy_out, "Dataset root")->required();
  make_toy->add_option("--category", toy_category);
  make_toy->add_option("--size", toy_spec.image_size);
  make_toy->add_option("--n-train", toy_spec.n_train);
  make_toy->add_option("--n-test-normal", toy_spec.n_test_normal);
  make_toy->add_option("--n-test-anomalous", toy_spec.n_test_anomalous);
  make_toy->add_option("--seed", toy_spec.seed);
  make_toy->add_option("--textures", toy_textures, "Number of procedural textures written to <out>/textures");

  CLI11_PARSE(app, argc, argv);

  try {
    adl::logging::set_level(adl::logging::parse_level(log_level));
    if (*train) {
      const auto config = build_config(targs);
      fs::create_directories(targs.out);
      adl::logging::add_file_sink(fs::path(targs.out) / "train.log");
      print_report(adl::train_and_evaluate(config, targs.out).report);
    } else if (*evaluate) {
      print_report(adl::evaluate_run(run_dir, checkpoint));
    } else if (*sweep || *ablate) {
      const bool is_ablation = static_cast<bool>(*ablate);
      auto spec = adl::sweep::load_sweep_spec(
          spec_path, is_ablation ? adl::sweep::all_variants() : std::vector<std::string>{"Proposed"});
      if (out_override) spec.out_dir = *out_override;
      const auto reports = is_ablation ? adl::sweep::run_ablation(spec) : adl::sweep::run_sweep(spec);
      int failed = 0;
      for (const auto& r : reports) failed += r.ok() ? 0 : 1;
      std::cout << reports.size() << " cells, " << failed << " failed; results in " << spec.out_dir << '\n';
      if (is_ablation) std::cout << adl::sweep::ablation_table_markdown(adl::sweep::summarize(reports));
      return failed == 0 ? EXIT_SUCCESS : 2;
    } else if (*make_toy) {
      adl::data::write_toy_dataset(toy_out, toy_category, toy_spec);
      adl::data::write_toy_textures(fs::path(toy_out) / "textures", toy_textures, toy_spec.image_size, toy_spec.seed);
      std::cout << "wrote " << toy_out << '\n';
    }
  } catch (const adl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 64;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return EXIT_SUCCESS;
}
