#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <torch/torch.h>

#include "adl/errors.hpp"
#include "adl/toy_data.hpp"
#include "adl/trainer.hpp"

using namespace adl;
namespace fs = std::filesystem;

namespace {

constexpr int kSize = 32;

ModelConfig tiny_model() {
  ModelConfig m;
  m.encoder.backbone = "resnet18_w8";
  m.encoder.input_resolution = kSize;
  m.heads.scorer_hidden = 8;
  m.heads.decoder_width = 8;
  return m;
}

TrainConfig tiny_train(std::string variant = "Proposed") {
  auto c = apply_ablation_variant(TrainConfig{}, variant);
  c.epochs = 3;
  c.burn_in = 1;
  c.batch_size = 4;
  c.learning_rate = 1e-3;
  c.m_reference = 500;
  c.seed = 21;
  return c;
}

struct Fixture {
  std::vector<data::ImageSample> x_n;
  std::shared_ptr<const synth::PseudoAnomalySynth> synth;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture out;
    data::ToySpec spec;
    spec.image_size = kSize;
    spec.n_train = 9;  // leaves a single-sample remainder with batch 4
    spec.n_test_normal = 2;
    spec.n_test_anomalous = 2;
    out.x_n = data::make_toy_category(spec).train_normals;
    auto corpus = std::make_shared<const synth::TextureCorpus>(
        synth::TextureCorpus::from_images(data::make_toy_textures(3, kSize, 5)));
    out.synth = std::make_shared<const synth::PseudoAnomalySynth>(synth::BlendSpec{}, corpus);
    return out;
  }();
  return f;
}

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("adl_test_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Variants, ModuleMatrix) {
  EXPECT_EQ(ablation_variant("DL"), (LossModules{false, false, false, false}));
  EXPECT_EQ(ablation_variant("Wt-DL"), (LossModules{false, false, false, true}));
  EXPECT_EQ(ablation_variant("DL-CE"), (LossModules{false, true, false, false}));
  EXPECT_EQ(ablation_variant("SoftDL-CE"), (LossModules{true, true, false, false}));
  EXPECT_EQ(ablation_variant("Wt-SoftDL-CE"), (LossModules{true, true, false, true}));
  EXPECT_EQ(ablation_variant("Proposed"), (LossModules{true, true, true, true}));
  EXPECT_THROW(ablation_variant("Proposed+"), std::invalid_argument);
  EXPECT_THROW(apply_ablation_variant(TrainConfig{}, "dl"), std::invalid_argument);
}

TEST(TrainConfig, Validation) {
  EXPECT_NO_THROW(tiny_train().validate());
  auto c = tiny_train();
  c.batch_size = 1;
  EXPECT_ANY_THROW(c.validate());
  c = tiny_train();
  c.pseudo_ratio = 1.0;
  EXPECT_ANY_THROW(c.validate());
  c = tiny_train();
  c.burn_in = -1;
  EXPECT_ANY_THROW(c.validate());
  EXPECT_EQ(parse_alternation("epoch"), Alternation::epoch);
  EXPECT_THROW(parse_alternation("sometimes"), std::invalid_argument);
}

TEST(Trainer, LogFollowsTheTrainingProcedure) {
  const auto& f = fixture();
  auto config = tiny_train();
  auto result = train(config, tiny_model(), f.x_n, f.synth);
  ASSERT_EQ(result.log.epochs.size(), 3u);
  ASSERT_EQ(result.log.batches.size(), 3u * 2u);  // 9 samples, batch 4, leftover of 1 skipped
  for (const auto& b : result.log.batches) {
    ASSERT_EQ(b.w1.size(), 4u);
    EXPECT_EQ(b.kmeans_targets, b.step % 2 == 1);
    if (b.epoch <= config.burn_in) {
      EXPECT_TRUE(WeightVector(b.w1).is_uniform());
      EXPECT_TRUE(WeightVector(b.w2).is_uniform());
    } else {
      auto w1 = compute_weights(b.l_dev, config.divergence);
      auto w2 = compute_weights(b.l_bce, config.divergence);
      for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_NEAR(b.w1[i], w1[i], 1e-9);
        EXPECT_NEAR(b.w2[i], w2[i], 1e-9);
      }
    }
    const double recomputed =
        combined_objective_value(b.l_dev, b.l_bce, b.l_seg, WeightVector(b.w1), WeightVector(b.w2));
    EXPECT_NEAR(b.total, recomputed, 1e-6);
  }
  EXPECT_FALSE(result.log.epochs[0].reweighted);
  EXPECT_TRUE(result.log.epochs[1].reweighted);
  EXPECT_EQ(result.state.global_step, 6);
}

TEST(Trainer, EpochAlternation) {
  const auto& f = fixture();
  auto config = tiny_train();
  config.alternation = Alternation::epoch;
  config.epochs = 2;
  auto result = train(config, tiny_model(), f.x_n, f.synth);
  for (const auto& b : result.log.batches) EXPECT_EQ(b.kmeans_targets, b.epoch == 2);
}

TEST(Trainer, DeterministicForAFixedSeed) {
  const auto& f = fixture();
  auto config = tiny_train();
  config.epochs = 2;
  auto a = train(config, tiny_model(), f.x_n, f.synth);
  auto b = train(config, tiny_model(), f.x_n, f.synth);
  ASSERT_EQ(a.log.batches.size(), b.log.batches.size());
  for (std::size_t i = 0; i < a.log.batches.size(); ++i) {
    EXPECT_EQ(a.log.batches[i].total, b.log.batches[i].total);
    EXPECT_EQ(a.log.batches[i].psi_k, b.log.batches[i].psi_k);
  }
  config.seed = 22;
  auto c = train(config, tiny_model(), f.x_n, f.synth);
  EXPECT_NE(a.log.batches[0].total, c.log.batches[0].total);
}

TEST(Trainer, VariantDisablesModules) {
  const auto& f = fixture();
  auto config = tiny_train("DL");
  config.epochs = 2;
  auto result = train(config, tiny_model(), f.x_n, f.synth);
  for (const auto& b : result.log.batches) {
    EXPECT_TRUE(WeightVector(b.w1).is_uniform());
    for (double v : b.l_bce) EXPECT_EQ(v, 0.0);
    for (double v : b.l_seg) EXPECT_EQ(v, 0.0);
  }

  config = tiny_train("Wt-DL");
  result = train(config, tiny_model(), f.x_n, f.synth);
  bool any_nonuniform = false;
  for (const auto& b : result.log.batches) {
    if (b.epoch > config.burn_in) any_nonuniform |= !WeightVector(b.w1).is_uniform();
    EXPECT_TRUE(WeightVector(b.w2).is_uniform());
  }
  EXPECT_TRUE(any_nonuniform);
}

TEST(Trainer, RunDirectoryAndCheckpointRoundTrip) {
  const auto& f = fixture();
  auto config = tiny_train();
  config.epochs = 2;
  const auto dir = fresh_dir("trainer_run");
  auto result = train(config, tiny_model(), f.x_n, f.synth, TrainOptions{dir, true});
  for (const char* name : {"checkpoints/epoch_001.pt", "checkpoints/epoch_002.pt", "checkpoints/best.pt",
                           "checkpoints/final.pt", "checkpoints/final_optimizer.pt", "train_log.jsonl",
                           "batches.jsonl"}) {
    EXPECT_TRUE(fs::exists(dir / name)) << name;
  }

  std::ifstream in(dir / "batches.jsonl");
  std::string line;
  std::size_t i = 0;
  while (std::getline(in, line)) {
    auto rec = BatchRecord::from_json(nlohmann::json::parse(line));
    ASSERT_LT(i, result.log.batches.size());
    EXPECT_EQ(rec.w1, result.log.batches[i].w1);
    EXPECT_EQ(rec.total, result.log.batches[i].total);
    ++i;
  }
  EXPECT_EQ(i, result.log.batches.size());

  TrainState state;
  auto loaded = load_checkpoint(dir / "checkpoints" / "final.pt", tiny_model(), &state);
  EXPECT_EQ(state.epoch, 2);
  EXPECT_EQ(state.global_step, result.state.global_step);

  Rng rng(4);
  auto batch = data::stack_batch(data::make_training_batch(std::span(f.x_n).first(4), 0.5, *f.synth, rng));
  Rng ref_rng(5);
  auto stats = losses::sample_reference_stats(500, 0.0, 1.0, ref_rng);
  const double before = probe_loss(result.model, batch, stats, config);
  const double after = probe_loss(loaded, batch, stats, config);
  EXPECT_NEAR(before, after, 1e-6);
  EXPECT_TRUE(std::isfinite(before));
}

TEST(Trainer, RejectsDegenerateInputs) {
  const auto& f = fixture();
  std::vector<data::ImageSample> one(f.x_n.begin(), f.x_n.begin() + 1);
  EXPECT_THROW(train(tiny_train(), tiny_model(), one, f.synth), std::invalid_argument);
  EXPECT_THROW(train(tiny_train(), tiny_model(), f.x_n, nullptr), ConfigError);
}
