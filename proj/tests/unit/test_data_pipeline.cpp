#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include <torch/torch.h>

#include "adl/data_pipeline.hpp"
#include "adl/errors.hpp"
#include "adl/image.hpp"
#include "adl/toy_data.hpp"

using namespace adl;
using namespace adl::data;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("adl_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<ImageSample> plain_normals(std::size_t n, int size = 16) {
  std::vector<ImageSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    ImageSample s;
    s.image = torch::full({3, size, size}, 0.01 * static_cast<double>(i % 90));
    s.gt_mask = torch::zeros({size, size});
    s.source = "normal_" + std::to_string(i);
    out.push_back(s);
  }
  return out;
}

std::vector<ImageSample> plain_anomalies(std::size_t n, int size = 16) {
  auto out = plain_normals(n, size);
  for (auto& s : out) {
    s.y_true = 1;
    s.image = torch::rand({3, size, size});
    s.source = "anomaly_" + s.source;
  }
  return out;
}

std::shared_ptr<const synth::PseudoAnomalySynth> toy_synth(int size) {
  auto corpus = std::make_shared<const synth::TextureCorpus>(
      synth::TextureCorpus::from_images(make_toy_textures(4, size, 1)));
  return std::make_shared<const synth::PseudoAnomalySynth>(synth::BlendSpec{}, corpus);
}

}  // namespace

TEST(LoadCategory, MvtecLayoutRoundTrip) {
  auto root = fresh_dir("mvtec");
  ToySpec spec;
  spec.image_size = 32;
  spec.n_train = 6;
  spec.n_test_normal = 3;
  spec.n_test_anomalous = 4;
  write_toy_dataset(root, "widget", spec);
  const ImageGeometry g{32, 32};
  auto a = load_category(root, DatasetKind::mvtec, "widget", g);
  EXPECT_EQ(a.train_normals.size(), 6u);
  EXPECT_EQ(a.test_normals.size(), 3u);
  EXPECT_EQ(a.test_anomalies.size(), 4u);
  for (const auto& s : a.test_anomalies) {
    EXPECT_EQ(s.y_true, 1);
    EXPECT_GT(s.gt_mask.sum().item<double>(), 0.0);
  }
  for (const auto& s : a.train_normals) EXPECT_EQ(s.image.sizes(), (std::vector<int64_t>{3, 32, 32}));
  auto b = load_category(root, DatasetKind::mvtec, "widget", g);
  for (std::size_t i = 0; i < a.train_normals.size(); ++i) {
    EXPECT_EQ(a.train_normals[i].source, b.train_normals[i].source);
    EXPECT_TRUE(torch::equal(a.train_normals[i].image, b.train_normals[i].image));
  }
}

TEST(LoadCategory, ResizeThenCenterCrop) {
  auto root = fresh_dir("mvtec_crop");
  ToySpec spec;
  spec.image_size = 64;
  spec.n_train = 2;
  spec.n_test_normal = 1;
  spec.n_test_anomalous = 1;
  write_toy_dataset(root, "c", spec);
  auto data = load_category(root, DatasetKind::mvtec, "c", ImageGeometry{40, 32});
  EXPECT_EQ(data.train_normals[0].image.sizes(), (std::vector<int64_t>{3, 32, 32}));
  EXPECT_EQ(data.test_anomalies[0].gt_mask.sizes(), (std::vector<int64_t>{32, 32}));
}

TEST(LoadCategory, MissingOrEmptyIsConfigError) {
  auto root = fresh_dir("mvtec_empty");
  EXPECT_THROW(load_category(root, DatasetKind::mvtec, "nothing", ImageGeometry{}), ConfigError);
  fs::create_directories(root / "empty" / "train" / "good");
  fs::create_directories(root / "empty" / "test" / "good");
  EXPECT_THROW(load_category(root, DatasetKind::mvtec, "empty", ImageGeometry{}), ConfigError);
  try {
    load_category(root, DatasetKind::mvtec, "nothing", ImageGeometry{});
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("train/good"), std::string::npos);
  }
}

TEST(LoadCategory, VisaSplitCsv) {
  auto root = fresh_dir("visa");
  fs::create_directories(root / "candle" / "Data" / "Images" / "Normal");
  fs::create_directories(root / "candle" / "Data" / "Images" / "Anomaly");
  fs::create_directories(root / "candle" / "Data" / "Masks" / "Anomaly");
  fs::create_directories(root / "split_csv");
  std::ofstream csv(root / "split_csv" / "1cls.csv");
  csv << "object,split,label,image,mask\n";
  for (int i = 0; i < 3; ++i) {
    const std::string name = "candle/Data/Images/Normal/" + std::to_string(i) + ".png";
    save_png(root / name, torch::rand({3, 20, 20}));
    csv << "candle," << (i < 2 ? "train" : "test") << ",normal," << name << ",\n";
  }
  const std::string bad = "candle/Data/Images/Anomaly/9.png";
  const std::string mask = "candle/Data/Masks/Anomaly/9.png";
  save_png(root / bad, torch::rand({3, 20, 20}));
  save_png(root / mask, torch::ones({20, 20}));
  csv << "candle,test,anomaly," << bad << "," << mask << "\n";
  csv << "other,train,normal,x.png,\n";
  csv.close();
  auto data = load_category(root, DatasetKind::visa, "candle", ImageGeometry{16, 16});
  EXPECT_EQ(data.train_normals.size(), 2u);
  EXPECT_EQ(data.test_normals.size(), 1u);
  ASSERT_EQ(data.test_anomalies.size(), 1u);
  EXPECT_EQ(data.test_anomalies[0].gt_mask.sum().item<double>(), 256.0);
  EXPECT_THROW(load_category(root, DatasetKind::visa, "missing", ImageGeometry{16, 16}), ConfigError);
}

TEST(Contamination, ZeroEpsilonIsIdentity) {
  auto normals = plain_normals(20);
  auto set = inject_contamination(normals, plain_anomalies(5), {0.0, 0.1, 3});
  ASSERT_EQ(set.samples.size(), 20u);
  EXPECT_EQ(set.n_disguised, 0u);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_TRUE(torch::equal(set.samples[i].image, normals[i].image));
}

TEST(Contamination, CountsAndLabelAudit) {
  auto normals = plain_normals(200);
  auto anomalies = plain_anomalies(30);
  auto set = inject_contamination(normals, anomalies, {0.1, 0.1, 3});
  int disguised = 0, clean = 0;
  std::set<std::string> sources;
  for (const auto& s : set.samples) {
    EXPECT_EQ(s.y_contaminated, 0);
    EXPECT_EQ(s.gt_mask.sum().item<double>(), 0.0);
    if (s.y_true == 1) {
      ++disguised;
      sources.insert(s.source);
      EXPECT_GE(s.image.min().item<double>(), 0.0);
      EXPECT_LE(s.image.max().item<double>(), 1.0);
    } else {
      ++clean;
    }
  }
  EXPECT_EQ(disguised, 20);
  EXPECT_EQ(clean, 180);
  EXPECT_EQ(sources.size(), 20u);  // without replacement
  EXPECT_TRUE(set.overlaps_test_set);
  EXPECT_EQ(contamination_count(100, 0.29), 29u);
}

TEST(Contamination, DisguisedDifferFromOriginals) {
  auto anomalies = plain_anomalies(4);
  auto set = inject_contamination(plain_normals(40), anomalies, {0.25, 0.1, 9});
  int seen = 0;
  for (const auto& s : set.samples) {
    if (s.y_true != 1) continue;
    ++seen;
    bool matches_an_origin_exactly = false;
    for (const auto& a : anomalies) matches_an_origin_exactly |= torch::equal(a.image, s.image);
    EXPECT_FALSE(matches_an_origin_exactly);
  }
  EXPECT_EQ(seen, 10);  // more than the pool: drawn with replacement
}

TEST(Contamination, DeterministicManifestAndErrors) {
  auto normals = plain_normals(50);
  auto anomalies = plain_anomalies(10);
  auto a = inject_contamination(normals, anomalies, {0.2, 0.1, 4});
  auto b = inject_contamination(normals, anomalies, {0.2, 0.1, 4});
  for (std::size_t i = 0; i < 50; ++i) EXPECT_TRUE(torch::equal(a.samples[i].image, b.samples[i].image));
  EXPECT_EQ(a.manifest_json({0.2, 0.1, 4}), b.manifest_json({0.2, 0.1, 4}));
  auto j = a.manifest_json({0.2, 0.1, 4});
  EXPECT_EQ(j["samples"].size(), 50u);
  EXPECT_EQ(j["n_disguised"], 10);
  EXPECT_THROW(inject_contamination(normals, anomalies, {0.5, 0.1, 4}), std::invalid_argument);
  EXPECT_THROW(inject_contamination(normals, {}, {0.2, 0.1, 4}), std::invalid_argument);
}

TEST(TrainingBatch, CompositionAndOffMaskIdentity) {
  const int size = 32;
  auto synth = toy_synth(size);
  Rng toy_rng(1);
  std::vector<ImageSample> x_n;
  for (int i = 0; i < 16; ++i) {
    ImageSample s;
    s.image = make_toy_normal(size, toy_rng);
    s.gt_mask = torch::zeros({size, size});
    x_n.push_back(s);
  }
  Rng rng(2);
  auto pure = make_training_batch(x_n, 0.0, *synth, rng);
  for (const auto& s : pure) EXPECT_FALSE(s.is_pseudo);

  auto batch = make_training_batch(x_n, 0.5, *synth, rng);
  ASSERT_EQ(batch.size(), 16u);
  int pseudo = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& s = batch[i];
    if (!s.is_pseudo) {
      EXPECT_EQ(s.y_contaminated, 0);
      EXPECT_EQ(s.gt_mask.sum().item<double>(), 0.0);
      continue;
    }
    ++pseudo;
    EXPECT_EQ(s.y_contaminated, 1);
    EXPECT_GT(s.gt_mask.sum().item<double>(), 0.0);
    auto off = (s.gt_mask == 0).unsqueeze(0).expand({3, size, size});
    EXPECT_TRUE(torch::equal(s.image.masked_select(off), x_n[i].image.masked_select(off)));
  }
  EXPECT_EQ(pseudo, 8);
  EXPECT_EQ(pseudo_count(16, 0.3), 4u);
  EXPECT_THROW(make_training_batch(std::span(x_n).first(1), 0.5, *synth, rng), std::invalid_argument);

  auto stacked = stack_batch(batch);
  EXPECT_EQ(stacked.images.sizes(), (std::vector<int64_t>{16, 3, size, size}));
  EXPECT_EQ(stacked.labels.sum().item<int64_t>(), 8);
  EXPECT_EQ(stacked.masks.sizes(), (std::vector<int64_t>{16, 1, size, size}));
}

TEST(ToyData, DeterministicAndDistinct) {
  ToySpec spec;
  spec.n_train = 4;
  spec.n_test_normal = 2;
  spec.n_test_anomalous = 2;
  auto a = make_toy_category(spec);
  auto b = make_toy_category(spec);
  EXPECT_TRUE(torch::equal(a.test_anomalies[1].image, b.test_anomalies[1].image));
  EXPECT_GT(a.test_anomalies[0].gt_mask.sum().item<double>(), 0.0);
  EXPECT_EQ(DatasetKind::toy, parse_dataset_kind("toy"));
  EXPECT_THROW(parse_dataset_kind("imagenet"), std::invalid_argument);
}
