#include "adl/toy_data.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include <torch/torch.h>

#include "adl/image.hpp"

namespace adl::data {
namespace {

torch::Generator torch_gen(Rng& rng) {
  return at::make_generator<at::CPUGeneratorImpl>(rng());
}

std::string indexed_name(int index) {
  char buffer[16];
  std::snprintf(buffer, sizeof(buffer), "%03d.png", index);
  return buffer;
}

}  // namespace

torch::Tensor make_toy_normal(int size, Rng& rng) {
  std::uniform_real_distribution<double> jitter(-0.03, 0.03);
  auto gen = torch_gen(rng);
  const auto base = torch::tensor({0.55 + jitter(rng), 0.50 + jitter(rng), 0.45 + jitter(rng)})
                        .view({3, 1, 1});
  auto grain = 0.02 * at::normal(0.0, 1.0, {3, size, size}, gen);
  return (base + grain).clamp(0.0, 1.0).to(torch::kFloat32);
}

std::pair<torch::Tensor, torch::Tensor> make_toy_anomaly(int size, Rng& rng) {
  auto image = make_toy_normal(size, rng);
  auto mask = torch::zeros({size, size}, torch::kFloat32);
  std::uniform_int_distribution<int> blob_count(1, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto ys = torch::arange(size, torch::kFloat32).view({size, 1}).expand({size, size});
  const auto xs = torch::arange(size, torch::kFloat32).view({1, size}).expand({size, size});
  const int blobs = blob_count(rng);
  for (int b = 0; b < blobs; ++b) {
    const double cy = size * (0.15 + 0.7 * unit(rng));
    const double cx = size * (0.15 + 0.7 * unit(rng));
    const double ry = size * (0.06 + 0.10 * unit(rng));
    const double rx = size * (0.06 + 0.10 * unit(rng));
    const auto inside = ((ys - cy) / ry).pow(2) + ((xs - cx) / rx).pow(2) <= 1.0;
    // Dark or bright defect, clearly off the surface colour.
    const double level = unit(rng) < 0.5 ? 0.1 + 0.15 * unit(rng) : 0.85 + 0.1 * unit(rng);
    const auto colour = torch::tensor({level, level * (0.6 + 0.4 * unit(rng)), level}).view({3, 1, 1});
    image = torch::where(inside.unsqueeze(0), colour.expand_as(image), image);
    mask = torch::where(inside, torch::ones_like(mask), mask);
  }
  return {image.clamp(0.0, 1.0), mask};
}

CategoryData make_toy_category(const ToySpec& spec, const std::string& category) {
  Rng rng(spec.seed);
  CategoryData data{"toy", category, {}, {}, {}};
  auto normal_sample = [&](const std::string& id) {
    ImageSample s;
    s.image = make_toy_normal(spec.image_size, rng);
    s.gt_mask = torch::zeros({spec.image_size, spec.image_size}, torch::kFloat32);
    s.source = id;
    return s;
  };
  for (int i = 0; i < spec.n_train; ++i) {
    data.train_normals.push_back(normal_sample("toy/train/good/" + indexed_name(i)));
  }
  for (int i = 0; i < spec.n_test_normal; ++i) {
    data.test_normals.push_back(normal_sample("toy/test/good/" + indexed_name(i)));
  }
  for (int i = 0; i < spec.n_test_anomalous; ++i) {
    auto [image, mask] = make_toy_anomaly(spec.image_size, rng);
    ImageSample s;
    s.image = image;
    s.gt_mask = mask;
    s.y_true = 1;
    s.source = "toy/test/blob/" + indexed_name(i);
    data.test_anomalies.push_back(std::move(s));
  }
  return data;
}

std::vector<torch::Tensor> make_toy_textures(int count, int size, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto ys = torch::arange(size, torch::kFloat32).view({1, size, 1}).expand({1, size, size});
  const auto xs = torch::arange(size, torch::kFloat32).view({1, 1, size}).expand({1, size, size});
  std::vector<torch::Tensor> textures;
  for (int i = 0; i < count; ++i) {
    const auto a = torch::tensor({unit(rng), unit(rng), unit(rng)}, torch::kFloat32).view({3, 1, 1});
    const auto b = torch::tensor({unit(rng), unit(rng), unit(rng)}, torch::kFloat32).view({3, 1, 1});
    torch::Tensor t;
    switch (i % 4) {
      case 0: {  // oriented stripes
        const double theta = std::numbers::pi * unit(rng);
        const double freq = 2.0 * std::numbers::pi / (3.0 + 9.0 * unit(rng));
        const auto phase = torch::sin(freq * (std::cos(theta) * xs + std::sin(theta) * ys));
        t = a + (b - a) * (0.5 + 0.5 * phase);
        break;
      }
      case 1: {  // checkerboard
        const int cell = 2 + static_cast<int>(6 * unit(rng));
        const auto parity = ((ys / cell).floor() + (xs / cell).floor()).remainder(2.0);
        t = a + (b - a) * parity;
        break;
      }
      case 2: {  // speckle
        auto gen = torch_gen(rng);
        t = a + (b - a) * at::rand({1, size, size}, gen);
        break;
      }
      default: {  // radial rings
        const double cy = size * unit(rng);
        const double cx = size * unit(rng);
        const auto r = ((ys - cy).pow(2) + (xs - cx).pow(2)).sqrt();
        t = a + (b - a) * (0.5 + 0.5 * torch::cos(r / (1.0 + 3.0 * unit(rng))));
        break;
      }
    }
    textures.push_back(t.clamp(0.0, 1.0).contiguous());
  }
  return textures;
}

void write_toy_dataset(const std::filesystem::path& root, const std::string& category,
                       const ToySpec& spec) {
  const auto data = make_toy_category(spec, category);
  const auto base = root / category;
  for (std::size_t i = 0; i < data.train_normals.size(); ++i) {
    save_png(base / "train" / "good" / indexed_name(static_cast<int>(i)), data.train_normals[i].image);
  }
  for (std::size_t i = 0; i < data.test_normals.size(); ++i) {
    save_png(base / "test" / "good" / indexed_name(static_cast<int>(i)), data.test_normals[i].image);
  }
  for (std::size_t i = 0; i < data.test_anomalies.size(); ++i) {
    const std::string name = indexed_name(static_cast<int>(i));
    save_png(base / "test" / "blob" / name, data.test_anomalies[i].image);
    const std::string stem = std::filesystem::path(name).stem().string();
    save_png(base / "ground_truth" / "blob" / (stem + "_mask.png"), data.test_anomalies[i].gt_mask);
  }
}

void write_toy_textures(const std::filesystem::path& dir, int count, int size, std::uint64_t seed) {
  const auto textures = make_toy_textures(count, size, seed);
  for (std::size_t i = 0; i < textures.size(); ++i) {
    save_png(dir / indexed_name(static_cast<int>(i)), textures[i]);
  }
}

}  // namespace adl::data
