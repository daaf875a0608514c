#include "adl/data_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "adl/log.hpp"
#include <torch/torch.h>

#include "adl/errors.hpp"

namespace adl::data {
namespace fs = std::filesystem;

namespace {

constexpr const char* kMvtecLayout =
    "expected MVTec layout:\n"
    "  <root>/<category>/train/good/*.png\n"
    "  <root>/<category>/test/<defect>/*.png   (test/good holds normal test images)\n"
    "  <root>/<category>/ground_truth/<defect>/*_mask.png";

constexpr const char* kVisaLayout =
    "expected VisA layout:\n"
    "  <root>/split_csv/1cls.csv  (columns: object,split,label,image,mask)\n"
    "  <root>/<category>/Data/Images/{Normal,Anomaly}/*\n"
    "  <root>/<category>/Data/Masks/Anomaly/*";

std::vector<fs::path> sorted_images(const fs::path& dir) {
  std::vector<fs::path> files;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

ImageSample make_sample(const fs::path& path, int y_true, torch::Tensor mask,
                        const ImageGeometry& geometry) {
  ImageSample s;
  s.image = load_image(path, geometry);
  s.y_true = y_true;
  s.gt_mask = mask.defined() ? std::move(mask) : torch::zeros({geometry.crop, geometry.crop});
  s.source = path.string();
  return s;
}

CategoryData load_mvtec(const fs::path& root, const std::string& category,
                        const ImageGeometry& geometry) {
  const fs::path base = root / category;
  const fs::path train_dir = base / "train" / "good";
  const fs::path test_dir = base / "test";
  std::error_code ec;
  if (!fs::is_directory(train_dir, ec) || !fs::is_directory(test_dir, ec)) {
    throw ConfigError("missing directories under " + base.string() + "\n" + kMvtecLayout);
  }

  CategoryData data{"mvtec", category, {}, {}, {}};
  for (const auto& path : sorted_images(train_dir)) {
    data.train_normals.push_back(make_sample(path, 0, {}, geometry));
  }

  std::vector<fs::path> defect_dirs;
  for (const auto& entry : fs::directory_iterator(test_dir)) {
    if (entry.is_directory()) defect_dirs.push_back(entry.path());
  }
  std::sort(defect_dirs.begin(), defect_dirs.end());
  for (const auto& dir : defect_dirs) {
    const bool normal = dir.filename() == "good";
    for (const auto& path : sorted_images(dir)) {
      if (normal) {
        data.test_normals.push_back(make_sample(path, 0, {}, geometry));
        continue;
      }
      const fs::path mask_path =
          base / "ground_truth" / dir.filename() / (path.stem().string() + "_mask.png");
      torch::Tensor mask;
      if (fs::exists(mask_path)) {
        mask = load_mask(mask_path, geometry);
      } else {
        logging::warn("no ground-truth mask for {}", path.string());
      }
      data.test_anomalies.push_back(make_sample(path, 1, mask, geometry));
    }
  }

  if (data.train_normals.empty() || data.test_normals.empty() || data.test_anomalies.empty()) {
    throw ConfigError("category " + category + " has an empty split under " + base.string() +
                      "\n" + kMvtecLayout);
  }
  return data;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream stream(line);
  std::string field;
  while (std::getline(stream, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    fields.push_back(field);
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

CategoryData load_visa(const fs::path& root, const std::string& category,
                       const ImageGeometry& geometry) {
  const fs::path csv_path = root / "split_csv" / "1cls.csv";
  std::ifstream csv(csv_path);
  if (!csv) throw ConfigError("cannot open " + csv_path.string() + "\n" + kVisaLayout);

  std::string line;
  std::getline(csv, line);
  const auto header = split_csv_line(line);
  auto column = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("VisA split csv lacks column '" + name + "'\n" + kVisaLayout);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_object = column("object");
  const std::size_t c_split = column("split");
  const std::size_t c_label = column("label");
  const std::size_t c_image = column("image");
  const std::size_t c_mask = column("mask");

  struct Row {
    std::string split, label, image, mask;
  };
  std::vector<Row> rows;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    f.resize(std::max(f.size(), header.size()));
    if (f[c_object] != category) continue;
    rows.push_back({f[c_split], f[c_label], f[c_image], f[c_mask]});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.image < b.image; });

  CategoryData data{"visa", category, {}, {}, {}};
  for (const auto& row : rows) {
    const bool anomalous = row.label == "anomaly";
    const fs::path image_path = root / row.image;
    if (!fs::exists(image_path)) {
      throw ConfigError("VisA image listed in split csv is missing: " + image_path.string());
    }
    torch::Tensor mask;
    if (anomalous && !row.mask.empty() && fs::exists(root / row.mask)) {
      mask = load_mask(root / row.mask, geometry);
    }
    auto sample = make_sample(image_path, anomalous ? 1 : 0, mask, geometry);
    if (row.split == "train") {
      if (anomalous) continue;  // the training split is nominally clean
      data.train_normals.push_back(std::move(sample));
    } else if (anomalous) {
      data.test_anomalies.push_back(std::move(sample));
    } else {
      data.test_normals.push_back(std::move(sample));
    }
  }
  if (data.train_normals.empty() || data.test_normals.empty() || data.test_anomalies.empty()) {
    throw ConfigError("VisA category " + category + " has an empty split\n" + kVisaLayout);
  }
  return data;
}

}  // namespace

DatasetKind parse_dataset_kind(const std::string& name) {
  if (name == "mvtec") return DatasetKind::mvtec;
  if (name == "visa") return DatasetKind::visa;
  if (name == "toy") return DatasetKind::toy;
  throw std::invalid_argument("unknown dataset '" + name + "' (expected mvtec, visa or toy)");
}

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::mvtec: return "mvtec";
    case DatasetKind::visa: return "visa";
    case DatasetKind::toy: return "toy";
  }
  return "unknown";
}

CategoryData load_category(const fs::path& root, DatasetKind kind, const std::string& category,
                           const ImageGeometry& geometry) {
  switch (kind) {
    case DatasetKind::mvtec:
    case DatasetKind::toy:  // written to disk in the MVTec layout
      return load_mvtec(root, category, geometry);
    case DatasetKind::visa:
      return load_visa(root, category, geometry);
  }
  throw std::invalid_argument("unknown dataset kind");
}

void ContaminationSpec::validate() const {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("contamination ratio must be >= 0");
  if (epsilon >= 0.5) {
    throw std::invalid_argument("contamination ratio must be < 0.5 (majority-anomaly regime)");
  }
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise sigma must be >= 0");
}

std::size_t contamination_count(std::size_t n, double epsilon) {
  return static_cast<std::size_t>(std::floor(epsilon * static_cast<double>(n) + 1e-9));
}

nlohmann::json ContaminatedSet::manifest_json(const ContaminationSpec& spec) const {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : manifest) {
    entries.push_back({{"index", e.index},
                       {"source", e.source},
                       {"y_true", e.y_true},
                       {"disguised", e.disguised},
                       {"noise_seed", e.noise_seed}});
  }
  return {{"epsilon", spec.epsilon},
          {"noise_sigma", spec.noise_sigma},
          {"seed", spec.seed},
          {"n", samples.size()},
          {"n_disguised", n_disguised},
          {"overlaps_test_set", overlaps_test_set},
          {"samples", std::move(entries)}};
}

ContaminatedSet inject_contamination(const std::vector<ImageSample>& train_normals,
                                     const std::vector<ImageSample>& test_anomalies,
                                     const ContaminationSpec& spec) {
  spec.validate();
  const std::size_t n = train_normals.size();
  const std::size_t count = contamination_count(n, spec.epsilon);
  if (count > 0 && test_anomalies.empty()) {
    throw std::invalid_argument("contamination needs test anomalies to sample from");
  }

  ContaminatedSet out;
  out.samples = train_normals;
  for (auto& s : out.samples) {
    s.y_contaminated = 0;
    s.y_true = 0;
    s.is_pseudo = false;
  }

  Rng rng(spec.seed);
  std::vector<std::size_t> positions(n);
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  std::shuffle(positions.begin(), positions.end(), rng);
  positions.resize(count);
  std::sort(positions.begin(), positions.end());

  std::vector<std::size_t> picks;
  if (count <= test_anomalies.size()) {
    std::vector<std::size_t> pool(test_anomalies.size());
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    std::shuffle(pool.begin(), pool.end(), rng);
    picks.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count));
  } else {
    std::uniform_int_distribution<std::size_t> any(0, test_anomalies.size() - 1);
    for (std::size_t i = 0; i < count; ++i) picks.push_back(any(rng));
  }

  for (std::size_t k = 0; k < count; ++k) {
    const ImageSample& origin = test_anomalies[picks[k]];
    ImageSample disguised;
    disguised.noise_seed = derive_seed(spec.seed, k);
    auto gen = at::make_generator<at::CPUGeneratorImpl>(disguised.noise_seed);
    auto noise = at::normal(0.0, 1.0, origin.image.sizes(), gen).to(origin.image.scalar_type());
    disguised.image = (origin.image + spec.noise_sigma * noise).clamp(0.0, 1.0);
    disguised.y_contaminated = 0;
    disguised.y_true = 1;
    disguised.gt_mask = torch::zeros_like(origin.image.select(0, 0));
    disguised.source = origin.source;
    out.samples[positions[k]] = std::move(disguised);
  }
  out.n_disguised = count;
  out.overlaps_test_set = count > 0;
  if (out.overlaps_test_set) {
    logging::warn("{} disguised training anomalies were drawn from the (intact) test split", count);
  }

  out.manifest.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = out.samples[i];
    out.manifest.push_back({i, s.source, s.y_true, s.y_true == 1, s.noise_seed});
  }
  return out;
}

std::size_t pseudo_count(std::size_t batch_size, double pseudo_ratio) {
  return static_cast<std::size_t>(std::floor(pseudo_ratio * static_cast<double>(batch_size) + 1e-9));
}

std::vector<ImageSample> make_training_batch(std::span<const ImageSample> x_n_samples,
                                             double pseudo_ratio,
                                             const synth::PseudoAnomalySynth& synth, Rng& rng) {
  if (x_n_samples.size() < 2) throw std::invalid_argument("training batches need at least 2 samples");
  if (!(pseudo_ratio >= 0.0 && pseudo_ratio < 1.0)) {
    throw std::invalid_argument("pseudo_ratio must lie in [0, 1)");
  }
  const std::size_t b = x_n_samples.size();
  const std::size_t first_pseudo = b - pseudo_count(b, pseudo_ratio);

  std::vector<ImageSample> batch;
  batch.reserve(b);
  for (std::size_t i = 0; i < b; ++i) {
    ImageSample s = x_n_samples[i];
    s.y_contaminated = 0;
    s.is_pseudo = false;
    if (i >= first_pseudo) {
      auto pseudo = synth.make(s.image, rng);
      s.image = std::move(pseudo.image);
      s.gt_mask = pseudo.mask.values();
      s.y_contaminated = 1;
      s.y_true = 1;
      s.is_pseudo = true;
    } else {
      s.gt_mask = torch::zeros({s.image.size(1), s.image.size(2)}, torch::kFloat32);
    }
    batch.push_back(std::move(s));
  }
  return batch;
}

StackedBatch stack_batch(std::span<const ImageSample> batch) {
  std::vector<torch::Tensor> images;
  std::vector<torch::Tensor> masks;
  std::vector<int64_t> labels;
  for (const auto& s : batch) {
    images.push_back(s.image);
    masks.push_back(s.gt_mask.to(torch::kFloat32).unsqueeze(0));
    labels.push_back(s.y_contaminated);
  }
  return {torch::stack(images), torch::tensor(labels, torch::kInt64), torch::stack(masks)};
}

}  // namespace adl::data
