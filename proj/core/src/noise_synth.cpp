#include "adl/noise_synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "adl/log.hpp"
#include <torch/torch.h>

#include "adl/errors.hpp"

namespace adl::synth {

AnomalyMask::AnomalyMask(torch::Tensor values) : values_(std::move(values)) {
  if (values_.dim() != 2) throw std::invalid_argument("anomaly mask must be 2-D");
  if (!values_.is_floating_point()) values_ = values_.to(torch::kFloat32);
  if (values_.numel() > 0 && !((values_ == 0) | (values_ == 1)).all().item<bool>()) {
    throw std::invalid_argument("anomaly mask entries must be exactly 0 or 1");
  }
}

AnomalyMask AnomalyMask::zeros(int64_t height, int64_t width) {
  return AnomalyMask(torch::zeros({height, width}, torch::kFloat32));
}

double AnomalyMask::coverage() const {
  if (values_.numel() == 0) return 0.0;
  return values_.to(torch::kFloat64).mean().item<double>();
}

bool AnomalyMask::any() const { return values_.numel() > 0 && values_.any().item<bool>(); }

void BlendSpec::validate() const {
  if (!(beta_min >= 0.1 && beta_min <= beta_max && beta_max <= 1.0)) {
    throw std::invalid_argument("beta range must satisfy 0.1 <= beta_min <= beta_max <= 1");
  }
  if (perlin_periods.empty()) throw std::invalid_argument("perlin_periods must be nonempty");
  for (int p : perlin_periods) {
    if (p < 1) throw std::invalid_argument("perlin periods must be >= 1");
  }
}

torch::Tensor perlin_noise(int64_t height, int64_t width, int period_y, int period_x, Rng& rng) {
  if (height <= 0 || width <= 0) throw std::invalid_argument("perlin noise needs positive size");
  if (period_y < 1 || period_x < 1) throw std::invalid_argument("perlin periods must be >= 1");

  const int gy = period_y + 1;
  const int gx = period_x + 1;
  std::vector<double> grad_x(static_cast<std::size_t>(gy * gx));
  std::vector<double> grad_y(grad_x.size());
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  for (std::size_t i = 0; i < grad_x.size(); ++i) {
    const double a = angle(rng);
    grad_x[i] = std::cos(a);
    grad_y[i] = std::sin(a);
  }

  auto fade = [](double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); };
  auto corner = [&](int cy, int cx, double dy, double dx) {
    const std::size_t k = static_cast<std::size_t>(cy * gx + cx);
    return grad_x[k] * dx + grad_y[k] * dy;
  };

  auto out = torch::empty({height, width}, torch::kFloat64);
  auto acc = out.accessor<double, 2>();
  const double half_range = std::numbers::sqrt2 / 2.0;
  for (int64_t i = 0; i < height; ++i) {
    const double y = static_cast<double>(i) * period_y / static_cast<double>(height);
    const int cy = static_cast<int>(y);
    const double fy = y - cy;
    const double sy = fade(fy);
    for (int64_t j = 0; j < width; ++j) {
      const double x = static_cast<double>(j) * period_x / static_cast<double>(width);
      const int cx = static_cast<int>(x);
      const double fx = x - cx;
      const double sx = fade(fx);
      const double n00 = corner(cy, cx, fy, fx);
      const double n01 = corner(cy, cx + 1, fy, fx - 1.0);
      const double n10 = corner(cy + 1, cx, fy - 1.0, fx);
      const double n11 = corner(cy + 1, cx + 1, fy - 1.0, fx - 1.0);
      const double top = n00 + sx * (n01 - n00);
      const double bottom = n10 + sx * (n11 - n10);
      const double value = top + sy * (bottom - top);
      acc[i][j] = std::clamp(value / (2.0 * half_range) + 0.5, 0.0, 1.0);
    }
  }
  return out;
}

AnomalyMask generate_perlin_mask(int64_t height, int64_t width, Rng& rng, const BlendSpec& spec) {
  if (height <= 0 || width <= 0) {
    throw std::invalid_argument("generate_perlin_mask: height and width must be positive");
  }
  spec.validate();
  std::uniform_int_distribution<std::size_t> pick(0, spec.perlin_periods.size() - 1);
  const int period_y = spec.perlin_periods[pick(rng)];
  const int period_x = spec.perlin_periods[pick(rng)];
  auto noise = perlin_noise(height, width, period_y, period_x, rng);
  return AnomalyMask((noise > spec.binarize_threshold).to(torch::kFloat32));
}

torch::Tensor blend_pseudo_anomaly(const torch::Tensor& normal, const torch::Tensor& source,
                                   const AnomalyMask& mask, double beta) {
  if (normal.dim() != 3 || source.sizes() != normal.sizes()) {
    throw std::invalid_argument("blend: normal and source must both be [C,H,W] of equal shape");
  }
  if (normal.size(1) != mask.height() || normal.size(2) != mask.width()) {
    throw std::invalid_argument("blend: mask size differs from image size");
  }
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("blend: beta must be in [0,1]");
  const auto m = mask.values().to(normal.scalar_type()).unsqueeze(0);
  const auto src = source.to(normal.scalar_type());
  return (1.0 - m) * normal + beta * (m * src) + (1.0 - beta) * (m * normal);
}

TextureCorpus TextureCorpus::from_directory(const std::filesystem::path& dir,
                                            ImageGeometry geometry) {
  TextureCorpus corpus;
  corpus.geometry_ = geometry;
  std::error_code ec;
  if (std::filesystem::is_directory(dir, ec)) {
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
      if (entry.is_regular_file() && is_image_file(entry.path())) {
        corpus.paths_.push_back(entry.path());
      }
    }
  }
  if (corpus.paths_.empty()) {
    throw ConfigError("texture corpus is empty or missing: " + dir.string());
  }
  std::sort(corpus.paths_.begin(), corpus.paths_.end());
  corpus.unreadable_.assign(corpus.paths_.size(), false);
  return corpus;
}

TextureCorpus TextureCorpus::from_images(std::vector<torch::Tensor> images) {
  if (images.empty()) throw ConfigError("texture corpus is empty");
  TextureCorpus corpus;
  corpus.images_ = std::move(images);
  return corpus;
}

std::size_t TextureCorpus::size() const {
  return images_.empty() ? paths_.size() : images_.size();
}

std::size_t TextureCorpus::draw_index(Rng& rng) const {
  std::uniform_int_distribution<std::size_t> pick(0, size() - 1);
  return pick(rng);
}

torch::Tensor TextureCorpus::sample(Rng& rng) const {
  if (!images_.empty()) return images_[draw_index(rng)];
  while (true) {
    if (std::all_of(unreadable_.begin(), unreadable_.end(), [](bool b) { return b; })) {
      throw ConfigError("no readable image left in texture corpus");
    }
    const std::size_t index = draw_index(rng);
    if (unreadable_[index]) continue;
    if (auto image = try_load_image(paths_[index], geometry_)) return *image;
    logging::warn("skipping unreadable texture {}", paths_[index].string());
    unreadable_[index] = true;
  }
}

torch::Tensor sample_source_image(const TextureCorpus& corpus, Rng& rng) {
  return corpus.sample(rng);
}

PseudoAnomalySynth::PseudoAnomalySynth(BlendSpec spec, std::shared_ptr<const TextureCorpus> corpus)
    : spec_(std::move(spec)), corpus_(std::move(corpus)) {
  spec_.validate();
  if (!corpus_) throw ConfigError("pseudo-anomaly synthesis needs a texture corpus");
}

PseudoAnomaly PseudoAnomalySynth::make(const torch::Tensor& normal, Rng& rng) const {
  const int64_t h = normal.size(1);
  const int64_t w = normal.size(2);

  // An empty mask would yield an exact copy labelled anomalous; redraw a few times.
  AnomalyMask mask = generate_perlin_mask(h, w, rng, spec_);
  for (int attempt = 0; attempt < 8 && !mask.any(); ++attempt) {
    mask = generate_perlin_mask(h, w, rng, spec_);
  }

  torch::Tensor source = sample_source_image(*corpus_, rng);
  if (spec_.augment_source) {
    std::uniform_int_distribution<int> quarter(0, 3);
    std::bernoulli_distribution flip(0.5);
    const int turns = quarter(rng);
    const bool do_flip = flip(rng);
    if (source.size(1) == source.size(2) && turns > 0) source = torch::rot90(source, turns, {1, 2});
    if (do_flip) source = torch::flip(source, {2});
  }
  source = resize_image(source.to(normal.scalar_type()), static_cast<int>(h), static_cast<int>(w));

  std::uniform_real_distribution<double> beta_dist(spec_.beta_min, spec_.beta_max);
  const double beta = spec_.beta_min == spec_.beta_max ? spec_.beta_min : beta_dist(rng);
  auto image = blend_pseudo_anomaly(normal, source, mask, beta);
  return {std::move(image), std::move(mask), beta};
}

}  // namespace adl::synth
