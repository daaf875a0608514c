#include "adl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <torch/torch.h>

#include "adl/errors.hpp"

namespace adl::losses {

ReferenceStats sample_reference_stats(int64_t m, double prior_mu, double prior_sigma, Rng& rng) {
  if (m < 2) throw std::invalid_argument("reference stats need m >= 2 draws");
  if (!(prior_sigma >= 0.0)) throw std::invalid_argument("prior sigma must be non-negative");

  std::normal_distribution<double> prior(prior_mu, prior_sigma > 0.0 ? prior_sigma : 1.0);
  double mean = 0.0;
  double m2 = 0.0;
  for (int64_t i = 0; i < m; ++i) {
    const double s = prior_sigma > 0.0 ? prior(rng) : prior_mu;
    const double delta = s - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (s - mean);
  }
  const double sigma = std::sqrt(m2 / static_cast<double>(m - 1));
  if (!(sigma > 0.0)) {
    throw DegeneratePriorError("reference scores have zero standard deviation");
  }
  return {mean, sigma, m, prior_mu, prior_sigma};
}

double z_score(double psi_k, const ReferenceStats& stats) {
  return (psi_k - stats.mu_s) / stats.sigma_s;
}

double deviation_loss(double psi_k, int y, const ReferenceStats& stats, double gamma) {
  return soft_deviation_loss(psi_k, y != 0 ? 1.0 : 0.0, stats, gamma);
}

double soft_deviation_loss(double psi_k, double p, const ReferenceStats& stats, double gamma) {
  const double z = z_score(psi_k, stats);
  return (1.0 - p) * std::abs(z) + p * std::max(0.0, gamma - z);
}

double bce_loss(double p, int y_hat) {
  const double q = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return y_hat != 0 ? -std::log(q) : -std::log(1.0 - q);
}

torch::Tensor soft_deviation_loss(const torch::Tensor& psi_k, const torch::Tensor& p,
                                  const ReferenceStats& stats, double gamma) {
  const auto z = (psi_k - stats.mu_s) / stats.sigma_s;
  const auto label = p.to(psi_k.scalar_type());
  return (1.0 - label) * z.abs() + label * torch::relu(gamma - z);
}

torch::Tensor deviation_loss(const torch::Tensor& psi_k, const torch::Tensor& y,
                             const ReferenceStats& stats, double gamma) {
  return soft_deviation_loss(psi_k, y, stats, gamma);
}

torch::Tensor bce_loss(const torch::Tensor& p, const torch::Tensor& y_hat) {
  const auto q = p.clamp(kProbabilityClamp, 1.0 - kProbabilityClamp);
  const auto y = y_hat.to(p.scalar_type());
  return -(1.0 - y) * torch::log(1.0 - q) - y * torch::log(q);
}

torch::Tensor focal_seg_loss_batch(const torch::Tensor& pred, const torch::Tensor& gt,
                                   double focal_gamma) {
  if (pred.sizes() != gt.sizes()) {
    throw std::invalid_argument("focal loss: prediction and mask shapes differ");
  }
  const auto y = gt.to(pred.scalar_type());
  const auto p_t = (y * pred + (1.0 - y) * (1.0 - pred)).clamp(kProbabilityClamp, 1.0);
  auto per_pixel = -torch::pow(1.0 - p_t, focal_gamma) * torch::log(p_t);
  if (per_pixel.dim() <= 1) return per_pixel.mean();
  return per_pixel.flatten(1).mean(1);
}

double focal_seg_loss(const torch::Tensor& pred_mask, const torch::Tensor& gt_mask,
                      double focal_gamma) {
  if (pred_mask.sizes() != gt_mask.sizes()) {
    throw std::invalid_argument("focal loss: prediction and mask shapes differ");
  }
  return focal_seg_loss_batch(pred_mask.to(torch::kFloat64).flatten().unsqueeze(0),
                              gt_mask.to(torch::kFloat64).flatten().unsqueeze(0), focal_gamma)
      .item<double>();
}

std::vector<int> kmeans_soft_targets(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("kmeans_soft_targets: scores and labels differ in length");
  }
  std::vector<int> fallback(labels.begin(), labels.end());
  const std::size_t n = scores.size();
  if (n < 2) return fallback;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Center first so the prefix-sum SSE does not lose precision on offset data.
  const double center = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(n);
  std::vector<double> sum(n + 1, 0.0);
  std::vector<double> sum_sq(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = scores[order[i]] - center;
    sum[i + 1] = sum[i] + v;
    sum_sq[i + 1] = sum_sq[i] + v * v;
  }
  auto sse = [&](std::size_t begin, std::size_t end) {
    const double count = static_cast<double>(end - begin);
    const double s = sum[end] - sum[begin];
    return (sum_sq[end] - sum_sq[begin]) - s * s / count;
  };

  std::size_t best_split = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < n; ++k) {
    if (!(scores[order[k - 1]] < scores[order[k]])) continue;  // equal scores share a cluster
    const double cost = sse(0, k) + sse(k, n);
    if (cost < best_cost) {
      best_cost = cost;
      best_split = k;
    }
  }
  if (best_split == 0) return fallback;

  std::vector<int> targets(n, 0);
  for (std::size_t i = best_split; i < n; ++i) targets[order[i]] = 1;
  return targets;
}

}  // namespace adl::losses
