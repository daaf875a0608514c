#pragma once

// Training objectives: reference-score statistics from the Gaussian prior,
// hard and soft deviation losses, binary cross-entropy against alternating
// hard / 2-means targets, and the focal segmentation loss.
//
// Scalar overloads exist for testing and offline recomputation; the tensor
// overloads are differentiable and return one value per sample.

#include <cstdint>
#include <span>
#include <vector>

#include <torch/types.h>

#include "adl/rng.hpp"

namespace adl::losses {

inline constexpr double kProbabilityClamp = 1e-7;

struct ReferenceStats {
  double mu_s = 0.0;
  double sigma_s = 1.0;
  int64_t m = 0;
  double prior_mu = 0.0;
  double prior_sigma = 1.0;
};

/// Mean and (sample, n-1) standard deviation of m draws from N(prior_mu, prior_sigma).
/// Throws std::invalid_argument for m < 2 or prior_sigma < 0 and
/// DegeneratePriorError when the draws have zero spread.
ReferenceStats sample_reference_stats(int64_t m, double prior_mu, double prior_sigma, Rng& rng);

double z_score(double psi_k, const ReferenceStats& stats);

/// (1 - y)|Z| + y * max(0, gamma - Z)
double deviation_loss(double psi_k, int y, const ReferenceStats& stats, double gamma);
/// (1 - p)|Z| + p * max(0, gamma - Z)
double soft_deviation_loss(double psi_k, double p, const ReferenceStats& stats, double gamma);
/// -(1 - y_hat) log(1 - p) - y_hat log(p), p clamped to [eps, 1 - eps].
double bce_loss(double p, int y_hat);

torch::Tensor deviation_loss(const torch::Tensor& psi_k, const torch::Tensor& y,
                             const ReferenceStats& stats, double gamma);
/// `p` is used as a label: callers pass detached probabilities.
torch::Tensor soft_deviation_loss(const torch::Tensor& psi_k, const torch::Tensor& p,
                                  const ReferenceStats& stats, double gamma);
torch::Tensor bce_loss(const torch::Tensor& p, const torch::Tensor& y_hat);

/// Mean per-pixel focal loss -(1 - p_t)^focal_gamma log(p_t) of one mask.
/// Shapes must match exactly.
double focal_seg_loss(const torch::Tensor& pred_mask, const torch::Tensor& gt_mask,
                      double focal_gamma = 2.0);
/// Batched version: pred/gt of shape [B, ...], returns the per-sample mean [B].
torch::Tensor focal_seg_loss_batch(const torch::Tensor& pred, const torch::Tensor& gt,
                                   double focal_gamma = 2.0);

/// Exact 1-D 2-means on the batch scores (best split of the sorted values).
/// Members of the higher-centroid cluster get 1, others 0. When no split
/// exists (fewer than two distinct scores) the labels are returned unchanged.
std::vector<int> kmeans_soft_targets(std::span<const double> scores, std::span<const int> labels);

}  // namespace adl::losses
