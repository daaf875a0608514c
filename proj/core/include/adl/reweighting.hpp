#pragma once

// Per-minibatch instance importance weights in closed form.
//
// Each formula is the minimizer over the probability simplex of
//   sum_i w_i L_i + eta * Div(w, u),   u uniform,
// where the divergence budget is never set directly: lambda parameterizes the
// solution (for KL it is eta itself, for reverse-KL and alpha it fixes the
// normalization multiplier).

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <torch/types.h>

namespace adl {

enum class Divergence { kl, reverse_kl, alpha };

std::string to_string(Divergence kind);
/// Accepts "kl", "rkl" / "reverse_kl", "alpha". Throws std::invalid_argument otherwise.
Divergence parse_divergence(const std::string& name);

struct DivergenceSpec {
  Divergence kind = Divergence::alpha;
  double alpha = 0.1;
  double lambda = 0.1;

  /// lambda > 0; for kind == alpha, alpha must not be 0 or 1.
  void validate() const;
};

/// Nonnegative weights summing to one.
class WeightVector {
 public:
  WeightVector() = default;
  /// Throws std::invalid_argument if entries are negative, non-finite or do
  /// not sum to one within 1e-9.
  explicit WeightVector(std::vector<double> weights);

  static WeightVector uniform(std::size_t n);

  std::span<const double> values() const { return weights_; }
  std::size_t size() const { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_[i]; }
  double max() const;
  bool is_uniform() const;

 private:
  std::vector<double> weights_;
};

/// w_i ∝ exp(-L_i / lambda), evaluated with the maximum shifted out.
WeightVector weights_kl(std::span<const double> losses, double lambda);
/// w_i ∝ 1 / (L_i + lambda). Throws DomainError if any L_i + lambda <= 0.
WeightVector weights_reverse_kl(std::span<const double> losses, double lambda);
/// w_i ∝ [(1 - alpha) L_i + lambda]_+^{1 / (alpha - 1)}, evaluated in log space.
/// alpha in {0, 1} is rejected (use the KL forms). If every bracket clamps to
/// zero the result is uniform and a warning is logged.
WeightVector weights_alpha(std::span<const double> losses, double alpha, double lambda);

WeightVector compute_weights(std::span<const double> losses, const DivergenceSpec& spec);

struct ReweightedObjective {
  torch::Tensor loss;  // scalar, differentiable w.r.t. the loss vectors only
  WeightVector w1;     // applied to l_soft
  WeightVector w2;     // applied to l_bce
};

/// sum_i w1_i l_soft_i + w2_i l_bce_i + mean_i l_seg_i with w1, w2 computed
/// from the detached loss values.
ReweightedObjective reweighted_objective(const torch::Tensor& l_soft, const torch::Tensor& l_bce,
                                         const torch::Tensor& l_seg, const DivergenceSpec& spec);

/// Same combination with caller-supplied weights (uniform during burn-in).
torch::Tensor combine_losses(const torch::Tensor& l_soft, const torch::Tensor& l_bce,
                             const torch::Tensor& l_seg, const WeightVector& w1,
                             const WeightVector& w2);

/// Plain double evaluation of the combined objective, used to audit logs.
double combined_objective_value(std::span<const double> l_soft, std::span<const double> l_bce,
                                std::span<const double> l_seg, const WeightVector& w1,
                                const WeightVector& w2);

std::vector<double> to_vector(const torch::Tensor& values);

}  // namespace adl
