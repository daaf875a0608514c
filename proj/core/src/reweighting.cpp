#include "adl/reweighting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "adl/log.hpp"
#include <torch/torch.h>

#include "adl/errors.hpp"

namespace adl {
namespace {

void require_finite(std::span<const double> losses) {
  for (double l : losses) {
    if (!std::isfinite(l)) throw std::invalid_argument("reweighting: losses must be finite");
  }
}

WeightVector normalize(std::vector<double> raw) {
  const double total = std::accumulate(raw.begin(), raw.end(), 0.0);
  for (double& w : raw) w /= total;
  return WeightVector(std::move(raw));
}

// exp(log_w - max) normalized; entries at -inf get zero weight.
WeightVector normalize_log(const std::vector<double>& log_w) {
  const double top = *std::max_element(log_w.begin(), log_w.end());
  std::vector<double> raw(log_w.size());
  std::transform(log_w.begin(), log_w.end(), raw.begin(),
                 [top](double v) { return std::exp(v - top); });
  return normalize(std::move(raw));
}

}  // namespace

std::string to_string(Divergence kind) {
  switch (kind) {
    case Divergence::kl: return "kl";
    case Divergence::reverse_kl: return "rkl";
    case Divergence::alpha: return "alpha";
  }
  return "unknown";
}

Divergence parse_divergence(const std::string& name) {
  if (name == "kl") return Divergence::kl;
  if (name == "rkl" || name == "reverse_kl") return Divergence::reverse_kl;
  if (name == "alpha") return Divergence::alpha;
  throw std::invalid_argument("unknown divergence '" + name + "' (expected kl, rkl or alpha)");
}

void DivergenceSpec::validate() const {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (kind == Divergence::alpha && (alpha == 0.0 || alpha == 1.0)) {
    throw std::invalid_argument("alpha in {0, 1} is reverse-KL / KL; use those divergences");
  }
  if (!std::isfinite(alpha)) throw std::invalid_argument("alpha must be finite");
}

WeightVector::WeightVector(std::vector<double> weights) : weights_(std::move(weights)) {
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("weights must be finite and nonnegative");
    }
    total += w;
  }
  if (!weights_.empty() && std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("weights must sum to one");
  }
}

WeightVector WeightVector::uniform(std::size_t n) {
  if (n == 0) return WeightVector();
  return WeightVector(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

double WeightVector::max() const {
  return weights_.empty() ? 0.0 : *std::max_element(weights_.begin(), weights_.end());
}

bool WeightVector::is_uniform() const {
  return std::all_of(weights_.begin(), weights_.end(),
                     [this](double w) { return w == weights_.front(); });
}

WeightVector weights_kl(std::span<const double> losses, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("weights_kl: lambda must be positive");
  require_finite(losses);
  if (losses.empty()) return WeightVector();
  std::vector<double> log_w(losses.size());
  std::transform(losses.begin(), losses.end(), log_w.begin(),
                 [lambda](double l) { return -l / lambda; });
  return normalize_log(log_w);
}

WeightVector weights_reverse_kl(std::span<const double> losses, double lambda) {
  require_finite(losses);
  if (losses.empty()) return WeightVector();
  std::vector<double> raw(losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const double shifted = losses[i] + lambda;
    if (!(shifted > 0.0)) throw DomainError("weights_reverse_kl: requires L_i + lambda > 0");
    raw[i] = 1.0 / shifted;
  }
  return normalize(std::move(raw));
}

WeightVector weights_alpha(std::span<const double> losses, double alpha, double lambda) {
  if (alpha == 0.0 || alpha == 1.0) {
    throw std::invalid_argument("weights_alpha: alpha in {0, 1}; use weights_reverse_kl / weights_kl");
  }
  require_finite(losses);
  const std::size_t n = losses.size();
  if (n == 0) return WeightVector();

  const double exponent = 1.0 / (alpha - 1.0);
  std::vector<double> bracket(n);
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    bracket[i] = (1.0 - alpha) * losses[i] + lambda;
    if (!(bracket[i] > 0.0)) ++clamped;
  }
  if (clamped == n) {
    logging::warn("alpha weights: every bracket clamps to zero; using uniform weights");
    return WeightVector::uniform(n);
  }
  if (clamped > 0 && exponent < 0.0) {
    // 0^(negative) diverges: the clamped entries take all the mass, evenly.
    logging::warn("alpha weights: {} bracket(s) clamp to zero with alpha < 1; mass goes to them", clamped);
    std::vector<double> raw(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) raw[i] = bracket[i] > 0.0 ? 0.0 : 1.0;
    return normalize(std::move(raw));
  }
  std::vector<double> log_w(n);
  for (std::size_t i = 0; i < n; ++i) {
    log_w[i] = bracket[i] > 0.0 ? exponent * std::log(bracket[i])
                                : -std::numeric_limits<double>::infinity();
  }
  return normalize_log(log_w);
}

WeightVector compute_weights(std::span<const double> losses, const DivergenceSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case Divergence::kl: return weights_kl(losses, spec.lambda);
    case Divergence::reverse_kl: return weights_reverse_kl(losses, spec.lambda);
    case Divergence::alpha: return weights_alpha(losses, spec.alpha, spec.lambda);
  }
  throw std::invalid_argument("unknown divergence kind");
}

std::vector<double> to_vector(const torch::Tensor& values) {
  auto flat = values.detach().to(torch::kCPU, torch::kFloat64).contiguous().flatten();
  return {flat.data_ptr<double>(), flat.data_ptr<double>() + flat.numel()};
}

torch::Tensor combine_losses(const torch::Tensor& l_soft, const torch::Tensor& l_bce,
                             const torch::Tensor& l_seg, const WeightVector& w1,
                             const WeightVector& w2) {
  const auto n = static_cast<std::size_t>(l_soft.numel());
  if (static_cast<std::size_t>(l_bce.numel()) != n || static_cast<std::size_t>(l_seg.numel()) != n ||
      w1.size() != n || w2.size() != n) {
    throw std::invalid_argument("combine_losses: all vectors must have the batch length");
  }
  const auto opts = torch::TensorOptions().dtype(l_soft.scalar_type());
  const auto w1_t = torch::tensor(std::vector<double>(w1.values().begin(), w1.values().end()),
                                  torch::kFloat64).to(opts.dtype());
  const auto w2_t = torch::tensor(std::vector<double>(w2.values().begin(), w2.values().end()),
                                  torch::kFloat64).to(opts.dtype());
  return (w1_t * l_soft.flatten()).sum() + (w2_t * l_bce.flatten()).sum() + l_seg.flatten().mean();
}

ReweightedObjective reweighted_objective(const torch::Tensor& l_soft, const torch::Tensor& l_bce,
                                         const torch::Tensor& l_seg, const DivergenceSpec& spec) {
  if (l_soft.numel() != l_bce.numel() || l_soft.numel() != l_seg.numel()) {
    throw std::invalid_argument("reweighted_objective: loss vectors differ in length");
  }
  auto w1 = compute_weights(to_vector(l_soft), spec);
  auto w2 = compute_weights(to_vector(l_bce), spec);
  auto loss = combine_losses(l_soft, l_bce, l_seg, w1, w2);
  return {std::move(loss), std::move(w1), std::move(w2)};
}

double combined_objective_value(std::span<const double> l_soft, std::span<const double> l_bce,
                                std::span<const double> l_seg, const WeightVector& w1,
                                const WeightVector& w2) {
  const std::size_t n = l_soft.size();
  if (l_bce.size() != n || l_seg.size() != n || w1.size() != n || w2.size() != n || n == 0) {
    throw std::invalid_argument("combined_objective_value: length mismatch");
  }
  double total = 0.0;
  double seg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += w1[i] * l_soft[i] + w2[i] * l_bce[i];
    seg += l_seg[i];
  }
  return total + seg / static_cast<double>(n);
}

}  // namespace adl
