#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <torch/torch.h>

#include "adl/errors.hpp"
#include "adl/reweighting.hpp"
#include "oracles.hpp"

using namespace adl;

namespace {

std::vector<double> vec(const WeightVector& w) { return {w.values().begin(), w.values().end()}; }

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void expect_on_simplex(const WeightVector& w) {
  double s = 0.0;
  for (double v : w.values()) {
    EXPECT_GE(v, 0.0);
    s += v;
  }
  EXPECT_NEAR(s, 1.0, 1e-9);
}

std::vector<double> random_losses(std::mt19937_64& rng, std::size_t n, double hi = 3.0) {
  std::uniform_real_distribution<double> u(0.0, hi);
  std::vector<double> L(n);
  for (auto& l : L) l = u(rng);
  return L;
}

}  // namespace

TEST(Weights, KlHandValue) {
  auto w = weights_kl(std::vector<double>{0.0, std::log(2.0)}, 1.0);
  EXPECT_NEAR(w[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(w[1], 1.0 / 3.0, 1e-12);
}

TEST(Weights, KlLargeTemperatureIsUniform) {
  auto w = weights_kl(std::vector<double>{0.0, 1.0, 5.0, 10.0}, 1e6);
  for (double v : w.values()) EXPECT_LT(std::abs(v - 0.25), 1e-5);
}

TEST(Weights, KlRejectsNonPositiveLambda) {
  const std::vector<double> L{1.0, 2.0};
  EXPECT_THROW(weights_kl(L, 0.0), std::invalid_argument);
  EXPECT_THROW(weights_kl(L, -1.0), std::invalid_argument);
}

TEST(Weights, KlSurvivesHugeLosses) {
  auto w = weights_kl(std::vector<double>{1e4, 1e4 + 1.0}, 0.01);
  expect_on_simplex(w);
  EXPECT_GT(w[0], 0.999);
}

TEST(Weights, ReverseKlHandValues) {
  auto a = weights_reverse_kl(std::vector<double>{1.0, 2.0}, 0.0);
  EXPECT_NEAR(a[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(a[1], 1.0 / 3.0, 1e-12);
  auto b = weights_reverse_kl(std::vector<double>{0.0, 1.0}, 1.0);
  EXPECT_NEAR(b[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(b[1], 1.0 / 3.0, 1e-12);
}

TEST(Weights, ReverseKlDomainError) {
  EXPECT_THROW(weights_reverse_kl(std::vector<double>{0.0, 1.0}, 0.0), DomainError);
  EXPECT_THROW(weights_reverse_kl(std::vector<double>{-2.0, 1.0}, 1.0), DomainError);
}

TEST(Weights, AlphaHandValue) {
  auto w = weights_alpha(std::vector<double>{1.0, 2.0}, 0.5, 0.0);
  EXPECT_NEAR(w[0], 0.8, 1e-12);
  EXPECT_NEAR(w[1], 0.2, 1e-12);
}

TEST(Weights, AlphaAllClampedFallsBackToUniform) {
  auto w = weights_alpha(std::vector<double>{1.0, 2.0}, 2.0, 0.5);
  EXPECT_TRUE(w.is_uniform());
}

TEST(Weights, AlphaRejectsNamedSpecialCases) {
  const std::vector<double> L{1.0, 2.0};
  EXPECT_THROW(weights_alpha(L, 0.0, 0.1), std::invalid_argument);
  EXPECT_THROW(weights_alpha(L, 1.0, 0.1), std::invalid_argument);
}

TEST(Weights, AlphaAboveOnePartialClampGivesZeroWeight) {
  // (1 - 2) * L + 1.5 > 0 only for L = 1.
  auto w = weights_alpha(std::vector<double>{1.0, 2.0, 3.0}, 2.0, 1.5);
  EXPECT_DOUBLE_EQ(w[0], 1.0);
  EXPECT_DOUBLE_EQ(w[1], 0.0);
  EXPECT_DOUBLE_EQ(w[2], 0.0);
}

TEST(Weights, EqualLossesGiveUniformForAllFormulas) {
  const std::vector<double> L(6, 0.7);
  EXPECT_TRUE(weights_kl(L, 0.1).is_uniform());
  EXPECT_TRUE(weights_reverse_kl(L, 0.1).is_uniform());
  EXPECT_TRUE(weights_alpha(L, 0.1, 0.1).is_uniform());
}

TEST(Weights, BatchOfOne) {
  const std::vector<double> L{3.0};
  EXPECT_DOUBLE_EQ(weights_kl(L, 0.1)[0], 1.0);
  EXPECT_DOUBLE_EQ(weights_reverse_kl(L, 0.1)[0], 1.0);
  EXPECT_DOUBLE_EQ(weights_alpha(L, 0.1, 0.1)[0], 1.0);
}

TEST(WeightsProperty, SimplexMonotoneAndPermutationEquivariant) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng() % 16;
    auto L = random_losses(rng, n, 5.0);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> Lp(n);
    for (std::size_t i = 0; i < n; ++i) Lp[i] = L[perm[i]];

    for (int kind = 0; kind < 3; ++kind) {
      auto weigh = [&](const std::vector<double>& x) {
        if (kind == 0) return weights_kl(x, 0.3);
        if (kind == 1) return weights_reverse_kl(x, 0.3);
        return weights_alpha(x, 0.1, 0.1);
      };
      auto w = weigh(L);
      auto wp = weigh(Lp);
      expect_on_simplex(w);
      for (std::size_t i = 0; i < n; ++i) {
        EXPECT_NEAR(wp[i], w[perm[i]], 1e-15);
        for (std::size_t j = 0; j < n; ++j) {
          if (L[i] <= L[j]) EXPECT_GE(w[i], w[j]);
        }
      }
    }
  }
}

TEST(WeightsOracle, ClosedFormsMinimizePenalizedObjective) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> lam(0.05, 2.0);
  std::uniform_real_distribution<double> alpha_dist(-1.5, 0.95);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 7;
    const auto L = random_losses(rng, n);
    const double lambda = lam(rng);
    double alpha = alpha_dist(rng);
    if (std::abs(alpha) < 0.05) alpha = 0.3;

    const auto kl = oracle::minimize_on_simplex(L, oracle::penalty_for(oracle::Div::kl, L, 0, lambda));
    EXPECT_LT(max_abs_diff(vec(weights_kl(L, lambda)), kl), 1e-6);
    const auto rkl = oracle::minimize_on_simplex(L, oracle::penalty_for(oracle::Div::reverse_kl, L, 0, lambda));
    EXPECT_LT(max_abs_diff(vec(weights_reverse_kl(L, lambda)), rkl), 1e-6);
    const auto al = oracle::minimize_on_simplex(L, oracle::penalty_for(oracle::Div::alpha, L, alpha, lambda));
    EXPECT_LT(max_abs_diff(vec(weights_alpha(L, alpha, lambda)), al), 1e-6) << "alpha " << alpha;
  }
}

TEST(WeightsOracle, AlphaAboveOneInterior) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const double alpha = 1.2 + 0.6 * static_cast<double>(rng() % 100) / 100.0;
    const double lambda = 2.0;
    // Keep every bracket (1 - alpha) L + lambda positive.
    const auto L = random_losses(rng, 2 + rng() % 6, 0.9 * lambda / (alpha - 1.0));
    const auto al = oracle::minimize_on_simplex(L, oracle::penalty_for(oracle::Div::alpha, L, alpha, lambda));
    EXPECT_LT(max_abs_diff(vec(weights_alpha(L, alpha, lambda)), al), 1e-6);
  }
}

TEST(WeightsLimits, AlphaNearOneIsKlAndNearZeroIsReverseKl) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto L = random_losses(rng, 2 + rng() % 7);
    const double lambda = 0.5;
    for (double a : {1.0 - 1e-4, 1.0 + 1e-4}) {
      // alpha -> 1 with lambda held as the temperature: the bracket base becomes
      // 1 + (1 - a) L / lambda after factoring lambda out.
      EXPECT_LT(max_abs_diff(vec(weights_alpha(L, a, lambda)), vec(weights_kl(L, lambda))), 1e-3);
    }
    for (double a : {-1e-4, 1e-4}) {
      EXPECT_LT(max_abs_diff(vec(weights_alpha(L, a, lambda)), vec(weights_reverse_kl(L, lambda))), 1e-3);
    }
  }
}

TEST(Objective, HandValueAndUniformLimit) {
  const auto l_soft = torch::tensor({0.0, std::log(2.0)}, torch::kFloat64);
  const auto l_bce = torch::tensor({std::log(2.0), 0.0}, torch::kFloat64);
  const auto l_seg = torch::zeros({2}, torch::kFloat64);
  auto r = reweighted_objective(l_soft, l_bce, l_seg, {Divergence::kl, 0.1, 1.0});
  // w1 = [2/3, 1/3] from l_soft, w2 = [1/3, 2/3] from l_bce.
  EXPECT_NEAR(r.w2[0], 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.loss.item<double>(), 2.0 / 3.0 * std::log(2.0), 1e-12);

  const auto a = torch::tensor({0.5, 1.0, 4.0}, torch::kFloat64);
  const auto b = torch::tensor({0.1, 0.2, 0.3}, torch::kFloat64);
  const auto c = torch::tensor({1.0, 2.0, 3.0}, torch::kFloat64);
  auto u = reweighted_objective(a, b, c, {Divergence::kl, 0.1, 1e9});
  EXPECT_NEAR(u.loss.item<double>(), (a.mean() + b.mean() + c.mean()).item<double>(), 1e-8);
}

TEST(Objective, NoGradientThroughWeights) {
  auto l_soft = torch::tensor({0.2, 1.5, 0.7}, torch::dtype(torch::kFloat64).requires_grad(true));
  auto l_bce = torch::tensor({0.3, 0.1, 0.9}, torch::dtype(torch::kFloat64).requires_grad(true));
  auto l_seg = torch::tensor({0.5, 0.4, 0.3}, torch::dtype(torch::kFloat64).requires_grad(true));
  auto r = reweighted_objective(l_soft, l_bce, l_seg, {});
  r.loss.backward();
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(l_soft.grad()[static_cast<int64_t>(i)].item<double>(), r.w1[i], 1e-15);
    EXPECT_NEAR(l_bce.grad()[static_cast<int64_t>(i)].item<double>(), r.w2[i], 1e-15);
    EXPECT_NEAR(l_seg.grad()[static_cast<int64_t>(i)].item<double>(), 1.0 / 3.0, 1e-15);
  }
}

TEST(Objective, CombinedValueMatchesTensorPath) {
  const std::vector<double> a{0.5, 1.0, 4.0}, b{0.1, 0.2, 0.3}, c{1.0, 2.0, 3.0};
  auto w1 = weights_alpha(a, 0.1, 0.1), w2 = weights_alpha(b, 0.1, 0.1);
  auto t = combine_losses(torch::tensor(a, torch::kFloat64), torch::tensor(b, torch::kFloat64),
                          torch::tensor(c, torch::kFloat64), w1, w2);
  EXPECT_NEAR(t.item<double>(), combined_objective_value(a, b, c, w1, w2), 1e-14);
}

TEST(DivergenceSpec, ParseAndValidate) {
  EXPECT_EQ(parse_divergence("kl"), Divergence::kl);
  EXPECT_EQ(parse_divergence("rkl"), Divergence::reverse_kl);
  EXPECT_EQ(parse_divergence("alpha"), Divergence::alpha);
  EXPECT_THROW(parse_divergence("js"), std::invalid_argument);
  EXPECT_THROW((DivergenceSpec{Divergence::alpha, 1.0, 0.1}.validate()), std::invalid_argument);
  EXPECT_THROW((DivergenceSpec{Divergence::kl, 0.1, 0.0}.validate()), std::invalid_argument);
  EXPECT_NO_THROW(DivergenceSpec{}.validate());
}

TEST(WeightVector, RejectsOffSimplex) {
  EXPECT_THROW(WeightVector({0.5, 0.6}), std::invalid_argument);
  EXPECT_THROW(WeightVector({1.5, -0.5}), std::invalid_argument);
  EXPECT_NO_THROW(WeightVector({0.25, 0.75}));
}
