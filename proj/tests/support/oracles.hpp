#pragma once

// Reference implementations used only by tests. Each one is deliberately
// naive (brute force, generic numerics) and shares no code with core/.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace oracle {

// --- reweighting ------------------------------------------------------------
//
// Penalized simplex problem  min_w  sum_i w_i L_i + eta * D(w, u),  u = 1/n.
// D is KL(w||u), KL(u||w) or the alpha-divergence
//   D_a = (sum_i u_i^{1-a} w_i^a - 1) / (a (a - 1)).
// Solved by equality-constrained Newton steps with a backtracking line search.

enum class Div { kl, reverse_kl, alpha };

struct Penalty {
  Div kind;
  double alpha;
  double eta;
};

inline double penalized_objective(const std::vector<double>& w, const std::vector<double>& L, const Penalty& p) {
  const double n = static_cast<double>(w.size());
  double lin = 0.0, div = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    lin += w[i] * L[i];
    switch (p.kind) {
      case Div::kl: div += w[i] * std::log(w[i] * n); break;
      case Div::reverse_kl: div += (1.0 / n) * std::log((1.0 / n) / w[i]); break;
      case Div::alpha: div += std::pow(1.0 / n, 1.0 - p.alpha) * std::pow(w[i], p.alpha); break;
    }
  }
  if (p.kind == Div::alpha) div = (div - 1.0) / (p.alpha * (p.alpha - 1.0));
  return lin + p.eta * div;
}

inline std::vector<double> minimize_on_simplex(const std::vector<double>& L, const Penalty& p, int max_iter = 500) {
  const std::size_t n = L.size();
  const double dn = static_cast<double>(n);
  std::vector<double> w(n, 1.0 / dn), g(n), h(n), step(n);
  for (int it = 0; it < max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      switch (p.kind) {
        case Div::kl:
          g[i] = L[i] + p.eta * (std::log(w[i] * dn) + 1.0);
          h[i] = p.eta / w[i];
          break;
        case Div::reverse_kl:
          g[i] = L[i] - p.eta / (dn * w[i]);
          h[i] = p.eta / (dn * w[i] * w[i]);
          break;
        case Div::alpha: {
          const double c = std::pow(dn, p.alpha - 1.0);
          g[i] = L[i] + p.eta * c * std::pow(w[i], p.alpha - 1.0) / (p.alpha - 1.0);
          h[i] = p.eta * c * std::pow(w[i], p.alpha - 2.0);
          break;
        }
      }
    }
    // Newton direction restricted to sum(step) = 0.
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      num += g[i] / h[i];
      den += 1.0 / h[i];
    }
    const double nu = num / den;
    double decrement = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      step[i] = -(g[i] - nu) / h[i];
      decrement += step[i] * step[i] * h[i];
    }
    if (decrement < 1e-28) break;
    double t = 1.0;
    const double f0 = penalized_objective(w, L, p);
    std::vector<double> cand(n);
    for (;;) {
      bool inside = true;
      for (std::size_t i = 0; i < n; ++i) {
        cand[i] = w[i] + t * step[i];
        inside = inside && cand[i] > 0.0;
      }
      if (inside && penalized_objective(cand, L, p) <= f0 - 0.25 * t * decrement) break;
      t *= 0.5;
      if (t < 1e-16) break;
    }
    if (t < 1e-16) break;
    w = cand;
  }
  const double s = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= s;
  return w;
}

/// Penalty strength eta at which the closed forms parameterized by lambda
/// are the exact minimizers (the multiplier of the sum constraint is fixed
/// by lambda; eta follows from normalization).
inline Penalty penalty_for(Div kind, const std::vector<double>& L, double alpha, double lambda) {
  const double n = static_cast<double>(L.size());
  switch (kind) {
    case Div::kl: return {kind, alpha, lambda};
    case Div::reverse_kl: {
      double s = 0.0;
      for (double l : L) s += 1.0 / (l + lambda);
      return {kind, alpha, n / s};
    }
    case Div::alpha: {
      double s = 0.0;
      for (double l : L) s += std::pow((1.0 - alpha) * l + lambda, 1.0 / (alpha - 1.0));
      return {kind, alpha, std::pow(s / n, alpha - 1.0)};
    }
  }
  throw std::logic_error("unreachable");
}

// --- metrics ------------------------------------------------------------------

/// P(score_pos > score_neg) + 0.5 P(equal), over all pairs.
inline double auc_all_pairs(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

/// Average precision by enumerating every distinct threshold t (descending)
/// and recounting the predicted-positive set {score >= t} from scratch.
inline double average_precision_bruteforce(const std::vector<double>& s, const std::vector<int>& y) {
  std::vector<double> thresholds = s;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double positives = 0.0;
  for (int v : y) positives += v;
  double ap = 0.0, prev_recall = 0.0;
  for (double t : thresholds) {
    double tp = 0.0, predicted = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= t) {
        predicted += 1.0;
        tp += y[i];
      }
    }
    const double recall = tp / positives;
    ap += (recall - prev_recall) * (tp / predicted);
    prev_recall = recall;
  }
  return ap;
}

// --- losses / heads -----------------------------------------------------------------

/// Exhaustive 2-means over every nonempty bipartition (n <= ~16). The cluster
/// with the higher mean gets label 1. Returns an empty vector when every
/// bipartition is degenerate (all values equal).
inline std::vector<int> two_means_bruteforce(const std::vector<double>& x) {
  const std::size_t n = x.size();
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_labels;
  bool any_spread = false;
  for (std::size_t i = 1; i < n; ++i) any_spread = any_spread || x[i] != x[0];
  if (!any_spread) return {};
  for (unsigned long mask = 1; mask + 1 < (1ul << n); ++mask) {
    double s1 = 0, s0 = 0, c1 = 0, c0 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1ul) s1 += x[i], c1 += 1;
      else s0 += x[i], c0 += 1;
    }
    const double m1 = s1 / c1, m0 = s0 / c0;
    double sse = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double m = (mask >> i & 1ul) ? m1 : m0;
      sse += (x[i] - m) * (x[i] - m);
    }
    if (sse < best - 1e-12) {
      best = sse;
      best_labels.assign(n, 0);
      for (std::size_t i = 0; i < n; ++i) {
        const bool in1 = mask >> i & 1ul;
        best_labels[i] = (in1 == (m1 > m0)) ? 1 : 0;
      }
    }
  }
  return best_labels;
}

inline double topk_mean_by_sorting(std::vector<double> v, double fraction) {
  const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(v.size()))));
  std::sort(v.begin(), v.end(), std::greater<>());
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += v[i];
  return s / static_cast<double>(k);
}

/// Central difference of f at x along coordinate i.
inline double central_difference(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> x, std::size_t i, double h) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double up = f(x);
  x[i] = x0 - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

}  // namespace oracle
