#pragma once

#include <span>

namespace adl::metrics {

/// Probability that a random anomaly (label 1) scores above a random normal,
/// ties counted 1/2. Throws UndefinedMetricError unless both classes occur.
double auc_roc(std::span<const double> scores, std::span<const int> labels);

/// Average precision: sum over distinct score thresholds (descending) of
/// precision times the recall increment. Tied scores form one threshold.
/// Throws UndefinedMetricError without positives.
double auc_pr(std::span<const double> scores, std::span<const int> labels);

}  // namespace adl::metrics
