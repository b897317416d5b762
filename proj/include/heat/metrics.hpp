#pragma once

#include <Eigen/Dense>

#include <span>

namespace heat {

/// Mann-Whitney AUC: probability that a random positive outscores a random
/// negative, ties counting one half. Labels are 0/1; both must occur.
double metric_auc(std::span<const double> scores, std::span<const int> labels);

/// Unweighted one-vs-rest average of metric_auc over the columns of
/// `probs` (n x C). Classes that never occur (or always occur) are skipped;
/// throws UndefinedMetricError if no class is scorable.
double metric_auc_ovr(const Eigen::MatrixXd& probs, std::span<const int> labels);

double metric_accuracy(std::span<const int> preds, std::span<const int> labels);

/// Unweighted mean of per-class F1. A class with no predicted and no actual
/// instances contributes 0.
double metric_macro_f1(std::span<const int> preds, std::span<const int> labels, int classes);

struct WelchResult {
  double t = 0;
  double df = 0;
  double p = 1;
};

/// Two-sided Welch unequal-variance t-test of mean(a) - mean(b).
WelchResult welch_ttest(std::span<const double> a, std::span<const double> b);

}  // namespace heat
