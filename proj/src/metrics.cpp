#include "heat/metrics.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "heat/errors.hpp"

namespace heat {

double metric_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("metric_auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Midranks (1-based) over tied groups.
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }

  double pos = 0, neg = 0, rank_sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == 1) {
      pos += 1;
      rank_sum += rank[i];
    } else if (labels[i] == 0) {
      neg += 1;
    } else {
      throw IndexError("metric_auc: labels must be 0 or 1");
    }
  }
  if (pos == 0 || neg == 0) throw UndefinedMetricError("metric_auc: both classes must be present");
  return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

double metric_auc_ovr(const Eigen::MatrixXd& probs, std::span<const int> labels) {
  if (static_cast<std::size_t>(probs.rows()) != labels.size()) {
    throw ShapeError("metric_auc_ovr: one probability row per label required");
  }
  double total = 0;
  int scored = 0;
  std::vector<double> scores(labels.size());
  std::vector<int> binary(labels.size());
  for (Eigen::Index c = 0; c < probs.cols(); ++c) {
    bool has_pos = false, has_neg = false;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      scores[i] = probs(static_cast<Eigen::Index>(i), c);
      binary[i] = labels[i] == c ? 1 : 0;
      (binary[i] ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) continue;
    total += metric_auc(scores, binary);
    ++scored;
  }
  if (scored == 0) throw UndefinedMetricError("metric_auc_ovr: no class has both positives and negatives");
  return total / scored;
}

double metric_accuracy(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) throw ShapeError("metric_accuracy: length mismatch");
  if (preds.empty()) throw UndefinedMetricError("metric_accuracy: no samples");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hit += preds[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

double metric_macro_f1(std::span<const int> preds, std::span<const int> labels, int classes) {
  if (preds.size() != labels.size()) throw ShapeError("metric_macro_f1: length mismatch");
  if (classes < 1) throw ConfigError("metric_macro_f1: need at least one class");
  std::vector<double> tp(classes, 0), fp(classes, 0), fn(classes, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] < 0 || preds[i] >= classes || labels[i] < 0 || labels[i] >= classes) {
      throw IndexError("metric_macro_f1: class index out of range");
    }
    if (preds[i] == labels[i]) {
      tp[preds[i]] += 1;
    } else {
      fp[preds[i]] += 1;
      fn[labels[i]] += 1;
    }
  }
  double total = 0;
  for (int c = 0; c < classes; ++c) {
    const double denom = 2 * tp[c] + fp[c] + fn[c];
    total += denom > 0 ? 2 * tp[c] / denom : 0.0;
  }
  return total / classes;
}

WelchResult welch_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw UndefinedMetricError("welch_ttest: each sample needs at least two values");
  auto moments = [](std::span<const double> x) {
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::pair{mean, ss / (n - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double sa = va / na;
  const double sb = vb / nb;
  if (sa + sb == 0) throw UndefinedMetricError("welch_ttest: both samples have zero variance");

  WelchResult r;
  r.t = (ma - mb) / std::sqrt(sa + sb);
  r.df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1) + sb * sb / (nb - 1));
  boost::math::students_t_distribution<double> dist(r.df);
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  return r;
}

}  // namespace heat
