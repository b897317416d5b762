#pragma once

// Direct-formula oracles shared by the unit tests and the acceptance harness.

#include <cmath>
#include <utility>
#include <vector>

#include "heat/metrics.hpp"
#include "reference.hpp"

namespace oracle {

inline double pair_count_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0;
  int pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      ++pairs;
      wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  }
  return wins / pairs;
}

inline double macro_f1(const std::vector<int>& p, const std::vector<int>& y, int classes) {
  double total = 0;
  for (int c = 0; c < classes; ++c) {
    double tp = 0, pred = 0, act = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      tp += p[i] == c && y[i] == c;
      pred += p[i] == c;
      act += y[i] == c;
    }
    if (tp == 0) continue;
    const double precision = tp / pred, recall = tp / act;
    total += 2 * precision * recall / (precision + recall);
  }
  return total / classes;
}

// Continued fraction for the regularized incomplete beta (modified Lentz).
inline double beta_cf(double a, double b, double x) {
  const double tiny = 1e-300;
  auto guard = [&](double v) { return std::abs(v) < tiny ? tiny : v; };
  double c = 1, d = 1 / guard(1 - (a + b) * x / (a + 1));
  double h = d;
  for (int m = 1; m < 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((a + m2 - 1) * (a + m2));
    d = 1 / guard(1 + aa * d);
    c = guard(1 + aa / c);
    h *= d * c;
    aa = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1));
    d = 1 / guard(1 + aa * d);
    c = guard(1 + aa / c);
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1) < 1e-16) break;
  }
  return h;
}

inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0) return 0;
  if (x >= 1) return 1;
  const double lbeta = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
  const double front = std::exp(lbeta + a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1) / (a + b + 2)) return front * beta_cf(a, b, x) / a;
  return 1 - front * beta_cf(b, a, 1 - x) / b;
}

inline heat::WelchResult welch(const std::vector<double>& a, const std::vector<double>& b) {
  auto moments = [](const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::pair{m, s / static_cast<double>(v.size() - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double qa = va / static_cast<double>(a.size()), qb = vb / static_cast<double>(b.size());
  heat::WelchResult r;
  r.t = (ma - mb) / std::sqrt(qa + qb);
  r.df = (qa + qb) * (qa + qb) / (qa * qa / static_cast<double>(a.size() - 1) + qb * qb / static_cast<double>(b.size() - 1));
  r.p = incomplete_beta(r.df / 2, 0.5, r.df / (r.df + r.t * r.t));
  return r;
}

/// Plain single-head scaled dot-product graph attention with one shared
/// projection W: out_t = sum_s softmax_s((W x_s . W x_t) / sqrt(d)) W x_s,
/// over the in-neighbours s of t.
struct DotAttention {
  ref::Rows nodes;
  std::map<std::pair<long, long>, double> alpha;
};

inline DotAttention dot_attention(const heat::Matrix& w, const heat::HeteroGraph& g) {
  const ref::Rows x = ref::graph_features(g);
  ref::Rows proj;
  for (const auto& row : x) proj.push_back(ref::matvec(w, row));
  const double scale = std::sqrt(static_cast<double>(w.rows()));
  DotAttention out;
  for (std::size_t t = 0; t < g.num_nodes(); ++t) {
    const long tid = g.nodes()[t].id;
    std::vector<std::pair<std::size_t, double>> scores;
    for (const auto& e : g.edges()) {
      if (e.dst != tid) continue;
      const std::size_t s = g.index_of(e.src);
      double dot = 0;
      for (std::size_t j = 0; j < proj[t].size(); ++j) dot += proj[s][j] * proj[t][j];
      scores.emplace_back(s, dot / scale);
    }
    double mx = -INFINITY;
    for (auto& [s, v] : scores) mx = std::max(mx, v);
    double z = 0;
    for (auto& [s, v] : scores) z += std::exp(v - mx);
    ref::Vec o(proj[t].size(), 0.0);
    for (auto& [s, v] : scores) {
      const double a = std::exp(v - mx) / z;
      out.alpha[{g.nodes()[s].id, tid}] = a;
      for (std::size_t j = 0; j < o.size(); ++j) o[j] += a * proj[s][j];
    }
    out.nodes.push_back(o);
  }
  return out;
}

}  // namespace oracle
