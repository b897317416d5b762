#include "heat/graph_builder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "heat/errors.hpp"

namespace heat {

void AugmentConfig::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0 && p <= 1)) throw ConfigError(std::string("augmentation: ") + name + " must lie in [0, 1]");
  };
  prob(edge_drop_prob, "edge_drop_prob");
  prob(node_drop_prob, "node_drop_prob");
  if (!(feature_noise_sigma >= 0)) throw ConfigError("augmentation: feature_noise_sigma must be >= 0");
  if (!(edge_noise_sigma >= 0)) throw ConfigError("augmentation: edge_noise_sigma must be >= 0");
}

void BuildConfig::validate() const {
  if (k < 1) throw ConfigError("build: k must be at least 1");
  augmentation.validate();
}

NodeType majority_vote_type(const std::map<NodeType, std::int64_t>& counts) {
  NodeType best = nuclei::kNoLabel;
  std::int64_t best_count = 0;
  // std::map iterates in type order, so strict '>' keeps the earliest on ties.
  for (const auto& [type, count] : counts) {
    if (count < 0) throw ConfigError("majority_vote_type: negative count");
    if (count > best_count) {
      best = type;
      best_count = count;
    }
  }
  return best;
}

namespace {

Eigen::MatrixXd similarity_matrix(std::span<const Eigen::VectorXd> f, Similarity similarity) {
  const auto n = static_cast<Eigen::Index>(f.size());
  Eigen::MatrixXd s(n, n);
  std::vector<double> norm(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) norm[i] = f[i].norm();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      double v;
      if (similarity == Similarity::kCosine) {
        const double denom = norm[i] * norm[j];
        v = denom > 0 ? f[i].dot(f[j]) / denom : 0.0;
      } else {
        v = -(f[i] - f[j]).norm();
      }
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  return s;
}

}  // namespace

std::vector<std::pair<int, int>> knn_edges(std::span<const Eigen::VectorXd> features, int k, bool symmetric,
                                           Similarity similarity) {
  const int n = static_cast<int>(features.size());
  if (k < 1) throw ConfigError("knn_edges: k must be at least 1");
  if (k >= n) {
    throw ConfigError("knn_edges: k = " + std::to_string(k) + " requires more than " + std::to_string(k) +
                      " nodes, got " + std::to_string(n));
  }
  for (const auto& f : features) {
    if (f.size() != features.front().size()) throw ShapeError("knn_edges: feature dimensions differ");
  }
  const Eigen::MatrixXd sim = similarity_matrix(features, similarity);

  std::vector<std::pair<int, int>> edges;
  edges.reserve(static_cast<std::size_t>(n) * k * (symmetric ? 2 : 1));
  std::vector<int> order(n - 1);
  for (int v = 0; v < n; ++v) {
    int pos = 0;
    for (int u = 0; u < n; ++u) {
      if (u != v) order[pos++] = u;
    }
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
      if (sim(v, a) != sim(v, b)) return sim(v, a) > sim(v, b);
      return a < b;
    });
    for (int i = 0; i < k; ++i) {
      edges.emplace_back(order[i], v);
      if (symmetric) edges.emplace_back(v, order[i]);
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

double pearson_edge_attr(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size()) {
    throw ShapeError("pearson_edge_attr: dimensions differ (" + std::to_string(x.size()) + " vs " +
                     std::to_string(y.size()) + ")");
  }
  auto constant = [](const Eigen::VectorXd& v) { return v.size() == 0 || (v.array() == v[0]).all(); };
  if (constant(x) || constant(y)) return 0.0;

  const double n = static_cast<double>(x.size());
  const double mx = x.sum() / n;
  const double my = y.sum() / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  const double denom = std::sqrt(sxx * syy);
  if (!(denom > 0)) return 0.0;
  return std::clamp(sxy / denom, -1.0, 1.0);
}

HeteroGraph build_graph(std::span<const PatchRecord> patches, const BuildConfig& cfg, const TypeSet& types) {
  cfg.validate();
  if (patches.empty()) throw ConfigError("build_graph: no patches");
  const Eigen::Index d = patches.front().feature.size();

  std::vector<Node> nodes;
  nodes.reserve(patches.size());
  std::vector<Eigen::VectorXd> features;
  features.reserve(patches.size());
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const PatchRecord& p = patches[i];
    if (p.feature.size() != d) {
      throw ShapeError("build_graph: patch '" + p.id + "' has feature dimension " + std::to_string(p.feature.size()) +
                       ", expected " + std::to_string(d));
    }
    const NodeType type = p.type ? *p.type : majority_vote_type(p.type_counts);
    if (!types.contains(type)) throw LookupError("build_graph: patch '" + p.id + "' has a type outside the type set");
    nodes.push_back(Node{static_cast<NodeId>(i), type, p.feature, GridPos{p.x, p.y}});
    features.push_back(p.feature);
  }

  std::vector<std::pair<int, int>> pairs;
  const int n = static_cast<int>(patches.size());
  const int k = std::min(cfg.k, n - 1);
  if (k >= 1) pairs = knn_edges(features, k, cfg.symmetric_edges, cfg.similarity);
  if (cfg.add_self_loops) {
    for (int v = 0; v < n; ++v) pairs.emplace_back(v, v);
    std::sort(pairs.begin(), pairs.end());
  }

  std::vector<Edge> edges;
  edges.reserve(pairs.size());
  for (const auto& [s, t] : pairs) {
    Eigen::VectorXd attr(1);
    attr[0] = s == t ? 1.0 : pearson_edge_attr(features[s], features[t]);
    edges.push_back(Edge{s, t, std::move(attr)});
  }

  HeteroGraph g(types, std::move(nodes), std::move(edges));
  if (auto v = validate(g)) throw ContractError("build_graph produced an invalid graph: " + v->message);
  return g;
}

HeteroGraph augment(const HeteroGraph& g, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  if (cfg.is_identity() || g.empty()) return g;

  std::vector<char> keep(g.num_nodes(), 1);
  if (cfg.node_drop_prob > 0) {
    std::bernoulli_distribution drop(cfg.node_drop_prob);
    for (auto& k : keep) k = drop(rng) ? 0 : 1;
    if (std::none_of(keep.begin(), keep.end(), [](char k) { return k != 0; })) {
      std::uniform_int_distribution<std::size_t> pick(0, keep.size() - 1);
      keep[pick(rng)] = 1;
    }
  }

  std::vector<Node> nodes;
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    if (keep[i]) nodes.push_back(g.nodes()[i]);
  }

  std::vector<Edge> edges;
  std::bernoulli_distribution drop_edge(cfg.edge_drop_prob);
  for (const Edge& e : g.edges()) {
    if (!keep[g.index_of(e.src)] || !keep[g.index_of(e.dst)]) continue;
    if (e.src != e.dst && cfg.edge_drop_prob > 0 && drop_edge(rng)) continue;
    edges.push_back(e);
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  if (cfg.feature_noise_sigma > 0) {
    for (Node& n : nodes) {
      for (Eigen::Index i = 0; i < n.feature.size(); ++i) n.feature[i] += cfg.feature_noise_sigma * normal(rng);
    }
  }
  if (cfg.edge_noise_sigma > 0) {
    for (Edge& e : edges) {
      for (Eigen::Index i = 0; i < e.attr.size(); ++i) e.attr[i] += cfg.edge_noise_sigma * normal(rng);
    }
  }
  return HeteroGraph(g.types(), std::move(nodes), std::move(edges), g.label());
}

std::vector<NodeType> kmeans_typing(std::span<const Eigen::VectorXd> features, int clusters, std::uint64_t seed) {
  const int n = static_cast<int>(features.size());
  if (clusters < 1) throw ConfigError("kmeans_typing: need at least one cluster");
  if (clusters > n) {
    throw ConfigError("kmeans_typing: " + std::to_string(clusters) + " clusters for " + std::to_string(n) + " points");
  }
  const Eigen::Index d = features.front().size();
  for (const auto& f : features) {
    if (f.size() != d) throw ShapeError("kmeans_typing: feature dimensions differ");
  }

  Rng rng = substream(seed, "kmeans");
  std::vector<Eigen::VectorXd> centers;
  std::vector<char> chosen(n, 0);
  std::uniform_int_distribution<int> first(0, n - 1);
  const int c0 = first(rng);
  centers.push_back(features[c0]);
  chosen[c0] = 1;

  std::vector<double> dist2(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < clusters) {
    double total = 0;
    for (int i = 0; i < n; ++i) {
      dist2[i] = std::min(dist2[i], (features[i] - centers.back()).squaredNorm());
      if (!chosen[i]) total += dist2[i];
    }
    int next = -1;
    if (total > 0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      for (int i = 0; i < n; ++i) {
        if (chosen[i] || dist2[i] == 0) continue;
        next = i;
        r -= dist2[i];
        if (r <= 0) break;
      }
    } else {
      // every remaining point coincides with a center
      for (int i = 0; i < n && next < 0; ++i) {
        if (!chosen[i]) next = i;
      }
    }
    chosen[next] = 1;
    centers.push_back(features[next]);
  }

  std::vector<int> assign(n, 0);
  for (int iter = 0; iter < 100; ++iter) {
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int c = 0; c < clusters; ++c) {
        const double dd = (features[i] - centers[c]).squaredNorm();
        if (dd < best) {
          best = dd;
          assign[i] = c;
        }
      }
    }
    std::vector<Eigen::VectorXd> sums(clusters, Eigen::VectorXd::Zero(d));
    std::vector<int> count(clusters, 0);
    for (int i = 0; i < n; ++i) {
      sums[assign[i]] += features[i];
      ++count[assign[i]];
    }
    double shift = 0;
    for (int c = 0; c < clusters; ++c) {
      if (count[c] == 0) continue;  // empty cluster keeps its centroid
      Eigen::VectorXd updated = sums[c] / count[c];
      shift = std::max(shift, (updated - centers[c]).norm());
      centers[c] = std::move(updated);
    }
    if (shift < 1e-6) break;
  }

  std::vector<NodeType> types(n);
  for (int i = 0; i < n; ++i) types[i] = NodeType{assign[i]};
  return types;
}

}  // namespace heat
