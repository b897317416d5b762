#pragma once

#include <random>
#include <vector>

#include "heat/hetgraph.hpp"
#include "heat/params.hpp"
#include "heat/random.hpp"

namespace fixture {

/// Random graph on n nodes: self-loops plus each ordered pair with
/// probability `density`, normal features and edge attributes.
inline heat::HeteroGraph small_graph(int n, int num_types, heat::Rng& rng, int d = 4, int d_e = 1,
                                     double density = 0.5) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> type(0, num_types - 1);
  std::bernoulli_distribution link(density);
  std::vector<heat::Node> nodes;
  for (int i = 0; i < n; ++i) {
    heat::Node v;
    v.id = 10 * i + 3;
    v.type = heat::NodeType{type(rng)};
    v.feature = Eigen::VectorXd(d);
    for (int j = 0; j < d; ++j) v.feature[j] = normal(rng);
    v.pos = heat::GridPos{i, 2 * i};
    nodes.push_back(v);
  }
  std::vector<heat::Edge> edges;
  for (int s = 0; s < n; ++s) {
    for (int t = 0; t < n; ++t) {
      if (s != t && !link(rng)) continue;
      heat::Edge e{nodes[s].id, nodes[t].id, Eigen::VectorXd(d_e)};
      for (int j = 0; j < d_e; ++j) e.attr[j] = s == t ? 1.0 : normal(rng);
      edges.push_back(e);
    }
  }
  return heat::HeteroGraph(heat::TypeSet::nuclei(), nodes, edges, 0);
}

/// Overwrites every parameter with N(0, sigma^2) entries.
inline void randomize(heat::ParamStore& p, heat::Rng& rng, double sigma = 0.7) {
  std::normal_distribution<double> normal(0.0, sigma);
  for (auto& m : p.values()) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  }
}

}  // namespace fixture
