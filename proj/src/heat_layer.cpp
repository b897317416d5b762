#include "heat/heat_layer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "heat/errors.hpp"

namespace heat {

GraphTensors GraphTensors::from(const HeteroGraph& g) {
  GraphTensors t;
  t.num_nodes = static_cast<int>(g.num_nodes());
  const auto d = g.feature_dim();
  t.features.resize(t.num_nodes, d);
  t.ids.reserve(g.num_nodes());
  t.types.reserve(g.num_nodes());
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    const Node& n = g.nodes()[i];
    if (n.feature.size() != d) throw ShapeError("GraphTensors: feature dimensions differ");
    t.ids.push_back(n.id);
    t.types.push_back(n.type.index);
    t.features.row(static_cast<Eigen::Index>(i)) = n.feature.transpose();
  }

  const auto edges = g.edges();
  std::vector<std::size_t> order(edges.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<int> src_row(edges.size()), dst_row(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    src_row[e] = static_cast<int>(g.index_of(edges[e].src));
    dst_row[e] = static_cast<int>(g.index_of(edges[e].dst));
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dst_row[a] != dst_row[b]) return dst_row[a] < dst_row[b];
    return edges[a].src < edges[b].src;
  });

  const auto de = g.edge_dim();
  t.edge_attr.resize(static_cast<Eigen::Index>(edges.size()), de);
  std::vector<char> has_incoming(g.num_nodes(), 0);
  for (std::size_t r = 0; r < order.size(); ++r) {
    const Edge& e = edges[order[r]];
    if (e.attr.size() != de) throw ShapeError("GraphTensors: edge attribute dimensions differ");
    t.src.push_back(src_row[order[r]]);
    t.dst.push_back(dst_row[order[r]]);
    t.edge_attr.row(static_cast<Eigen::Index>(r)) = e.attr.transpose();
    has_incoming[dst_row[order[r]]] = 1;
  }
  for (std::size_t i = 0; i < has_incoming.size(); ++i) {
    if (!has_incoming[i]) {
      throw ContractError("node " + std::to_string(t.ids[i]) + " has no incoming edge; graphs need self-loops");
    }
  }
  return t;
}

void HeatLayerConfig::validate() const {
  if (d_in < 1 || d_out < 1 || heads < 1 || d_edge < 1 || num_types < 1) {
    throw ConfigError("HEAT layer: dimensions, heads and type count must be positive");
  }
  if (d_out % heads != 0) {
    throw ConfigError("HEAT layer: d_out " + std::to_string(d_out) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
}

HeatLayer::HeatLayer(const HeatLayerConfig& cfg, ParamStore& store, const std::string& prefix, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const int dk = cfg_.head_dim();
  proj_.assign(cfg_.num_types, {});
  for (int a = 0; a < cfg_.num_types; ++a) {
    for (int i = 0; i < cfg_.heads; ++i) {
      proj_[a].push_back(store.add(prefix + ".W." + std::to_string(a) + "." + std::to_string(i),
                                   glorot(dk, cfg_.d_in, rng)));
    }
  }
  if (cfg_.decouple_value) {
    value_proj_.assign(cfg_.num_types, {});
    for (int a = 0; a < cfg_.num_types; ++a) {
      for (int i = 0; i < cfg_.heads; ++i) {
        value_proj_[a].push_back(store.add(prefix + ".W_value." + std::to_string(a) + "." + std::to_string(i),
                                           glorot(dk, cfg_.d_in, rng)));
      }
    }
  }
  edge_proj_ = store.add(prefix + ".W_edge", glorot(dk, cfg_.d_edge, rng));
}

HeatLayer::HeatLayer(const HeatLayerConfig& cfg, const ParamStore& store, const std::string& prefix) : cfg_(cfg) {
  cfg_.validate();
  const int dk = cfg_.head_dim();
  auto expect = [&](const std::string& name, int rows, int cols) {
    const std::size_t i = store.index(name);
    if (store[i].rows() != rows || store[i].cols() != cols) {
      throw ShapeError("parameter '" + name + "' has shape " + std::to_string(store[i].rows()) + "x" +
                       std::to_string(store[i].cols()) + ", expected " + std::to_string(rows) + "x" +
                       std::to_string(cols));
    }
    return i;
  };
  proj_.assign(cfg_.num_types, {});
  for (int a = 0; a < cfg_.num_types; ++a) {
    for (int i = 0; i < cfg_.heads; ++i) {
      proj_[a].push_back(expect(prefix + ".W." + std::to_string(a) + "." + std::to_string(i), dk, cfg_.d_in));
    }
  }
  if (cfg_.decouple_value) {
    value_proj_.assign(cfg_.num_types, {});
    for (int a = 0; a < cfg_.num_types; ++a) {
      for (int i = 0; i < cfg_.heads; ++i) {
        value_proj_[a].push_back(
            expect(prefix + ".W_value." + std::to_string(a) + "." + std::to_string(i), dk, cfg_.d_in));
      }
    }
  }
  edge_proj_ = expect(prefix + ".W_edge", dk, cfg_.d_edge);
}

std::size_t HeatLayer::value_projection(int type, int head) const {
  return cfg_.decouple_value ? value_proj_.at(type).at(head) : proj_.at(type).at(head);
}

Var HeatLayer::typed_projection(const BoundParams& params, const std::vector<std::vector<std::size_t>>& weights,
                                std::span<const int> node_types, Var h) const {
  Tape& tape = params.tape();
  const Eigen::Index n = h.rows();
  Var out;
  for (int a = 0; a < cfg_.num_types; ++a) {
    Matrix mask = Matrix::Zero(n, cfg_.d_out);
    bool present = false;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (node_types[r] == a) {
        mask.row(r).setOnes();
        present = true;
      }
    }
    if (!present) continue;
    std::vector<Var> heads;
    for (int i = 0; i < cfg_.heads; ++i) heads.push_back(params[weights[a][i]]);
    Var w = cfg_.heads == 1 ? heads.front() : concat_rows(heads);  // d_out x d_in
    Var part = mul(matmul(h, transpose(w)), tape.constant(std::move(mask)));
    out = out.valid() ? add(out, part) : part;
  }
  return out;
}

LayerOutput HeatLayer::forward(const BoundParams& params, const GraphTensors& g, std::span<const int> node_types,
                               Var h, Var edge_attr) const {
  Tape& tape = params.tape();
  const int n = g.num_nodes;
  if (h.rows() != n || h.cols() != cfg_.d_in) {
    throw ShapeError("HEAT layer: node input is " + std::to_string(h.rows()) + "x" + std::to_string(h.cols()) +
                     ", expected " + std::to_string(n) + "x" + std::to_string(cfg_.d_in));
  }
  if (edge_attr.rows() != static_cast<Eigen::Index>(g.src.size()) || edge_attr.cols() != cfg_.d_edge) {
    throw ShapeError("HEAT layer: edge input has " + std::to_string(edge_attr.cols()) + " columns, expected " +
                     std::to_string(cfg_.d_edge));
  }
  if (static_cast<int>(node_types.size()) != n) throw ShapeError("HEAT layer: one type per node required");
  for (int t : node_types) {
    if (t < 0 || t >= cfg_.num_types) {
      throw ConfigError("HEAT layer: node type " + std::to_string(t) + " has no registered projection");
    }
  }
  if (n == 0) throw ContractError("HEAT layer: empty graph");

  const int dk = cfg_.head_dim();
  const int heads = cfg_.heads;

  Var proj = typed_projection(params, proj_, node_types, h);
  Var key = gather_rows(proj, std::span<const int>(g.src));
  Var query = gather_rows(proj, std::span<const int>(g.dst));
  Var value = cfg_.decouple_value
                  ? gather_rows(typed_projection(params, value_proj_, node_types, h), std::span<const int>(g.src))
                  : key;
  Var edge = matmul(edge_attr, transpose(params[edge_proj_]));  // E x d_k

  // Block indicator: column i sums the d_k entries of head i.
  Matrix blocks = Matrix::Zero(cfg_.d_out, heads);
  for (int i = 0; i < heads; ++i) blocks.block(i * dk, i, dk, 1).setOnes();
  Var head_sum = tape.constant(blocks);

  Var kq = mul(key, query);
  if (cfg_.edge_modulation) {
    Var tiled = heads == 1 ? edge : concat_cols(std::vector<Var>(heads, edge));
    kq = mul(kq, tiled);
  }
  Var scores = scale(matmul(kq, head_sum), 1.0 / std::sqrt(static_cast<double>(dk)));
  Var attention = segment_softmax(scores, std::span<const int>(g.dst), n);
  Var messages = mul(value, matmul(attention, tape.constant(blocks.transpose())));
  Var out = cfg_.aggregation == Aggregation::kMean ? segment_mean(messages, std::span<const int>(g.dst), n)
                                                   : segment_sum(messages, std::span<const int>(g.dst), n);
  return LayerOutput{out, edge, attention};
}

EdgeProjection project(const HeatLayer& layer, const ParamStore& params, const GraphTensors& g,
                       std::span<const int> node_types, std::size_t e, const Matrix& h, const Matrix& edge_attr) {
  const auto& cfg = layer.config();
  const int s = g.src.at(e);
  const int t = g.dst.at(e);
  for (int type : {node_types[s], node_types[t]}) {
    if (type < 0 || type >= cfg.num_types) {
      throw ConfigError("project: node type " + std::to_string(type) + " has no registered projection");
    }
  }
  EdgeProjection p;
  const Eigen::VectorXd hs = h.row(s).transpose();
  const Eigen::VectorXd ht = h.row(t).transpose();
  for (int i = 0; i < cfg.heads; ++i) {
    p.key.push_back(params[layer.projection(node_types[s], i)] * hs);
    p.query.push_back(params[layer.projection(node_types[t], i)] * ht);
    p.value.push_back(params[layer.value_projection(node_types[s], i)] * hs);
  }
  const Eigen::VectorXd he = edge_attr.row(static_cast<Eigen::Index>(e)).transpose();
  p.edge = cfg.edge_modulation ? Eigen::VectorXd(params[layer.edge_projection()] * he)
                               : Eigen::VectorXd::Ones(cfg.head_dim());
  return p;
}

double att_score(const Eigen::VectorXd& key, const Eigen::VectorXd& edge, const Eigen::VectorXd& query) {
  if (key.size() != edge.size() || key.size() != query.size() || key.size() == 0) {
    throw ShapeError("att_score: key, edge and query must share a nonzero dimension");
  }
  double s = 0;
  for (Eigen::Index j = 0; j < key.size(); ++j) s += key[j] * edge[j] * query[j];
  return s / std::sqrt(static_cast<double>(key.size()));
}

Matrix attention_softmax(const Matrix& scores) {
  if (scores.rows() == 0) throw ContractError("attention_softmax: target has no incoming edges");
  Matrix out(scores.rows(), scores.cols());
  for (Eigen::Index c = 0; c < scores.cols(); ++c) {
    const double m = scores.col(c).maxCoeff();
    double total = 0;
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
      out(r, c) = std::exp(scores(r, c) - m);
      total += out(r, c);
    }
    out.col(c) /= total;
  }
  return out;
}

}  // namespace heat
