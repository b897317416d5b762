#pragma once

// Heterogeneous edge-attribute transformer layer.
//
// For an edge s -> t and head i:
//   key_i   = W_{type(s)}^i H_s        value_i = key_i (or W'_{type(s)}^i H_s when decoupled)
//   query_i = W_{type(t)}^i H_t        e'      = W_edge h_e   (shared across heads)
//   score_i = sum_j key_ij * e'_j * query_ij / sqrt(d_k)
// Scores are softmax-normalized per head over the incoming edges of t. The
// output of t aggregates (mean by default) the head-concatenated, attention
// scaled values over its incoming edges. e' becomes the next layer's edge
// attribute.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "heat/hetgraph.hpp"
#include "heat/params.hpp"
#include "heat/tensor.hpp"

namespace heat {

enum class Aggregation { kMean, kSum };

/// Row-indexed view of a HeteroGraph as consumed by the layers. Edges are
/// ordered by target row, then ascending source id.
struct GraphTensors {
  int num_nodes = 0;
  std::vector<NodeId> ids;   // row -> node id
  std::vector<int> types;    // row -> type index
  std::vector<int> src;      // edge -> source row
  std::vector<int> dst;      // edge -> target row
  Matrix features;           // n x d
  Matrix edge_attr;          // E x d_e

  /// Throws ContractError if some node has no incoming edge.
  static GraphTensors from(const HeteroGraph& g);
};

struct HeatLayerConfig {
  int d_in = 8;
  int d_out = 8;
  int heads = 2;
  int d_edge = 1;
  int num_types = 6;
  Aggregation aggregation = Aggregation::kMean;
  bool decouple_value = false;
  bool edge_modulation = true;  // false forces e' = 1

  int head_dim() const { return d_out / heads; }
  void validate() const;
};

struct LayerOutput {
  Var nodes;      // n x d_out
  Var edges;      // E x d_k, the projected edge attributes
  Var attention;  // E x heads, normalized per target and head
};

class HeatLayer {
 public:
  /// Registers `{prefix}.W.{type}.{head}` (d_k x d_in), optional
  /// `{prefix}.W_value.{type}.{head}`, and `{prefix}.W_edge` (d_k x d_edge).
  HeatLayer(const HeatLayerConfig& cfg, ParamStore& store, const std::string& prefix, Rng& rng);
  /// Binds to parameters already present in `store`.
  HeatLayer(const HeatLayerConfig& cfg, const ParamStore& store, const std::string& prefix);

  const HeatLayerConfig& config() const { return cfg_; }
  std::size_t projection(int type, int head) const { return proj_.at(type).at(head); }
  std::size_t value_projection(int type, int head) const;
  std::size_t edge_projection() const { return edge_proj_; }

  /// `node_types` gives the type index of each row of `h`.
  LayerOutput forward(const BoundParams& params, const GraphTensors& g, std::span<const int> node_types, Var h,
                      Var edge_attr) const;

 private:
  Var typed_projection(const BoundParams& params, const std::vector<std::vector<std::size_t>>& weights,
                       std::span<const int> node_types, Var h) const;

  HeatLayerConfig cfg_;
  std::vector<std::vector<std::size_t>> proj_;
  std::vector<std::vector<std::size_t>> value_proj_;
  std::size_t edge_proj_ = 0;
};

/// Per-edge projections for one edge, outside any tape.
struct EdgeProjection {
  std::vector<Eigen::VectorXd> key;    // per head, d_k
  std::vector<Eigen::VectorXd> query;  // per head, d_k
  std::vector<Eigen::VectorXd> value;  // per head, d_k
  Eigen::VectorXd edge;                // d_k
};

/// Projects edge `e` (index into g.src/g.dst) given layer inputs `h` (n x d_in)
/// and `edge_attr` (E x d_e). Throws ConfigError for a type without weights.
EdgeProjection project(const HeatLayer& layer, const ParamStore& params, const GraphTensors& g,
                       std::span<const int> node_types, std::size_t e, const Matrix& h, const Matrix& edge_attr);

/// sum_j key_j * edge_j * query_j / sqrt(d_k), with d_k = key.size().
double att_score(const Eigen::VectorXd& key, const Eigen::VectorXd& edge, const Eigen::VectorXd& query);

/// Column-wise softmax of a |N(t)| x heads score block. Throws ContractError
/// for an empty neighbourhood.
Matrix attention_softmax(const Matrix& scores);

}  // namespace heat
