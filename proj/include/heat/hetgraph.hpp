#pragma once

#include <Eigen/Dense>

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace heat {

/// Index of a node type within its TypeSet.
struct NodeType {
  int index = 0;
  friend auto operator<=>(const NodeType&, const NodeType&) = default;
};

/// The type vocabulary of an experiment. Order is significant: it is the
/// tie-break order for majority voting and the row order of pooled features.
class TypeSet {
 public:
  TypeSet();  // the six nucleus categories
  explicit TypeSet(std::vector<std::string> names);

  static TypeSet nuclei();
  /// "cluster_0" ... "cluster_{k-1}", used by k-means typing.
  static TypeSet clusters(int k);

  int size() const { return static_cast<int>(names_.size()); }
  const std::string& name(NodeType t) const;
  NodeType find(std::string_view name) const;
  bool contains(NodeType t) const { return t.index >= 0 && t.index < size(); }
  const std::vector<std::string>& names() const { return names_; }

  friend bool operator==(const TypeSet&, const TypeSet&) = default;

 private:
  std::vector<std::string> names_;
};

namespace nuclei {
inline constexpr NodeType kNoLabel{0};
inline constexpr NodeType kNeoplastic{1};
inline constexpr NodeType kInflammatory{2};
inline constexpr NodeType kConnective{3};
inline constexpr NodeType kDead{4};
inline constexpr NodeType kEpithelial{5};
}  // namespace nuclei

using NodeId = std::int64_t;

struct GridPos {
  int x = 0;
  int y = 0;
  friend bool operator==(const GridPos&, const GridPos&) = default;
};

struct Node {
  NodeId id = 0;
  NodeType type;
  Eigen::VectorXd feature;
  std::optional<GridPos> pos;
};

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  Eigen::VectorXd attr;
};

/// Typed nodes with feature vectors and directed, attributed edges.
/// Immutable once built; operations that change structure return new graphs.
class HeteroGraph {
 public:
  HeteroGraph() = default;
  HeteroGraph(TypeSet types, std::vector<Node> nodes, std::vector<Edge> edges,
              std::optional<int> label = std::nullopt);

  const TypeSet& types() const { return types_; }
  std::span<const Node> nodes() const { return nodes_; }
  std::span<const Edge> edges() const { return edges_; }
  std::optional<int> label() const { return label_; }
  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_edges() const { return edges_.size(); }
  bool empty() const { return nodes_.empty(); }

  bool has_node(NodeId id) const { return index_.contains(id); }
  /// Position of `id` in nodes(); throws LookupError for unknown ids.
  std::size_t index_of(NodeId id) const;
  const Node& node(NodeId id) const { return nodes_[index_of(id)]; }

  /// Feature dimension d (0 for an empty graph).
  Eigen::Index feature_dim() const { return nodes_.empty() ? 0 : nodes_.front().feature.size(); }
  /// Edge attribute dimension d_e (0 without edges).
  Eigen::Index edge_dim() const { return edges_.empty() ? 0 : edges_.front().attr.size(); }

  HeteroGraph with_label(std::optional<int> label) const;

  friend bool operator==(const HeteroGraph& a, const HeteroGraph& b);

 private:
  TypeSet types_;
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::optional<int> label_;
  std::unordered_map<NodeId, std::size_t> index_;
};

struct Violation {
  enum class Kind { kNode, kEdge, kLabel };
  Kind kind;
  std::size_t position;  // index into nodes() or edges()
  std::string field;     // offending field, e.g. "dst", "feature"
  std::string message;
};

/// First invariant violation, or nullopt when the graph is well formed.
std::optional<Violation> validate(const HeteroGraph& g);

/// Copy of g without node v and every edge incident to v.
HeteroGraph remove_node(const HeteroGraph& g, NodeId v);

/// Edges whose destination is t, in ascending source-id order.
std::vector<Edge> incoming(const HeteroGraph& g, NodeId t);

}  // namespace heat
