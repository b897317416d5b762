#include "heat/hetgraph.hpp"

#include <algorithm>
#include <set>
#include <utility>

#include "heat/errors.hpp"

namespace heat {

TypeSet::TypeSet() : TypeSet(nuclei()) {}

TypeSet::TypeSet(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty()) throw ConfigError("TypeSet: at least one type is required");
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (!seen.insert(n).second) throw ConfigError("TypeSet: duplicate type name '" + n + "'");
  }
}

TypeSet TypeSet::nuclei() {
  return TypeSet(std::vector<std::string>{"no-label", "neoplastic", "inflammatory", "connective", "dead",
                                          "non-neoplastic-epithelial"});
}

TypeSet TypeSet::clusters(int k) {
  if (k < 1) throw ConfigError("TypeSet::clusters: k must be positive");
  std::vector<std::string> names;
  for (int i = 0; i < k; ++i) names.push_back("cluster_" + std::to_string(i));
  return TypeSet(std::move(names));
}

const std::string& TypeSet::name(NodeType t) const {
  if (!contains(t)) throw LookupError("unknown node type index " + std::to_string(t.index));
  return names_[t.index];
}

NodeType TypeSet::find(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw LookupError("unknown node type '" + std::string(name) + "'");
  return NodeType{static_cast<int>(it - names_.begin())};
}

HeteroGraph::HeteroGraph(TypeSet types, std::vector<Node> nodes, std::vector<Edge> edges,
                         std::optional<int> label)
    : types_(std::move(types)), nodes_(std::move(nodes)), edges_(std::move(edges)), label_(label) {
  index_.reserve(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) index_.emplace(nodes_[i].id, i);
}

std::size_t HeteroGraph::index_of(NodeId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw LookupError("unknown node id " + std::to_string(id));
  return it->second;
}

HeteroGraph HeteroGraph::with_label(std::optional<int> label) const {
  HeteroGraph g = *this;
  g.label_ = label;
  return g;
}

namespace {

bool same_vector(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

}  // namespace

bool operator==(const HeteroGraph& a, const HeteroGraph& b) {
  if (a.types_ != b.types_ || a.label_ != b.label_) return false;
  if (a.nodes_.size() != b.nodes_.size() || a.edges_.size() != b.edges_.size()) return false;
  for (std::size_t i = 0; i < a.nodes_.size(); ++i) {
    const Node& x = a.nodes_[i];
    const Node& y = b.nodes_[i];
    if (x.id != y.id || x.type != y.type || x.pos != y.pos || !same_vector(x.feature, y.feature)) return false;
  }
  for (std::size_t i = 0; i < a.edges_.size(); ++i) {
    const Edge& x = a.edges_[i];
    const Edge& y = b.edges_[i];
    if (x.src != y.src || x.dst != y.dst || !same_vector(x.attr, y.attr)) return false;
  }
  return true;
}

std::optional<Violation> validate(const HeteroGraph& g) {
  using K = Violation::Kind;
  const auto nodes = g.nodes();
  std::set<NodeId> ids;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& n = nodes[i];
    const std::string where = "node " + std::to_string(n.id);
    if (!ids.insert(n.id).second) return Violation{K::kNode, i, "id", where + ": duplicate id"};
    if (!g.types().contains(n.type)) return Violation{K::kNode, i, "type", where + ": type outside the type set"};
    if (n.feature.size() != nodes.front().feature.size()) {
      return Violation{K::kNode, i, "feature",
                       where + ": feature dimension " + std::to_string(n.feature.size()) + " differs from " +
                           std::to_string(nodes.front().feature.size())};
    }
    if (!n.feature.allFinite()) return Violation{K::kNode, i, "feature", where + ": non-finite feature"};
  }

  const auto edges = g.edges();
  std::set<std::pair<NodeId, NodeId>> pairs;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const Edge& e = edges[i];
    const std::string where = "edge " + std::to_string(e.src) + "->" + std::to_string(e.dst);
    if (!g.has_node(e.src)) return Violation{K::kEdge, i, "src", where + ": source node does not exist"};
    if (!g.has_node(e.dst)) return Violation{K::kEdge, i, "dst", where + ": destination node does not exist"};
    if (e.attr.size() != edges.front().attr.size()) {
      return Violation{K::kEdge, i, "attr", where + ": attribute dimension differs"};
    }
    if (!e.attr.allFinite()) return Violation{K::kEdge, i, "attr", where + ": non-finite attribute"};
    if (!pairs.emplace(e.src, e.dst).second) return Violation{K::kEdge, i, "dst", where + ": duplicate edge"};
  }

  if (g.label() && *g.label() < 0) return Violation{K::kLabel, 0, "label", "negative graph label"};
  return std::nullopt;
}

HeteroGraph remove_node(const HeteroGraph& g, NodeId v) {
  if (!g.has_node(v)) throw LookupError("remove_node: unknown node id " + std::to_string(v));
  std::vector<Node> nodes;
  nodes.reserve(g.num_nodes() - 1);
  for (const Node& n : g.nodes()) {
    if (n.id != v) nodes.push_back(n);
  }
  std::vector<Edge> edges;
  edges.reserve(g.num_edges());
  for (const Edge& e : g.edges()) {
    if (e.src != v && e.dst != v) edges.push_back(e);
  }
  return HeteroGraph(g.types(), std::move(nodes), std::move(edges), g.label());
}

std::vector<Edge> incoming(const HeteroGraph& g, NodeId t) {
  if (!g.has_node(t)) throw LookupError("incoming: unknown node id " + std::to_string(t));
  std::vector<Edge> out;
  for (const Edge& e : g.edges()) {
    if (e.dst == t) out.push_back(e);
  }
  std::stable_sort(out.begin(), out.end(), [](const Edge& a, const Edge& b) { return a.src < b.src; });
  return out;
}

}  // namespace heat
