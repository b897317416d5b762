#include "heat/graph_io.hpp"

#include <fstream>
#include <sstream>

#include "heat/errors.hpp"

namespace heat {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json vector_to_json(const Eigen::VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vector_from_json(const json& a, const std::string& where) {
  if (!a.is_array()) throw ParseError(where + ": expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw ParseError(where + ": expected an array of numbers");
    v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  }
  return v;
}

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing field '" + key + "'");
  return *it;
}

}  // namespace

ordered_json graph_to_json(const HeteroGraph& g, const ordered_json& provenance) {
  ordered_json j;
  j["version"] = kGraphFormatVersion;
  j["types"] = g.types().names();
  ordered_json nodes = ordered_json::array();
  for (const Node& n : g.nodes()) {
    ordered_json o;
    o["id"] = n.id;
    o["type"] = g.types().name(n.type);
    if (n.pos) {
      o["x"] = n.pos->x;
      o["y"] = n.pos->y;
    }
    o["feat"] = vector_to_json(n.feature);
    nodes.push_back(std::move(o));
  }
  j["nodes"] = std::move(nodes);
  ordered_json edges = ordered_json::array();
  for (const Edge& e : g.edges()) {
    ordered_json o;
    o["src"] = e.src;
    o["dst"] = e.dst;
    o["attr"] = vector_to_json(e.attr);
    edges.push_back(std::move(o));
  }
  j["edges"] = std::move(edges);
  j["label"] = g.label() ? ordered_json(*g.label()) : ordered_json(nullptr);
  if (!provenance.is_null()) j["provenance"] = provenance;
  return j;
}

HeteroGraph graph_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("graph: expected a JSON object");
  const int version = require(j, "version", "graph").get<int>();
  if (version != kGraphFormatVersion) {
    throw ParseError("graph: unsupported format version " + std::to_string(version));
  }
  const json& type_names = require(j, "types", "graph");
  if (!type_names.is_array()) throw ParseError("graph: 'types' must be an array");
  TypeSet types(type_names.get<std::vector<std::string>>());

  std::vector<Node> nodes;
  for (const json& o : require(j, "nodes", "graph")) {
    const std::string where = "node " + std::to_string(nodes.size());
    Node n;
    n.id = require(o, "id", where).get<NodeId>();
    try {
      n.type = types.find(require(o, "type", where).get<std::string>());
    } catch (const LookupError& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (o.contains("x") || o.contains("y")) {
      n.pos = GridPos{require(o, "x", where).get<int>(), require(o, "y", where).get<int>()};
    }
    n.feature = vector_from_json(require(o, "feat", where), where);
    nodes.push_back(std::move(n));
  }

  std::vector<Edge> edges;
  for (const json& o : require(j, "edges", "graph")) {
    const std::string where = "edge " + std::to_string(edges.size());
    Edge e;
    e.src = require(o, "src", where).get<NodeId>();
    e.dst = require(o, "dst", where).get<NodeId>();
    e.attr = vector_from_json(require(o, "attr", where), where);
    edges.push_back(std::move(e));
  }

  std::optional<int> label;
  if (auto it = j.find("label"); it != j.end() && !it->is_null()) label = it->get<int>();
  return HeteroGraph(std::move(types), std::move(nodes), std::move(edges), label);
}

std::string serialize_graph(const HeteroGraph& g, const ordered_json& provenance) {
  return graph_to_json(g, provenance).dump();
}

HeteroGraph parse_graph(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("graph: ") + e.what());
  }
  try {
    return graph_from_json(j);
  } catch (const json::exception& e) {
    throw ParseError(std::string("graph: ") + e.what());
  }
}

void save_graph(const std::filesystem::path& path, const HeteroGraph& g, const ordered_json& provenance) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << serialize_graph(g, provenance) << '\n';
}

HeteroGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_graph(ss.str());
}

}  // namespace heat
