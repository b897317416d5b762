#include "heat/explainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <sstream>

#include "heat/checkpoint.hpp"
#include "heat/errors.hpp"
#include "heat/train.hpp"

namespace heat {

using nlohmann::ordered_json;

namespace {

double loss_without(const Model& model, const HeteroGraph& g, int y, NodeId v) {
  if (g.num_nodes() <= 1) throw ContractError("removing node " + std::to_string(v) + " empties the graph");
  const HeteroGraph rest = remove_node(g, v);
  return graph_loss(model, GraphTensors::from(rest), y);
}

}  // namespace

double causal_contribution(const Model& model, const HeteroGraph& g, int y, NodeId v) {
  g.index_of(v);  // unknown ids throw LookupError
  return graph_loss(model, GraphTensors::from(g), y) - loss_without(model, g, y, v);
}

Attribution explain_graph(const Model& model, const HeteroGraph& g, int y, int jobs, const std::string& graph_id) {
  if (y < 0 || y >= model.config().num_classes) throw ConfigError("explain: label out of range");
  Attribution a;
  a.graph_id = graph_id;
  a.model_id = model_fingerprint(model);
  a.label = y;
  a.full_loss = graph_loss(model, GraphTensors::from(g), y);
  std::atomic<std::size_t> passes{1};

  const auto nodes = g.nodes();
  a.entries.resize(nodes.size());
  parallel_for(nodes.size(), jobs, [&](std::size_t i) {
    NodeAttribution& e = a.entries[i];
    e.id = nodes[i].id;
    e.pos = nodes[i].pos;
    try {
      if (g.num_nodes() <= 1) throw ContractError("removing node " + std::to_string(e.id) + " empties the graph");
      const GraphTensors rest = GraphTensors::from(remove_node(g, e.id));
      ++passes;
      e.delta = a.full_loss - graph_loss(model, rest, y);
    } catch (const ContractError& err) {
      e.error = err.what();
    }
  });
  a.forward_passes = passes;

  std::stable_sort(a.entries.begin(), a.entries.end(), [](const NodeAttribution& l, const NodeAttribution& r) {
    if (l.ok() != r.ok()) return l.ok();
    const double al = std::abs(l.delta), ar = std::abs(r.delta);
    if (al != ar) return al > ar;
    return l.id < r.id;
  });
  return a;
}

std::string model_fingerprint(const Model& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  const ParamStore& s = model.params();
  for (std::size_t i = 0; i < s.size(); ++i) {
    mix(s.name(i).data(), s.name(i).size());
    mix(s[i].data(), sizeof(double) * static_cast<std::size_t>(s[i].size()));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<NodeId> top_fraction(const Attribution& a, double fraction) {
  std::size_t ok = 0;
  for (const auto& e : a.entries) ok += e.ok();
  const auto k = std::min(ok, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(ok))));
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(a.entries[i].id);
  return out;
}

std::filesystem::path heatmap_sidecar(const std::filesystem::path& csv) {
  std::filesystem::path p = csv;
  p.replace_extension(".json");
  if (p == csv) p += ".summary.json";
  return p;
}

void export_heatmap(const Attribution& a, const std::filesystem::path& path, std::size_t top_k,
                    const ordered_json& provenance) {
  std::vector<NodeId> missing;
  for (const auto& e : a.entries) {
    if (e.ok() && !e.pos) missing.push_back(e.id);
  }
  if (!missing.empty()) {
    std::string ids;
    for (auto id : missing) ids += (ids.empty() ? "" : ",") + std::to_string(id);
    throw ContractError("heatmap: nodes without grid coordinates: " + ids);
  }

  std::ostringstream csv;
  csv << "node_id,x,y,delta\n";
  ordered_json summary;
  summary["graph_id"] = a.graph_id;
  summary["model_id"] = a.model_id;
  summary["label"] = a.label;
  summary["full_loss"] = a.full_loss;
  summary["sign"] = "delta = loss(full graph) - loss(graph without node); positive means the node opposed the label";
  summary["min"] = nullptr;
  summary["max"] = nullptr;
  summary["top_k"] = ordered_json::array();
  summary["errors"] = ordered_json::array();
  bool first = true;
  double lo = 0, hi = 0;
  for (const auto& e : a.entries) {
    if (!e.ok()) {
      summary["errors"].push_back({{"node_id", e.id}, {"message", e.error}});
      continue;
    }
    csv << e.id << ',' << e.pos->x << ',' << e.pos->y << ',' << format_double(e.delta) << "\n";
    lo = first ? e.delta : std::min(lo, e.delta);
    hi = first ? e.delta : std::max(hi, e.delta);
    first = false;
    if (summary["top_k"].size() < top_k) summary["top_k"].push_back(e.id);
  }
  if (!first) {
    summary["min"] = lo;
    summary["max"] = hi;
  }
  if (!provenance.is_null()) summary["provenance"] = provenance;
  write_text(path, csv.str());
  write_text(heatmap_sidecar(path), summary.dump(2) + "\n");
}

std::vector<HeatmapRow> parse_heatmap_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::vector<HeatmapRow> rows;
  if (!std::getline(in, line) || line != "node_id,x,y,delta") throw ParseError("expected heatmap header", 1);
  ++lineno;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (cells.size() != 4) throw ParseError("expected 4 columns", lineno);
    try {
      std::size_t used = 0;
      HeatmapRow r;
      r.id = std::stoll(cells[0], &used);
      r.x = std::stoi(cells[1]);
      r.y = std::stoi(cells[2]);
      r.delta = std::stod(cells[3], &used);
      if (used != cells[3].size()) throw std::invalid_argument("trailing");
      rows.push_back(r);
    } catch (const std::logic_error&) {
      throw ParseError("malformed heatmap row", lineno);
    }
  }
  return rows;
}

}  // namespace heat
