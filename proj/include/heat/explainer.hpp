#pragma once

// Leave-one-node-out attribution:
//   delta(v) = CE(y, f(G)) - CE(y, f(G \ {v}))
// Positive delta: removing v lowers the loss, so v worked against label y.
// Negative delta: v supported the prediction of y. Rankings use |delta|.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "heat/hetgraph.hpp"
#include "heat/model.hpp"

namespace heat {

struct NodeAttribution {
  NodeId id = 0;
  std::optional<GridPos> pos;
  double delta = 0;
  std::string error;  // nonempty when the node could not be attributed

  bool ok() const { return error.empty(); }
};

struct Attribution {
  std::string graph_id;
  std::string model_id;
  int label = 0;
  double full_loss = 0;
  std::vector<NodeAttribution> entries;  // descending |delta|, ties by id; failures last
  std::size_t forward_passes = 0;
};

/// Throws ContractError when removing v leaves an unusable graph (empty, or a
/// node without incoming edges).
double causal_contribution(const Model& model, const HeteroGraph& g, int y, NodeId v);

/// One full-graph evaluation plus one per node; node failures become error entries.
Attribution explain_graph(const Model& model, const HeteroGraph& g, int y, int jobs = 1,
                          const std::string& graph_id = "");

/// Hex digest of parameter names and values.
std::string model_fingerprint(const Model& model);

/// Indices of the top ceil(fraction * n) successful entries of `a`.
std::vector<NodeId> top_fraction(const Attribution& a, double fraction);

struct HeatmapRow {
  NodeId id = 0;
  int x = 0;
  int y = 0;
  double delta = 0;
};

/// Writes `path` (CSV node_id,x,y,delta in ranking order) and the sidecar
/// heatmap_sidecar(path) with {min, max, top_k, ...}. Throws ContractError
/// listing nodes without grid coordinates.
void export_heatmap(const Attribution& a, const std::filesystem::path& path, std::size_t top_k = 10,
                    const nlohmann::ordered_json& provenance = nullptr);

std::filesystem::path heatmap_sidecar(const std::filesystem::path& csv);
std::vector<HeatmapRow> parse_heatmap_csv(const std::string& text);

}  // namespace heat
