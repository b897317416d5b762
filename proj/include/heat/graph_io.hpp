#pragma once

// Versioned JSON graph file:
//   {"version": 1, "types": [...], "nodes": [{"id", "type", "x", "y", "feat"}],
//    "edges": [{"src", "dst", "attr"}], "label": int | null}
// Node "type" is the type name. "x"/"y" are omitted for nodes without grid
// coordinates. An optional "provenance" object is written when given and
// ignored on read. Doubles are written in shortest round-trip form.

#include <filesystem>
#include <string>

#include "json.hpp"

#include "heat/hetgraph.hpp"

namespace heat {

inline constexpr int kGraphFormatVersion = 1;

nlohmann::ordered_json graph_to_json(const HeteroGraph& g, const nlohmann::ordered_json& provenance = nullptr);
HeteroGraph graph_from_json(const nlohmann::json& j);

std::string serialize_graph(const HeteroGraph& g, const nlohmann::ordered_json& provenance = nullptr);
HeteroGraph parse_graph(const std::string& text);

void save_graph(const std::filesystem::path& path, const HeteroGraph& g,
                const nlohmann::ordered_json& provenance = nullptr);
HeteroGraph load_graph(const std::filesystem::path& path);

}  // namespace heat
