#pragma once

// Patch-table ingestion.
//
// JSON Lines, one patch per line:
//   {"id": "p0", "x": 3, "y": 7, "feat": [...], "type_counts": {"neoplastic": 5, ...}}
//   {"id": "p1", "x": 4, "y": 7, "feat": [...], "type": "inflammatory"}
// A record with neither field is no-label. Blank lines are skipped.
//
// CSV with header `id,x,y,type,f0,f1,...,f{d-1}`; `type` may be empty
// (no-label). Feature column names after `type` are free-form.

#include <filesystem>
#include <istream>
#include <vector>

#include "heat/graph_builder.hpp"

namespace heat {

std::vector<PatchRecord> parse_patch_jsonl(std::istream& in, const TypeSet& types = TypeSet::nuclei());
std::vector<PatchRecord> parse_patch_csv(std::istream& in, const TypeSet& types = TypeSet::nuclei());

/// Dispatches on extension: ".csv" reads CSV, anything else JSON Lines.
std::vector<PatchRecord> load_patch_table(const std::filesystem::path& path, const TypeSet& types = TypeSet::nuclei());

}  // namespace heat
