#include "heat/patch_table.hpp"

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "heat/errors.hpp"

namespace heat {

namespace {

using nlohmann::json;

PatchRecord patch_from_json(const json& j, const TypeSet& types, std::size_t line) {
  if (!j.is_object()) throw ParseError("expected a JSON object", line);
  PatchRecord p;
  auto field = [&](const char* key) -> const json& {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(std::string("missing field '") + key + "'", line);
    return *it;
  };
  try {
    const json& id = field("id");
    p.id = id.is_string() ? id.get<std::string>() : id.dump();
    p.x = field("x").get<int>();
    p.y = field("y").get<int>();
    const json& feat = field("feat");
    if (!feat.is_array() || feat.empty()) throw ParseError("'feat' must be a non-empty array", line);
    p.feature.resize(static_cast<Eigen::Index>(feat.size()));
    for (std::size_t i = 0; i < feat.size(); ++i) p.feature[static_cast<Eigen::Index>(i)] = feat[i].get<double>();
    if (auto it = j.find("type"); it != j.end()) {
      p.type = types.find(it->get<std::string>());
    } else if (auto tc = j.find("type_counts"); tc != j.end()) {
      if (!tc->is_object()) throw ParseError("'type_counts' must be an object", line);
      for (const auto& [name, count] : tc->items()) {
        const auto c = count.get<std::int64_t>();
        if (c < 0) throw ParseError("negative count for type '" + name + "'", line);
        p.type_counts[types.find(name)] = c;
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(e.what(), line);
  } catch (const LookupError& e) {
    throw ParseError(e.what(), line);
  }
  return p;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

void check_dimension(const std::vector<PatchRecord>& out, std::size_t line) {
  if (out.size() > 1 && out.back().feature.size() != out.front().feature.size()) {
    throw ParseError("feature dimension " + std::to_string(out.back().feature.size()) + " differs from " +
                         std::to_string(out.front().feature.size()),
                     line);
  }
}

}  // namespace

std::vector<PatchRecord> parse_patch_jsonl(std::istream& in, const TypeSet& types) {
  std::vector<PatchRecord> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line);
    }
    out.push_back(patch_from_json(j, types, line));
    check_dimension(out, line);
  }
  return out;
}

std::vector<PatchRecord> parse_patch_csv(std::istream& in, const TypeSet& types) {
  std::vector<PatchRecord> out;
  std::string text;
  std::size_t line = 0;
  if (!std::getline(in, text)) throw ParseError("empty CSV", 1);
  ++line;
  const auto header = split_csv(text);
  if (header.size() < 5 || header[0] != "id" || header[1] != "x" || header[2] != "y" || header[3] != "type") {
    throw ParseError("CSV header must start with id,x,y,type followed by feature columns", line);
  }
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv(text);
    if (cells.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " columns, got " + std::to_string(cells.size()),
                       line);
    }
    PatchRecord p;
    p.id = cells[0];
    try {
      std::size_t used = 0;
      p.x = std::stoi(cells[1], &used);
      if (used != cells[1].size()) throw std::invalid_argument("x");
      p.y = std::stoi(cells[2], &used);
      if (used != cells[2].size()) throw std::invalid_argument("y");
      p.type = cells[3].empty() ? nuclei::kNoLabel : types.find(cells[3]);
      p.feature.resize(static_cast<Eigen::Index>(cells.size() - 4));
      for (std::size_t i = 4; i < cells.size(); ++i) {
        p.feature[static_cast<Eigen::Index>(i - 4)] = std::stod(cells[i], &used);
        if (used != cells[i].size()) throw std::invalid_argument("feature");
      }
    } catch (const LookupError& e) {
      throw ParseError(e.what(), line);
    } catch (const std::exception&) {
      throw ParseError("malformed numeric cell", line);
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<PatchRecord> load_patch_table(const std::filesystem::path& path, const TypeSet& types) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  if (path.extension() == ".csv") return parse_patch_csv(in, types);
  return parse_patch_jsonl(in, types);
}

}  // namespace heat
