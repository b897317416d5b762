#include "heat/checkpoint.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <system_error>

#include "heat/errors.hpp"

namespace heat {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

const json* field(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

[[noreturn]] void mistyped(const std::string& where, const char* key, const char* expected) {
  throw ConfigError(where + "." + key + ": expected " + expected);
}

void take(const json& j, const char* key, int& out, const std::string& where) {
  if (const json* v = field(j, key)) {
    if (!v->is_number_integer()) mistyped(where, key, "an integer");
    out = v->get<int>();
  }
}

void take(const json& j, const char* key, std::uint64_t& out, const std::string& where) {
  if (const json* v = field(j, key)) {
    if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() && v->get<std::int64_t>() < 0)) {
      mistyped(where, key, "a non-negative integer");
    }
    out = v->get<std::uint64_t>();
  }
}

void take(const json& j, const char* key, double& out, const std::string& where) {
  if (const json* v = field(j, key)) {
    if (!v->is_number()) mistyped(where, key, "a number");
    out = v->get<double>();
  }
}

void take(const json& j, const char* key, bool& out, const std::string& where) {
  if (const json* v = field(j, key)) {
    if (!v->is_boolean()) mistyped(where, key, "a boolean");
    out = v->get<bool>();
  }
}

void take(const json& j, const char* key, std::string& out, const std::string& where) {
  if (const json* v = field(j, key)) {
    if (!v->is_string()) mistyped(where, key, "a string");
    out = v->get<std::string>();
  }
}

template <class E>
void take_enum(const json& j, const char* key, E& out, std::initializer_list<std::pair<const char*, E>> names,
               const std::string& where) {
  const json* v = field(j, key);
  if (!v) return;
  if (v->is_string()) {
    for (const auto& [name, value] : names) {
      if (v->get<std::string>() == name) {
        out = value;
        return;
      }
    }
  }
  std::string expected = "one of";
  for (const auto& [name, _] : names) expected += std::string(" \"") + name + "\"";
  mistyped(where, key, expected.c_str());
}

const char* name(Aggregation a) { return a == Aggregation::kMean ? "mean" : "sum"; }
const char* name(FinalReadout r) { return r == FinalReadout::kMean ? "mean" : "sum"; }
const char* name(Pooling p) { return p == Pooling::kPseudoLabel ? "pseudo_label" : "mean"; }
const char* name(Similarity s) { return s == Similarity::kCosine ? "cosine" : "neg_euclidean"; }
const char* name(SynthVariant v) { return v == SynthVariant::kInfiltration ? "infiltration" : "stroma"; }

}  // namespace

RunConfig RunConfig::resolved() const {
  RunConfig r = *this;
  r.build.seed = seed;
  r.train.seed = seed;
  r.model.dropout = train.dropout;
  r.build.validate();
  r.train.validate();
  r.model.validate();
  r.synth.validate();
  if (synth_graphs < 1) throw ConfigError("synth_graphs must be positive");
  return r;
}

ordered_json to_json(const AugmentConfig& c) {
  ordered_json j;
  j["edge_drop_prob"] = c.edge_drop_prob;
  j["node_drop_prob"] = c.node_drop_prob;
  j["feature_noise_sigma"] = c.feature_noise_sigma;
  j["edge_noise_sigma"] = c.edge_noise_sigma;
  return j;
}

ordered_json to_json(const BuildConfig& c) {
  ordered_json j;
  j["k"] = c.k;
  j["add_self_loops"] = c.add_self_loops;
  j["symmetric_edges"] = c.symmetric_edges;
  j["similarity"] = name(c.similarity);
  return j;
}

ordered_json to_json(const TrainConfig& c) {
  ordered_json j;
  j["learning_rate"] = c.learning_rate;
  j["weight_decay"] = c.weight_decay;
  j["max_epochs"] = c.max_epochs;
  j["batch_size"] = c.batch_size;
  j["patience"] = c.patience;
  j["dropout"] = c.dropout;
  j["folds"] = c.folds;
  j["adam_beta1"] = AdamConfig{}.beta1;
  j["adam_beta2"] = AdamConfig{}.beta2;
  j["adam_eps"] = AdamConfig{}.eps;
  j["decoupled_weight_decay"] = c.decoupled_weight_decay;
  j["augmentation"] = to_json(c.augmentation);
  return j;
}

ordered_json to_json(const ModelConfig& c) {
  ordered_json j;
  j["feature_dim"] = c.feature_dim;
  j["hidden_dim"] = c.hidden_dim;
  j["heads"] = c.heads;
  j["layers"] = c.layers;
  j["num_types"] = c.num_types;
  j["num_classes"] = c.num_classes;
  j["edge_dim"] = c.edge_dim;
  j["aggregation"] = name(c.aggregation);
  j["leaky_slope"] = c.leaky_slope;
  j["dropout"] = c.dropout;
  j["decouple_value"] = c.decouple_value;
  j["type_aware"] = c.type_aware;
  j["edge_modulation"] = c.edge_modulation;
  j["pooling"] = name(c.pooling);
  j["trainable_readout"] = c.trainable_readout;
  j["final_readout"] = name(c.final_readout);
  return j;
}

ordered_json to_json(const SyntheticSpec& c) {
  ordered_json j;
  j["min_nodes"] = c.min_nodes;
  j["max_nodes"] = c.max_nodes;
  j["feature_dim"] = c.feature_dim;
  j["regions"] = c.regions;
  j["region_scale"] = c.region_scale;
  j["feature_offset"] = c.feature_offset;
  j["feature_sigma"] = c.feature_sigma;
  j["type_weights"] = c.type_weights;
  j["infiltration_prob"] = c.infiltration_prob;
  j["theta"] = c.theta;
  j["label_noise"] = c.label_noise;
  j["k"] = c.k;
  j["variant"] = name(c.variant);
  return j;
}

ordered_json to_json(const RunConfig& c) {
  ordered_json j;
  j["command"] = c.command;
  j["paths"] = c.paths;
  j["seed"] = c.seed;
  j["deterministic"] = c.deterministic;
  j["model"] = to_json(c.model);
  j["train"] = to_json(c.train);
  j["build"] = to_json(c.build);
  j["synth"] = to_json(c.synth);
  j["synth_graphs"] = c.synth_graphs;
  return j;
}

AugmentConfig augment_config_from_json(const json& j, AugmentConfig c) {
  const std::string w = "augmentation";
  check_keys(j, {"edge_drop_prob", "node_drop_prob", "feature_noise_sigma", "edge_noise_sigma"}, w);
  take(j, "edge_drop_prob", c.edge_drop_prob, w);
  take(j, "node_drop_prob", c.node_drop_prob, w);
  take(j, "feature_noise_sigma", c.feature_noise_sigma, w);
  take(j, "edge_noise_sigma", c.edge_noise_sigma, w);
  return c;
}

BuildConfig build_config_from_json(const json& j, BuildConfig c) {
  const std::string w = "build";
  check_keys(j, {"k", "add_self_loops", "symmetric_edges", "similarity"}, w);
  take(j, "k", c.k, w);
  take(j, "add_self_loops", c.add_self_loops, w);
  take(j, "symmetric_edges", c.symmetric_edges, w);
  take_enum(j, "similarity", c.similarity, {{"cosine", Similarity::kCosine}, {"neg_euclidean", Similarity::kNegEuclidean}},
            w);
  return c;
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  const std::string w = "train";
  check_keys(j,
             {"learning_rate", "weight_decay", "max_epochs", "batch_size", "patience", "dropout", "folds",
              "adam_beta1", "adam_beta2", "adam_eps", "decoupled_weight_decay", "augmentation"},
             w);
  take(j, "learning_rate", c.learning_rate, w);
  take(j, "weight_decay", c.weight_decay, w);
  take(j, "max_epochs", c.max_epochs, w);
  take(j, "batch_size", c.batch_size, w);
  take(j, "patience", c.patience, w);
  take(j, "dropout", c.dropout, w);
  take(j, "folds", c.folds, w);
  take(j, "decoupled_weight_decay", c.decoupled_weight_decay, w);
  const AdamConfig adam;
  for (auto [key, expected] : {std::pair{"adam_beta1", adam.beta1}, std::pair{"adam_beta2", adam.beta2},
                               std::pair{"adam_eps", adam.eps}}) {
    double v = expected;
    take(j, key, v, w);
    if (v != expected) throw ConfigError(std::string("train.") + key + ": only the default value is supported");
  }
  if (const json* a = field(j, "augmentation")) c.augmentation = augment_config_from_json(*a, c.augmentation);
  return c;
}

ModelConfig model_config_from_json(const json& j, ModelConfig c) {
  const std::string w = "model";
  check_keys(j,
             {"feature_dim", "hidden_dim", "heads", "layers", "num_types", "num_classes", "edge_dim", "aggregation",
              "leaky_slope", "dropout", "decouple_value", "type_aware", "edge_modulation", "pooling",
              "trainable_readout", "final_readout"},
             w);
  take(j, "feature_dim", c.feature_dim, w);
  take(j, "hidden_dim", c.hidden_dim, w);
  take(j, "heads", c.heads, w);
  take(j, "layers", c.layers, w);
  take(j, "num_types", c.num_types, w);
  take(j, "num_classes", c.num_classes, w);
  take(j, "edge_dim", c.edge_dim, w);
  take_enum(j, "aggregation", c.aggregation, {{"mean", Aggregation::kMean}, {"sum", Aggregation::kSum}}, w);
  take(j, "leaky_slope", c.leaky_slope, w);
  take(j, "dropout", c.dropout, w);
  take(j, "decouple_value", c.decouple_value, w);
  take(j, "type_aware", c.type_aware, w);
  take(j, "edge_modulation", c.edge_modulation, w);
  take_enum(j, "pooling", c.pooling, {{"pseudo_label", Pooling::kPseudoLabel}, {"mean", Pooling::kMean}}, w);
  take(j, "trainable_readout", c.trainable_readout, w);
  take_enum(j, "final_readout", c.final_readout, {{"mean", FinalReadout::kMean}, {"sum", FinalReadout::kSum}}, w);
  return c;
}

SyntheticSpec synth_spec_from_json(const json& j, SyntheticSpec c) {
  const std::string w = "synth";
  check_keys(j,
             {"min_nodes", "max_nodes", "feature_dim", "regions", "region_scale", "feature_offset", "feature_sigma",
              "type_weights", "infiltration_prob", "theta", "label_noise", "k", "variant"},
             w);
  take(j, "min_nodes", c.min_nodes, w);
  take(j, "max_nodes", c.max_nodes, w);
  take(j, "feature_dim", c.feature_dim, w);
  take(j, "regions", c.regions, w);
  take(j, "region_scale", c.region_scale, w);
  take(j, "feature_offset", c.feature_offset, w);
  take(j, "feature_sigma", c.feature_sigma, w);
  if (const json* v = field(j, "type_weights")) {
    if (!v->is_array()) mistyped(w, "type_weights", "an array of numbers");
    c.type_weights.clear();
    for (const auto& x : *v) {
      if (!x.is_number()) mistyped(w, "type_weights", "an array of numbers");
      c.type_weights.push_back(x.get<double>());
    }
  }
  take(j, "infiltration_prob", c.infiltration_prob, w);
  take(j, "theta", c.theta, w);
  take(j, "label_noise", c.label_noise, w);
  take(j, "k", c.k, w);
  take_enum(j, "variant", c.variant,
            {{"infiltration", SynthVariant::kInfiltration}, {"stroma", SynthVariant::kStroma}}, w);
  return c;
}

RunConfig run_config_from_json(const json& j, RunConfig c) {
  const std::string w = "config";
  check_keys(j, {"command", "paths", "seed", "deterministic", "model", "train", "build", "synth", "synth_graphs"}, w);
  take(j, "command", c.command, w);
  if (const json* p = field(j, "paths")) {
    if (!p->is_object()) mistyped(w, "paths", "an object of strings");
    for (const auto& [k, v] : p->items()) {
      if (!v.is_string()) mistyped(w, "paths", "an object of strings");
      c.paths[k] = v.get<std::string>();
    }
  }
  take(j, "seed", c.seed, w);
  take(j, "deterministic", c.deterministic, w);
  if (const json* v = field(j, "model")) c.model = model_config_from_json(*v, c.model);
  if (const json* v = field(j, "train")) c.train = train_config_from_json(*v, c.train);
  if (const json* v = field(j, "build")) c.build = build_config_from_json(*v, c.build);
  if (const json* v = field(j, "synth")) c.synth = synth_spec_from_json(*v, c.synth);
  take(j, "synth_graphs", c.synth_graphs, w);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

ordered_json provenance(const RunConfig& cfg) {
  ordered_json j;
  j["tool"] = kToolName;
  j["format_version"] = kCheckpointVersion;
  j["seed"] = cfg.seed;
  j["config"] = to_json(cfg);
  return j;
}

std::string serialize_checkpoint(const Checkpoint& c) {
  ordered_json j;
  j["version"] = kCheckpointVersion;
  j["provenance"] = c.provenance;
  j["model"] = to_json(c.model.config());
  j["epoch"] = c.epoch;
  j["val_loss"] = c.val_loss;
  ordered_json params = ordered_json::object();
  const ParamStore& store = c.model.params();
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Matrix& m = store[i];
    ordered_json p;
    p["rows"] = m.rows();
    p["cols"] = m.cols();
    p["data"] = std::vector<double>(m.data(), m.data() + m.size());
    params[store.name(i)] = std::move(p);
  }
  j["params"] = std::move(params);
  return j.dump() + "\n";
}

Checkpoint parse_checkpoint(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  try {
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw ParseError("checkpoint: unsupported version " + j.at("version").dump());
    }
    const ModelConfig cfg = model_config_from_json(j.at("model"));
    Model model(cfg, std::uint64_t{0});
    const json& params = j.at("params");
    if (params.size() != model.params().size()) throw ParseError("checkpoint: parameter count mismatch");
    for (std::size_t i = 0; i < model.params().size(); ++i) {
      const std::string& pname = model.params().name(i);
      if (!params.contains(pname)) throw ParseError("checkpoint: missing parameter '" + pname + "'");
      const json& p = params.at(pname);
      const auto rows = p.at("rows").get<Eigen::Index>();
      const auto cols = p.at("cols").get<Eigen::Index>();
      const auto data = p.at("data").get<std::vector<double>>();
      Matrix& dst = model.params()[i];
      if (rows != dst.rows() || cols != dst.cols() || static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw ParseError("checkpoint: shape mismatch for '" + pname + "'");
      }
      std::copy(data.begin(), data.end(), dst.data());
    }
    Checkpoint c{std::move(model), j.at("epoch").get<int>(), j.at("val_loss").get<double>(), nullptr};
    if (j.contains("provenance")) c.provenance = ordered_json::parse(text).at("provenance");
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  write_text(path, serialize_checkpoint(c));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_text(path)); }

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_train_log(std::span<const EpochLog> log, const ordered_json& provenance) {
  std::ostringstream out;
  if (!provenance.is_null()) out << "# provenance: " << provenance.dump() << "\n";
  out << "epoch,train_loss,val_loss,val_auc,lr,seconds\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_loss) << ','
        << format_double(e.val_auc) << ',' << format_double(e.lr) << ',' << format_double(e.seconds) << "\n";
  }
  return out.str();
}

std::vector<EpochLog> parse_train_log(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  std::vector<EpochLog> out;
  auto number = [&](const std::string& s) {
    if (s == "nan") return std::nan("");
    if (s == "inf") return HUGE_VAL;
    if (s == "-inf") return -HUGE_VAL;
    double v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ParseError("bad number '" + s + "'", lineno);
    return v;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "epoch,train_loss,val_loss,val_auc,lr,seconds") throw ParseError("unexpected log header", lineno);
      header = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 6) throw ParseError("expected 6 columns", lineno);
    EpochLog e;
    e.epoch = static_cast<int>(number(cells[0]));
    e.train_loss = number(cells[1]);
    e.val_loss = number(cells[2]);
    e.val_auc = number(cells[3]);
    e.lr = number(cells[4]);
    e.seconds = number(cells[5]);
    out.push_back(e);
  }
  if (!header) throw ParseError("missing log header", lineno);
  return out;
}

namespace {

ordered_json metrics_object(const Metrics& m) {
  ordered_json j;
  j["auc"] = m.auc;  // NaN is written as null
  j["accuracy"] = m.accuracy;
  j["macro_f1"] = m.macro_f1;
  j["loss"] = m.loss;
  j["count"] = m.count;
  return j;
}

}  // namespace

ordered_json metrics_to_json(const Metrics& mean, std::span<const Metrics> per_fold, const ordered_json& provenance) {
  ordered_json j = metrics_object(mean);
  j["per_fold"] = ordered_json::array();
  for (const auto& m : per_fold) j["per_fold"].push_back(metrics_object(m));
  if (!provenance.is_null()) j["provenance"] = provenance;
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace heat
