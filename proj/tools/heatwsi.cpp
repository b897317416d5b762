// heatwsi: graph construction, training, evaluation and attribution for
// typed patch graphs.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "heat/checkpoint.hpp"
#include "heat/errors.hpp"
#include "heat/explainer.hpp"
#include "heat/graph_io.hpp"
#include "heat/patch_table.hpp"
#include "heat/synth.hpp"
#include "heat/train.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace heat;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitUsage = 64;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool deterministic = false;
  std::string out = ".";

  std::string input;
  std::string data;
  std::string checkpoint;
  std::string graph;
  std::optional<int> fold;
  std::optional<int> label;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<int> graphs;
  std::optional<int> k;
  std::size_t top_k = 10;
};

RunConfig resolve(const Options& o, const std::string& command, std::map<std::string, std::string> paths) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : load_run_config(o.config_path);
  c.command = command;
  if (!o.config_path.empty()) paths["config"] = o.config_path;
  paths["out"] = o.out;
  c.paths = std::move(paths);
  if (o.seed) c.seed = *o.seed;
  if (o.deterministic) c.deterministic = true;
  if (o.epochs) c.train.max_epochs = *o.epochs;
  if (o.lr) c.train.learning_rate = *o.lr;
  if (o.graphs) c.synth_graphs = *o.graphs;
  if (o.k) c.build.k = *o.k;
  if (c.train.patience > c.train.max_epochs) c.train.patience = c.train.max_epochs;
  c = c.resolved();
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw IoError("cannot create output directory '" + o.out + "': " + ec.message());
  return c;
}

int jobs_for(const Options& o, const RunConfig& c) { return c.deterministic ? 1 : std::max(1, o.jobs); }

// A dataset directory holds graph JSON files, optionally listed by manifest.json.
std::vector<HeteroGraph> load_dataset(const fs::path& dir) {
  std::vector<fs::path> files;
  const fs::path manifest = dir / "manifest.json";
  if (fs::exists(manifest)) {
    const auto j = nlohmann::json::parse(read_text(manifest));
    for (const auto& e : j.at("graphs")) files.push_back(dir / e.at("file").get<std::string>());
  } else {
    if (!fs::is_directory(dir)) throw IoError("dataset '" + dir.string() + "' is not a directory");
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  }
  if (files.empty()) throw IoError("dataset '" + dir.string() + "' contains no graphs");
  std::vector<HeteroGraph> out;
  for (const auto& f : files) out.push_back(load_graph(f));
  return out;
}

std::vector<HeteroGraph> pick(const std::vector<HeteroGraph>& all, const std::vector<std::size_t>& ids) {
  std::vector<HeteroGraph> out;
  for (auto i : ids) out.push_back(all[i]);
  return out;
}

Fold fold_of(const RunConfig& c, std::size_t n, int fold) {
  const auto folds = kfold_split(n, c.train.folds, c.seed);
  if (fold < 0 || fold >= static_cast<int>(folds.size())) throw ConfigError("fold out of range");
  return folds[fold];
}

int cmd_build_graph(const Options& o) {
  RunConfig c = resolve(o, "build-graph", {{"input", o.input}});
  const auto patches = load_patch_table(o.input);
  const HeteroGraph g = build_graph(patches, c.build);
  const fs::path out = fs::path(o.out) / "graph.json";
  save_graph(out, g, provenance(c));
  std::map<std::string, int> histogram;
  for (const auto& n : g.nodes()) histogram[g.types().name(n.type)] += 1;
  ordered_json s;
  s["graph"] = out.string();
  s["nodes"] = g.num_nodes();
  s["edges"] = g.num_edges();
  s["types"] = histogram;
  std::cout << s.dump() << "\n";
  return 0;
}

int cmd_synth(const Options& o) {
  RunConfig c = resolve(o, "synth", {});
  const auto data = synth_generate(c.synth, c.synth_graphs, c.seed);
  const fs::path dir(o.out);
  ordered_json manifest;
  manifest["provenance"] = provenance(c);
  manifest["graphs"] = ordered_json::array();
  int positives = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "graph_%04zu.json", i);
    save_graph(dir / name, data[i].graph, provenance(c));
    manifest["graphs"].push_back(
        {{"file", name}, {"label", *data[i].graph.label()}, {"rule_label", data[i].rule_label},
         {"critical", data[i].critical}});
    positives += *data[i].graph.label();
  }
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  std::cout << ordered_json{{"dataset", dir.string()}, {"graphs", data.size()}, {"positive", positives}}.dump()
            << "\n";
  return 0;
}

int cmd_train(const Options& o) {
  const int fold = o.fold.value_or(0);
  RunConfig c = resolve(o, "train", {{"data", o.data}, {"fold", std::to_string(fold)}});
  const auto all = load_dataset(o.data);
  const Fold f = fold_of(c, all.size(), fold);
  const auto train_set = pick(all, f.train);
  const auto val_set = pick(all, f.val);
  Model init(c.model, c.seed);
  const TrainResult r = train(train_set, val_set, init, c.train, jobs_for(o, c), c.deterministic);
  const ordered_json prov = provenance(c);
  const fs::path dir(o.out);
  save_checkpoint(dir / "checkpoint.json", Checkpoint{r.best, r.best_epoch, r.best_val_loss, prov});
  write_text(dir / "train_log.csv", format_train_log(r.log, prov));
  if (r.stop == StopReason::kDiverged) {
    std::cerr << ordered_json{{"error", "numeric"}, {"message", r.message},
                              {"checkpoint", (dir / "checkpoint.json").string()}}
                     .dump()
              << "\n";
    return kExitNumeric;
  }
  ordered_json s;
  s["checkpoint"] = (dir / "checkpoint.json").string();
  s["log"] = (dir / "train_log.csv").string();
  s["epochs"] = r.log.size();
  s["best_epoch"] = r.best_epoch;
  s["best_val_loss"] = r.best_val_loss;
  s["stop"] = r.stop == StopReason::kEarlyStop ? "early_stop" : "max_epochs";
  std::cout << s.dump() << "\n";
  return 0;
}

int cmd_eval(const Options& o) {
  std::map<std::string, std::string> paths{{"data", o.data}, {"checkpoint", o.checkpoint}};
  if (o.fold) paths["fold"] = std::to_string(*o.fold);
  RunConfig c = resolve(o, "eval", paths);
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const auto all = load_dataset(o.data);
  const auto graphs = o.fold ? pick(all, fold_of(c, all.size(), *o.fold).test) : all;
  const Metrics m = evaluate(ck.model, graphs);
  const std::vector<Metrics> per_fold{m};
  const fs::path out = fs::path(o.out) / "metrics.json";
  const ordered_json j = metrics_to_json(m, per_fold, provenance(c));
  write_text(out, j.dump(2) + "\n");
  std::cout << ordered_json{{"metrics", out.string()}, {"auc", m.auc}, {"accuracy", m.accuracy},
                            {"macro_f1", m.macro_f1}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_crossval(const Options& o) {
  RunConfig c = resolve(o, "crossval", {{"data", o.data}});
  const auto all = load_dataset(o.data);
  const CrossValidation cv = cross_validate(all, c.model, c.train, jobs_for(o, c));
  const ordered_json prov = provenance(c);
  const fs::path dir(o.out);
  for (std::size_t f = 0; f < cv.runs.size(); ++f) {
    const auto& r = cv.runs[f];
    const std::string tag = "fold" + std::to_string(f);
    save_checkpoint(dir / (tag + "_checkpoint.json"), Checkpoint{r.best, r.best_epoch, r.best_val_loss, prov});
    write_text(dir / (tag + "_train_log.csv"), format_train_log(r.log, prov));
  }
  write_text(dir / "metrics.json", metrics_to_json(cv.mean, cv.per_fold, prov).dump(2) + "\n");
  std::cout << ordered_json{{"metrics", (dir / "metrics.json").string()}, {"auc", cv.mean.auc},
                            {"accuracy", cv.mean.accuracy}, {"macro_f1", cv.mean.macro_f1}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_explain(const Options& o) {
  RunConfig c = resolve(o, "explain", {{"graph", o.graph}, {"checkpoint", o.checkpoint}});
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const HeteroGraph g = load_graph(o.graph);
  const std::optional<int> y = o.label ? o.label : g.label();
  if (!y) throw ConfigError("explain: graph has no label; pass --label");
  const Attribution a = explain_graph(ck.model, g, *y, jobs_for(o, c), fs::path(o.graph).stem().string());
  const fs::path out = fs::path(o.out) / "heatmap.csv";
  export_heatmap(a, out, o.top_k, provenance(c));
  std::size_t failed = 0;
  for (const auto& e : a.entries) failed += !e.ok();
  std::cout << ordered_json{{"heatmap", out.string()}, {"summary", heatmap_sidecar(out).string()},
                            {"nodes", a.entries.size()}, {"failed", failed}, {"full_loss", a.full_loss}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_gradcheck(const Options& o) {
  RunConfig c = resolve(o, "gradcheck", {});
  ModelConfig mc = c.model;
  mc.num_types = std::max(mc.num_types, 3);
  Rng rng = substream(c.seed, "gradcheck");
  const HeteroGraph g = random_graph(10, 3, mc.feature_dim, 3, rng);
  const Model model(mc, c.seed);
  const auto r = model_grad_check(model, GraphTensors::from(g), 1);
  const double tolerance = 1e-5;
  ordered_json j;
  j["max_rel_error"] = r.max_rel_error;
  j["tolerance"] = tolerance;
  j["coordinates"] = r.coordinates;
  j["worst_param"] = model.params().name(r.worst_param);
  j["worst_index"] = r.worst_index;
  j["passed"] = r.max_rel_error < tolerance;
  j["provenance"] = provenance(c);
  std::cout << j.dump() << "\n";
  return r.max_rel_error < tolerance ? 0 : kExitNumeric;
}

int cmd_config(const Options& o) {
  RunConfig c = resolve(o, "config", {});
  std::cout << to_json(c).dump(2) << "\n";
  return 0;
}

void error_line(const char* kind, const std::string& message) {
  std::cerr << ordered_json{{"error", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Typed patch-graph learning: build graphs, train, evaluate, explain."};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config_path, "JSON run configuration; flags override it")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "Experiment seed");
  app.add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--deterministic", o.deterministic, "Single-threaded, bit-reproducible run");
  app.add_option("--out", o.out, "Output directory");
  app.fallthrough();

  auto* build = app.add_subcommand("build-graph", "Build a typed k-NN graph from a patch table");
  build->add_option("--input", o.input, "Patch table (.jsonl or .csv)")->required();
  build->add_option("--k", o.k, "Neighbours per node");

  auto* synth = app.add_subcommand("synth", "Write a synthetic labelled dataset directory");
  synth->add_option("--graphs", o.graphs, "Number of graphs");

  auto* trn = app.add_subcommand("train", "Train on one fold; writes checkpoint.json and train_log.csv");
  trn->add_option("--data", o.data, "Dataset directory")->required();
  trn->add_option("--fold", o.fold, "Fold index (default 0)");
  trn->add_option("--epochs", o.epochs, "Override max epochs");
  trn->add_option("--lr", o.lr, "Override learning rate");

  auto* cv = app.add_subcommand("crossval", "k-fold cross-validation; writes per-fold artifacts and metrics.json");
  cv->add_option("--data", o.data, "Dataset directory")->required();
  cv->add_option("--epochs", o.epochs, "Override max epochs");
  cv->add_option("--lr", o.lr, "Override learning rate");

  auto* ev = app.add_subcommand("eval", "Score a checkpoint; writes metrics.json");
  ev->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
  ev->add_option("--data", o.data, "Dataset directory")->required();
  ev->add_option("--fold", o.fold, "Score only the test part of this fold");

  auto* ex = app.add_subcommand("explain", "Leave-one-node-out attribution; writes heatmap.csv/.json");
  ex->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
  ex->add_option("--graph", o.graph, "Graph file")->required();
  ex->add_option("--label", o.label, "Target label (default: the graph's)");
  ex->add_option("--top-k", o.top_k, "Ids listed in the summary");

  auto* gc = app.add_subcommand("gradcheck", "Full-model finite-difference gradient check");
  auto* cfg = app.add_subcommand("config", "Print the resolved run configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    error_line("usage", e.what());
    std::cerr << app.help();
    return kExitUsage;
  }

  try {
    if (*build) return cmd_build_graph(o);
    if (*synth) return cmd_synth(o);
    if (*trn) return cmd_train(o);
    if (*cv) return cmd_crossval(o);
    if (*ev) return cmd_eval(o);
    if (*ex) return cmd_explain(o);
    if (*gc) return cmd_gradcheck(o);
    if (*cfg) return cmd_config(o);
  } catch (const NumericError& e) {
    error_line("numeric", e.what());
    return kExitNumeric;
  } catch (const Error& e) {
    error_line("input", e.what());
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    error_line("input", e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    error_line("input", e.what());
    return kExitInput;
  }
  error_line("usage", "a command is required");
  std::cerr << app.help();
  return kExitUsage;
}
