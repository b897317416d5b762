// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "heat/checkpoint.hpp"
#include "heat/explainer.hpp"
#include "heat/metrics.hpp"
#include "heat/synth.hpp"
#include "heat/train.hpp"
#include "oracles.hpp"
#include "reference.hpp"

using namespace heat;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

struct Shell {
  int code = -1;
  std::string out;
};

Shell run_cli(const fs::path& dir, const std::string& args) {
  fs::create_directories(dir);
  const std::string cmd = "cd '" + dir.string() + "' && '" + HEATWSI_BIN + "' " + args + " 2>&1";
  Shell r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("heat_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

double max_abs(const Matrix& a, const ref::Rows& b) {
  double err = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      err = std::max(err, std::abs(a(i, j) - b[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]));
    }
  }
  return err;
}

// Per-layer outputs of a model's HEAT stack on one graph.
std::vector<LayerOutput> stack_outputs(const Model& m, const GraphTensors& t, Tape& tape, const BoundParams& p) {
  std::vector<LayerOutput> outs;
  const std::vector<int> types = m.layer_types(t);
  Var h = tape.constant(t.features), e = tape.constant(t.edge_attr);
  for (std::size_t l = 0; l < m.layers().size(); ++l) {
    outs.push_back(m.layers()[l].forward(p, t, types, h, e));
    h = outs.back().nodes;
    e = outs.back().edges;
    if (l + 1 < m.layers().size()) h = leaky_relu(h, m.config().leaky_slope);
  }
  return outs;
}

Outcome gradient_fidelity() {
  const fs::path dir = scratch("gradcheck");
  const auto start = Clock::now();
  const Shell r = run_cli(dir, "gradcheck");
  const double secs = seconds_since(start);
  if (r.code != 0) return {false, "exit " + std::to_string(r.code) + ": " + r.out};
  const auto j = nlohmann::json::parse(r.out);
  const double err = j["max_rel_error"].get<double>();
  return {err < 1e-5 && secs < 30, "max rel error " + fmt(err) + ", " + fmt(secs) + " s"};
}

Outcome attention_normalization() {
  Rng rng(21);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    ModelConfig c;
    c.heads = 1 + trial % 4;
    c.hidden_dim = 4 * c.heads;
    c.aggregation = trial % 2 ? Aggregation::kSum : Aggregation::kMean;
    Model m(c, trial);
    fixture::randomize(m.params(), rng, 1.0);
    const HeteroGraph g = trial % 2 ? random_graph(2 + trial % 37, 1 + trial % 6, 8, 1 + trial % 6, rng)
                                    : fixture::small_graph(1 + trial % 12, 6, rng, 8, 1, 0.3);
    const GraphTensors t = GraphTensors::from(g);
    Tape tape;
    BoundParams p(tape, m.params(), false);
    for (const auto& out : stack_outputs(m, t, tape, p)) {
      Matrix sums = Matrix::Zero(t.num_nodes, c.heads);
      for (std::size_t r = 0; r < t.dst.size(); ++r) sums.row(t.dst[r]) += out.attention.value().row(r);
      worst = std::max(worst, (sums.array() - 1.0).abs().maxCoeff());
    }
  }
  return {worst < 1e-9, "100 graphs, max |sum - 1| = " + fmt(worst)};
}

// Every directed graph on up to 3 nodes (self-loops always present) under
// every assignment of 3 types, plus random 4- and 5-node graphs.
std::vector<HeteroGraph> small_graphs(Rng& rng) {
  std::vector<HeteroGraph> out;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int n = 1; n <= 3; ++n) {
    std::vector<std::pair<int, int>> pairs;
    for (int s = 0; s < n; ++s) {
      for (int t = 0; t < n; ++t) {
        if (s != t) pairs.emplace_back(s, t);
      }
    }
    int type_codes = 1;
    for (int i = 0; i < n; ++i) type_codes *= 3;
    for (unsigned mask = 0; mask < (1u << pairs.size()); ++mask) {
      for (int code = 0; code < type_codes; ++code) {
        std::vector<Node> nodes;
        for (int i = 0, c = code; i < n; ++i, c /= 3) {
          Node v{10 * i + 1, NodeType{c % 3}, Eigen::VectorXd(4), GridPos{i, 0}};
          for (int j = 0; j < 4; ++j) v.feature[j] = normal(rng);
          nodes.push_back(v);
        }
        std::vector<Edge> edges;
        for (int i = 0; i < n; ++i) edges.push_back({nodes[i].id, nodes[i].id, Eigen::VectorXd::Ones(1)});
        for (std::size_t k = 0; k < pairs.size(); ++k) {
          if (mask & (1u << k)) {
            edges.push_back({nodes[pairs[k].first].id, nodes[pairs[k].second].id,
                             Eigen::VectorXd::Constant(1, normal(rng))});
          }
        }
        out.emplace_back(TypeSet::nuclei(), nodes, edges, 0);
      }
    }
  }
  for (int trial = 0; trial < 400; ++trial) {
    out.push_back(fixture::small_graph(4 + trial % 2, 6, rng, 4, 1, 0.2 + 0.6 * (trial % 5) / 4.0));
  }
  return out;
}

Outcome oracle_equivalence() {
  Rng rng(31);
  const auto graphs = small_graphs(rng);
  double layer_err = 0, pool_err = 0, logit_err = 0;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const HeteroGraph& g = graphs[i];
    ModelConfig c;
    c.feature_dim = 4;
    c.heads = 1 + i % 2;
    c.hidden_dim = 4;
    c.layers = 1 + i % 2;
    c.aggregation = i % 3 == 0 ? Aggregation::kSum : Aggregation::kMean;
    c.decouple_value = i % 4 == 1;
    c.pooling = i % 7 == 0 ? Pooling::kMean : Pooling::kPseudoLabel;
    Model m(c, i);
    fixture::randomize(m.params(), rng, 0.6);

    const GraphTensors t = GraphTensors::from(g);
    Tape tape;
    BoundParams p(tape, m.params(), false);
    const auto outs = stack_outputs(m, t, tape, p);
    const ref::LayerResult want =
        ref::layer(m.params(), "heat.0", ref::layer_spec(c), g, ref::graph_features(g), ref::graph_edge_attr(g));
    layer_err = std::max(layer_err, max_abs(outs[0].nodes.value(), want.nodes));
    for (std::size_t r = 0; r < t.src.size(); ++r) {
      const std::pair<long, long> key{t.ids[t.src[r]], t.ids[t.dst[r]]};
      for (int h = 0; h < c.heads; ++h) {
        layer_err = std::max(layer_err, std::abs(outs[0].attention.value()(r, h) - want.alpha.at(key)[h]));
      }
      for (Eigen::Index j = 0; j < outs[0].edges.value().cols(); ++j) {
        layer_err = std::max(layer_err, std::abs(outs[0].edges.value()(r, j) - want.edges.at(key)[j]));
      }
    }

    Var h = m.embed(p, t);
    const Matrix s = c.pooling == Pooling::kPseudoLabel ? m.pool()->pool(p, h, t.types).value() : mean_rows(h).value();
    pool_err = std::max(pool_err, max_abs(s, ref::pool(m, g, ref::embed(m, g))));
    logit_err = std::max(logit_err, max_abs(model_forward(m, t), {ref::logits(m, g)}));
  }
  const double worst = std::max({layer_err, pool_err, logit_err});
  return {worst < 1e-10, std::to_string(graphs.size()) + " graphs, layer " + fmt(layer_err) + ", pooled " +
                             fmt(pool_err) + ", logits " + fmt(logit_err)};
}

Outcome degeneracy() {
  Rng rng(41);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    HeatLayerConfig c;
    c.d_in = 2 + trial % 4;
    c.d_out = 1 + trial % 5;
    c.heads = 1;
    c.num_types = 1;
    c.aggregation = Aggregation::kSum;
    c.edge_modulation = false;
    ParamStore store;
    HeatLayer layer(c, store, "L", rng);
    fixture::randomize(store, rng, 0.8);
    const HeteroGraph g = fixture::small_graph(1 + trial % 9, 1, rng, c.d_in);
    const GraphTensors t = GraphTensors::from(g);
    Tape tape;
    BoundParams p(tape, store, false);
    const LayerOutput out = layer.forward(p, t, t.types, tape.constant(t.features), tape.constant(t.edge_attr));
    const auto want = oracle::dot_attention(store.at("L.W.0.0"), g);
    worst = std::max(worst, max_abs(out.nodes.value(), want.nodes));
    for (std::size_t r = 0; r < t.src.size(); ++r) {
      worst = std::max(worst, std::abs(out.attention.value()(r, 0) - want.alpha.at({t.ids[t.src[r]], t.ids[t.dst[r]]})));
    }
  }
  return {worst < 1e-10, "100 graphs, max error " + fmt(worst)};
}

Outcome metric_oracles() {
  Rng rng(51);
  std::uniform_int_distribution<int> level(0, 5);
  double auc_err = 0;
  long cases = 0;
  for (int n = 2; n <= 12; ++n) {
    for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
      std::vector<int> y(n);
      std::vector<double> s(n);
      for (int i = 0; i < n; ++i) {
        y[i] = (mask >> i) & 1;
        s[i] = level(rng) / 5.0;
      }
      auc_err = std::max(auc_err, std::abs(metric_auc(s, y) - oracle::pair_count_auc(s, y)));
      ++cases;
    }
  }
  double f1_err = 0, welch_err = 0;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int classes = 2 + trial % 3;
    std::uniform_int_distribution<int> cls(0, classes - 1);
    std::vector<int> p(6 + trial), y(6 + trial);
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = cls(rng);
      y[i] = cls(rng);
    }
    f1_err = std::max(f1_err, std::abs(metric_macro_f1(p, y, classes) - oracle::macro_f1(p, y, classes)));
    std::vector<double> a(2 + trial % 6), b(2 + trial % 4);
    for (double& x : a) x = normal(rng) * (1 + trial % 3);
    for (double& x : b) x = normal(rng) + 0.5 * (trial % 3);
    const WelchResult got = welch_ttest(a, b), want = oracle::welch(a, b);
    welch_err = std::max({welch_err, std::abs(got.t - want.t), std::abs(got.p - want.p)});
  }
  const bool pass = auc_err < 1e-10 && f1_err < 1e-10 && welch_err < 1e-10;
  return {pass, std::to_string(cases) + " AUC cases err " + fmt(auc_err) + ", macro-F1 err " + fmt(f1_err) +
                    ", Welch err " + fmt(welch_err)};
}

// Synthetic experiments shared by criteria 6-8.
struct Experiments {
  std::vector<HeteroGraph> infiltration;
  std::vector<HeteroGraph> stroma;
  TrainConfig train;
  std::optional<CrossValidation> heat_cv, blind_cv, mean_cv;
  double heat_seconds = 0, blind_seconds = 0;

  Experiments() {
    SyntheticSpec spec;
    for (auto& s : synth_generate(spec, 200, 7)) infiltration.push_back(s.graph);
    spec.variant = SynthVariant::kStroma;
    for (auto& s : synth_generate(spec, 200, 7)) stroma.push_back(s.graph);
    train.learning_rate = 5e-3;
    train.seed = 3;
  }

  const CrossValidation& heat() {
    if (!heat_cv) {
      const auto start = Clock::now();
      heat_cv = cross_validate(infiltration, ModelConfig{}, train, 1);
      heat_seconds = seconds_since(start);
    }
    return *heat_cv;
  }
};

Outcome heterogeneity_separation(Experiments& ex) {
  const CrossValidation& heat_cv = ex.heat();
  const auto start = Clock::now();
  ex.blind_cv = cross_validate(ex.infiltration, type_blind(ModelConfig{}), ex.train, 1);
  ex.blind_seconds = seconds_since(start);
  const double gap = heat_cv.mean.auc - ex.blind_cv->mean.auc;
  const double secs = ex.heat_seconds + ex.blind_seconds;
  return {gap >= 0.10 && secs < 600, "HEAT AUC " + fmt(heat_cv.mean.auc) + ", type-blind " +
                                         fmt(ex.blind_cv->mean.auc) + ", gap " + fmt(gap) + ", " + fmt(secs) +
                                         " s single-threaded"};
}

Outcome pooling_ablation(Experiments& ex) {
  ModelConfig mean_pool;
  mean_pool.pooling = Pooling::kMean;
  const double pl_inf = ex.heat().mean.auc;
  const double mean_inf = cross_validate(ex.infiltration, mean_pool, ex.train, 1).mean.auc;
  const double pl_str = cross_validate(ex.stroma, ModelConfig{}, ex.train, 1).mean.auc;
  const double mean_str = cross_validate(ex.stroma, mean_pool, ex.train, 1).mean.auc;
  const bool pass = pl_inf >= mean_inf - 0.02 && pl_str > mean_str;
  return {pass, "infiltration PL " + fmt(pl_inf) + " vs mean " + fmt(mean_inf) + "; stroma PL " + fmt(pl_str) +
                    " vs mean " + fmt(mean_str)};
}

Outcome explainer_recovery(Experiments& ex) {
  const Fold fold = kfold_split(ex.infiltration.size(), ex.train.folds, 11)[0];
  std::vector<HeteroGraph> tr, va;
  for (auto i : fold.train) tr.push_back(ex.infiltration[i]);
  for (auto i : fold.val) va.push_back(ex.infiltration[i]);
  const TrainResult r = train(tr, va, Model(ModelConfig{}, 5), ex.train, 1, true);

  const auto test = synth_generate(SyntheticSpec{}, 200, 99);
  int graphs = 0, hits = 0;
  double chance = 0;
  for (const auto& s : test) {
    if (s.rule_label != 1 || graphs == 50) continue;
    ++graphs;
    const Attribution a = explain_graph(r.best, s.graph, 1);
    const auto top = top_fraction(a, 0.1);
    const std::set<NodeId> critical(s.critical.begin(), s.critical.end());
    bool hit = false;
    for (NodeId id : top) hit |= critical.contains(id);
    hits += hit;
    const double n = static_cast<double>(s.graph.num_nodes()), c = static_cast<double>(critical.size());
    double miss = 1;
    for (std::size_t j = 0; j < top.size(); ++j) miss *= (n - c - j) / (n - j);
    chance += 1 - miss;
  }
  const double rate = static_cast<double>(hits) / graphs;
  return {graphs == 50 && rate >= 0.9, std::to_string(hits) + "/" + std::to_string(graphs) +
                                           " graphs hit a critical node (random ranking: " + fmt(chance / graphs) +
                                           ")"};
}

Outcome reproducibility() {
  std::vector<std::string> files{"ds/manifest.json", "ds/graph_0000.json", "run/checkpoint.json",
                                 "run/train_log.csv", "run/metrics.json"};
  std::vector<fs::path> dirs{scratch("repro_a"), scratch("repro_b")};
  for (const auto& d : dirs) {
    for (const std::string args : {"--seed 4 --deterministic --out ds synth --graphs 40",
                                   "--seed 4 --deterministic --out run train --data ds --epochs 5 --lr 0.005",
                                   "--seed 4 --deterministic --out run eval --checkpoint run/checkpoint.json "
                                   "--data ds --fold 0"}) {
      const Shell r = run_cli(d, args);
      if (r.code != 0) return {false, args + " exited " + std::to_string(r.code) + ": " + r.out};
    }
  }
  for (const auto& f : files) {
    if (read_text(dirs[0] / f) != read_text(dirs[1] / f)) return {false, f + " differs between runs"};
  }
  return {true, std::to_string(files.size()) + " artifacts byte-identical across two runs"};
}

Outcome defaults_logged() {
  auto check = [](const nlohmann::json& cfg) {
    const auto& t = cfg.at("train");
    return t.at("learning_rate").get<double>() == 5e-5 && t.at("weight_decay").get<double>() == 1e-5 &&
           t.at("dropout").get<double>() == 0.2 && t.at("batch_size").get<int>() == 2 &&
           t.at("max_epochs").get<int>() == 150 && t.at("folds").get<int>() == 5;
  };
  const fs::path dir = scratch("defaults");
  const Shell c = run_cli(dir, "config");
  if (c.code != 0 || !check(nlohmann::json::parse(c.out))) return {false, "default config: " + c.out};

  write_text(dir / "patches.jsonl",
             "{\"id\": \"a\", \"x\": 0, \"y\": 0, \"feat\": [1, 0], \"type\": \"neoplastic\"}\n"
             "{\"id\": \"b\", \"x\": 1, \"y\": 0, \"feat\": [0, 1], \"type\": \"inflammatory\"}\n");
  for (const std::string args : {"--out bg build-graph --input patches.jsonl", "--out ds synth --graphs 30",
                                 "--deterministic --out run train --data ds",
                                 "--out run eval --checkpoint run/checkpoint.json --data ds",
                                 "--out run explain --checkpoint run/checkpoint.json --graph ds/graph_0001.json"}) {
    const Shell r = run_cli(dir, args);
    if (r.code != 0) return {false, args + " exited " + std::to_string(r.code) + ": " + r.out};
  }
  std::vector<std::pair<std::string, nlohmann::json>> artifacts;
  for (const char* f : {"bg/graph.json", "ds/manifest.json", "ds/graph_0000.json", "run/checkpoint.json",
                        "run/metrics.json", "run/heatmap.json"}) {
    artifacts.emplace_back(f, nlohmann::json::parse(read_text(dir / f)).at("provenance"));
  }
  const std::string log = read_text(dir / "run/train_log.csv");
  const std::string tag = "# provenance: ";
  if (log.rfind(tag, 0) != 0) return {false, "train_log.csv lacks a provenance line"};
  artifacts.emplace_back("run/train_log.csv", nlohmann::json::parse(log.substr(tag.size(), log.find('\n') - tag.size())));
  for (const auto& [name, prov] : artifacts) {
    if (!check(prov.at("config"))) return {false, name + " provenance lacks the defaults"};
  }
  return {true, "default config and " + std::to_string(artifacts.size()) + " artifacts carry the defaults"};
}

}  // namespace

int main() {
  Experiments ex;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient fidelity", gradient_fidelity},
      {"attention normalization", attention_normalization},
      {"oracle equivalence", oracle_equivalence},
      {"degeneracy reduction", degeneracy},
      {"metric oracles", metric_oracles},
      {"heterogeneity separation", [&] { return heterogeneity_separation(ex); }},
      {"pooling ablation", [&] { return pooling_ablation(ex); }},
      {"explainer plant-and-recover", [&] { return explainer_recovery(ex); }},
      {"reproducibility", reproducibility},
      {"default hyperparameters", defaults_logged},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
