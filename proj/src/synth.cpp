#include "heat/synth.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "heat/errors.hpp"

namespace heat {

void SyntheticSpec::validate() const {
  if (min_nodes < 2 || max_nodes < min_nodes) throw ConfigError("synth: need 2 <= min_nodes <= max_nodes");
  if (feature_dim < 2) throw ConfigError("synth: feature_dim must be at least 2");
  if (regions < 1) throw ConfigError("synth: regions must be positive");
  if (type_weights.size() != 6) throw ConfigError("synth: type_weights needs one weight per nucleus type");
  for (double w : type_weights) {
    if (!(w >= 0)) throw ConfigError("synth: type weights must be nonnegative");
  }
  if (!(infiltration_prob >= 0 && infiltration_prob <= 1)) throw ConfigError("synth: infiltration_prob in [0, 1]");
  if (!(label_noise >= 0 && label_noise <= 1)) throw ConfigError("synth: label_noise in [0, 1]");
  if (!(feature_sigma >= 0) || !(region_scale >= 0)) throw ConfigError("synth: scales must be nonnegative");
  if (k < 1) throw ConfigError("synth: k must be positive");
}

RuleEvaluation evaluate_rule(const HeteroGraph& g, double theta) {
  RuleEvaluation r;
  std::set<NodeId> critical;
  int neoplastic = 0, hits = 0;
  std::vector<std::vector<const Edge*>> in(g.num_nodes());
  for (const Edge& e : g.edges()) in[g.index_of(e.dst)].push_back(&e);
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    const Node& v = g.nodes()[i];
    if (v.type != nuclei::kNeoplastic) continue;
    ++neoplastic;
    bool hit = false;
    for (const Edge* e : in[i]) {
      if (e->src == v.id || e->attr.size() == 0 || !(e->attr[0] > 0)) continue;
      if (g.node(e->src).type != nuclei::kInflammatory) continue;
      hit = true;
      critical.insert(e->src);
    }
    if (hit) {
      ++hits;
      critical.insert(v.id);
    }
  }
  r.fraction = neoplastic > 0 ? static_cast<double>(hits) / neoplastic : 0.0;
  r.label = r.fraction >= theta ? 1 : 0;
  r.critical.assign(critical.begin(), critical.end());
  return r;
}

std::vector<PatchRecord> synth_patches(const SyntheticSpec& spec, Rng& rng) {
  spec.validate();
  std::uniform_int_distribution<int> size(spec.min_nodes, spec.max_nodes);
  const int n = size(rng);
  const int d = spec.feature_dim;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution infiltrated(spec.infiltration_prob);
  std::bernoulli_distribution coin(0.5);

  struct Region {
    Eigen::VectorXd center;
    std::vector<double> weights;
    int gx, gy;
  };
  std::vector<Region> regions(spec.regions);
  std::uniform_int_distribution<int> grid(0, 63);
  for (Region& r : regions) {
    r.center.resize(d);
    for (int j = 0; j < d; ++j) r.center[j] = spec.region_scale * normal(rng);
    r.weights = spec.type_weights;
    if (spec.variant == SynthVariant::kStroma && coin(rng)) {
      // stroma: connective tissue without tumour cells
      r.weights[nuclei::kNeoplastic.index] = 0.0;
      r.weights[nuclei::kConnective.index] += spec.type_weights[nuclei::kNeoplastic.index];
    }
    if (!infiltrated(rng)) r.weights[nuclei::kInflammatory.index] = 0.0;
    if (std::accumulate(r.weights.begin(), r.weights.end(), 0.0) <= 0) r.weights[nuclei::kNoLabel.index] = 1.0;
    r.gx = grid(rng);
    r.gy = grid(rng);
  }

  std::uniform_int_distribution<int> pick_region(0, spec.regions - 1);
  std::uniform_int_distribution<int> jitter(-3, 3);
  std::uniform_int_distribution<int> dominant(3, 8);
  std::vector<PatchRecord> patches;
  patches.reserve(n);
  for (int i = 0; i < n; ++i) {
    const Region& r = regions[pick_region(rng)];
    std::discrete_distribution<int> type_dist(r.weights.begin(), r.weights.end());
    const NodeType type{type_dist(rng)};

    PatchRecord p;
    p.id = "patch_" + std::to_string(i);
    p.x = r.gx + jitter(rng);
    p.y = r.gy + jitter(rng);
    p.feature.resize(d);
    for (int j = 0; j < d; ++j) p.feature[j] = spec.feature_offset + r.center[j] + spec.feature_sigma * normal(rng);
    const int top = dominant(rng);
    std::uniform_int_distribution<int> minor(0, top - 1);
    for (int t = 0; t < 6; ++t) {
      const std::int64_t c = t == type.index ? top : (coin(rng) ? minor(rng) : 0);
      if (c > 0) p.type_counts[NodeType{t}] = c;
    }
    patches.push_back(std::move(p));
  }
  return patches;
}

std::vector<SyntheticGraph> synth_generate(const SyntheticSpec& spec, int n_graphs, std::uint64_t seed) {
  spec.validate();
  if (n_graphs < 1) throw ConfigError("synth: n_graphs must be positive");
  Rng rng = substream(seed, "synth");
  std::bernoulli_distribution flip(spec.label_noise);

  BuildConfig build;
  build.k = spec.k;
  build.seed = seed;

  const int want_pos = n_graphs / 2;
  const int want_neg = n_graphs - want_pos;
  int have_pos = 0, have_neg = 0;
  const long max_attempts = 50L * n_graphs + 200;

  std::vector<SyntheticGraph> out;
  out.reserve(n_graphs);
  for (long attempt = 0; attempt < max_attempts && static_cast<int>(out.size()) < n_graphs; ++attempt) {
    const auto patches = synth_patches(spec, rng);
    HeteroGraph g = build_graph(patches, build);
    RuleEvaluation rule = evaluate_rule(g, spec.theta);
    int label = rule.label;
    if (spec.label_noise > 0 && flip(rng)) label = 1 - label;
    if (label == 1 ? have_pos >= want_pos : have_neg >= want_neg) continue;
    (label == 1 ? have_pos : have_neg) += 1;
    out.push_back(SyntheticGraph{g.with_label(label), rule.label, std::move(rule.critical)});
  }
  if (static_cast<int>(out.size()) < n_graphs) {
    throw ConfigError("synth: could not reach class balance (" + std::to_string(have_pos) + " positive, " +
                      std::to_string(have_neg) + " negative of " + std::to_string(want_pos) + "/" +
                      std::to_string(want_neg) + ") within " + std::to_string(max_attempts) + " draws");
  }
  return out;
}

HeteroGraph random_graph(int n, int types_used, int feature_dim, int k, Rng& rng) {
  if (n < 1 || types_used < 1 || types_used > 6 || feature_dim < 2) throw ConfigError("random_graph: bad shape");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<PatchRecord> patches(n);
  for (int i = 0; i < n; ++i) {
    PatchRecord& p = patches[i];
    p.id = "r" + std::to_string(i);
    p.x = i % 8;
    p.y = i / 8;
    p.feature.resize(feature_dim);
    for (int j = 0; j < feature_dim; ++j) p.feature[j] = normal(rng);
    p.type = NodeType{i % types_used};
  }
  BuildConfig cfg;
  cfg.k = k;
  return build_graph(patches, cfg);
}

}  // namespace heat
