#pragma once

// Synthetic labelled heterogeneous graphs with a planted type-interaction rule.
//
// Each graph is a handful of feature-space "regions" (Gaussian blobs around
// a shared positive offset). Node types are drawn per region; some regions
// are infiltrated by inflammatory cells. After k-NN construction the label is
//   1  iff  (#neoplastic nodes with an inflammatory in-neighbour whose edge
//            attribute is positive) / (#neoplastic nodes) >= theta.
// Node features carry no information about node types, so the rule can only
// be recovered by a model that sees the types.

#include <cstdint>
#include <vector>

#include "heat/graph_builder.hpp"
#include "heat/hetgraph.hpp"

namespace heat {

enum class SynthVariant {
  kInfiltration,  // every region mixes all types
  kStroma,        // regions are either tumour (neoplastic-rich) or stroma (no neoplastic nodes)
};

struct SyntheticSpec {
  int min_nodes = 16;
  int max_nodes = 32;
  int feature_dim = 8;
  int regions = 4;
  double region_scale = 1.0;
  double feature_offset = 1.0;
  double feature_sigma = 0.3;
  // Base weights over the six nucleus types (no-label first).
  std::vector<double> type_weights = {0.1, 0.35, 0.15, 0.2, 0.1, 0.1};
  double infiltration_prob = 0.5;
  double theta = 0.5;
  double label_noise = 0.0;
  int k = 4;
  SynthVariant variant = SynthVariant::kInfiltration;

  void validate() const;
};

struct RuleEvaluation {
  double fraction = 0;
  int label = 0;
  std::vector<NodeId> critical;  // qualifying neoplastic nodes and their qualifying inflammatory neighbours
};

/// Evaluates the planted rule on a nucleus-typed graph.
RuleEvaluation evaluate_rule(const HeteroGraph& g, double theta);

struct SyntheticGraph {
  HeteroGraph graph;  // carries the emitted (possibly noisy) label
  int rule_label = 0;
  std::vector<NodeId> critical;
};

/// Generates `n_graphs` graphs with floor(n/2) positives by rejection
/// sampling; throws ConfigError when the quotas cannot be met within a
/// bounded number of draws.
std::vector<SyntheticGraph> synth_generate(const SyntheticSpec& spec, int n_graphs, std::uint64_t seed);

/// The patch table behind one synthetic graph (useful for exercising ingestion).
std::vector<PatchRecord> synth_patches(const SyntheticSpec& spec, Rng& rng);

/// Random k-NN graph with `n` nodes whose types cycle through the first
/// `types_used` nucleus types; standard-normal features, self-loops included.
HeteroGraph random_graph(int n, int types_used, int feature_dim, int k, Rng& rng);

}  // namespace heat
