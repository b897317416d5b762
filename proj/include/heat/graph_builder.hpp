#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "heat/hetgraph.hpp"
#include "heat/random.hpp"

namespace heat {

/// One ingested patch: precomputed encoder embedding plus nucleus tallies
/// (or a direct type label).
struct PatchRecord {
  std::string id;
  int x = 0;
  int y = 0;
  Eigen::VectorXd feature;
  std::map<NodeType, std::int64_t> type_counts;
  std::optional<NodeType> type;  // takes precedence over type_counts
};

enum class Similarity { kCosine, kNegEuclidean };

struct AugmentConfig {
  double edge_drop_prob = 0.0;
  double node_drop_prob = 0.0;
  double feature_noise_sigma = 0.0;
  double edge_noise_sigma = 0.0;

  void validate() const;
  bool is_identity() const {
    return edge_drop_prob == 0 && node_drop_prob == 0 && feature_noise_sigma == 0 && edge_noise_sigma == 0;
  }

  friend bool operator==(const AugmentConfig&, const AugmentConfig&) = default;
};

struct BuildConfig {
  int k = 5;
  bool add_self_loops = true;
  bool symmetric_edges = true;
  Similarity similarity = Similarity::kCosine;
  AugmentConfig augmentation;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Most frequent type; empty or all-zero counts give no-label. Ties go to the
/// type that comes first in the type set's order.
NodeType majority_vote_type(const std::map<NodeType, std::int64_t>& counts);

/// Feature-space k-nearest-neighbour edges as (src, dst) node indices.
///
/// Each node v receives edges from its k most similar other nodes (ties go to
/// the lower index). With `symmetric`, the reverse edges are added as well and
/// duplicates collapse. The result is sorted by (src, dst).
std::vector<std::pair<int, int>> knn_edges(std::span<const Eigen::VectorXd> features, int k, bool symmetric = true,
                                           Similarity similarity = Similarity::kCosine);

/// Sample Pearson correlation of two equally sized vectors, clamped to
/// [-1, 1]. Returns 0 when either vector is constant.
double pearson_edge_attr(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Types by majority vote, k-NN edges (k capped at n - 1), Pearson edge
/// attributes, optional self-loops with attribute 1. Node ids are the patch
/// positions in `patches`.
HeteroGraph build_graph(std::span<const PatchRecord> patches, const BuildConfig& cfg,
                        const TypeSet& types = TypeSet::nuclei());

/// Training-time perturbation: drops edges (never self-loops) and nodes
/// (never all of them), then adds Gaussian noise to features and attributes.
HeteroGraph augment(const HeteroGraph& g, const AugmentConfig& cfg, Rng& rng);

/// Lloyd's k-means with k-means++ seeding; each node's cluster index is its type.
std::vector<NodeType> kmeans_typing(std::span<const Eigen::VectorXd> features, int clusters, std::uint64_t seed);

}  // namespace heat
