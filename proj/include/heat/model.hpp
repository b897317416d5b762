#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "heat/grad_check.hpp"
#include "heat/heat_layer.hpp"
#include "heat/hetgraph.hpp"
#include "heat/params.hpp"
#include "heat/pl_pool.hpp"
#include "heat/random.hpp"
#include "heat/tensor.hpp"

namespace heat {

enum class Pooling { kPseudoLabel, kMean };
enum class Mode { kEval, kTrain };

struct ModelConfig {
  int feature_dim = 8;
  int hidden_dim = 8;
  int heads = 2;
  int layers = 2;
  int num_types = 6;
  int num_classes = 2;
  int edge_dim = 1;
  Aggregation aggregation = Aggregation::kMean;
  double leaky_slope = 0.01;
  double dropout = 0.2;
  bool decouple_value = false;
  bool type_aware = true;       // false: one projection shared by every type
  bool edge_modulation = true;  // false: e' forced to all-ones
  Pooling pooling = Pooling::kPseudoLabel;
  bool trainable_readout = true;
  FinalReadout final_readout = FinalReadout::kMean;

  void validate() const;
  HeatLayerConfig layer_config(int layer) const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// The type-blind ablation of `cfg`: shared projection, unit edge
/// modulation and plain mean pooling. Everything else is kept.
ModelConfig type_blind(ModelConfig cfg);

/// HEAT stack -> (PL-Pool | mean pool) -> linear classifier.
class Model {
 public:
  /// Fresh parameters drawn from the "init" substream of `seed`.
  Model(const ModelConfig& cfg, std::uint64_t seed);
  /// Wraps existing parameters; names and shapes must match `cfg`.
  Model(const ModelConfig& cfg, ParamStore params);

  const ModelConfig& config() const { return cfg_; }
  const ParamStore& params() const { return params_; }
  ParamStore& params() { return params_; }
  const std::vector<HeatLayer>& layers() const { return layers_; }
  const std::optional<PlPool>& pool() const { return pool_; }
  std::size_t classifier() const { return classifier_; }
  std::size_t bias() const { return bias_; }

  /// Type indices as seen by the HEAT layers (all zero when type-blind).
  std::vector<int> layer_types(const GraphTensors& g) const;

  /// Graph logits (1 x C) recorded on params.tape(). Train mode applies
  /// dropout between layers and needs `rng`.
  Var forward(const BoundParams& params, const GraphTensors& g, Mode mode = Mode::kEval, Rng* rng = nullptr) const;

  /// Node embeddings after the HEAT stack (n x hidden), same conventions.
  Var embed(const BoundParams& params, const GraphTensors& g, Mode mode = Mode::kEval, Rng* rng = nullptr) const;

 private:
  void wire(bool fresh, Rng* rng);

  ModelConfig cfg_;
  ParamStore params_;
  std::vector<HeatLayer> layers_;
  std::optional<PlPool> pool_;
  std::size_t classifier_ = 0;
  std::size_t bias_ = 0;
};

/// Evaluation-mode logits, 1 x C.
Matrix model_forward(const Model& model, const HeteroGraph& g);
Matrix model_forward(const Model& model, const GraphTensors& g);

/// model_forward for a type-blind model; throws ConfigError otherwise.
Matrix baseline_forward(const Model& baseline, const HeteroGraph& g);

/// Cross-entropy of the evaluation-mode logits against `label`.
double graph_loss(const Model& model, const GraphTensors& g, int label);

/// Softmax class probabilities of logits (1 x C).
Eigen::RowVectorXd class_probabilities(const Matrix& logits);

/// Central-difference check of d CE(label, logits) / d params over every
/// parameter of `model` (evaluation mode).
GradCheckResult<double> model_grad_check(const Model& model, const GraphTensors& g, int label, double eps = 1e-4);

}  // namespace heat
