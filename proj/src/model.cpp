#include "heat/model.hpp"

#include <cmath>
#include <string>

#include "heat/errors.hpp"

namespace heat {

void ModelConfig::validate() const {
  if (feature_dim < 1 || hidden_dim < 1 || heads < 1 || layers < 1 || num_types < 1 || edge_dim < 1) {
    throw ConfigError("model: dimensions, heads, layers and type count must be positive");
  }
  if (num_classes < 2) throw ConfigError("model: at least two classes are required");
  if (hidden_dim % heads != 0) throw ConfigError("model: hidden_dim must be divisible by heads");
  if (!(dropout >= 0 && dropout < 1)) throw ConfigError("model: dropout must lie in [0, 1)");
}

HeatLayerConfig ModelConfig::layer_config(int layer) const {
  HeatLayerConfig c;
  c.d_in = layer == 0 ? feature_dim : hidden_dim;
  c.d_out = hidden_dim;
  c.heads = heads;
  c.d_edge = layer == 0 ? edge_dim : hidden_dim / heads;
  c.num_types = type_aware ? num_types : 1;
  c.aggregation = aggregation;
  c.decouple_value = decouple_value;
  c.edge_modulation = edge_modulation;
  return c;
}

ModelConfig type_blind(ModelConfig cfg) {
  cfg.type_aware = false;
  cfg.edge_modulation = false;
  cfg.pooling = Pooling::kMean;
  return cfg;
}

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng = substream(seed, "init");
  wire(true, &rng);
}

Model::Model(const ModelConfig& cfg, ParamStore params) : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  wire(false, nullptr);
}

void Model::wire(bool fresh, Rng* rng) {
  layers_.clear();
  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string prefix = "heat." + std::to_string(l);
    if (fresh) {
      layers_.emplace_back(cfg_.layer_config(l), params_, prefix, *rng);
    } else {
      layers_.emplace_back(cfg_.layer_config(l), std::as_const(params_), prefix);
    }
  }
  if (cfg_.pooling == Pooling::kPseudoLabel) {
    if (fresh) {
      pool_.emplace(cfg_.num_types, cfg_.hidden_dim, cfg_.trainable_readout, params_, "pool");
    } else {
      pool_.emplace(cfg_.num_types, cfg_.hidden_dim, cfg_.trainable_readout, std::as_const(params_), "pool");
    }
  }
  if (fresh) {
    classifier_ = params_.add("classifier.W", glorot(cfg_.num_classes, cfg_.hidden_dim, *rng));
    bias_ = params_.add("classifier.b", Matrix::Zero(1, cfg_.num_classes));
  } else {
    classifier_ = params_.index("classifier.W");
    bias_ = params_.index("classifier.b");
    if (params_[classifier_].rows() != cfg_.num_classes || params_[classifier_].cols() != cfg_.hidden_dim ||
        params_[bias_].rows() != 1 || params_[bias_].cols() != cfg_.num_classes) {
      throw ShapeError("model: classifier shape mismatch");
    }
  }
}

std::vector<int> Model::layer_types(const GraphTensors& g) const {
  if (cfg_.type_aware) return g.types;
  return std::vector<int>(g.types.size(), 0);
}

Var Model::embed(const BoundParams& params, const GraphTensors& g, Mode mode, Rng* rng) const {
  if (params.size() != params_.size()) throw ContractError("model: bound parameter count mismatch");
  if (mode == Mode::kTrain && cfg_.dropout > 0 && rng == nullptr) {
    throw ContractError("model: training mode with dropout needs a generator");
  }
  Tape& tape = params.tape();
  const std::vector<int> types = layer_types(g);
  Var h = tape.constant(g.features);
  Var e = tape.constant(g.edge_attr);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    LayerOutput out = layers_[l].forward(params, g, types, h, e);
    h = out.nodes;
    e = out.edges;
    if (l + 1 < layers_.size()) {
      h = leaky_relu(h, cfg_.leaky_slope);
      if (mode == Mode::kTrain && cfg_.dropout > 0) {
        const double keep = 1.0 - cfg_.dropout;
        std::bernoulli_distribution coin(keep);
        Matrix mask(h.rows(), h.cols());
        for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = coin(*rng) ? 1.0 : 0.0;
        h = dropout(h, mask, keep);
      }
    }
  }
  return h;
}

Var Model::forward(const BoundParams& params, const GraphTensors& g, Mode mode, Rng* rng) const {
  Var h = embed(params, g, mode, rng);
  Var pooled = cfg_.pooling == Pooling::kPseudoLabel ? pool_->pool(params, h, g.types) : mean_rows(h);
  return graph_logits(pooled, params[classifier_], params[bias_], cfg_.final_readout);
}

Matrix model_forward(const Model& model, const GraphTensors& g) {
  Tape tape;
  BoundParams params(tape, model.params(), false);
  return model.forward(params, g).value();
}

Matrix model_forward(const Model& model, const HeteroGraph& g) { return model_forward(model, GraphTensors::from(g)); }

Matrix baseline_forward(const Model& baseline, const HeteroGraph& g) {
  const ModelConfig& c = baseline.config();
  if (c.type_aware || c.edge_modulation || c.pooling != Pooling::kMean) {
    throw ConfigError("baseline_forward: model is not type-blind");
  }
  return model_forward(baseline, g);
}

double graph_loss(const Model& model, const GraphTensors& g, int label) {
  Tape tape;
  BoundParams params(tape, model.params(), false);
  return cross_entropy(model.forward(params, g), label).value()(0, 0);
}

Eigen::RowVectorXd class_probabilities(const Matrix& logits) {
  Eigen::RowVectorXd z = logits.row(0);
  const double m = z.maxCoeff();
  Eigen::RowVectorXd p = (z.array() - m).exp().matrix();
  return p / p.sum();
}

GradCheckResult<double> model_grad_check(const Model& model, const GraphTensors& g, int label, double eps) {
  auto loss = [&](Tape& tape, std::span<const Var> leaves) {
    BoundParams params(tape, leaves);
    return cross_entropy(model.forward(params, g), label);
  };
  return grad_check<double>(loss, model.params().values(), eps);
}

}  // namespace heat
