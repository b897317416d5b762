#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "heat/errors.hpp"
#include "heat/model.hpp"
#include "heat/synth.hpp"
#include "reference.hpp"

using namespace heat;

namespace {

ModelConfig small_config(int d = 4) {
  ModelConfig c;
  c.feature_dim = d;
  c.hidden_dim = 4;
  c.heads = 2;
  c.layers = 2;
  return c;
}

double max_diff(const Matrix& a, const ref::Vec& b) {
  double err = 0;
  for (Eigen::Index k = 0; k < a.cols(); ++k) err = std::max(err, std::abs(a(0, k) - b[static_cast<std::size_t>(k)]));
  return err;
}

}  // namespace

TEST(ModelForward, MatchesReferenceOnSmallGraphs) {
  Rng rng(1);
  for (int trial = 0; trial < 60; ++trial) {
    ModelConfig c = small_config();
    c.aggregation = trial % 2 ? Aggregation::kSum : Aggregation::kMean;
    c.decouple_value = trial % 3 == 0;
    c.pooling = trial % 5 == 0 ? Pooling::kMean : Pooling::kPseudoLabel;
    c.final_readout = trial % 4 == 1 ? FinalReadout::kSum : FinalReadout::kMean;
    c.trainable_readout = trial % 7 != 0;
    c.edge_modulation = trial % 6 != 5;
    c.layers = 1 + trial % 3;
    Model m(c, trial);
    fixture::randomize(m.params(), rng, 0.5);
    const HeteroGraph g = fixture::small_graph(1 + trial % 5, 6, rng);
    EXPECT_LT(max_diff(model_forward(m, g), ref::logits(m, g)), 1e-10) << "trial " << trial;
  }
}

TEST(ModelForward, MatchesReferenceOnTenNodeSyntheticGraph) {
  Rng rng(2);
  ModelConfig c = small_config(8);
  c.hidden_dim = 8;
  for (int trial = 0; trial < 5; ++trial) {
    Model m(c, 10 + trial);
    fixture::randomize(m.params(), rng, 0.4);
    const HeteroGraph g = random_graph(10, 3, 8, 3, rng);
    EXPECT_LT(max_diff(model_forward(m, g), ref::logits(m, g)), 1e-10);
  }
}

TEST(ModelForward, TypeBlindMatchesReference) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Model m(type_blind(small_config()), trial);
    fixture::randomize(m.params(), rng, 0.5);
    const HeteroGraph g = fixture::small_graph(1 + trial % 5, 6, rng);
    EXPECT_LT(max_diff(baseline_forward(m, g), ref::logits(m, g)), 1e-10);
  }
}

TEST(ModelForward, DeterministicAndFiniteOnSingleNode) {
  Rng rng(4);
  Model m(small_config(), 7);
  const HeteroGraph g = fixture::small_graph(6, 6, rng);
  EXPECT_EQ(model_forward(m, g), model_forward(m, g));
  const HeteroGraph one = fixture::small_graph(1, 6, rng);
  EXPECT_TRUE(model_forward(m, one).allFinite());
}

TEST(ModelForward, SameSeedSameParameters) {
  EXPECT_TRUE(Model(small_config(), 5).params() == Model(small_config(), 5).params());
  EXPECT_FALSE(Model(small_config(), 5).params() == Model(small_config(), 6).params());
}

TEST(Baseline, EqualsHeatOnSingleTypeGraph) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    ModelConfig c = small_config();
    c.final_readout = FinalReadout::kSum;
    Model base(type_blind(c), trial);
    fixture::randomize(base.params(), rng, 0.5);

    ModelConfig hc = c;
    hc.edge_modulation = false;
    Model heat(hc, trial);
    ParamStore& p = heat.params();
    for (std::size_t i = 0; i < p.size(); ++i) {
      std::string name = p.name(i);
      const std::string tag = ".W.2.";
      if (auto pos = name.find(tag); pos != std::string::npos) name.replace(pos, tag.size(), ".W.0.");
      if (base.params().contains(name)) p[i] = base.params().at(name);
    }

    std::vector<Node> nodes;
    const HeteroGraph g0 = fixture::small_graph(5, 1, rng);
    for (Node v : g0.nodes()) {
      v.type = NodeType{2};
      nodes.push_back(v);
    }
    const HeteroGraph g(g0.types(), nodes, {g0.edges().begin(), g0.edges().end()}, 0);
    const Matrix a = baseline_forward(base, g), b = model_forward(heat, g);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Baseline, RejectsTypeAwareModels) {
  Rng rng(6);
  const HeteroGraph g = fixture::small_graph(3, 6, rng);
  EXPECT_THROW(baseline_forward(Model(small_config(), 1), g), ConfigError);
  const ModelConfig blind = type_blind(small_config());
  EXPECT_FALSE(blind.type_aware);
  EXPECT_FALSE(blind.edge_modulation);
  EXPECT_EQ(blind.pooling, Pooling::kMean);
  EXPECT_EQ(blind.hidden_dim, small_config().hidden_dim);
}

TEST(Baseline, AttentionStillNormalized) {
  Rng rng(7);
  Model m(type_blind(small_config()), 3);
  const HeteroGraph g = fixture::small_graph(5, 6, rng);
  const GraphTensors t = GraphTensors::from(g);
  Tape tape;
  BoundParams p(tape, m.params());
  const std::vector<int> types = m.layer_types(t);
  LayerOutput out = m.layers()[0].forward(p, t, types, tape.constant(t.features), tape.constant(t.edge_attr));
  Matrix sums = Matrix::Zero(static_cast<Eigen::Index>(g.num_nodes()), m.config().heads);
  for (std::size_t r = 0; r < t.dst.size(); ++r) sums.row(t.dst[r]) += out.attention.value().row(r);
  EXPECT_LT((sums.array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(ModelConfig, Validation) {
  ModelConfig c = small_config();
  c.hidden_dim = 5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.num_classes = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ModelGradCheck, EndToEnd) {
  Rng rng(8);
  for (int trial = 0; trial < 4; ++trial) {
    ModelConfig c = small_config();
    c.pooling = trial % 2 ? Pooling::kMean : Pooling::kPseudoLabel;
    c.decouple_value = trial >= 2;
    Model m(c, trial);
    fixture::randomize(m.params(), rng, 0.5);
    const HeteroGraph g = fixture::small_graph(5, 3, rng);
    EXPECT_LT(model_grad_check(m, GraphTensors::from(g), trial % 2).max_rel_error, 1e-5);
  }
}

TEST(ClassProbabilities, SumToOne) {
  Matrix z(1, 3);
  z << 1, 2, 3;
  const Eigen::RowVectorXd p = class_probabilities(z);
  EXPECT_NEAR(p.sum(), 1.0, 1e-15);
  EXPECT_GT(p[2], p[1]);
}
