#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "heat/errors.hpp"
#include "heat/pl_pool.hpp"

using namespace heat;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

struct Pool {
  ParamStore store;
  PlPool pool;

  Pool(int types, int dim, bool trainable = true) : pool(types, dim, trainable, store, "pool") {}

  Matrix run(const Matrix& h, const std::vector<int>& types) const {
    Tape tape;
    BoundParams p(tape, store);
    return pool.pool(p, tape.constant(h), types).value();
  }
};

}  // namespace

TEST(PlPool, SingleTypeIdentityGivesMeanRow) {
  Pool p(1, 3);
  Matrix h(2, 3);
  h << 1, 2, 3, 3, 4, 5;
  const Matrix s = p.run(h, {0, 0});
  ASSERT_EQ(s.rows(), 1);
  EXPECT_EQ(s, (Matrix(1, 3) << 2, 3, 4).finished());
}

TEST(PlPool, EmptyTypesGiveZeroRows) {
  Pool p(6, 2);
  Matrix h(3, 2);
  h << 1, 2, 3, 4, 5, 6;
  const Matrix s = p.run(h, {4, 4, 4});
  ASSERT_EQ(s.rows(), 6);
  for (int a = 0; a < 6; ++a) {
    if (a == 4) {
      EXPECT_EQ(s.row(a), (Matrix(1, 2) << 3, 4).finished());
    } else {
      EXPECT_EQ(s.row(a), Matrix::Zero(1, 2));
    }
  }
}

TEST(PlPool, RandomReadoutMatchesDenseAlgebra) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    Pool p(2, 3);
    fixture::randomize(p.store, rng);
    const Matrix h = random_matrix(4, 3, rng);
    const std::vector<int> types{1, 0, 1, 1};
    const Matrix s = p.run(h, types);
    const Eigen::Vector3d mean0 = h.row(1).transpose();
    const Eigen::Vector3d mean1 = (h.row(0) + h.row(2) + h.row(3)).transpose() / 3.0;
    EXPECT_TRUE(s.row(0).transpose().isApprox(p.store.at("pool.R.0") * mean0, 1e-13));
    EXPECT_TRUE(s.row(1).transpose().isApprox(p.store.at("pool.R.1") * mean1, 1e-13));
  }
}

TEST(PlPool, NonTrainableRegistersNothing) {
  Pool p(3, 2, false);
  EXPECT_EQ(p.store.size(), 0u);
  Matrix h(2, 2);
  h << 1, 2, 3, 4;
  EXPECT_EQ(p.run(h, {2, 2}).row(2), (Matrix(1, 2) << 2, 3).finished());
}

TEST(PlPool, Errors) {
  Pool p(2, 2);
  EXPECT_THROW(p.run(Matrix::Zero(2, 3), {0, 1}), ShapeError);
  EXPECT_THROW(p.run(Matrix::Zero(2, 2), {0}), ShapeError);
  EXPECT_THROW(p.run(Matrix::Zero(2, 2), {0, 2}), ConfigError);
  ParamStore store;
  EXPECT_THROW(PlPool(0, 2, true, store, "x"), ConfigError);
  EXPECT_THROW(PlPool(2, 2, true, std::as_const(store), "x"), LookupError);
}

TEST(PlPool, PermutationWithinTypeInvariant) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    Pool p(3, 4);
    fixture::randomize(p.store, rng);
    const Matrix h = random_matrix(6, 4, rng);
    const std::vector<int> types{0, 1, 0, 2, 0, 1};
    Matrix swapped = h;
    swapped.row(0) = h.row(4);
    swapped.row(4) = h.row(2);
    swapped.row(2) = h.row(0);
    swapped.row(1).swap(swapped.row(5));
    EXPECT_LT((p.run(h, types) - p.run(swapped, types)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(PlPool, RowDependsOnlyOnItsType) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Pool p(3, 3);
    fixture::randomize(p.store, rng);
    const Matrix h = random_matrix(5, 3, rng);
    const std::vector<int> types{2, 0, 2, 1, 0};
    Matrix zeroed = h;
    for (int r = 0; r < 5; ++r) {
      if (types[r] != 2) zeroed.row(r).setZero();
    }
    EXPECT_EQ(p.run(h, types).row(2), p.run(zeroed, types).row(2));
  }
}

TEST(PlPool, DuplicatingATypeLeavesOutputUnchanged) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    Pool p(2, 3);
    fixture::randomize(p.store, rng);
    const Matrix h = random_matrix(4, 3, rng);
    const std::vector<int> types{0, 1, 1, 0};
    Matrix dup(6, 3);
    dup << h, h.row(1), h.row(2);
    const std::vector<int> dup_types{0, 1, 1, 0, 1, 1};
    EXPECT_LT((p.run(h, types) - p.run(dup, dup_types)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(GraphLogits, ZeroPoolOrZeroClassifierGivesBias) {
  Rng rng(5);
  Tape t;
  const Matrix w = random_matrix(2, 3, rng), b = random_matrix(1, 2, rng);
  EXPECT_EQ(graph_logits(t.constant(Matrix::Zero(6, 3)), t.constant(w), t.constant(b)).value(), b);
  EXPECT_EQ(graph_logits(t.constant(random_matrix(6, 3, rng)), t.constant(Matrix::Zero(2, 3)), t.constant(b)).value(),
            b);
}

TEST(GraphLogits, HandComputed) {
  Tape t;
  Matrix s(2, 2), w(2, 2), b(1, 2);
  s << 1, 2, 3, 6;
  w << 1, 0, 1, -1;
  b << 0.5, -1;
  // z = (2, 4); W z = (2, -2)
  EXPECT_EQ(graph_logits(t.constant(s), t.constant(w), t.constant(b)).value(), (Matrix(1, 2) << 2.5, -3).finished());
  // z = (4, 8); W z = (4, -4)
  EXPECT_EQ(graph_logits(t.constant(s), t.constant(w), t.constant(b), FinalReadout::kSum).value(),
            (Matrix(1, 2) << 4.5, -5).finished());
}
