#include "heat/pl_pool.hpp"

#include "heat/errors.hpp"

namespace heat {

PlPool::PlPool(int num_types, int dim, bool trainable, ParamStore& store, const std::string& prefix)
    : num_types_(num_types), dim_(dim), trainable_(trainable) {
  if (num_types < 1 || dim < 1) throw ConfigError("PL-Pool: type count and dimension must be positive");
  if (trainable_) {
    for (int a = 0; a < num_types_; ++a) {
      readout_.push_back(store.add(prefix + ".R." + std::to_string(a), Matrix::Identity(dim, dim)));
    }
  }
}

PlPool::PlPool(int num_types, int dim, bool trainable, const ParamStore& store, const std::string& prefix)
    : num_types_(num_types), dim_(dim), trainable_(trainable) {
  if (num_types < 1 || dim < 1) throw ConfigError("PL-Pool: type count and dimension must be positive");
  if (trainable_) {
    for (int a = 0; a < num_types_; ++a) {
      const std::size_t i = store.index(prefix + ".R." + std::to_string(a));
      if (store[i].rows() != dim || store[i].cols() != dim) throw ShapeError("PL-Pool: readout shape mismatch");
      readout_.push_back(i);
    }
  }
}

Var PlPool::pool(const BoundParams& params, Var h, std::span<const int> node_types) const {
  if (h.cols() != dim_) throw ShapeError("PL-Pool: feature dimension mismatch");
  if (static_cast<Eigen::Index>(node_types.size()) != h.rows()) {
    throw ShapeError("PL-Pool: one type per node required");
  }
  for (int t : node_types) {
    if (t < 0 || t >= num_types_) throw ConfigError("PL-Pool: node type " + std::to_string(t) + " out of range");
  }
  Tape& tape = params.tape();
  std::vector<Var> rows;
  rows.reserve(num_types_);
  for (int a = 0; a < num_types_; ++a) {
    std::vector<int> members;
    for (std::size_t r = 0; r < node_types.size(); ++r) {
      if (node_types[r] == a) members.push_back(static_cast<int>(r));
    }
    if (members.empty()) {
      rows.push_back(tape.constant(Matrix::Zero(1, dim_)));
      continue;
    }
    Var mean = mean_rows(gather_rows(h, std::span<const int>(members)));
    rows.push_back(trainable_ ? matmul(mean, transpose(params[readout_[a]])) : mean);
  }
  return concat_rows(rows);
}

Var graph_logits(Var pooled, Var classifier, Var bias, FinalReadout mode) {
  Var z = mode == FinalReadout::kMean ? mean_rows(pooled) : sum_rows(pooled);
  return add_row(matmul(z, transpose(classifier)), bias);
}

}  // namespace heat
