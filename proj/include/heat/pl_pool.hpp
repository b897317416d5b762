#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "heat/params.hpp"
#include "heat/tensor.hpp"

namespace heat {

enum class FinalReadout { kMean, kSum };

/// Pseudo-label pooling: one row per node type, S_a = R_a * mean(rows of type a).
/// Types without nodes give a zero row, so S is always num_types x dim.
class PlPool {
 public:
  /// Registers `{prefix}.R.{type}` (dim x dim, initialized to identity) when trainable.
  PlPool(int num_types, int dim, bool trainable, ParamStore& store, const std::string& prefix);
  PlPool(int num_types, int dim, bool trainable, const ParamStore& store, const std::string& prefix);

  int num_types() const { return num_types_; }
  int dim() const { return dim_; }
  bool trainable() const { return trainable_; }
  std::size_t readout(int type) const { return readout_.at(type); }

  Var pool(const BoundParams& params, Var h, std::span<const int> node_types) const;

 private:
  int num_types_;
  int dim_;
  bool trainable_;
  std::vector<std::size_t> readout_;
};

/// z = mean (or sum) over the rows of S; logits = z * W^T + b with W: C x dim, b: 1 x C.
Var graph_logits(Var pooled, Var classifier, Var bias, FinalReadout mode = FinalReadout::kMean);

}  // namespace heat
