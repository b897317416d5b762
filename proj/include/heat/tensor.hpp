#pragma once

// Dense reverse-mode automatic differentiation over Eigen matrices.
//
// Every value is a row-major 2-D matrix; vectors are 1 x n rows and scalars
// are 1 x 1. A BasicTape records operations in execution order and replays
// their backward rules in reverse order. Ops reduce sequentially in index
// order, so identical inputs produce bit-identical outputs.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "heat/errors.hpp"

namespace heat {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
class BasicTape;

template <typename Scalar>
class BasicVar {
 public:
  using Matrix = MatrixX<Scalar>;

  BasicVar() = default;
  BasicVar(BasicTape<Scalar>* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const { return tape_->value(id_); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  int id() const { return id_; }
  BasicTape<Scalar>* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  BasicTape<Scalar>* tape_ = nullptr;
  int id_ = -1;
};

template <typename Scalar>
class BasicTape {
 public:
  using Matrix = MatrixX<Scalar>;
  using Var = BasicVar<Scalar>;
  // Receives the tape and the id of the node being differentiated; adds the
  // node's incoming gradient into the gradients of its inputs.
  using BackwardFn = std::function<void(BasicTape&, int)>;

  BasicTape() = default;
  BasicTape(const BasicTape&) = delete;
  BasicTape& operator=(const BasicTape&) = delete;

  Var leaf(Matrix value, bool requires_grad = true) {
    check_finite(value, "leaf");
    nodes_.push_back(Node{"leaf", {}, std::move(value), Matrix(), nullptr, requires_grad, true});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
  }

  Var constant(Matrix value) { return leaf(std::move(value), false); }

  /// Appends an op node. The node requires a gradient iff any input does.
  Var record(std::string_view op, Matrix value, std::initializer_list<Var> inputs, BackwardFn fn) {
    return record(op, std::move(value), std::vector<Var>(inputs), std::move(fn));
  }

  Var record(std::string_view op, Matrix value, const std::vector<Var>& inputs, BackwardFn fn) {
    check_finite(value, op);
    std::vector<int> ids;
    ids.reserve(inputs.size());
    bool needs = false;
    for (const Var& v : inputs) {
      if (v.tape() != this) throw ContractError(std::string(op) + ": input belongs to another tape");
      ids.push_back(v.id());
      needs = needs || nodes_[v.id()].requires_grad;
    }
    nodes_.push_back(Node{op, std::move(ids), std::move(value), Matrix(), needs ? std::move(fn) : nullptr,
                          needs, false});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
  }

  const Matrix& value(int id) const { return nodes_.at(id).value; }
  bool requires_grad(int id) const { return nodes_.at(id).requires_grad; }
  bool is_leaf(int id) const { return nodes_.at(id).is_leaf; }
  std::string_view op(int id) const { return nodes_.at(id).op; }
  const std::vector<int>& inputs(int id) const { return nodes_.at(id).inputs; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient flowing into node `id` during backward.
  const Matrix& upstream(int id) const { return nodes_[id].grad; }

  template <typename Derived>
  void accumulate(int id, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  /// Mutable gradient buffer for sparse accumulation; allocated as zeros.
  Matrix& grad_buffer(int id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  void backward(Var loss) {
    if (loss.tape() != this) throw ContractError("backward: loss belongs to another tape");
    if (consumed_) throw ContractError("backward: tape already consumed");
    const Matrix& v = value(loss.id());
    if (v.rows() != 1 || v.cols() != 1) {
      throw ContractError("backward: root must be a 1x1 scalar, got " + std::to_string(v.rows()) + "x" +
                          std::to_string(v.cols()));
    }
    consumed_ = true;
    if (!requires_grad(loss.id())) return;
    nodes_[loss.id()].grad = Matrix::Ones(1, 1);
    for (int id = loss.id(); id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.requires_grad || n.is_leaf || n.grad.size() == 0) continue;
      n.backward(*this, id);
    }
  }

  /// d(loss)/d(v) after backward(); zeros when nothing flowed into v.
  Matrix grad(Var v) const {
    const Node& n = nodes_.at(v.id());
    if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  bool consumed() const { return consumed_; }

  void reset() {
    nodes_.clear();
    consumed_ = false;
  }

 private:
  struct Node {
    std::string_view op;
    std::vector<int> inputs;
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    bool requires_grad;
    bool is_leaf;
  };

  static void check_finite(const Matrix& m, std::string_view op) {
    if (!m.allFinite()) throw NumericError(std::string(op) + ": produced a non-finite value");
  }

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

using Tape = BasicTape<double>;
using Var = BasicVar<double>;
using Matrix = MatrixX<double>;

namespace detail {

inline std::string shape_str(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

template <typename Scalar>
void require_same_shape(std::string_view op, const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.rows(), a.cols()) + " vs " +
                     shape_str(b.rows(), b.cols()));
  }
}

}  // namespace detail

template <typename Scalar>
BasicVar<Scalar> matmul(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + detail::shape_str(a.rows(), a.cols()) + " x " +
                     detail::shape_str(b.rows(), b.cols()));
  }
  MatrixX<Scalar> out = a.value() * b.value();
  const int ia = a.id(), ib = b.id();
  return a.tape()->record("matmul", std::move(out), {a, b}, [ia, ib](BasicTape<Scalar>& t, int self) {
    const auto& g = t.upstream(self);
    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

template <typename Scalar>
BasicVar<Scalar> transpose(const BasicVar<Scalar>& a) {
  MatrixX<Scalar> out = a.value().transpose();
  const int ia = a.id();
  return a.tape()->record("transpose", std::move(out), {a}, [ia](BasicTape<Scalar>& t, int self) {
    t.accumulate(ia, t.upstream(self).transpose());
  });
}

template <typename Scalar>
BasicVar<Scalar> add(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  detail::require_same_shape("add", a, b);
  MatrixX<Scalar> out = a.value() + b.value();
  const int ia = a.id(), ib = b.id();
  return a.tape()->record("add", std::move(out), {a, b}, [ia, ib](BasicTape<Scalar>& t, int self) {
    t.accumulate(ia, t.upstream(self));
    t.accumulate(ib, t.upstream(self));
  });
}

/// a[m x n] + row[1 x n] broadcast over rows.
template <typename Scalar>
BasicVar<Scalar> add_row(const BasicVar<Scalar>& a, const BasicVar<Scalar>& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("add_row: expected 1x" + std::to_string(a.cols()) + " row, got " +
                     detail::shape_str(row.rows(), row.cols()));
  }
  MatrixX<Scalar> out = a.value().rowwise() + row.value().row(0);
  const int ia = a.id(), ir = row.id();
  return a.tape()->record("add_row", std::move(out), {a, row}, [ia, ir](BasicTape<Scalar>& t, int self) {
    const auto& g = t.upstream(self);
    t.accumulate(ia, g);
    if (t.requires_grad(ir)) t.accumulate(ir, g.colwise().sum());
  });
}

/// Elementwise (Hadamard) product.
template <typename Scalar>
BasicVar<Scalar> mul(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b) {
  detail::require_same_shape("mul", a, b);
  MatrixX<Scalar> out = a.value().cwiseProduct(b.value());
  const int ia = a.id(), ib = b.id();
  return a.tape()->record("mul", std::move(out), {a, b}, [ia, ib](BasicTape<Scalar>& t, int self) {
    const auto& g = t.upstream(self);
    if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
    if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
  });
}

template <typename Scalar>
BasicVar<Scalar> scale(const BasicVar<Scalar>& a, Scalar s) {
  MatrixX<Scalar> out = a.value() * s;
  const int ia = a.id();
  return a.tape()->record("scale", std::move(out), {a}, [ia, s](BasicTape<Scalar>& t, int self) {
    t.accumulate(ia, t.upstream(self) * s);
  });
}

/// Stacks inputs vertically; all must share the column count.
template <typename Scalar>
BasicVar<Scalar> concat_rows(const std::vector<BasicVar<Scalar>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column counts differ");
    rows += p.rows();
  }
  MatrixX<Scalar> out(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    ids.push_back(p.id());
    offsets.push_back(r);
    r += p.rows();
  }
  return parts.front().tape()->record(
      "concat_rows", std::move(out), parts, [ids, offsets](BasicTape<Scalar>& t, int self) {
        const auto& g = t.upstream(self);
        for (std::size_t i = 0; i < ids.size(); ++i) {
          if (t.requires_grad(ids[i])) t.accumulate(ids[i], g.middleRows(offsets[i], t.value(ids[i]).rows()));
        }
      });
}

/// Places inputs side by side; all must share the row count.
template <typename Scalar>
BasicVar<Scalar> concat_cols(const std::vector<BasicVar<Scalar>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += p.cols();
  }
  MatrixX<Scalar> out(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    ids.push_back(p.id());
    offsets.push_back(c);
    c += p.cols();
  }
  return parts.front().tape()->record(
      "concat_cols", std::move(out), parts, [ids, offsets](BasicTape<Scalar>& t, int self) {
        const auto& g = t.upstream(self);
        for (std::size_t i = 0; i < ids.size(); ++i) {
          if (t.requires_grad(ids[i])) t.accumulate(ids[i], g.middleCols(offsets[i], t.value(ids[i]).cols()));
        }
      });
}

/// Row-wise softmax, stabilized by subtracting each row's maximum.
template <typename Scalar>
BasicVar<Scalar> softmax_rows(const BasicVar<Scalar>& x) {
  if (x.cols() == 0) throw ShapeError("softmax_rows: empty row dimension");
  const auto& in = x.value();
  MatrixX<Scalar> out(in.rows(), in.cols());
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    const Scalar m = in.row(r).maxCoeff();
    Scalar sum = 0;
    for (Eigen::Index c = 0; c < in.cols(); ++c) {
      out(r, c) = std::exp(in(r, c) - m);
      sum += out(r, c);
    }
    out.row(r) /= sum;
  }
  const int ix = x.id();
  return x.tape()->record("softmax_rows", std::move(out), {x}, [ix](BasicTape<Scalar>& t, int self) {
    const auto& y = t.value(self);
    const auto& g = t.upstream(self);
    MatrixX<Scalar> gx(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const Scalar dot = g.row(r).dot(y.row(r));
      gx.row(r) = y.row(r).cwiseProduct((g.row(r).array() - dot).matrix());
    }
    t.accumulate(ix, gx);
  });
}

/// Sum of all entries as a 1 x 1 value.
template <typename Scalar>
BasicVar<Scalar> sum(const BasicVar<Scalar>& x) {
  MatrixX<Scalar> out(1, 1);
  out(0, 0) = x.value().sum();
  const int ix = x.id();
  return x.tape()->record("sum", std::move(out), {x}, [ix](BasicTape<Scalar>& t, int self) {
    const auto& v = t.value(ix);
    t.accumulate(ix, MatrixX<Scalar>::Constant(v.rows(), v.cols(), t.upstream(self)(0, 0)));
  });
}

/// Column sums, 1 x cols.
template <typename Scalar>
BasicVar<Scalar> sum_rows(const BasicVar<Scalar>& x) {
  MatrixX<Scalar> out = MatrixX<Scalar>::Zero(1, x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) out += x.value().row(r);
  const int ix = x.id();
  return x.tape()->record("sum_rows", std::move(out), {x}, [ix](BasicTape<Scalar>& t, int self) {
    const auto rows = t.value(ix).rows();
    t.accumulate(ix, t.upstream(self).replicate(rows, 1));
  });
}

/// Column means, 1 x cols. Requires at least one row.
template <typename Scalar>
BasicVar<Scalar> mean_rows(const BasicVar<Scalar>& x) {
  if (x.rows() == 0) throw ShapeError("mean_rows: no rows");
  MatrixX<Scalar> out = MatrixX<Scalar>::Zero(1, x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) out += x.value().row(r);
  const Scalar n = static_cast<Scalar>(x.rows());
  out /= n;
  const int ix = x.id();
  return x.tape()->record("mean_rows", std::move(out), {x}, [ix, n](BasicTape<Scalar>& t, int self) {
    const auto rows = t.value(ix).rows();
    t.accumulate(ix, (t.upstream(self) / n).replicate(rows, 1));
  });
}

template <typename Scalar>
BasicVar<Scalar> leaky_relu(const BasicVar<Scalar>& x, Scalar slope) {
  MatrixX<Scalar> out = x.value().unaryExpr([slope](Scalar v) { return v > 0 ? v : slope * v; });
  const int ix = x.id();
  return x.tape()->record("leaky_relu", std::move(out), {x}, [ix, slope](BasicTape<Scalar>& t, int self) {
    MatrixX<Scalar> d = t.value(ix).unaryExpr([slope](Scalar v) { return v > 0 ? Scalar(1) : slope; });
    t.accumulate(ix, t.upstream(self).cwiseProduct(d));
  });
}

/// Inverted dropout: x * mask / keep, where mask holds 0/1 entries.
template <typename Scalar>
BasicVar<Scalar> dropout(const BasicVar<Scalar>& x, const MatrixX<Scalar>& mask, Scalar keep) {
  if (mask.rows() != x.rows() || mask.cols() != x.cols()) throw ShapeError("dropout: mask shape mismatch");
  if (!(keep > 0 && keep <= 1)) throw ConfigError("dropout: keep probability must lie in (0, 1]");
  MatrixX<Scalar> factor = mask / keep;
  MatrixX<Scalar> out = x.value().cwiseProduct(factor);
  const int ix = x.id();
  return x.tape()->record("dropout", std::move(out), {x},
                          [ix, factor = std::move(factor)](BasicTape<Scalar>& t, int self) {
                            t.accumulate(ix, t.upstream(self).cwiseProduct(factor));
                          });
}

/// -log softmax(logits)[label] for a 1 x C logit row.
template <typename Scalar>
BasicVar<Scalar> cross_entropy(const BasicVar<Scalar>& logits, int label) {
  if (logits.rows() != 1) throw ShapeError("cross_entropy: logits must be a single row");
  const auto& z = logits.value();
  if (label < 0 || label >= z.cols()) {
    throw IndexError("cross_entropy: label " + std::to_string(label) + " outside [0, " + std::to_string(z.cols()) +
                     ")");
  }
  const Scalar m = z.maxCoeff();
  Scalar s = 0;
  for (Eigen::Index c = 0; c < z.cols(); ++c) s += std::exp(z(0, c) - m);
  const Scalar lse = m + std::log(s);
  MatrixX<Scalar> out(1, 1);
  out(0, 0) = lse - z(0, label);
  const int il = logits.id();
  return logits.tape()->record("cross_entropy", std::move(out), {logits},
                               [il, label, lse](BasicTape<Scalar>& t, int self) {
                                 const auto& zz = t.value(il);
                                 MatrixX<Scalar> p = (zz.array() - lse).exp().matrix();
                                 p(0, label) -= 1;
                                 t.accumulate(il, p * t.upstream(self)(0, 0));
                               });
}

/// out[r] = x[index[r]].
template <typename Scalar>
BasicVar<Scalar> gather_rows(const BasicVar<Scalar>& x, std::span<const int> index) {
  const auto& in = x.value();
  MatrixX<Scalar> out(static_cast<Eigen::Index>(index.size()), in.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] < 0 || index[r] >= in.rows()) throw IndexError("gather_rows: row index out of range");
    out.row(static_cast<Eigen::Index>(r)) = in.row(index[r]);
  }
  const int ix = x.id();
  std::vector<int> idx(index.begin(), index.end());
  return x.tape()->record("gather_rows", std::move(out), {x},
                          [ix, idx = std::move(idx)](BasicTape<Scalar>& t, int self) {
                            const auto& g = t.upstream(self);
                            auto& gx = t.grad_buffer(ix);
                            for (std::size_t r = 0; r < idx.size(); ++r) gx.row(idx[r]) += g.row(r);
                          });
}

namespace detail {

inline void check_segments(std::string_view op, Eigen::Index rows, std::span<const int> segment, int segments) {
  if (static_cast<Eigen::Index>(segment.size()) != rows) {
    throw ShapeError(std::string(op) + ": one segment id per row required");
  }
  for (int s : segment) {
    if (s < 0 || s >= segments) throw IndexError(std::string(op) + ": segment id out of range");
  }
}

}  // namespace detail

/// Softmax over the rows sharing a segment id, independently per column.
template <typename Scalar>
BasicVar<Scalar> segment_softmax(const BasicVar<Scalar>& x, std::span<const int> segment, int segments) {
  detail::check_segments("segment_softmax", x.rows(), segment, segments);
  const auto& in = x.value();
  const Eigen::Index cols = in.cols();
  MatrixX<Scalar> mx = MatrixX<Scalar>::Constant(segments, cols, -std::numeric_limits<Scalar>::infinity());
  for (Eigen::Index r = 0; r < in.rows(); ++r) mx.row(segment[r]) = mx.row(segment[r]).cwiseMax(in.row(r));
  MatrixX<Scalar> out(in.rows(), cols);
  MatrixX<Scalar> total = MatrixX<Scalar>::Zero(segments, cols);
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    out.row(r) = (in.row(r) - mx.row(segment[r])).array().exp().matrix();
    total.row(segment[r]) += out.row(r);
  }
  for (Eigen::Index r = 0; r < in.rows(); ++r) out.row(r) = out.row(r).cwiseQuotient(total.row(segment[r]));
  const int ix = x.id();
  std::vector<int> seg(segment.begin(), segment.end());
  return x.tape()->record(
      "segment_softmax", std::move(out), {x}, [ix, seg = std::move(seg), segments](BasicTape<Scalar>& t, int self) {
        const auto& y = t.value(self);
        const auto& g = t.upstream(self);
        MatrixX<Scalar> dot = MatrixX<Scalar>::Zero(segments, y.cols());
        for (Eigen::Index r = 0; r < y.rows(); ++r) dot.row(seg[r]) += g.row(r).cwiseProduct(y.row(r));
        MatrixX<Scalar> gx(y.rows(), y.cols());
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
          gx.row(r) = y.row(r).cwiseProduct(g.row(r) - dot.row(seg[r]));
        }
        t.accumulate(ix, gx);
      });
}

/// Per-segment row sum (mean when `average`); empty segments give zero rows.
template <typename Scalar>
BasicVar<Scalar> segment_reduce(const BasicVar<Scalar>& x, std::span<const int> segment, int segments,
                                bool average) {
  detail::check_segments("segment_reduce", x.rows(), segment, segments);
  const auto& in = x.value();
  MatrixX<Scalar> out = MatrixX<Scalar>::Zero(segments, in.cols());
  std::vector<Scalar> count(segments, Scalar(0));
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    out.row(segment[r]) += in.row(r);
    count[segment[r]] += 1;
  }
  if (average) {
    for (int s = 0; s < segments; ++s) {
      if (count[s] > 0) out.row(s) /= count[s];
    }
  }
  const int ix = x.id();
  std::vector<int> seg(segment.begin(), segment.end());
  return x.tape()->record("segment_reduce", std::move(out), {x},
                          [ix, seg = std::move(seg), count = std::move(count), average](BasicTape<Scalar>& t, int self) {
                            const auto& g = t.upstream(self);
                            MatrixX<Scalar> gx(static_cast<Eigen::Index>(seg.size()), g.cols());
                            for (std::size_t r = 0; r < seg.size(); ++r) {
                              gx.row(r) = average ? (g.row(seg[r]) / count[seg[r]]).eval() : g.row(seg[r]).eval();
                            }
                            t.accumulate(ix, gx);
                          });
}

template <typename Scalar>
BasicVar<Scalar> segment_mean(const BasicVar<Scalar>& x, std::span<const int> segment, int segments) {
  return segment_reduce(x, segment, segments, true);
}

template <typename Scalar>
BasicVar<Scalar> segment_sum(const BasicVar<Scalar>& x, std::span<const int> segment, int segments) {
  return segment_reduce(x, segment, segments, false);
}

}  // namespace heat
