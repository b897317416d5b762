#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "heat/errors.hpp"
#include "heat/random.hpp"
#include "heat/tensor.hpp"

namespace heat {

/// Flat, ordered registry of named parameter matrices.
class ParamStore {
 public:
  std::size_t add(std::string name, Matrix value) {
    if (index_.contains(name)) throw ConfigError("duplicate parameter '" + name + "'");
    index_.emplace(name, names_.size());
    names_.push_back(std::move(name));
    values_.push_back(std::move(value));
    return values_.size() - 1;
  }

  std::size_t index(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw LookupError("unknown parameter '" + std::string(name) + "'");
    return it->second;
  }
  bool contains(std::string_view name) const { return index_.contains(std::string(name)); }

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const Matrix& operator[](std::size_t i) const { return values_.at(i); }
  Matrix& operator[](std::size_t i) { return values_.at(i); }
  const Matrix& at(std::string_view name) const { return values_[index(name)]; }
  Matrix& at(std::string_view name) { return values_[index(name)]; }

  const std::vector<Matrix>& values() const { return values_; }
  std::vector<Matrix>& values() { return values_; }

  std::size_t num_scalars() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
    return n;
  }

  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    if (a.names_ != b.names_) return false;
    for (std::size_t i = 0; i < a.values_.size(); ++i) {
      if (a.values_[i].rows() != b.values_[i].rows() || a.values_[i].cols() != b.values_[i].cols()) return false;
      if (!(a.values_[i].array() == b.values_[i].array()).all()) return false;
    }
    return true;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// The parameters of a store registered as leaves on one tape.
class BoundParams {
 public:
  BoundParams(Tape& tape, const ParamStore& store, bool requires_grad = true) : tape_(&tape) {
    leaves_.reserve(store.size());
    for (const auto& v : store.values()) leaves_.push_back(tape.leaf(v, requires_grad));
  }

  /// Binds an explicit list of values (used when perturbing for gradient checks).
  BoundParams(Tape& tape, std::span<const Var> leaves) : tape_(&tape), leaves_(leaves.begin(), leaves.end()) {}

  Var operator[](std::size_t i) const { return leaves_.at(i); }
  Tape& tape() const { return *tape_; }
  std::size_t size() const { return leaves_.size(); }

  std::vector<Matrix> grads() const {
    std::vector<Matrix> g;
    g.reserve(leaves_.size());
    for (const auto& l : leaves_) g.push_back(tape_->grad(l));
    return g;
  }

 private:
  Tape* tape_;
  std::vector<Var> leaves_;
};

/// Glorot-uniform initialization for a rows x cols weight.
inline Matrix glorot(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-a, a);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

}  // namespace heat
