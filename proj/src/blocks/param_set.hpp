// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "numerics/autodiff.hpp"
#include "numerics/tensor.hpp"

namespace sipm {

// Named trainable tensors in declaration order. Declaration order fixes the
// checkpoint layout and the optimizer's iteration order.
template <typename S>
class ParamSet {
 public:
  void add(const std::string& name, Tensor<S> value);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Tensor<S>& get(const std::string& name) const;
  const std::shared_ptr<const Tensor<S>>& shared(const std::string& name) const;
  // Replaces the value; the shape must not change.
  void set(const std::string& name, Tensor<S> value);
  void set(std::size_t index, Tensor<S> value);

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  const Tensor<S>& at(std::size_t i) const { return *values_.at(i); }
  // Total number of scalars.
  std::size_t count() const;
  // Scalars whose name starts with `prefix`.
  std::size_t count_prefix(const std::string& prefix) const;

  // All parameters concatenated in declaration order, and the inverse.
  Tensor<S> flatten() const;
  void unflatten(const Tensor<S>& flat);

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], values_[i]->template cast<U>());
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<std::shared_ptr<const Tensor<S>>> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Uniform(-bound, bound) initializer shared by all modules.
template <typename S>
Tensor<S> uniform_tensor(Shape shape, double bound, std::mt19937_64& rng);

enum class Mode { kEval, kTrain };

// One forward evaluation: binds parameters to tape leaves (or to constants
// when no tape is given), owns the dropout RNG.
template <typename S>
class Graph {
 public:
  Graph(const ParamSet<S>& params, Tape<S>* tape, Mode mode, std::uint64_t seed = 0);

  Var<S> param(const std::string& name);
  Var<S> constant(Tensor<S> value) const { return Var<S>::constant(std::move(value)); }

  Mode mode() const { return mode_; }
  bool training() const { return mode_ == Mode::kTrain; }
  Tape<S>* tape() const { return tape_; }
  std::mt19937_64& rng() { return rng_; }
  const ParamSet<S>& params() const { return params_; }

  // Identity in eval mode.
  Var<S> dropout(const Var<S>& x, double rate);

  // Per-parameter gradients in declaration order (zeros for unused ones).
  std::vector<Tensor<S>> collect(const Gradients<S>& grads) const;

 private:
  const ParamSet<S>& params_;
  Tape<S>* tape_;
  Mode mode_;
  std::mt19937_64 rng_;
  std::unordered_map<std::string, Var<S>> bound_;
};

extern template class ParamSet<float>;
extern template class ParamSet<double>;
extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace sipm
