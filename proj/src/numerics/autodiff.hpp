// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "numerics/tensor.hpp"

namespace sipm {

template <typename S>
class Tape;

inline constexpr std::size_t kNoId = std::numeric_limits<std::size_t>::max();

// A value flowing through a computation. Untracked vars are constants;
// tracked vars live on a Tape and receive gradients.
template <typename S>
class Var {
 public:
  Var() = default;

  static Var constant(Tensor<S> value) {
    return constant(std::make_shared<const Tensor<S>>(std::move(value)));
  }
  static Var constant(std::shared_ptr<const Tensor<S>> value) {
    Var v;
    v.value_ = std::move(value);
    return v;
  }

  const Tensor<S>& value() const { return *value_; }
  const Shape& shape() const { return value_->shape(); }
  const std::shared_ptr<const Tensor<S>>& shared() const { return value_; }
  bool defined() const { return value_ != nullptr; }
  bool tracked() const { return tape_ != nullptr; }
  Tape<S>* tape() const { return tape_; }
  std::size_t id() const { return tape_ ? id_ : kNoId; }

 private:
  friend class Tape<S>;
  std::shared_ptr<const Tensor<S>> value_;
  Tape<S>* tape_ = nullptr;
  std::size_t id_ = kNoId;
};

template <typename S>
class Gradients {
 public:
  Gradients() = default;
  Gradients(std::vector<std::optional<Tensor<S>>> grads, std::vector<Shape> shapes)
      : grads_(std::move(grads)), shapes_(std::move(shapes)) {}

  bool has(const Var<S>& v) const {
    return v.tracked() && v.id() < grads_.size() && grads_[v.id()].has_value();
  }
  // Gradient of the loss w.r.t. v; zeros when v did not influence the loss.
  Tensor<S> of(const Var<S>& v) const;

 private:
  std::vector<std::optional<Tensor<S>>> grads_;
  std::vector<Shape> shapes_;
};

// Records primitive operations in forward order and replays them in reverse
// to accumulate gradients. Confined to one thread.
template <typename S>
class Tape {
 public:
  using Backward = std::function<void(const Tensor<S>& grad_out, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<S> leaf(Tensor<S> value);
  Var<S> leaf(std::shared_ptr<const Tensor<S>> value);
  Var<S> record(std::string_view op, std::shared_ptr<const Tensor<S>> value, Backward backward);

  // Adds g into the gradient slot of `id`; ids of constants (kNoId) are ignored.
  void accumulate(std::size_t id, Tensor<S> g);

  // loss must be a single-element tensor recorded on this tape.
  Gradients<S> backprop(const Var<S>& loss);

  std::size_t size() const { return nodes_.size(); }
  std::string_view op_name(std::size_t id) const { return nodes_.at(id).op; }
  // Node ids whose backward rule ran during the last backprop, in call order.
  const std::vector<std::size_t>& last_backward_order() const { return order_; }

 private:
  struct Node {
    std::string_view op;
    Backward backward;
    Shape shape;
  };
  std::vector<Node> nodes_;
  std::vector<std::optional<Tensor<S>>> grads_;
  std::vector<std::size_t> order_;
};

extern template class Tape<float>;
extern template class Tape<double>;
extern template class Gradients<float>;
extern template class Gradients<double>;

// Differentiable primitives. Every op validates shapes and rejects
// non-finite results with the op name and operand summaries.
namespace ad {

template <typename S>
Var<S> matmul(const Var<S>& a, const Var<S>& b);
// a * b^T
template <typename S>
Var<S> matmul_nt(const Var<S>& a, const Var<S>& b);
template <typename S>
Var<S> transpose(const Var<S>& a);

template <typename S>
Var<S> add(const Var<S>& a, const Var<S>& b);
template <typename S>
Var<S> sub(const Var<S>& a, const Var<S>& b);
template <typename S>
Var<S> mul(const Var<S>& a, const Var<S>& b);
template <typename S>
Var<S> scale(const Var<S>& a, S s);

template <typename S>
Var<S> exp(const Var<S>& x);
template <typename S>
Var<S> sigmoid(const Var<S>& x);
template <typename S>
Var<S> softplus(const Var<S>& x);
template <typename S>
Var<S> tanh(const Var<S>& x);
template <typename S>
Var<S> silu(const Var<S>& x);
template <typename S>
Var<S> gelu(const Var<S>& x);
template <typename S>
Var<S> softmax(const Var<S>& x);
template <typename S>
Var<S> layer_norm(const Var<S>& x, const Var<S>& gamma, const Var<S>& beta, S eps = S(1e-5));

template <typename S>
Var<S> mean(const Var<S>& x, std::size_t axis);
template <typename S>
Var<S> sum(const Var<S>& x);
template <typename S>
Var<S> concat(const std::vector<Var<S>>& parts, std::size_t axis);
template <typename S>
Var<S> flip(const Var<S>& x, std::size_t axis = 0);
template <typename S>
Var<S> slice(const Var<S>& x, std::size_t axis, std::size_t start, std::size_t length);
template <typename S>
Var<S> causal_conv1d(const Var<S>& x, const Var<S>& w);

// Inverted dropout: zeroes each element with probability `rate` and scales
// survivors by 1/(1-rate). Identity when rate == 0.
template <typename S>
Var<S> dropout(const Var<S>& x, double rate, std::mt19937_64& rng);

}  // namespace ad

// Shared helpers for ops defined outside this module (scan, loss).
template <typename S>
Tape<S>* common_tape(std::initializer_list<const Var<S>*> vars, std::string_view op);
template <typename S>
void check_finite(std::string_view op, const Tensor<S>& out,
                  std::initializer_list<const Var<S>*> operands);

}  // namespace sipm
