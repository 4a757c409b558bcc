// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#include "blocks/param_set.hpp"

#include <algorithm>

namespace sipm {

template <typename S>
void ParamSet<S>::add(const std::string& name, Tensor<S> value) {
  if (contains(name)) throw UsageError("parameter '" + name + "' declared twice");
  index_.emplace(name, names_.size());
  names_.push_back(name);
  values_.push_back(std::make_shared<const Tensor<S>>(std::move(value)));
}

template <typename S>
const std::shared_ptr<const Tensor<S>>& ParamSet<S>::shared(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter '" + name + "'");
  return values_[it->second];
}

template <typename S>
const Tensor<S>& ParamSet<S>::get(const std::string& name) const {
  return *shared(name);
}

template <typename S>
void ParamSet<S>::set(const std::string& name, Tensor<S> value) {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter '" + name + "'");
  set(it->second, std::move(value));
}

template <typename S>
void ParamSet<S>::set(std::size_t index, Tensor<S> value) {
  require_shape(value, values_.at(index)->shape(), "parameter '" + names_[index] + "'");
  values_[index] = std::make_shared<const Tensor<S>>(std::move(value));
}

template <typename S>
std::size_t ParamSet<S>::count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v->size();
  return n;
}

template <typename S>
std::size_t ParamSet<S>::count_prefix(const std::string& prefix) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].rfind(prefix, 0) == 0) n += values_[i]->size();
  }
  return n;
}

template <typename S>
Tensor<S> ParamSet<S>::flatten() const {
  Tensor<S> flat(Shape{count()});
  std::size_t off = 0;
  for (const auto& v : values_) {
    std::copy(v->data().begin(), v->data().end(), flat.ptr() + off);
    off += v->size();
  }
  return flat;
}

template <typename S>
void ParamSet<S>::unflatten(const Tensor<S>& flat) {
  require_shape(flat, Shape{count()}, "ParamSet::unflatten");
  std::size_t off = 0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const std::size_t n = values_[i]->size();
    values_[i] = std::make_shared<const Tensor<S>>(
        values_[i]->shape(), std::span<const S>(flat.ptr() + off, n));
    off += n;
  }
}

template <typename S>
Tensor<S> uniform_tensor(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor<S> t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<S>(dist(rng));
  return t;
}

template <typename S>
Graph<S>::Graph(const ParamSet<S>& params, Tape<S>* tape, Mode mode, std::uint64_t seed)
    : params_(params), tape_(tape), mode_(mode), rng_(seed) {}

template <typename S>
Var<S> Graph<S>::param(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  const auto& value = params_.shared(name);
  Var<S> v = tape_ ? tape_->leaf(value) : Var<S>::constant(value);
  bound_.emplace(name, v);
  return v;
}

template <typename S>
Var<S> Graph<S>::dropout(const Var<S>& x, double rate) {
  if (!training() || rate <= 0.0) return x;
  return ad::dropout(x, rate, rng_);
}

template <typename S>
std::vector<Tensor<S>> Graph<S>::collect(const Gradients<S>& grads) const {
  std::vector<Tensor<S>> out;
  out.reserve(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto it = bound_.find(params_.names()[i]);
    out.push_back(it != bound_.end() ? grads.of(it->second) : Tensor<S>(params_.at(i).shape()));
  }
  return out;
}

template class ParamSet<float>;
template class ParamSet<double>;
template class Graph<float>;
template class Graph<double>;
template Tensor<float> uniform_tensor(Shape, double, std::mt19937_64&);
template Tensor<double> uniform_tensor(Shape, double, std::mt19937_64&);

}  // namespace sipm
