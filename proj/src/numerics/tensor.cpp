// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#include "numerics/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

namespace sipm {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace memory {
namespace {
std::atomic<std::size_t> g_live{0};
std::atomic<std::size_t> g_peak{0};
}  // namespace

std::size_t live_bytes() { return g_live.load(); }
std::size_t peak_bytes() { return g_peak.load(); }
void reset_peak() { g_peak.store(g_live.load()); }

void note_alloc(std::size_t bytes) {
  const std::size_t now = g_live.fetch_add(bytes) + bytes;
  std::size_t peak = g_peak.load();
  while (now > peak && !g_peak.compare_exchange_weak(peak, now)) {
  }
}

void note_free(std::size_t bytes) { g_live.fetch_sub(bytes); }

}  // namespace memory

template <typename S>
Tensor<S>::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), S(0)) {}

template <typename S>
Tensor<S>::Tensor(Shape shape, S fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

template <typename S>
Tensor<S>::Tensor(Shape shape, std::span<const S> values) : shape_(std::move(shape)) {
  if (shape_size(shape_) != values.size()) {
    throw ShapeError("tensor: shape " + shape_str(shape_) + " needs " +
                     std::to_string(shape_size(shape_)) + " values, got " +
                     std::to_string(values.size()));
  }
  data_.assign(values.begin(), values.end());
}

template <typename S>
Tensor<S>::Tensor(Shape shape, std::initializer_list<S> values)
    : Tensor(std::move(shape), std::span<const S>(values.begin(), values.size())) {}

template <typename S>
std::size_t Tensor<S>::rows() const {
  if (shape_.size() != 2) throw ShapeError("rows(): expected rank 2, got " + shape_str(shape_));
  return shape_[0];
}

template <typename S>
std::size_t Tensor<S>::cols() const {
  if (shape_.size() != 2) throw ShapeError("cols(): expected rank 2, got " + shape_str(shape_));
  return shape_[1];
}

template <typename S>
S Tensor<S>::item() const {
  if (data_.size() != 1) throw ShapeError("item(): tensor is not scalar " + shape_str(shape_));
  return data_[0];
}

template <typename S>
Tensor<S> Tensor<S>::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("reshape: " + shape_str(shape_) + " -> " + shape_str(shape));
  }
  Tensor out;
  out.shape_ = std::move(shape);
  out.data_ = data_;
  return out;
}

template <typename S>
Tensor<S> Tensor<S>::row_range(std::size_t begin, std::size_t count) const {
  const std::size_t c = cols();
  if (begin + count > rows()) {
    throw ShapeError("row_range: rows [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of " + shape_str(shape_));
  }
  Tensor out(Shape{count, c});
  std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(begin * c), count * c, out.data_.begin());
  return out;
}

template <typename S>
bool Tensor<S>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](S v) { return std::isfinite(v); });
}

template <typename S>
std::string tensor_summary(const Tensor<S>& t) {
  std::ostringstream os;
  os << shape_str(t.shape());
  if (!t.empty()) {
    auto [lo, hi] = std::minmax_element(t.data().begin(), t.data().end());
    os << " min=" << *lo << " max=" << *hi;
  }
  return os.str();
}

template <typename S>
void require_shape(const Tensor<S>& t, const Shape& expected, const std::string& what) {
  if (t.shape() != expected) {
    throw ShapeError(what + ": expected shape " + shape_str(expected) + ", got " +
                     shape_str(t.shape()));
  }
}

template class Tensor<float>;
template class Tensor<double>;
template std::string tensor_summary(const Tensor<float>&);
template std::string tensor_summary(const Tensor<double>&);
template void require_shape(const Tensor<float>&, const Shape&, const std::string&);
template void require_shape(const Tensor<double>&, const Shape&, const std::string&);

}  // namespace sipm
