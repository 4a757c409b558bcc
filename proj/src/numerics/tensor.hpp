// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "common/error.hpp"

namespace sipm {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace memory {

// Byte counters for tensor storage. Live/peak are process-wide.
std::size_t live_bytes();
std::size_t peak_bytes();
// Resets the peak to the current live count.
void reset_peak();

void note_alloc(std::size_t bytes);
void note_free(std::size_t bytes);

}  // namespace memory

template <typename T>
struct TrackingAllocator {
  using value_type = T;
  TrackingAllocator() = default;
  template <typename U>
  TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    memory::note_alloc(n * sizeof(T));
    return std::allocator<T>{}.allocate(n);
  }
  void deallocate(T* p, std::size_t n) noexcept {
    memory::note_free(n * sizeof(T));
    std::allocator<T>{}.deallocate(p, n);
  }
  template <typename U>
  bool operator==(const TrackingAllocator<U>&) const noexcept { return true; }
};

// Dense row-major tensor. S is float (default precision) or double
// (gradient-check precision).
template <typename S>
class Tensor {
 public:
  using value_type = S;
  using Storage = std::vector<S, TrackingAllocator<S>>;

  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, S fill);
  Tensor(Shape shape, std::span<const S> values);
  Tensor(Shape shape, std::initializer_list<S> values);

  static Tensor scalar(S v) { return Tensor(Shape{1}, v); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Only valid for rank-2 tensors.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const S> data() const { return {data_.data(), data_.size()}; }
  std::span<S> data() { return {data_.data(), data_.size()}; }
  const S* ptr() const { return data_.data(); }
  S* ptr() { return data_.data(); }

  S operator[](std::size_t i) const { return data_[i]; }
  S& operator[](std::size_t i) { return data_[i]; }
  S at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
  S& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }

  S item() const;

  Tensor reshaped(Shape shape) const;
  // Copies rows [begin, begin+count) of a rank-2 tensor.
  Tensor row_range(std::size_t begin, std::size_t count) const;

  bool all_finite() const;

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  Storage data_;
};

// Short text for error messages: shape plus min/max.
template <typename S>
std::string tensor_summary(const Tensor<S>& t);

template <typename S>
void require_shape(const Tensor<S>& t, const Shape& expected, const std::string& what);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace sipm
