// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <vector>

namespace sipm::ssm {

// First-order linear recurrence element: the affine map h -> a*h + b.
template <typename S>
struct AffinePair {
  S a;
  S b;
};

// Composition "apply earlier, then later":
// (a2,b2) o (a1,b1) = (a1*a2, a2*b1 + b2).
template <typename S>
inline AffinePair<S> compose(const AffinePair<S>& earlier, const AffinePair<S>& later) {
  return {earlier.a * later.a, later.a * earlier.b + later.b};
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Work-efficient (Blelloch) exclusive scan, in place. `data.size()` must be
// a power of two. `combine(earlier, later)` must be associative. The
// combination tree is fixed by the length, so results do not depend on how
// the levels are scheduled.
template <typename T, typename Combine>
void blelloch_exclusive_scan(std::vector<T>& data, const T& identity, Combine combine) {
  const std::size_t n = data.size();
  if (n == 0) return;
  for (std::size_t stride = 1; stride < n; stride <<= 1) {
    for (std::size_t i = 0; i + 2 * stride - 1 < n; i += 2 * stride) {
      data[i + 2 * stride - 1] = combine(data[i + stride - 1], data[i + 2 * stride - 1]);
    }
  }
  data[n - 1] = identity;
  for (std::size_t stride = n >> 1; stride >= 1; stride >>= 1) {
    for (std::size_t i = 0; i + 2 * stride - 1 < n; i += 2 * stride) {
      const T left_total = data[i + stride - 1];
      data[i + stride - 1] = data[i + 2 * stride - 1];
      data[i + 2 * stride - 1] = combine(data[i + 2 * stride - 1], left_total);
    }
  }
}

// Inclusive prefix compositions of `elems` via the exclusive scan above.
template <typename S>
std::vector<AffinePair<S>> affine_inclusive_scan(const std::vector<AffinePair<S>>& elems) {
  const AffinePair<S> identity{S(1), S(0)};
  std::vector<AffinePair<S>> buf(next_pow2(elems.size()), identity);
  std::copy(elems.begin(), elems.end(), buf.begin());
  blelloch_exclusive_scan(buf, identity, [](const AffinePair<S>& e, const AffinePair<S>& l) {
    return compose(e, l);
  });
  std::vector<AffinePair<S>> out(elems.size());
  for (std::size_t t = 0; t < elems.size(); ++t) out[t] = compose(buf[t], elems[t]);
  return out;
}

}  // namespace sipm::ssm
