// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#include "numerics/autodiff.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "numerics/kernels.hpp"

namespace sipm {

template <typename S>
Tensor<S> Gradients<S>::of(const Var<S>& v) const {
  if (has(v)) return *grads_[v.id()];
  return Tensor<S>(v.shape());
}

template <typename S>
Var<S> Tape<S>::leaf(Tensor<S> value) {
  return leaf(std::make_shared<const Tensor<S>>(std::move(value)));
}

template <typename S>
Var<S> Tape<S>::leaf(std::shared_ptr<const Tensor<S>> value) {
  Var<S> v;
  nodes_.push_back(Node{"leaf", nullptr, value->shape()});
  v.value_ = std::move(value);
  v.tape_ = this;
  v.id_ = nodes_.size() - 1;
  return v;
}

template <typename S>
Var<S> Tape<S>::record(std::string_view op, std::shared_ptr<const Tensor<S>> value,
                       Backward backward) {
  Var<S> v;
  nodes_.push_back(Node{op, std::move(backward), value->shape()});
  v.value_ = std::move(value);
  v.tape_ = this;
  v.id_ = nodes_.size() - 1;
  return v;
}

template <typename S>
void Tape<S>::accumulate(std::size_t id, Tensor<S> g) {
  if (id == kNoId) return;
  if (g.shape() != nodes_.at(id).shape) {
    throw ShapeError("backprop: gradient " + shape_str(g.shape()) + " for node '" +
                     std::string(nodes_[id].op) + "' of shape " + shape_str(nodes_[id].shape));
  }
  auto& slot = grads_.at(id);
  if (!slot) {
    slot = std::move(g);
  } else {
    S* dst = slot->ptr();
    const S* src = g.ptr();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += src[i];
  }
}

template <typename S>
Gradients<S> Tape<S>::backprop(const Var<S>& loss) {
  if (!loss.tracked() || loss.tape() != this) {
    throw UsageError("backprop: loss is not recorded on this tape");
  }
  if (loss.value().size() != 1) {
    throw ShapeError("backprop: loss must be scalar, got " + shape_str(loss.shape()));
  }
  grads_.assign(nodes_.size(), std::nullopt);
  order_.clear();
  grads_[loss.id()] = Tensor<S>(loss.shape(), S(1));
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    if (!grads_[id] || !nodes_[id].backward) continue;
    order_.push_back(id);
    Tensor<S> g = std::move(*grads_[id]);
    grads_[id].reset();
    nodes_[id].backward(g, *this);
  }
  std::vector<Shape> shapes;
  shapes.reserve(nodes_.size());
  for (const auto& n : nodes_) shapes.push_back(n.shape);
  return Gradients<S>(std::exchange(grads_, {}), std::move(shapes));
}

template <typename S>
Tape<S>* common_tape(std::initializer_list<const Var<S>*> vars, std::string_view op) {
  Tape<S>* tape = nullptr;
  for (const Var<S>* v : vars) {
    if (!v->defined()) throw UsageError(std::string(op) + ": undefined operand");
    if (!v->tracked()) continue;
    if (tape && tape != v->tape()) {
      throw UsageError(std::string(op) + ": operands live on different tapes");
    }
    tape = v->tape();
  }
  return tape;
}

template <typename S>
void check_finite(std::string_view op, const Tensor<S>& out,
                  std::initializer_list<const Var<S>*> operands) {
  if (out.all_finite()) return;
  std::ostringstream os;
  os << op << ": non-finite output " << shape_str(out.shape()) << "; operands:";
  for (const Var<S>* v : operands) os << ' ' << tensor_summary(v->value());
  throw NumericError(os.str());
}

namespace ad {
namespace {

template <typename S>
using Ptr = std::shared_ptr<const Tensor<S>>;

template <typename S>
Ptr<S> share(Tensor<S> t) {
  return std::make_shared<const Tensor<S>>(std::move(t));
}

// Builds the result var: constant when no operand is tracked.
template <typename S>
Var<S> finish(std::string_view op, Ptr<S> value, std::initializer_list<const Var<S>*> operands,
              typename Tape<S>::Backward backward) {
  check_finite(op, *value, operands);
  Tape<S>* tape = common_tape(operands, op);
  if (!tape) return Var<S>::constant(std::move(value));
  return tape->record(op, std::move(value), std::move(backward));
}

// Elementwise unary op whose derivative is a function of (x, y).
template <typename S, typename Fwd, typename Deriv>
Var<S> unary_op(std::string_view op, const Var<S>& x, Fwd fwd, Deriv deriv) {
  auto y = share(fwd(x.value()));
  auto xv = x.shared();
  return finish<S>(op, y, {&x}, [xid = x.id(), xv, y, deriv](const Tensor<S>& g, Tape<S>& t) {
    Tensor<S> gx(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * deriv((*xv)[i], (*y)[i]);
    t.accumulate(xid, std::move(gx));
  });
}

}  // namespace

template <typename S>
Var<S> matmul(const Var<S>& a, const Var<S>& b) {
  auto y = share(kernels::matmul(a.value(), b.value()));
  auto av = a.shared(), bv = b.shared();
  const std::size_t aid = a.id(), bid = b.id();
  return finish<S>("matmul", y, {&a, &b}, [=](const Tensor<S>& g, Tape<S>& t) {
    if (aid != kNoId) t.accumulate(aid, kernels::matmul(g, kernels::transpose(*bv)));
    if (bid != kNoId) t.accumulate(bid, kernels::matmul(kernels::transpose(*av), g));
  });
}

template <typename S>
Var<S> matmul_nt(const Var<S>& a, const Var<S>& b) {
  auto y = share(kernels::matmul(a.value(), kernels::transpose(b.value())));
  auto av = a.shared(), bv = b.shared();
  const std::size_t aid = a.id(), bid = b.id();
  return finish<S>("matmul_nt", y, {&a, &b}, [=](const Tensor<S>& g, Tape<S>& t) {
    if (aid != kNoId) t.accumulate(aid, kernels::matmul(g, *bv));
    if (bid != kNoId) t.accumulate(bid, kernels::matmul(kernels::transpose(g), *av));
  });
}

template <typename S>
Var<S> transpose(const Var<S>& a) {
  auto y = share(kernels::transpose(a.value()));
  return finish<S>("transpose", y, {&a}, [aid = a.id()](const Tensor<S>& g, Tape<S>& t) {
    t.accumulate(aid, kernels::transpose(g));
  });
}

template <typename S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  auto y = share(kernels::add(a.value(), b.value()));
  const Shape bshape = b.shape();
  const std::size_t aid = a.id(), bid = b.id();
  return finish<S>("add", y, {&a, &b}, [=](const Tensor<S>& g, Tape<S>& t) {
    if (bid != kNoId) t.accumulate(bid, kernels::reduce_to(g, bshape));
    if (aid != kNoId) t.accumulate(aid, g);
  });
}

template <typename S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
  auto y = share(kernels::add(a.value(), kernels::scale(b.value(), S(-1))));
  const Shape bshape = b.shape();
  const std::size_t aid = a.id(), bid = b.id();
  return finish<S>("sub", y, {&a, &b}, [=](const Tensor<S>& g, Tape<S>& t) {
    if (bid != kNoId) t.accumulate(bid, kernels::scale(kernels::reduce_to(g, bshape), S(-1)));
    if (aid != kNoId) t.accumulate(aid, g);
  });
}

template <typename S>
Var<S> mul(const Var<S>& a, const Var<S>& b) {
  auto y = share(kernels::mul(a.value(), b.value()));
  auto av = a.shared(), bv = b.shared();
  const std::size_t aid = a.id(), bid = b.id();
  return finish<S>("mul", y, {&a, &b}, [=](const Tensor<S>& g, Tape<S>& t) {
    if (bid != kNoId) t.accumulate(bid, kernels::reduce_to(kernels::mul(g, *av), bv->shape()));
    if (aid != kNoId) t.accumulate(aid, kernels::mul(g, *bv));
  });
}

template <typename S>
Var<S> scale(const Var<S>& a, S s) {
  auto y = share(kernels::scale(a.value(), s));
  return finish<S>("scale", y, {&a}, [aid = a.id(), s](const Tensor<S>& g, Tape<S>& t) {
    t.accumulate(aid, kernels::scale(g, s));
  });
}

template <typename S>
Var<S> exp(const Var<S>& x) {
  return unary_op<S>("exp", x, [](const Tensor<S>& v) { return kernels::exp(v); },
                     [](S, S y) { return y; });
}

template <typename S>
Var<S> sigmoid(const Var<S>& x) {
  return unary_op<S>("sigmoid", x, [](const Tensor<S>& v) { return kernels::sigmoid(v); },
                     [](S, S y) { return y * (S(1) - y); });
}

template <typename S>
Var<S> softplus(const Var<S>& x) {
  return unary_op<S>("softplus", x, [](const Tensor<S>& v) { return kernels::softplus(v); },
                     [](S xv, S) { return kernels::sigmoid(xv); });
}

template <typename S>
Var<S> tanh(const Var<S>& x) {
  return unary_op<S>("tanh", x, [](const Tensor<S>& v) { return kernels::tanh(v); },
                     [](S, S y) { return S(1) - y * y; });
}

template <typename S>
Var<S> silu(const Var<S>& x) {
  return unary_op<S>("silu", x, [](const Tensor<S>& v) { return kernels::silu(v); },
                     [](S xv, S) {
                       const S s = kernels::sigmoid(xv);
                       return s * (S(1) + xv * (S(1) - s));
                     });
}

template <typename S>
Var<S> gelu(const Var<S>& x) {
  return unary_op<S>("gelu", x, [](const Tensor<S>& v) { return kernels::gelu(v); },
                     [](S xv, S) {
                       const S cdf = S(0.5) * (S(1) + std::erf(xv / std::numbers::sqrt2_v<S>));
                       const S pdf = std::exp(S(-0.5) * xv * xv) * std::numbers::inv_sqrtpi_v<S> /
                                     std::numbers::sqrt2_v<S>;
                       return cdf + xv * pdf;
                     });
}

template <typename S>
Var<S> softmax(const Var<S>& x) {
  auto y = share(kernels::softmax_last(x.value()));
  return finish<S>("softmax", y, {&x}, [xid = x.id(), y](const Tensor<S>& g, Tape<S>& t) {
    const std::size_t w = y->shape().back();
    Tensor<S> gx(g.shape());
    for (std::size_t r = 0; r < g.size() / w; ++r) {
      const S* yr = y->ptr() + r * w;
      const S* gr = g.ptr() + r * w;
      S dot = 0;
      for (std::size_t j = 0; j < w; ++j) dot += gr[j] * yr[j];
      for (std::size_t j = 0; j < w; ++j) gx[r * w + j] = yr[j] * (gr[j] - dot);
    }
    t.accumulate(xid, std::move(gx));
  });
}

template <typename S>
Var<S> layer_norm(const Var<S>& x, const Var<S>& gamma, const Var<S>& beta, S eps) {
  auto r = std::make_shared<kernels::LayerNormResult<S>>(
      kernels::layer_norm(x.value(), gamma.value(), beta.value(), eps));
  auto y = share(std::move(r->y));
  auto gv = gamma.shared();
  const std::size_t xid = x.id(), gid = gamma.id(), bid = beta.id();
  return finish<S>("layer_norm", y, {&x, &gamma, &beta}, [=](const Tensor<S>& g, Tape<S>& t) {
    const std::size_t w = g.shape().back();
    const std::size_t rows = g.size() / w;
    const Tensor<S>& xhat = r->xhat;
    if (gid != kNoId || bid != kNoId) {
      Tensor<S> gg(Shape{w}), gb(Shape{w});
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
          gg[j] += g[i * w + j] * xhat[i * w + j];
          gb[j] += g[i * w + j];
        }
      }
      t.accumulate(gid, std::move(gg));
      t.accumulate(bid, std::move(gb));
    }
    if (xid == kNoId) return;
    Tensor<S> gx(g.shape());
    const S n = static_cast<S>(w);
    for (std::size_t i = 0; i < rows; ++i) {
      S sum_d = 0, sum_dx = 0;
      for (std::size_t j = 0; j < w; ++j) {
        const S d = g[i * w + j] * (*gv)[j];
        sum_d += d;
        sum_dx += d * xhat[i * w + j];
      }
      const S inv = r->inv_std[i];
      for (std::size_t j = 0; j < w; ++j) {
        const S d = g[i * w + j] * (*gv)[j];
        gx[i * w + j] = inv / n * (n * d - sum_d - xhat[i * w + j] * sum_dx);
      }
    }
    t.accumulate(xid, std::move(gx));
  });
}

template <typename S>
Var<S> mean(const Var<S>& x, std::size_t axis) {
  auto y = share(kernels::mean_axis(x.value(), axis));
  const Shape xs = x.shape();
  return finish<S>("mean", y, {&x}, [xid = x.id(), xs, axis](const Tensor<S>& g, Tape<S>& t) {
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= xs[i];
    for (std::size_t i = axis + 1; i < xs.size(); ++i) inner *= xs[i];
    const std::size_t n = xs[axis];
    const S inv = S(1) / static_cast<S>(n);
    Tensor<S> gx(xs);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < inner; ++i)
          gx[(o * n + k) * inner + i] = g[o * inner + i] * inv;
    t.accumulate(xid, std::move(gx));
  });
}

template <typename S>
Var<S> sum(const Var<S>& x) {
  auto y = share(Tensor<S>::scalar(kernels::sum_all(x.value())));
  const Shape xs = x.shape();
  return finish<S>("sum", y, {&x}, [xid = x.id(), xs](const Tensor<S>& g, Tape<S>& t) {
    t.accumulate(xid, Tensor<S>(xs, g[0]));
  });
}

template <typename S>
Var<S> concat(const std::vector<Var<S>>& parts, std::size_t axis) {
  std::vector<const Tensor<S>*> values;
  values.reserve(parts.size());
  for (const auto& p : parts) values.push_back(&p.value());
  auto y = share(kernels::concat(values, axis));
  check_finite<S>("concat", *y, {});
  Tape<S>* tape = nullptr;
  std::vector<std::size_t> ids;
  std::vector<std::size_t> lengths;
  for (const auto& p : parts) {
    if (p.tracked()) {
      if (tape && tape != p.tape()) throw UsageError("concat: operands live on different tapes");
      tape = p.tape();
    }
    ids.push_back(p.id());
    lengths.push_back(p.shape()[axis]);
  }
  if (!tape) return Var<S>::constant(std::move(y));
  return tape->record("concat", y, [ids, lengths, axis](const Tensor<S>& g, Tape<S>& t) {
    std::size_t offset = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] != kNoId) t.accumulate(ids[i], kernels::slice(g, axis, offset, lengths[i]));
      offset += lengths[i];
    }
  });
}

template <typename S>
Var<S> flip(const Var<S>& x, std::size_t axis) {
  auto y = share(kernels::flip(x.value(), axis));
  return finish<S>("flip", y, {&x}, [xid = x.id(), axis](const Tensor<S>& g, Tape<S>& t) {
    t.accumulate(xid, kernels::flip(g, axis));
  });
}

template <typename S>
Var<S> slice(const Var<S>& x, std::size_t axis, std::size_t start, std::size_t length) {
  auto y = share(kernels::slice(x.value(), axis, start, length));
  const Shape xs = x.shape();
  return finish<S>("slice", y, {&x}, [xid = x.id(), xs, axis, start](const Tensor<S>& g, Tape<S>& t) {
    t.accumulate(xid, kernels::unslice(g, xs, axis, start));
  });
}

template <typename S>
Var<S> causal_conv1d(const Var<S>& x, const Var<S>& w) {
  auto y = share(kernels::causal_conv1d(x.value(), w.value()));
  auto xv = x.shared(), wv = w.shared();
  const std::size_t xid = x.id(), wid = w.id();
  return finish<S>("causal_conv1d", y, {&x, &w}, [=](const Tensor<S>& g, Tape<S>& t) {
    const std::size_t t_len = xv->dim(0), ch = xv->dim(1), k_len = wv->dim(1);
    Tensor<S> gx(xv->shape()), gw(wv->shape());
    for (std::size_t tt = 0; tt < t_len; ++tt) {
      for (std::size_t k = 0; k < k_len; ++k) {
        const std::size_t lag = k_len - 1 - k;
        if (lag > tt) continue;
        const std::size_t src = tt - lag;
        for (std::size_t c = 0; c < ch; ++c) {
          const S gv = g[tt * ch + c];
          gx[src * ch + c] += (*wv)[c * k_len + k] * gv;
          gw[c * k_len + k] += (*xv)[src * ch + c] * gv;
        }
      }
    }
    if (xid != kNoId) t.accumulate(xid, std::move(gx));
    if (wid != kNoId) t.accumulate(wid, std::move(gw));
  });
}

template <typename S>
Var<S> dropout(const Var<S>& x, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw UsageError("dropout: rate must be < 1");
  Tensor<S> mask(x.shape());
  std::bernoulli_distribution keep(1.0 - rate);
  const S scale_kept = static_cast<S>(1.0 / (1.0 - rate));
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = keep(rng) ? scale_kept : S(0);
  return mul(x, Var<S>::constant(std::move(mask)));
}

#define SIPM_INSTANTIATE_AD(S)                                                          \
  template Var<S> matmul(const Var<S>&, const Var<S>&);                                 \
  template Var<S> matmul_nt(const Var<S>&, const Var<S>&);                              \
  template Var<S> transpose(const Var<S>&);                                             \
  template Var<S> add(const Var<S>&, const Var<S>&);                                    \
  template Var<S> sub(const Var<S>&, const Var<S>&);                                    \
  template Var<S> mul(const Var<S>&, const Var<S>&);                                    \
  template Var<S> scale(const Var<S>&, S);                                              \
  template Var<S> exp(const Var<S>&);                                                   \
  template Var<S> sigmoid(const Var<S>&);                                               \
  template Var<S> softplus(const Var<S>&);                                              \
  template Var<S> tanh(const Var<S>&);                                                  \
  template Var<S> silu(const Var<S>&);                                                  \
  template Var<S> gelu(const Var<S>&);                                                  \
  template Var<S> softmax(const Var<S>&);                                               \
  template Var<S> layer_norm(const Var<S>&, const Var<S>&, const Var<S>&, S);           \
  template Var<S> mean(const Var<S>&, std::size_t);                                     \
  template Var<S> sum(const Var<S>&);                                                   \
  template Var<S> concat(const std::vector<Var<S>>&, std::size_t);                      \
  template Var<S> flip(const Var<S>&, std::size_t);                                     \
  template Var<S> slice(const Var<S>&, std::size_t, std::size_t, std::size_t);          \
  template Var<S> causal_conv1d(const Var<S>&, const Var<S>&);                          \
  template Var<S> dropout(const Var<S>&, double, std::mt19937_64&);

SIPM_INSTANTIATE_AD(float)
SIPM_INSTANTIATE_AD(double)
#undef SIPM_INSTANTIATE_AD

}  // namespace ad

template class Tape<float>;
template class Tape<double>;
template class Gradients<float>;
template class Gradients<double>;
template Tape<float>* common_tape(std::initializer_list<const Var<float>*>, std::string_view);
template Tape<double>* common_tape(std::initializer_list<const Var<double>*>, std::string_view);
template void check_finite(std::string_view, const Tensor<float>&,
                           std::initializer_list<const Var<float>*>);
template void check_finite(std::string_view, const Tensor<double>&,
                           std::initializer_list<const Var<double>*>);

}  // namespace sipm
