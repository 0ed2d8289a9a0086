#pragma once

#include <vector>

#include "ssf/tensor.hpp"

namespace ssf {

enum class EwiseOp { add, sub, mul };
enum class ReduceOp { sum, mean };

/// Elementwise op. `b` may have the same shape as `a`, be a single-element
/// rank-0 tensor, or be a rank-1 tensor of length a.dim(1) broadcast along
/// the channel axis.
template <class T>
Tensor<T> ewise(EwiseOp op, const Tensor<T>& a, const Tensor<T>& b);
template <class T>
Tensor<T> ewise(EwiseOp op, const Tensor<T>& a, T b);

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) { return ewise(EwiseOp::add, a, b); }
template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) { return ewise(EwiseOp::sub, a, b); }
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) { return ewise(EwiseOp::mul, a, b); }
template <class T>
Tensor<T> scale(const Tensor<T>& a, T s) { return ewise(EwiseOp::mul, a, s); }

/// Reduces over `axes` (distinct, in range) and drops them from the shape.
/// An empty axis list reduces everything to a scalar.
template <class T>
Tensor<T> reduce(ReduceOp op, const Tensor<T>& x, std::vector<int> axes = {});
template <class T>
Tensor<T> sum(const Tensor<T>& x, std::vector<int> axes = {}) { return reduce(ReduceOp::sum, x, std::move(axes)); }
template <class T>
Tensor<T> mean(const Tensor<T>& x, std::vector<int> axes = {}) { return reduce(ReduceOp::mean, x, std::move(axes)); }

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);
/// out.shape[i] = x.shape[perm[i]].
template <class T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<int>& perm);

/// Stacks along axis 1; every other extent must match.
template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);
/// Channels [begin, end) along axis 1.
template <class T>
Tensor<T> slice_channels(const Tensor<T>& x, std::int64_t begin, std::int64_t end);

/// [m,k]x[k,n] or batched [B,m,k]x[B,k,n].
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace ssf
