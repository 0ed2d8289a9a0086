#pragma once

#include <cstdint>

#include "ssf/tensor.hpp"

namespace ssf {

/// Convolution parameters. weight is [C_out, C_in/groups, k, k]; bias is
/// [C_out] or undefined.
template <class T>
struct ConvParams {
  Tensor<T> weight;
  Tensor<T> bias;
  int stride = 1;
  int padding = 0;
  int groups = 1;

  std::int64_t out_channels() const { return weight.dim(0); }
  std::int64_t in_channels() const { return weight.dim(1) * groups; }
  int kernel() const { return static_cast<int>(weight.dim(2)); }
};

/// Per-position linear map over the channel axis. weight is [C_out, C_in].
template <class T>
struct LinearParams {
  Tensor<T> weight;
  Tensor<T> bias;

  std::int64_t out_features() const { return weight.dim(0); }
  std::int64_t in_features() const { return weight.dim(1); }
};

template <class T>
struct NormParams {
  Tensor<T> gamma;
  Tensor<T> beta;
};

inline constexpr double kLayerNormEps = 1e-6;

/// Cross-correlation (no kernel flip) of an NCHW batch plus bias.
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, int stride, int padding, int groups = 1);

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const ConvParams<T>& p) {
  return conv2d(x, p.weight, p.bias, p.stride, p.padding, p.groups);
}

/// y = W x + b at every position. Rank-4 inputs carry channels on axis 1
/// (NCHW); rank-2 [T,C] and rank-3 [N,T,C] inputs carry them last.
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

template <class T>
Tensor<T> linear(const Tensor<T>& x, const LinearParams<T>& p) {
  return linear(x, p.weight, p.bias);
}

/// relu'(0) is taken as 0.
template <class T>
Tensor<T> relu(const Tensor<T>& x);
/// tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
template <class T>
Tensor<T> gelu(const Tensor<T>& x);
template <class T>
Tensor<T> sigmoid(const Tensor<T>& x);

/// Normalizes over the last axis (biased variance), then gamma * xhat + beta.
template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, double eps = kLayerNormEps);

template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const NormParams<T>& p) {
  return layer_norm(x, p.gamma, p.beta);
}

/// Softmax over the last axis with max subtraction.
template <class T>
Tensor<T> softmax_rows(const Tensor<T>& x);

/// Bilinear resampling of an NCHW batch with half-pixel centers and no
/// corner alignment: source coordinate = (dst + 0.5) * in / out - 0.5,
/// clamped at 0, neighbours clamped at the last row/column.
template <class T>
Tensor<T> bilinear_upsample(const Tensor<T>& x, std::int64_t out_h, std::int64_t out_w);

}  // namespace ssf
