#pragma once

#include "ssf/tensor.hpp"

namespace ssf {

inline constexpr double kDiceSmooth = 1.0;

/// 1 - (2 sum(p g) + 1) / (sum(p) + sum(g) + 1) with p = sigmoid(logits),
/// aggregated over the whole batch. InvalidTarget unless target is 0/1.
template <class T>
Tensor<T> dice_loss(const Tensor<T>& logits, const Tensor<T>& target);

/// Mean binary cross-entropy on logits, in the form
/// max(x,0) - x g + log1p(exp(-|x|)).
template <class T>
Tensor<T> bce_loss(const Tensor<T>& logits, const Tensor<T>& target);

/// dice_loss + bce_loss with unit weights.
template <class T>
Tensor<T> combined_loss(const Tensor<T>& logits, const Tensor<T>& target);

}  // namespace ssf
