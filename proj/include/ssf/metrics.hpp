#pragma once

#include <span>
#include <vector>

#include "ssf/tensor.hpp"

namespace ssf {

struct MaskScore {
  double dice = 1.0;
  double iou = 1.0;
};

/// Dice 2|P∩G|/(|P|+|G|) and IoU |P∩G|/|P∪G| of two binary masks of equal
/// shape; both empty scores 1. ShapeMismatch otherwise.
MaskScore score_mask(const Tensor<float>& pred, const Tensor<float>& target);

/// 1 where sigmoid(logit) >= 0.5, else 0.
Tensor<float> binarize_logits(const Tensor<float>& logits);

/// Per-image scores averaged over the list.
double mdice(std::span<const Tensor<float>> preds, std::span<const Tensor<float>> targets);
double miou(std::span<const Tensor<float>> preds, std::span<const Tensor<float>> targets);

}  // namespace ssf
