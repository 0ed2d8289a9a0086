#include "ssf/metrics.hpp"

#include <string>

namespace ssf {

MaskScore score_mask(const Tensor<float>& pred, const Tensor<float>& target) {
  if (pred.shape() != target.shape()) {
    fail(Errc::shape_mismatch, "mask " + to_string(pred.shape()) + " vs " + to_string(target.shape()));
  }
  std::int64_t inter = 0, p = 0, g = 0;
  const float* pp = pred.data();
  const float* pg = target.data();
  for (std::int64_t i = 0; i < pred.numel(); ++i) {
    const bool a = pp[i] > 0.5f;
    const bool b = pg[i] > 0.5f;
    inter += a && b;
    p += a;
    g += b;
  }
  if (p + g == 0) return {1.0, 1.0};
  const auto uni = p + g - inter;
  return {2.0 * static_cast<double>(inter) / static_cast<double>(p + g), static_cast<double>(inter) / static_cast<double>(uni)};
}

Tensor<float> binarize_logits(const Tensor<float>& logits) {
  std::vector<float> out(static_cast<std::size_t>(logits.numel()));
  const float* px = logits.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = px[i] >= 0.0f ? 1.0f : 0.0f;
  return Tensor<float>(logits.shape(), std::move(out));
}

namespace {

template <class F>
double mean_score(std::span<const Tensor<float>> preds, std::span<const Tensor<float>> targets, F&& pick) {
  if (preds.size() != targets.size()) fail(Errc::shape_mismatch, "prediction and target lists differ in length");
  if (preds.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) total += pick(score_mask(preds[i], targets[i]));
  return total / static_cast<double>(preds.size());
}

}  // namespace

double mdice(std::span<const Tensor<float>> preds, std::span<const Tensor<float>> targets) {
  return mean_score(preds, targets, [](const MaskScore& s) { return s.dice; });
}

double miou(std::span<const Tensor<float>> preds, std::span<const Tensor<float>> targets) {
  return mean_score(preds, targets, [](const MaskScore& s) { return s.iou; });
}

}  // namespace ssf
