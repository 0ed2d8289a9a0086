#include "ssf/loss.hpp"

#include <algorithm>
#include <cmath>

#include "ssf/ops.hpp"

namespace ssf {

namespace {

template <class T>
void check_pair(const Tensor<T>& logits, const Tensor<T>& target) {
  if (logits.shape() != target.shape()) {
    fail(Errc::shape_mismatch, "logits " + to_string(logits.shape()) + " vs target " + to_string(target.shape()));
  }
}

template <class T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <class T>
Tensor<T> dice_loss(const Tensor<T>& logits, const Tensor<T>& target) {
  check_pair(logits, target);
  const auto n = logits.numel();
  const T* px = logits.data();
  const T* pg = target.data();
  for (std::int64_t i = 0; i < n; ++i) {
    if (pg[i] != T(0) && pg[i] != T(1)) fail(Errc::invalid_target, "dice target must be binary");
  }
  std::vector<T> p(static_cast<std::size_t>(n));
  double s_pg = 0, s_p = 0, s_g = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    p[i] = stable_sigmoid(px[i]);
    s_pg += static_cast<double>(p[i]) * pg[i];
    s_p += p[i];
    s_g += pg[i];
  }
  const double num = 2.0 * s_pg + kDiceSmooth;
  const double den = s_p + s_g + kDiceSmooth;
  const double loss = 1.0 - num / den;
  return record<T>("dice_loss", Tensor<T>::scalar(static_cast<T>(loss)), {&logits},
                   [p = std::move(p), target = target.detach(), num, den](std::span<const T> g, std::span<const std::span<T>> gin) {
                     const T* pg = target.data();
                     const double go = g[0];
                     for (std::size_t i = 0; i < p.size(); ++i) {
                       // d(1 - num/den)/dp_i = -(2 g_i den - num) / den^2
                       const double dp = -(2.0 * pg[i] * den - num) / (den * den);
                       gin[0][i] += static_cast<T>(go * dp * p[i] * (1.0 - p[i]));
                     }
                   });
}

template <class T>
Tensor<T> bce_loss(const Tensor<T>& logits, const Tensor<T>& target) {
  check_pair(logits, target);
  const auto n = logits.numel();
  const T* px = logits.data();
  const T* pg = target.data();
  double total = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double x = px[i];
    total += std::max(x, 0.0) - x * pg[i] + std::log1p(std::exp(-std::abs(x)));
  }
  return record<T>("bce_loss", Tensor<T>::scalar(static_cast<T>(total / static_cast<double>(n))), {&logits},
                   [x = logits.detach(), target = target.detach(), n](std::span<const T> g, std::span<const std::span<T>> gin) {
                     const T* px = x.data();
                     const T* pg = target.data();
                     const T scale = g[0] / static_cast<T>(n);
                     for (std::int64_t i = 0; i < n; ++i) gin[0][i] += scale * (stable_sigmoid(px[i]) - pg[i]);
                   });
}

template <class T>
Tensor<T> combined_loss(const Tensor<T>& logits, const Tensor<T>& target) {
  return add(dice_loss(logits, target), bce_loss(logits, target));
}

template Tensor<float> dice_loss(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> dice_loss(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> bce_loss(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> bce_loss(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> combined_loss(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> combined_loss(const Tensor<double>&, const Tensor<double>&);

}  // namespace ssf
