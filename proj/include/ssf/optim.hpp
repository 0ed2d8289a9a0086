#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ssf/tensor.hpp"

namespace ssf {

struct AdamWOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// First/second moments per parameter plus the step counter. Moments are
/// allocated on the first step.
template <class T>
struct OptimState {
  AdamWOptions options;
  std::int64_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
};

/// Decoupled weight decay update with bias-corrected moments:
/// theta <- theta - lr*wd*theta - lr * mhat / (sqrt(vhat) + eps).
/// Parameters are updated in place. ShapeMismatch when a gradient or the
/// stored moments do not match its parameter.
template <class T>
void adamw_step(std::span<Tensor<T>> params, std::span<const Tensor<T>> grads, OptimState<T>& state);

/// Step decay: lr(e) = base_lr * decay_factor^floor(e / decay_period).
struct Schedule {
  double base_lr = 1e-4;
  double decay_factor = 0.1;
  int decay_period = 40;
  int total_epochs = 200;
};

/// InvalidEpoch outside [0, total_epochs).
double lr_at(int epoch, const Schedule& schedule);

}  // namespace ssf
