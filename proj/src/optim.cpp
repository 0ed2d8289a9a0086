#include "ssf/optim.hpp"

#include <cmath>
#include <string>

namespace ssf {

template <class T>
void adamw_step(std::span<Tensor<T>> params, std::span<const Tensor<T>> grads, OptimState<T>& state) {
  if (params.size() != grads.size()) fail(Errc::shape_mismatch, "parameter and gradient counts differ");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(static_cast<std::size_t>(p.numel()), T(0));
      state.v.emplace_back(static_cast<std::size_t>(p.numel()), T(0));
    }
  }
  if (state.m.size() != params.size()) fail(Errc::shape_mismatch, "optimizer state tracks a different parameter count");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].shape() || static_cast<std::int64_t>(state.m[i].size()) != params[i].numel()) {
      fail(Errc::shape_mismatch, "parameter " + std::to_string(i) + " shape " + to_string(params[i].shape()) +
                                     " vs gradient " + to_string(grads[i].shape()));
    }
  }

  ++state.step;
  const auto& o = state.options;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  const double shrink = 1.0 - o.lr * o.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params[i].mutable_values();
    const auto g = grads[i].values();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double gj = g[j];
      const double mj = o.beta1 * m[j] + (1.0 - o.beta1) * gj;
      const double vj = o.beta2 * v[j] + (1.0 - o.beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = (mj / c1) / (std::sqrt(vj / c2) + o.eps);
      theta[j] = static_cast<T>(static_cast<double>(theta[j]) * shrink - o.lr * update);
    }
  }
}

double lr_at(int epoch, const Schedule& schedule) {
  if (epoch < 0 || epoch >= schedule.total_epochs) {
    fail(Errc::invalid_epoch, "epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(schedule.total_epochs) + ")");
  }
  return schedule.base_lr * std::pow(schedule.decay_factor, epoch / schedule.decay_period);
}

template void adamw_step(std::span<Tensor<float>>, std::span<const Tensor<float>>, OptimState<float>&);
template void adamw_step(std::span<Tensor<double>>, std::span<const Tensor<double>>, OptimState<double>&);

}  // namespace ssf
