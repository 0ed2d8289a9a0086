#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "ssf/tensor.hpp"

namespace ssf {

using ScalarFn = std::function<Tensor<double>(const Tensor<double>&)>;

/// Max over coordinates of |analytic - central difference| /
/// max(1, |analytic|, |numeric|) for scalar-valued f at x.
/// eps must lie in [1e-7, 1e-3]; a non-finite f raises NumericalFailure.
double grad_check(const ScalarFn& f, const Tensor<double>& x, double eps = 1e-5);

struct GradCheckOptions {
  double eps = 1e-5;
  /// When set, at most this many coordinates per tensor are probed, chosen
  /// by `seed`. Unset probes every coordinate.
  std::optional<std::int64_t> max_coords_per_tensor;
  std::uint64_t seed = 0;
};

/// Same error measure for a closure over several trainable tensors. The
/// tensors are perturbed in place (their storage is shared with whatever
/// the closure captured) and restored before returning.
double grad_check_params(const std::function<Tensor<double>()>& loss, std::vector<Tensor<double>> params,
                         const GradCheckOptions& options = {});

}  // namespace ssf
