#include "ssf/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ssf/rng.hpp"

namespace ssf {

namespace {

double evaluate(const std::function<Tensor<double>()>& loss) {
  const auto y = loss();
  if (y.numel() != 1) fail(Errc::invalid_reduction, "grad_check needs a scalar function");
  const double v = y.item();
  if (!std::isfinite(v)) fail(Errc::numerical_failure, "function value is not finite");
  return v;
}

}  // namespace

double grad_check_params(const std::function<Tensor<double>()>& loss, std::vector<Tensor<double>> params,
                         const GradCheckOptions& options) {
  if (options.eps < 1e-7 || options.eps > 1e-3) fail(Errc::numerical_failure, "grad_check eps must be in [1e-7, 1e-3]");
  Gradients<double> grads;
  {
    Tape<double> tape;
    const auto y = loss();
    if (y.numel() != 1) fail(Errc::invalid_reduction, "grad_check needs a scalar function");
    if (!std::isfinite(y.item())) fail(Errc::numerical_failure, "function value is not finite");
    grads = tape.backward(y);
  }

  Rng rng(options.seed);
  double worst = 0.0;
  for (auto& p : params) {
    const auto analytic = grads.of(p);
    auto values = p.mutable_values();
    std::vector<std::int64_t> coords(values.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (options.max_coords_per_tensor && static_cast<std::int64_t>(coords.size()) > *options.max_coords_per_tensor) {
      rng.shuffle(std::span<std::int64_t>(coords));
      coords.resize(static_cast<std::size_t>(*options.max_coords_per_tensor));
    }
    for (auto i : coords) {
      const double saved = values[i];
      values[i] = saved + options.eps;
      const double up = evaluate(loss);
      values[i] = saved - options.eps;
      const double down = evaluate(loss);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double a = analytic.values()[i];
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

double grad_check(const ScalarFn& f, const Tensor<double>& x, double eps) {
  auto probe = x.clone();
  probe.set_requires_grad(true);
  GradCheckOptions options;
  options.eps = eps;
  return grad_check_params([&] { return f(probe); }, {probe}, options);
}

}  // namespace ssf
