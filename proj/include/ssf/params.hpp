#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "ssf/nn.hpp"
#include "ssf/rng.hpp"

namespace ssf {

enum class Init { he, xavier };

/// Creates trainable tensors whose normal fills are keyed by (seed, name),
/// so adding or removing a layer never perturbs the others.
template <class T>
class ParamFactory {
 public:
  explicit ParamFactory(std::uint64_t seed) : seed_(seed) {}

  Tensor<T> normal(const std::string& name, Shape shape, double stddev) const {
    auto t = Tensor<T>::normal(std::move(shape), mix_seed(seed_, fnv1a(name)), stddev);
    t.set_requires_grad(true);
    return t;
  }

  Tensor<T> constant(Shape shape, T value) const {
    auto t = Tensor<T>::full(std::move(shape), value);
    t.set_requires_grad(true);
    return t;
  }

  ConvParams<T> conv(const std::string& name, std::int64_t in_c, std::int64_t out_c, int kernel, int stride, int padding,
                     int groups, Init init) const {
    const double fan_in = static_cast<double>(in_c / groups * kernel * kernel);
    const double fan_out = static_cast<double>(out_c / groups * kernel * kernel);
    ConvParams<T> p;
    p.weight = normal(name + ".weight", {out_c, in_c / groups, kernel, kernel}, init_std(init, fan_in, fan_out));
    p.bias = constant({out_c}, T(0));
    p.stride = stride;
    p.padding = padding;
    p.groups = groups;
    return p;
  }

  LinearParams<T> linear(const std::string& name, std::int64_t in_f, std::int64_t out_f, Init init) const {
    LinearParams<T> p;
    p.weight = normal(name + ".weight", {out_f, in_f}, init_std(init, static_cast<double>(in_f), static_cast<double>(out_f)));
    p.bias = constant({out_f}, T(0));
    return p;
  }

  NormParams<T> norm(std::int64_t channels) const { return {constant({channels}, T(1)), constant({channels}, T(0))}; }

 private:
  static double init_std(Init init, double fan_in, double fan_out) {
    return init == Init::he ? std::sqrt(2.0 / fan_in) : std::sqrt(2.0 / (fan_in + fan_out));
  }

  std::uint64_t seed_;
};

template <class T, class F>
void visit(const std::string& prefix, ConvParams<T>& p, F&& f) {
  f(prefix + ".weight", p.weight);
  if (p.bias.defined()) f(prefix + ".bias", p.bias);
}

template <class T, class F>
void visit(const std::string& prefix, LinearParams<T>& p, F&& f) {
  f(prefix + ".weight", p.weight);
  if (p.bias.defined()) f(prefix + ".bias", p.bias);
}

template <class T, class F>
void visit(const std::string& prefix, NormParams<T>& p, F&& f) {
  f(prefix + ".gamma", p.gamma);
  f(prefix + ".beta", p.beta);
}

}  // namespace ssf
