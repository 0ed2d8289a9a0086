#include "ssf/grad_suite.hpp"

#include <cmath>
#include <limits>

#include "ssf/encoder.hpp"
#include "ssf/error.hpp"
#include "ssf/grad_check.hpp"
#include "ssf/loss.hpp"
#include "ssf/model.hpp"
#include "ssf/ops.hpp"
#include "ssf/params.hpp"
#include "ssf/pld.hpp"

namespace ssf {

namespace {

using T = Tensor<double>;

T leaf(Shape shape, std::uint64_t seed, double stddev = 1.0) {
  auto t = T::normal(std::move(shape), seed, stddev);
  t.set_requires_grad(true);
  return t;
}

/// sum(y * r) for a fixed random r, so every output coordinate matters.
T project(const T& y, std::uint64_t seed) { return sum(mul(y, T::normal(y.shape(), seed, 1.0))); }

template <class P>
std::vector<T> collect(P& params) {
  std::vector<T> out;
  visit("p", params, [&](const std::string&, T& t) { out.push_back(t); });
  return out;
}

double check(const std::function<T()>& f, std::vector<T> params) { return grad_check_params(f, std::move(params)); }

GradCase layer(std::string name, std::function<double()> run) { return {std::move(name), kLayerGradTolerance, std::move(run)}; }

T binary_mask(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(static_cast<std::size_t>(numel(shape)));
  for (auto& x : v) x = rng.bernoulli(0.4) ? 1.0 : 0.0;
  return T(std::move(shape), std::move(v));
}

}  // namespace

std::vector<GradCase> gradcheck_cases() {
  std::vector<GradCase> cases;

  cases.push_back(layer("add", [] {
    auto a = leaf({2, 3, 2, 2}, 1), b = leaf({2, 3, 2, 2}, 2), c = leaf({3}, 3), s = leaf({}, 4);
    return check([=] { return project(add(add(a, b), add(sub(a, c), mul(b, s))), 5); }, {a, b, c, s});
  }));
  cases.push_back(layer("mul", [] {
    auto a = leaf({2, 4, 3}, 11), b = leaf({2, 4, 3}, 12), c = leaf({4}, 13);
    return check([=] { return project(add(mul(a, b), scale(mul(a, c), 0.5)), 14); }, {a, b, c});
  }));
  cases.push_back(layer("reduce", [] {
    auto a = leaf({2, 3, 4}, 21);
    return check(
        [=] {
          const auto m = mean(a, {0, 2});
          return add(project(sum(a, {1}), 22), add(sum(mul(m, m)), mean(a)));
        },
        {a});
  }));
  cases.push_back(layer("reshape_permute", [] {
    auto a = leaf({2, 3, 4}, 31);
    return check([=] { return project(permute(reshape(a, {6, 4}), {1, 0}), 32); }, {a});
  }));
  cases.push_back(layer("concat_slice", [] {
    auto a = leaf({2, 3, 2, 2}, 41), b = leaf({2, 2, 2, 2}, 42);
    return check([=] { return project(slice_channels(concat_channels(a, b), 1, 4), 43); }, {a, b});
  }));
  cases.push_back(layer("matmul", [] {
    auto a = leaf({2, 3, 4}, 51), b = leaf({2, 4, 5}, 52), c = leaf({3, 4}, 53), d = leaf({4, 2}, 54);
    return check([=] { return add(project(matmul(a, b), 55), project(matmul(c, d), 56)); }, {a, b, c, d});
  }));
  cases.push_back(layer("conv2d", [] {
    auto x = leaf({2, 4, 6, 6}, 61);
    auto w1 = leaf({3, 4, 3, 3}, 62, 0.3), b1 = leaf({3}, 63);
    auto w2 = leaf({4, 2, 3, 3}, 64, 0.3), b2 = leaf({4}, 65);
    auto w3 = leaf({4, 1, 3, 3}, 66, 0.3), b3 = leaf({4}, 67);
    auto w4 = leaf({5, 4, 1, 1}, 68, 0.3), b4 = leaf({5}, 69);
    return check(
        [=] {
          return add(add(project(conv2d(x, w1, b1, 2, 1), 70), project(conv2d(x, w2, b2, 1, 1, 2), 71)),
                     add(project(conv2d(x, w3, b3, 1, 1, 4), 72), project(conv2d(x, w4, b4, 1, 0), 73)));
        },
        {x, w1, b1, w2, b2, w3, b3, w4, b4});
  }));
  cases.push_back(layer("linear", [] {
    auto x = leaf({2, 5, 4}, 81), y = leaf({2, 4, 3, 3}, 82), w = leaf({3, 4}, 83), b = leaf({3}, 84);
    return check([=] { return add(project(linear(x, w, b), 85), project(linear(y, w, b), 86)); }, {x, y, w, b});
  }));
  cases.push_back(layer("relu", [] {
    // Keep inputs away from the kink so central differences are exact.
    auto x = leaf({3, 7}, 91);
    for (auto& v : x.mutable_values()) v += v >= 0 ? 0.1 : -0.1;
    return check([=] { return project(relu(x), 92); }, {x});
  }));
  cases.push_back(layer("gelu", [] {
    auto x = leaf({3, 7}, 101, 2.0);
    return check([=] { return project(gelu(x), 102); }, {x});
  }));
  cases.push_back(layer("sigmoid", [] {
    auto x = leaf({3, 7}, 111, 3.0);
    return check([=] { return project(sigmoid(x), 112); }, {x});
  }));
  cases.push_back(layer("layer_norm", [] {
    auto x = leaf({2, 3, 6}, 121), g = leaf({6}, 122), b = leaf({6}, 123);
    return check([=] { return project(layer_norm(x, g, b), 124); }, {x, g, b});
  }));
  cases.push_back(layer("softmax_rows", [] {
    auto x = leaf({2, 3, 5}, 131, 2.0);
    return check([=] { return project(softmax_rows(x), 132); }, {x});
  }));
  cases.push_back(layer("bilinear_upsample", [] {
    auto x = leaf({2, 2, 3, 4}, 141);
    return check([=] { return add(project(bilinear_upsample(x, 12, 16), 142), project(bilinear_upsample(x, 5, 3), 143)); }, {x});
  }));
  cases.push_back(layer("sr_attention", [] {
    const ParamFactory<double> pf(151);
    std::vector<T> params;
    AttentionParams<double> p1, p2;
    for (auto* p : {&p1, &p2}) {
      p->heads = 2;
      p->q = pf.linear("q", 8, 8, Init::xavier);
      p->k = pf.linear("k", 8, 8, Init::xavier);
      p->v = pf.linear("v", 8, 8, Init::xavier);
      p->proj = pf.linear("proj", 8, 8, Init::xavier);
    }
    p2.sr_ratio = 2;
    p2.sr = pf.conv("sr", 8, 8, 2, 2, 0, 1, Init::xavier);
    p2.sr_norm = pf.norm(8);
    auto x = leaf({2, 16, 8}, 152);
    params.push_back(x);
    for (auto* lp : {&p1.q, &p1.k, &p1.v, &p1.proj, &p2.q, &p2.k, &p2.v, &p2.proj}) {
      params.push_back(lp->weight);
      params.push_back(lp->bias);
    }
    params.insert(params.end(), {p2.sr.weight, p2.sr.bias, p2.sr_norm.gamma, p2.sr_norm.beta});
    return check([=] { return add(project(sr_attention(x, 4, 4, p1), 153), project(sr_attention(x, 4, 4, p2), 154)); }, params);
  }));
  cases.push_back(layer("mix_ffn", [] {
    const ParamFactory<double> pf(161);
    MixFfnParams<double> p{pf.linear("fc1", 4, 8, Init::xavier), pf.conv("dw", 8, 8, 3, 1, 1, 8, Init::xavier),
                           pf.linear("fc2", 8, 4, Init::xavier)};
    auto x = leaf({2, 12, 4}, 162);
    return check([=] { return project(mix_ffn(x, 3, 4, p), 163); },
                 {x, p.fc1.weight, p.fc1.bias, p.dw.weight, p.dw.bias, p.fc2.weight, p.fc2.bias});
  }));
  cases.push_back(layer("overlap_patch_embed", [] {
    const ParamFactory<double> pf(171);
    StageParams<double> s;
    s.patch = pf.conv("patch", 3, 6, 3, 2, 1, 1, Init::xavier);
    s.patch_norm = pf.norm(6);
    auto x = leaf({2, 3, 8, 8}, 172);
    return check([=] { return project(overlap_patch_embed(x, s).tokens, 173); },
                 {x, s.patch.weight, s.patch.bias, s.patch_norm.gamma, s.patch_norm.beta});
  }));
  cases.push_back(layer("local_emphasis", [] {
    const ParamFactory<double> pf(181);
    LEParams<double> p{pf.conv("a", 4, 6, 3, 1, 1, 1, Init::he), pf.conv("b", 6, 6, 3, 1, 1, 1, Init::he)};
    for (auto* b : {&p.first.bias, &p.second.bias}) {
      auto v = b->mutable_values();
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.05 * static_cast<double>(i % 3);
    }
    auto f = leaf({1, 4, 3, 3}, 182);
    return check([=] { return project(local_emphasis(f, p, 6, 6), 183); },
                 {f, p.first.weight, p.first.bias, p.second.weight, p.second.bias});
  }));
  cases.push_back(layer("fuse_step", [] {
    const ParamFactory<double> pf(191);
    auto cat_fuse = pf.linear("cat", 8, 4, Init::xavier), add_fuse = pf.linear("add", 4, 4, Init::xavier);
    auto post = pf.linear("post", 4, 4, Init::he);
    auto deeper = leaf({2, 4, 3, 3}, 192), shallower = leaf({2, 4, 3, 3}, 193);
    return check(
        [=] {
          return add(project(fuse_step(deeper, shallower, FusionMode::cat, cat_fuse, post), 194),
                     project(fuse_step(deeper, shallower, FusionMode::add, add_fuse, post), 195));
        },
        {deeper, shallower, cat_fuse.weight, cat_fuse.bias, add_fuse.weight, add_fuse.bias, post.weight, post.bias});
  }));
  cases.push_back(layer("dice_loss", [] {
    auto x = leaf({2, 1, 4, 4}, 201, 2.0);
    const auto g = binary_mask({2, 1, 4, 4}, 202);
    return check([=] { return dice_loss(x, g); }, {x});
  }));
  cases.push_back(layer("bce_loss", [] {
    auto x = leaf({2, 1, 4, 4}, 211, 3.0);
    const auto g = binary_mask({2, 1, 4, 4}, 212);
    return check([=] { return bce_loss(x, g); }, {x});
  }));
  cases.push_back(layer("combined_loss", [] {
    auto x = leaf({2, 1, 4, 4}, 221, 2.0);
    const auto g = binary_mask({2, 1, 4, 4}, 222);
    return check([=] { return combined_loss(x, g); }, {x});
  }));
  cases.push_back({"end_to_end", kEndToEndGradTolerance, [] {
                     ModelConfig cfg;
                     cfg.pld.unified_dim = 16;
                     const SSFormer<double> model(cfg, 231);
                     std::vector<T> params;
                     for (auto& [name, t] : model.named_parameters()) params.push_back(t);
                     const auto x = T::normal({1, 3, 32, 32}, 232, 0.5);
                     const auto g = binary_mask({1, 1, 32, 32}, 233);
                     GradCheckOptions options;
                     options.max_coords_per_tensor = 8;
                     options.seed = 234;
                     return grad_check_params([&] { return combined_loss(model.forward(x), g); }, params, options);
                   }});
  return cases;
}

void replace_case(std::vector<GradCase>& cases, GradCase replacement) {
  for (auto& c : cases) {
    if (c.name == replacement.name) {
      c = std::move(replacement);
      return;
    }
  }
  cases.push_back(std::move(replacement));
}

std::vector<GradCaseResult> run_grad_suite(const std::vector<GradCase>& cases,
                                           const std::function<void(const GradCaseResult&)>& on_result) {
  std::vector<GradCaseResult> out;
  for (const auto& c : cases) {
    GradCaseResult r{c.name, 0.0, c.threshold, false, {}};
    try {
      r.max_error = c.run();
      r.passed = std::isfinite(r.max_error) && r.max_error < c.threshold;
    } catch (const std::exception& e) {
      r.error = e.what();
      r.max_error = std::numeric_limits<double>::infinity();
    }
    if (on_result) on_result(r);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace ssf
