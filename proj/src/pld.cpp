#include "ssf/pld.hpp"

#include <cmath>

#include "ssf/ops.hpp"

namespace ssf {

template <class T>
PLDParams<T> init_pld(const PLDConfig& config, const std::array<int, kStages>& stage_dims, std::uint64_t seed) {
  if (config.unified_dim < 1) fail(Errc::invalid_shape, "unified_dim must be positive");
  ParamFactory<T> make(mix_seed(seed, 0x504c44));
  const std::int64_t c = config.unified_dim;
  PLDParams<T> p;
  p.config = config;
  for (int s = 0; s < kStages; ++s) {
    const std::string lp = "decoder.le" + std::to_string(s + 1);
    if (config.le_enabled) {
      p.le[s].first = make.conv(lp + ".first", stage_dims[s], c, 3, 1, 1, 1, Init::he);
      p.le[s].second = make.conv(lp + ".second", c, c, 3, 1, 1, 1, Init::he);
    } else {
      p.le[s].first = make.conv(lp + ".first", stage_dims[s], c, 1, 1, 0, 1, Init::xavier);
    }
  }
  if (config.sfa_enabled) {
    const std::int64_t fuse_in = config.fusion == FusionMode::cat ? 2 * c : c;
    for (int i = 0; i < kStages - 1; ++i) {
      p.fuse[i] = make.linear("decoder.fuse" + std::to_string(i + 1), fuse_in, c, Init::xavier);
      p.fuse_post[i] = make.linear("decoder.fuse_post" + std::to_string(i + 1), c, c, Init::he);
    }
  } else {
    p.parallel = make.linear("decoder.parallel", c, c, Init::xavier);
  }
  p.pred = make.linear("decoder.pred", c, 1, Init::xavier);
  return p;
}

template <class T>
Tensor<T> local_emphasis(const Tensor<T>& f, const LEParams<T>& p, std::int64_t target_h, std::int64_t target_w) {
  if (f.rank() != 4 || f.dim(1) != p.first.in_channels()) {
    fail(Errc::shape_mismatch, "local emphasis expects " + std::to_string(p.first.in_channels()) + " channels, got " +
                                   to_string(f.shape()));
  }
  Tensor<T> y;
  if (p.second.weight.defined()) {
    y = relu(conv2d(relu(conv2d(f, p.first)), p.second));
  } else {
    y = conv2d(f, p.first);
  }
  if (y.dim(2) == target_h && y.dim(3) == target_w) return y;
  return bilinear_upsample(y, target_h, target_w);
}

template <class T>
Tensor<T> fuse_step(const Tensor<T>& deeper, const Tensor<T>& shallower, FusionMode mode, const LinearParams<T>& fuse,
                    const LinearParams<T>& post) {
  if (deeper.shape() != shallower.shape()) {
    fail(Errc::shape_mismatch, "fusion inputs " + to_string(deeper.shape()) + " and " + to_string(shallower.shape()));
  }
  const auto merged = mode == FusionMode::cat ? linear(concat_channels(shallower, deeper), fuse) : linear(add(shallower, deeper), fuse);
  return relu(linear(merged, post));
}

template <class T>
Tensor<T> pld_forward(const PyramidFeatures<T>& pyramid, const PLDParams<T>& params, PLDTrace<T>* trace) {
  const auto& cfg = params.config;
  const auto& f1 = pyramid.levels[0];
  if (f1.rank() != 4) fail(Errc::shape_mismatch, "pyramid level 1 must be NCHW");
  const std::int64_t n = f1.dim(0), h = f1.dim(2), w = f1.dim(3);
  for (int s = 0; s < kStages; ++s) {
    const auto& f = pyramid.levels[s];
    const std::int64_t div = std::int64_t{1} << s;
    if (f.rank() != 4 || f.dim(0) != n || f.dim(2) * div != h || f.dim(3) * div != w) {
      fail(Errc::shape_mismatch, "pyramid level " + std::to_string(s + 1) + " has shape " + to_string(f.shape()) +
                                     ", inconsistent with level 1 " + to_string(f1.shape()));
    }
  }

  std::array<Tensor<T>, kStages> le;
  Tensor<T> g;
  if (cfg.sfa_enabled) {
    // Deepest first: G_4 = LE(F_4), then G_i = fuse(G_{i+1}, LE(F_i)).
    le[kStages - 1] = local_emphasis(pyramid.levels[kStages - 1], params.le[kStages - 1], h, w);
    g = le[kStages - 1];
    if (trace) trace->fused[kStages - 1] = g;
    for (int s = kStages - 2; s >= 0; --s) {
      le[s] = local_emphasis(pyramid.levels[s], params.le[s], h, w);
      g = fuse_step(g, le[s], cfg.fusion, params.fuse[s], params.fuse_post[s]);
      if (trace) trace->fused[s] = g;
    }
  } else {
    Tensor<T> total;
    for (int s = kStages - 1; s >= 0; --s) {
      le[s] = local_emphasis(pyramid.levels[s], params.le[s], h, w);
      total = total.defined() ? add(total, le[s]) : le[s];
    }
    g = linear(total, params.parallel);
    if (trace) trace->fused.fill(g);
  }
  if (trace) trace->le = le;
  const auto logits = linear(g, params.pred);
  return bilinear_upsample(logits, h * 4, w * 4);
}

template <class T>
Tensor<double> feature_heatmap(const Tensor<T>& g) {
  if (g.rank() != 4) fail(Errc::shape_mismatch, "feature_heatmap expects NCHW");
  const std::int64_t c = g.dim(1), h = g.dim(2), w = g.dim(3);
  std::vector<double> mag(static_cast<std::size_t>(h * w), 0.0);
  const T* p = g.data();
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t i = 0; i < h * w; ++i) {
      const double v = p[ch * h * w + i];
      mag[i] += v * v;
    }
  }
  for (auto& m : mag) m = std::sqrt(m);
  return minmax_normalize(Tensor<double>({h, w}, std::move(mag)));
}

#define SSF_INSTANTIATE_PLD(T)                                                                                   \
  template PLDParams<T> init_pld(const PLDConfig&, const std::array<int, kStages>&, std::uint64_t);              \
  template Tensor<T> local_emphasis(const Tensor<T>&, const LEParams<T>&, std::int64_t, std::int64_t);           \
  template Tensor<T> fuse_step(const Tensor<T>&, const Tensor<T>&, FusionMode, const LinearParams<T>&,            \
                               const LinearParams<T>&);                                                          \
  template Tensor<T> pld_forward(const PyramidFeatures<T>&, const PLDParams<T>&, PLDTrace<T>*);                   \
  template Tensor<double> feature_heatmap(const Tensor<T>&);

SSF_INSTANTIATE_PLD(float)
SSF_INSTANTIATE_PLD(double)

}  // namespace ssf
