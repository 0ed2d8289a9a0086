#include <gtest/gtest.h>

#include <cmath>

#include "ssf/grad_check.hpp"
#include "ssf/model.hpp"
#include "ssf/ops.hpp"
#include "ssf/pld.hpp"

using namespace ssf;
using TD = Tensor<double>;
using TF = Tensor<float>;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no ssf::Error thrown";
  return Errc::format_error;
}

constexpr std::array<int, kStages> kDims{16, 32, 64, 128};

PyramidFeatures<double> random_pyramid(std::int64_t n, std::int64_t s, std::uint64_t seed) {
  PyramidFeatures<double> p;
  for (int i = 0; i < kStages; ++i) p.levels[i] = TD::normal({n, kDims[i], s >> (i + 2), s >> (i + 2)}, seed + i, 1.0);
  return p;
}

TD eye(int c) {
  auto t = TD::zeros({c, c});
  for (int i = 0; i < c; ++i) t.mutable_values()[i * c + i] = 1;
  return t;
}

TD nonneg(Shape s, std::uint64_t seed) {
  auto t = TD::normal(std::move(s), seed, 1.0);
  for (auto& v : t.mutable_values()) v = std::abs(v);
  return t;
}

}  // namespace

TEST(LocalEmphasis, StageOneKeepsSize) {
  const auto p = init_pld<double>(PLDConfig{}, kDims, 1);
  const auto y = local_emphasis(TD::normal({2, 16, 16, 16}, 2, 1.0), p.le[0], 16, 16);
  EXPECT_EQ(y.shape(), (Shape{2, 64, 16, 16}));
  for (double v : y.values()) EXPECT_GE(v, 0.0);
}

TEST(LocalEmphasis, StageFourUpsamplesByEight) {
  const auto p = init_pld<double>(PLDConfig{}, kDims, 1);
  const auto y = local_emphasis(TD::normal({1, 128, 2, 2}, 2, 1.0), p.le[3], 16, 16);
  EXPECT_EQ(y.shape(), (Shape{1, 64, 16, 16}));
  EXPECT_EQ(code_of([&] { local_emphasis(TD::zeros({1, 64, 2, 2}), p.le[3], 16, 16); }), Errc::shape_mismatch);
}

TEST(LocalEmphasis, Gradient) {
  const ParamFactory<double> pf(4);
  LEParams<double> p{pf.conv("a", 8, 8, 3, 1, 1, 1, Init::he), pf.conv("b", 8, 8, 3, 1, 1, 1, Init::he)};
  auto f = TD::normal({1, 8, 4, 4}, 5, 1.0);
  f.set_requires_grad(true);
  const auto r = TD::normal({1, 8, 8, 8}, 6, 1.0);
  EXPECT_LT(grad_check_params([&] { return sum(mul(local_emphasis(f, p, 8, 8), r)); },
                              {f, p.first.weight, p.first.bias, p.second.weight, p.second.bias}),
            1e-5);
}

TEST(FuseStep, AddWithIdentityWeights) {
  const LinearParams<double> id{eye(4), TD::zeros({4})};
  const auto g = nonneg({1, 4, 3, 3}, 1), f = nonneg({1, 4, 3, 3}, 2);
  const auto y = fuse_step(g, f, FusionMode::add, id, id);
  for (std::int64_t i = 0; i < y.numel(); ++i) EXPECT_DOUBLE_EQ(y.values()[i], g.values()[i] + f.values()[i]);
}

TEST(FuseStep, CatSelectorPicksShallower) {
  auto sel = TD::zeros({4, 8});
  for (int i = 0; i < 4; ++i) sel.mutable_values()[i * 8 + i] = 1;
  const LinearParams<double> fuse{sel, TD::zeros({4})}, id{eye(4), TD::zeros({4})};
  const auto g = nonneg({1, 4, 3, 3}, 1), f = nonneg({1, 4, 3, 3}, 2);
  const auto y = fuse_step(g, f, FusionMode::cat, fuse, id);
  for (std::int64_t i = 0; i < y.numel(); ++i) EXPECT_DOUBLE_EQ(y.values()[i], f.values()[i]);
}

TEST(FuseStep, ModesAgreeOnShape) {
  const auto cat = init_pld<double>(PLDConfig{16, FusionMode::cat, true, true}, kDims, 1);
  const auto add_ = init_pld<double>(PLDConfig{16, FusionMode::add, true, true}, kDims, 1);
  const auto g = TD::normal({2, 16, 4, 4}, 1, 1.0), f = TD::normal({2, 16, 4, 4}, 2, 1.0);
  EXPECT_EQ(fuse_step(g, f, FusionMode::cat, cat.fuse[0], cat.fuse_post[0]).shape(),
            fuse_step(g, f, FusionMode::add, add_.fuse[0], add_.fuse_post[0]).shape());
  EXPECT_EQ(code_of([&] { fuse_step(g, TD::zeros({2, 16, 4, 3}), FusionMode::add, add_.fuse[0], add_.fuse_post[0]); }),
            Errc::shape_mismatch);
}

TEST(PldForward, LogitShape) {
  const auto p = init_pld<double>(PLDConfig{16, FusionMode::cat, true, true}, kDims, 1);
  EXPECT_EQ(pld_forward(random_pyramid(2, 64, 3), p).shape(), (Shape{2, 1, 64, 64}));
}

TEST(PldForward, ResolutionLawAcrossSizes) {
  for (bool le : {true, false})
    for (bool sfa : {true, false}) {
      const auto p = init_pld<double>(PLDConfig{16, FusionMode::cat, le, sfa}, kDims, 1);
      for (std::int64_t s : {32, 64, 96}) {
        PLDTrace<double> trace;
        const auto y = pld_forward(random_pyramid(1, s, 3), p, &trace);
        EXPECT_EQ(y.shape(), (Shape{1, 1, s, s}));
        for (int i = 0; i < kStages; ++i) {
          EXPECT_EQ(trace.le[i].shape(), (Shape{1, 16, s / 4, s / 4}));
          EXPECT_EQ(trace.fused[i].shape(), (Shape{1, 16, s / 4, s / 4}));
        }
      }
    }
}

TEST(PldForward, ZeroPyramidGivesConstantLogits) {
  const auto p = init_pld<double>(PLDConfig{16, FusionMode::cat, true, true}, kDims, 1);
  PyramidFeatures<double> zero;
  for (int i = 0; i < kStages; ++i) zero.levels[i] = TD::zeros({1, kDims[i], 16 >> i, 16 >> i});
  const auto y = pld_forward(zero, p);
  for (double v : y.values()) EXPECT_DOUBLE_EQ(v, y.values()[0]);
}

TEST(PldForward, InconsistentPyramid) {
  const auto p = init_pld<double>(PLDConfig{16, FusionMode::cat, true, true}, kDims, 1);
  auto pyr = random_pyramid(1, 64, 3);
  pyr.levels[2] = TD::zeros({1, 64, 3, 3});
  EXPECT_EQ(code_of([&] { pld_forward(pyr, p); }), Errc::shape_mismatch);
}

TEST(PldForward, FusionRunsDeepestFirst) {
  const auto p = init_pld<double>(PLDConfig{16, FusionMode::cat, true, true}, kDims, 1);
  ModelConfig cfg;
  cfg.pld.unified_dim = 16;
  const SSFormer<double> model(cfg, 2);
  Tape<double> tape;
  ForwardTrace<double> trace;
  model.forward(TD::normal({1, 3, 32, 32}, 3, 1.0), &trace);
  for (int i = 0; i + 1 < kStages; ++i) {
    EXPECT_LT(trace.decoder.fused[i + 1].node_id(), trace.decoder.fused[i].node_id()) << "G" << i + 2 << " before G" << i + 1;
    // G_i consumes G_{i+1} through its fusion unit.
    EXPECT_GE(trace.decoder.fused[i + 1].node_id(), 0);
  }
  EXPECT_EQ(tape.op_name(trace.decoder.fused[0].node_id()), "relu");
}

TEST(PldForward, ParallelSumIsOrderFree) {
  const auto p = init_pld<double>(PLDConfig{16, FusionMode::cat, true, false}, kDims, 1);
  PLDTrace<double> trace;
  const auto pyr = random_pyramid(1, 32, 5);
  const auto y = pld_forward(pyr, p, &trace);
  const auto& le = trace.le;
  const auto total = add(add(le[1], le[3]), add(le[0], le[2]));
  const auto ref = bilinear_upsample(linear(linear(total, p.parallel), p.pred), 32, 32);
  for (std::int64_t i = 0; i < y.numel(); ++i) EXPECT_NEAR(y.values()[i], ref.values()[i], 1e-12);
}

TEST(PldParams, CatHasExtraFusionWeights) {
  auto count = [](FusionMode m) {
    auto p = init_pld<double>(PLDConfig{16, m, true, true}, kDims, 1);
    std::int64_t n = 0;
    visit("d", p, [&](const std::string&, TD& t) { n += t.numel(); });
    return n;
  };
  const std::int64_t c = 16;
  EXPECT_EQ(count(FusionMode::cat) - count(FusionMode::add), 3 * (2 * c * c + c) - 3 * (c * c + c));
}

TEST(PldParams, StageWeightsUnshared) {
  const auto p = init_pld<double>(PLDConfig{}, kDims, 1);
  EXPECT_NE(p.le[1].second.weight.storage_id(), p.le[2].second.weight.storage_id());
  EXPECT_NE(p.le[1].second.weight.at({0, 0, 0, 0}), p.le[2].second.weight.at({0, 0, 0, 0}));
}

TEST(PldParams, AblationVariantsShareOutputShape) {
  ModelConfig full, bare;
  bare.pld.le_enabled = false;
  bare.pld.sfa_enabled = false;
  const auto x = TF::normal({2, 3, 64, 64}, 1, 1.0);
  EXPECT_EQ(SSFormer<float>(full, 1).forward(x).shape(), SSFormer<float>(bare, 1).forward(x).shape());
}

TEST(EncoderGradient, ReachesEveryPatchEmbed) {
  ModelConfig cfg;
  cfg.pld.unified_dim = 16;
  const SSFormer<double> model(cfg, 3);
  const auto x = TD::normal({1, 3, 32, 32}, 4, 1.0);
  Tape<double> tape;
  const auto g = tape.backward(sum(model.forward(x)));
  for (int s = 0; s < kStages; ++s) {
    const auto& w = model.encoder().stages[s].patch.weight;
    double norm = 0;
    for (double v : g.of(w).values()) norm += v * v;
    EXPECT_GT(norm, 0.0) << "stage " << s + 1;
  }
}

TEST(FeatureHeatmap, OneHotPixel) {
  auto g = TD::zeros({1, 3, 4, 5});
  g.mutable_values()[1 * 20 + 2 * 5 + 3] = 2.0;
  const auto h = feature_heatmap(g);
  EXPECT_EQ(h.shape(), (Shape{4, 5}));
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 5; ++x) EXPECT_DOUBLE_EQ(h.at({y, x}), (y == 2 && x == 3) ? 1.0 : 0.0);
}

TEST(FeatureHeatmap, RangeAndScaleInvariance) {
  const auto g = TD::normal({2, 6, 5, 5}, 1, 1.0);
  const auto a = feature_heatmap(g), b = feature_heatmap(scale(g, 7.5));
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    EXPECT_GE(a.values()[i], 0.0);
    EXPECT_LE(a.values()[i], 1.0);
    EXPECT_NEAR(a.values()[i], b.values()[i], 1e-6);
  }
  const auto flat = feature_heatmap(TD::full({1, 2, 3, 3}, 1.0));
  for (double v : flat.values()) EXPECT_EQ(v, 0.0);
}
