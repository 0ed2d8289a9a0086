#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "oracles.hpp"
#include "ssf/grad_check.hpp"
#include "ssf/loss.hpp"
#include "ssf/metrics.hpp"
#include "ssf/ops.hpp"
#include "ssf/optim.hpp"
#include "ssf/trainer.hpp"

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

std::vector<double> vec(const TD& t) { return {t.values().begin(), t.values().end()}; }

TD random_mask(Shape s, std::uint64_t seed, double p = 0.4) {
  Rng rng(seed);
  std::vector<double> v(static_cast<std::size_t>(numel(s)));
  for (auto& x : v) x = rng.bernoulli(p);
  return TD(std::move(s), std::move(v));
}

TF random_maskf(Shape s, std::uint64_t seed, double p) { return random_mask(std::move(s), seed, p).cast<float>(); }

std::vector<int> ints(const TF& t) {
  std::vector<int> out;
  for (float v : t.values()) out.push_back(v > 0.5f);
  return out;
}

std::uint64_t param_hash(const SSFormer<float>& m) {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& [name, t] : m.named_parameters()) {
    for (float v : t.values()) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      h = (h ^ bits) * 1099511628211ull;
    }
  }
  return h;
}

ModelConfig small_model() {
  ModelConfig cfg;
  cfg.pld.unified_dim = 16;
  return cfg;
}

}  // namespace

TEST(DiceLoss, PerfectOnes) {
  const auto big = TD::full({1, 1, 10, 10}, 50.0);
  EXPECT_NEAR(dice_loss(big, TD::full({1, 1, 10, 10}, 1.0)).item(), 0.0, 1e-12);
}

TEST(DiceLoss, HardZeroPrediction) {
  const auto logits = TD::full({1, 1, 4, 5}, -60.0);
  EXPECT_NEAR(dice_loss(logits, TD::full({1, 1, 4, 5}, 1.0)).item(), 1.0 - 1.0 / 21.0, 1e-12);
}

TEST(DiceLoss, MatchesScalarFormulaAndGradient) {
  auto x = TD::normal({1, 1, 4, 4}, 1, 2.0);
  const auto g = random_mask({1, 1, 4, 4}, 2);
  EXPECT_NEAR(dice_loss(x, g).item(), oracle::dice_loss(vec(x), vec(g)), 1e-6);
  x.set_requires_grad(true);
  EXPECT_LT(grad_check_params([&] { return dice_loss(x, g); }, {x}), 1e-5);
}

TEST(DiceLoss, RejectsNonBinaryTarget) {
  EXPECT_EQ(code_of([] { dice_loss(TD::zeros({1, 1, 2, 2}), TD::full({1, 1, 2, 2}, 0.5)); }), Errc::invalid_target);
}

TEST(BceLoss, ZeroLogitsGiveLn2) {
  EXPECT_NEAR(bce_loss(TD::zeros({2, 1, 3, 3}), random_mask({2, 1, 3, 3}, 1)).item(), std::log(2.0), 1e-12);
}

TEST(BceLoss, StableForLargeLogits) {
  const double l = bce_loss(TD::full({1, 1, 2, 2}, 50.0), TD::full({1, 1, 2, 2}, 1.0)).item();
  EXPECT_TRUE(std::isfinite(l));
  EXPECT_LT(l, 1e-20);
  EXPECT_TRUE(std::isfinite(bce_loss(TD::full({1, 1, 2, 2}, -1e4), TD::full({1, 1, 2, 2}, 1.0)).item()));
}

TEST(BceLoss, GradientIsSigmoidMinusTarget) {
  auto x = TD::normal({2, 1, 3, 3}, 1, 2.0);
  x.set_requires_grad(true);
  const auto g = random_mask({2, 1, 3, 3}, 2);
  EXPECT_NEAR(bce_loss(x, g).item(), oracle::bce_loss(vec(x), vec(g)), 1e-10);
  Tape<double> tape;
  const auto grads = tape.backward(bce_loss(x, g));
  for (int i = 0; i < 18; ++i) {
    const double s = 1.0 / (1.0 + std::exp(-x.values()[i]));
    EXPECT_NEAR(grads.of(x).values()[i], (s - g.values()[i]) / 18.0, 1e-6);
  }
}

TEST(CombinedLoss, SumOfParts) {
  const auto x = TD::normal({2, 1, 5, 5}, 1, 2.0);
  const auto g = random_mask({2, 1, 5, 5}, 2);
  EXPECT_NEAR(combined_loss(x, g).item(), dice_loss(x, g).item() + bce_loss(x, g).item(), 1e-7);
  EXPECT_NEAR(combined_loss(scale(sub(scale(g, 2.0), TD::scalar(1.0)), 40.0), g).item(), 0.0, 1e-6);
}

TEST(CombinedLoss, Ranges) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto x = TD::normal({1, 1, 6, 6}, s, 3.0);
    const auto g = random_mask({1, 1, 6, 6}, s + 100);
    const double d = dice_loss(x, g).item();
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
    EXPECT_GT(combined_loss(x, g).item(), 0.0);
  }
}

TEST(Metrics, HandCases) {
  const auto a = random_maskf({1, 8, 8}, 1, 0.5);
  const auto s = score_mask(a, a);
  EXPECT_EQ(s.dice, 1.0);
  EXPECT_EQ(s.iou, 1.0);
  TF p = TF::zeros({1, 2, 2}), g = TF::zeros({1, 2, 2});
  p.mutable_values()[0] = 1;
  g.mutable_values()[3] = 1;
  EXPECT_EQ(score_mask(p, g).dice, 0.0);
  EXPECT_EQ(score_mask(p, g).iou, 0.0);
  TF half({1, 1, 4}, {1, 1, 0, 0}), full({1, 1, 4}, {1, 1, 1, 1});
  EXPECT_DOUBLE_EQ(score_mask(half, full).dice, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(score_mask(half, full).iou, 0.5);
  EXPECT_EQ(score_mask(TF::zeros({1, 3, 3}), TF::zeros({1, 3, 3})).dice, 1.0);
  EXPECT_EQ(code_of([] { score_mask(TF::zeros({1, 3, 3}), TF::zeros({1, 3, 4})); }), Errc::shape_mismatch);
}

TEST(Metrics, DiceIouIdentityOnRandomMasks) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto p = random_maskf({1, 7, 9}, s, 0.3), g = random_maskf({1, 7, 9}, s + 1000, 0.5);
    const auto r = score_mask(p, g);
    EXPECT_GE(r.dice, r.iou);
    EXPECT_NEAR(r.dice, 2 * r.iou / (1 + r.iou), 1e-10);
    const auto [d, i] = oracle::dice_iou(ints(p), ints(g));
    EXPECT_EQ(r.dice, d);
    EXPECT_EQ(r.iou, i);
  }
}

TEST(Metrics, MeanOverImages) {
  std::vector<TF> preds, targets;
  double dsum = 0, isum = 0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    preds.push_back(random_maskf({1, 6, 6}, s, 0.4));
    targets.push_back(random_maskf({1, 6, 6}, s + 50, 0.4));
    const auto [d, i] = oracle::dice_iou(ints(preds.back()), ints(targets.back()));
    dsum += d;
    isum += i;
  }
  EXPECT_NEAR(mdice(preds, targets), dsum / 5, 1e-12);
  EXPECT_NEAR(miou(preds, targets), isum / 5, 1e-12);
}

TEST(Metrics, BinarizeAtHalf) {
  const auto b = binarize_logits(TF({4}, {-0.1f, 0.0f, 0.1f, -5.0f}));
  EXPECT_EQ(b.at({0}), 0);
  EXPECT_EQ(b.at({1}), 1);
  EXPECT_EQ(b.at({2}), 1);
  EXPECT_EQ(b.at({3}), 0);
}

TEST(AdamW, ZeroGradNoDecayIsIdentity) {
  std::vector<TD> params{TD::normal({3, 2}, 1, 1.0)};
  const auto before = vec(params[0]);
  std::vector<TD> grads{TD::zeros({3, 2})};
  OptimState<double> st;
  st.options.weight_decay = 0;
  for (int i = 0; i < 3; ++i) adamw_step(std::span<TD>(params), std::span<const TD>(grads), st);
  EXPECT_EQ(vec(params[0]), before);
  EXPECT_EQ(st.step, 3);
}

TEST(AdamW, DecoupledDecay) {
  std::vector<TD> params{TD({2}, {2.0, -3.0})};
  std::vector<TD> grads{TD::zeros({2})};
  OptimState<double> st;
  st.options.lr = 0.1;
  st.options.weight_decay = 0.01;
  adamw_step(std::span<TD>(params), std::span<const TD>(grads), st);
  EXPECT_DOUBLE_EQ(params[0].at({0}), 2.0 * 0.999);
  EXPECT_DOUBLE_EQ(params[0].at({1}), -3.0 * 0.999);
}

TEST(AdamW, MatchesScalarOracleOverSteps) {
  std::vector<TD> params{TD({1}, {1.0})};
  OptimState<double> st;
  double theta = 1.0, m = 0, v = 0;
  for (int step = 1; step <= 5; ++step) {
    const double g = step == 1 ? 1.0 : 0.3 * step - 1.0;
    std::vector<TD> grads{TD({1}, {g})};
    adamw_step(std::span<TD>(params), std::span<const TD>(grads), st);
    theta = oracle::adamw(theta, g, m, v, step, 1e-4, 0.9, 0.999, 1e-8, 0.01);
    EXPECT_NEAR(params[0].item(), theta, 1e-10) << "step " << step;
  }
}

TEST(AdamW, ShapeMismatch) {
  std::vector<TD> params{TD::zeros({2})};
  std::vector<TD> grads{TD::zeros({3})};
  OptimState<double> st;
  EXPECT_EQ(code_of([&] { adamw_step(std::span<TD>(params), std::span<const TD>(grads), st); }), Errc::shape_mismatch);
}

TEST(Schedule, StepDecay) {
  const Schedule s;
  EXPECT_DOUBLE_EQ(lr_at(0, s), 1e-4);
  EXPECT_NEAR(lr_at(39, s), 1e-4, 1e-20);
  EXPECT_NEAR(lr_at(40, s), 1e-5, 1e-20);
  EXPECT_NEAR(lr_at(199, s), 1e-8, 1e-22);
  EXPECT_EQ(code_of([&] { lr_at(200, s); }), Errc::invalid_epoch);
  EXPECT_EQ(code_of([&] { lr_at(-1, s); }), Errc::invalid_epoch);
}

TEST(TrainEpoch, ZeroLrLeavesParameters) {
  SSFormer<float> model(small_model(), 1);
  const auto data = synth_dataset(6, 32, 2);
  AdamWOptions o;
  o.lr = 0;
  AdamW opt(model, o);
  Rng rng(3);
  const auto before = param_hash(model);
  const auto stats = train_epoch(model, data, opt, rng, TrainOptions{4, true});
  EXPECT_EQ(param_hash(model), before);
  EXPECT_TRUE(std::isfinite(stats.mean_loss));
}

TEST(TrainEpoch, SameSeedSameTrajectory) {
  auto run = [] {
    SSFormer<float> model(small_model(), 1);
    const auto data = synth_dataset(8, 32, 2);
    AdamW opt(model, AdamWOptions{});
    Rng rng(3);
    std::vector<double> losses;
    for (int e = 0; e < 2; ++e) losses.push_back(train_epoch(model, data, opt, rng, TrainOptions{4, true}).mean_loss);
    return std::make_pair(losses, param_hash(model));
  };
  EXPECT_EQ(run(), run());
}

TEST(TrainEpoch, EmptyDatasetRejected) {
  SSFormer<float> model(small_model(), 1);
  AdamW opt(model, AdamWOptions{});
  Rng rng(1);
  EXPECT_THROW(train_epoch(model, std::span<const Sample>{}, opt, rng, TrainOptions{}), Error);
}

TEST(TrainEpoch, DivergenceNamesBatch) {
  SSFormer<float> model(small_model(), 1);
  model.decoder().pred.bias.mutable_values()[0] = std::nanf("");
  const auto data = synth_dataset(4, 32, 2);
  AdamW opt(model, AdamWOptions{});
  Rng rng(1);
  try {
    train_epoch(model, data, opt, rng, TrainOptions{2, false});
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::divergence_detected);
    EXPECT_NE(std::string(e.what()).find("batch 0"), std::string::npos);
  }
}

TEST(TrainStep, LossMostlyNonIncreasingOnFixedBatch) {
  SSFormer<float> model(ModelConfig{}, 1);
  const auto data = synth_dataset(4, 64, 7);
  std::vector<const Sample*> items;
  for (const auto& s : data) items.push_back(&s);
  const auto x = stack_images(items), y = stack_masks(items);
  AdamW opt(model, AdamWOptions{});
  std::vector<double> losses;
  for (int i = 0; i <= 50; ++i) losses.push_back(train_step(model, x, y, opt).loss);
  int down = 0;
  for (int i = 1; i <= 50; ++i) down += losses[i] <= losses[i - 1];
  EXPECT_GE(down, 45);
}

TEST(Evaluate, IdempotentAndParameterPreserving) {
  SSFormer<float> model(small_model(), 1);
  const auto data = synth_dataset(5, 32, 2);
  const auto before = param_hash(model);
  const auto a = evaluate(model, data), b = evaluate(model, data);
  EXPECT_EQ(param_hash(model), before);
  EXPECT_EQ(a.mdice, b.mdice);
  EXPECT_EQ(a.miou, b.miou);
  EXPECT_GE(a.mdice, a.miou);
  ASSERT_EQ(a.per_image.size(), 5u);
}

TEST(Evaluate, MatchesCountingOracle) {
  SSFormer<float> model(small_model(), 4);
  const auto data = synth_dataset(3, 32, 5);
  const auto r = evaluate(model, data, 2);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto pred = predict_masks(model, reshape(data[i].image, {1, 3, 32, 32}));
    const auto [d, iou] = oracle::dice_iou(ints(pred), ints(data[i].mask));
    EXPECT_EQ(r.per_image[i].dice, d);
    EXPECT_EQ(r.per_image[i].iou, iou);
  }
}

TEST(Evaluate, GroundTruthScoresOne) {
  const auto data = synth_dataset(3, 32, 5);
  std::vector<TF> masks;
  for (const auto& s : data) masks.push_back(s.mask);
  EXPECT_EQ(mdice(masks, masks), 1.0);
  EXPECT_EQ(miou(masks, masks), 1.0);
}

TEST(Fit, LogRowsAndFormat) {
  SSFormer<float> model(small_model(), 1);
  const auto train = synth_dataset(4, 32, 1), val = synth_dataset(2, 32, 2);
  FitOptions o;
  o.epochs = 2;
  const auto logs = fit(model, train, val, o);
  ASSERT_EQ(logs.size(), 2u);
  EXPECT_EQ(logs[1].epoch, 1);
  EXPECT_EQ(format_log_row(EpochLog{3, 1e-4, 0.5, 0.25, 0.125, 0.0625}), "3,0.0001,0.500000,0.250000,0.125000,0.062500");
}
