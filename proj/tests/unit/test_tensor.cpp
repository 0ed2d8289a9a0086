#include <gtest/gtest.h>

#include <cstring>

#include <cmath>
#include <numeric>

#include "ssf/grad_check.hpp"
#include "ssf/ops.hpp"
#include "ssf/tensor.hpp"

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

TD leaf(Shape s, std::uint64_t seed) {
  auto t = TD::normal(std::move(s), seed, 1.0);
  t.set_requires_grad(true);
  return t;
}

}  // namespace

TEST(TensorNew, ZeroFill) {
  const auto t = TF::zeros({2, 2});
  EXPECT_EQ(t.shape(), (Shape{2, 2}));
  for (float v : t.values()) EXPECT_EQ(v, 0.0f);
}

TEST(TensorNew, RejectsNonPositiveExtent) {
  EXPECT_EQ(code_of([] { TF::zeros({2, 0}); }), Errc::invalid_shape);
  EXPECT_EQ(code_of([] { TF::full({-1}, 1.0f); }), Errc::invalid_shape);
  EXPECT_EQ(code_of([] { TF::normal({3}, 1, 0.0); }), Errc::invalid_shape);
  EXPECT_EQ(code_of([] { TF({2, 2}, {1, 2, 3}); }), Errc::invalid_shape);
}

TEST(TensorNew, SeededNormalIsDeterministic) {
  const auto a = TF::normal({3}, 7, 1.0), b = TF::normal({3}, 7, 1.0);
  EXPECT_EQ(std::memcmp(a.data(), b.data(), 3 * sizeof(float)), 0);
  EXPECT_NE(a.at({0}), TF::normal({3}, 8, 1.0).at({0}));
}

TEST(TensorNew, SeededNormalStd) {
  const auto t = TD::normal({1000}, 1, 0.02);
  double mu = 0, var = 0;
  for (double v : t.values()) mu += v;
  mu /= 1000;
  for (double v : t.values()) var += (v - mu) * (v - mu);
  const double sd = std::sqrt(var / 999);
  EXPECT_NEAR(sd, 0.02, 0.004);
  // Regression value of this generator stream.
  EXPECT_NEAR(sd, 0.0202790, 5e-7);
}

TEST(TensorNew, NoTapeNodeWithoutGrad) {
  const auto a = TD::full({2}, 1.0), b = TD::full({2}, 2.0);
  Tape<double> tape;
  const auto c = add(a, b);
  EXPECT_FALSE(c.requires_grad());
  EXPECT_EQ(c.node_id(), -1);
  EXPECT_EQ(tape.size(), 0u);
}

TEST(Matmul, Identity) {
  const TD eye({2, 2}, {1, 0, 0, 1});
  const auto x = TD::normal({2, 3}, 3, 1.0);
  const auto y = matmul(eye, x);
  for (int i = 0; i < 6; ++i) EXPECT_DOUBLE_EQ(y.values()[i], x.values()[i]);
}

TEST(Matmul, HandSum) {
  const auto y = matmul(TD({2, 2}, {1, 2, 3, 4}), TD({2, 1}, {1, 1}));
  EXPECT_EQ(y.shape(), (Shape{2, 1}));
  EXPECT_DOUBLE_EQ(y.at({0, 0}), 3);
  EXPECT_DOUBLE_EQ(y.at({1, 0}), 7);
}

TEST(Matmul, MismatchThrows) {
  EXPECT_EQ(code_of([] { matmul(TD::zeros({2, 3}), TD::zeros({2, 3})); }), Errc::shape_mismatch);
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
  auto a = leaf({5, 4}, 1), b = leaf({4, 3}, 2);
  const auto r = TD::normal({5, 3}, 3, 1.0);
  EXPECT_LT(grad_check_params([&] { return sum(mul(matmul(a, b), r)); }, {a, b}), 1e-6);
}

TEST(Matmul, LinearInEachArgument) {
  const auto a1 = TD::normal({3, 4}, 1, 1.0), a2 = TD::normal({3, 4}, 2, 1.0), b = TD::normal({4, 2}, 3, 1.0);
  const auto lhs = matmul(add(scale(a1, 2.0), scale(a2, -3.0)), b);
  const auto rhs = add(scale(matmul(a1, b), 2.0), scale(matmul(a2, b), -3.0));
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(lhs.values()[i], rhs.values()[i], 1e-10);
  const auto c1 = TD::normal({4, 2}, 4, 1.0);
  const auto lhs2 = matmul(a1, add(b, c1));
  const auto rhs2 = add(matmul(a1, b), matmul(a1, c1));
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(lhs2.values()[i], rhs2.values()[i], 1e-10);
}

TEST(Ewise, NeutralElements) {
  const auto x = TD::normal({2, 3}, 1, 1.0);
  const auto a = ewise(EwiseOp::add, x, 0.0), m = ewise(EwiseOp::mul, x, 1.0);
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(a.values()[i], x.values()[i]);
    EXPECT_EQ(m.values()[i], x.values()[i]);
  }
}

TEST(Ewise, Commutes) {
  const auto a = TD::normal({2, 3, 2}, 1, 1.0), b = TD::normal({2, 3, 2}, 2, 1.0);
  const auto s1 = add(a, b), s2 = add(b, a), p1 = mul(a, b), p2 = mul(b, a);
  for (int i = 0; i < 12; ++i) {
    EXPECT_EQ(s1.values()[i], s2.values()[i]);
    EXPECT_EQ(p1.values()[i], p2.values()[i]);
  }
}

TEST(Ewise, ChannelBiasBroadcastGradient) {
  auto x = leaf({2, 3, 2, 2}, 1), bias = leaf({3}, 2);
  const auto r = TD::normal({2, 3, 2, 2}, 3, 1.0);
  const auto y = add(x, bias);
  EXPECT_DOUBLE_EQ(y.at({1, 2, 1, 0}), x.at({1, 2, 1, 0}) + bias.at({2}));
  EXPECT_LT(grad_check_params([&] { return sum(mul(add(x, bias), r)); }, {x, bias}), 1e-6);
}

TEST(Ewise, NonBroadcastableThrows) {
  EXPECT_EQ(code_of([] { add(TD::zeros({2, 3}), TD::zeros({3, 2})); }), Errc::shape_mismatch);
  EXPECT_EQ(code_of([] { add(TD::zeros({2, 3, 4}), TD::zeros({4})); }), Errc::shape_mismatch);
}

TEST(Reduce, HandValues) {
  EXPECT_DOUBLE_EQ(sum(TD::full({2, 3}, 1.0)).item(), 6);
  EXPECT_DOUBLE_EQ(mean(TD::full({2, 3}, 1.0)).item(), 1);
  const auto s = sum(TD({2, 2}, {1, 2, 3, 4}), {1});
  EXPECT_EQ(s.shape(), (Shape{2}));
  EXPECT_DOUBLE_EQ(s.at({0}), 3);
  EXPECT_DOUBLE_EQ(s.at({1}), 7);
}

TEST(Reduce, InvalidAxes) {
  EXPECT_EQ(code_of([] { sum(TD::zeros({2, 2}), {2}); }), Errc::invalid_axis);
  EXPECT_EQ(code_of([] { sum(TD::zeros({2, 2}), {1, 1}); }), Errc::invalid_axis);
  EXPECT_EQ(code_of([] { mean(TD::zeros({2, 2}), {-1}); }), Errc::invalid_axis);
}

TEST(Reduce, MeanGradientSpreads) {
  auto x = leaf({2, 5}, 1);
  Tape<double> tape;
  const auto g = tape.backward(mean(x));
  for (double v : g.of(x).values()) EXPECT_DOUBLE_EQ(v, 0.1);
}

TEST(ReshapePermute, RoundTrips) {
  const auto x = TD::normal({2, 3}, 1, 1.0);
  const auto back = reshape(reshape(x, {3, 2}), {2, 3});
  for (int i = 0; i < 6; ++i) EXPECT_EQ(back.values()[i], x.values()[i]);
  const auto y = TD::normal({2, 3, 4, 5}, 2, 1.0);
  const auto nhwc = permute(y, {0, 2, 3, 1});
  EXPECT_EQ(nhwc.shape(), (Shape{2, 4, 5, 3}));
  EXPECT_EQ(nhwc.at({1, 2, 3, 0}), y.at({1, 0, 2, 3}));
  const auto nchw = permute(nhwc, {0, 3, 1, 2});
  for (std::int64_t i = 0; i < y.numel(); ++i) EXPECT_EQ(nchw.values()[i], y.values()[i]);
}

TEST(ReshapePermute, Errors) {
  EXPECT_EQ(code_of([] { reshape(TD::zeros({2, 3}), {4, 2}); }), Errc::invalid_shape);
  EXPECT_EQ(code_of([] { permute(TD::zeros({2, 3}), {0, 0}); }), Errc::invalid_axis);
}

TEST(ReshapePermute, GradientChain) {
  auto x = leaf({2, 3, 4}, 1);
  const auto r = TD::normal({4, 6}, 2, 1.0);
  EXPECT_LT(grad_check_params([&] { return sum(mul(reshape(permute(x, {2, 0, 1}), {4, 6}), r)); }, {x}), 1e-6);
}

TEST(Concat, ShapesAndSliceBack) {
  const auto a = TD::normal({1, 2, 4, 4}, 1, 1.0);
  const auto c = concat_channels(a, TD::zeros({1, 3, 4, 4}));
  EXPECT_EQ(c.shape(), (Shape{1, 5, 4, 4}));
  const auto back = slice_channels(c, 0, 2);
  for (std::int64_t i = 0; i < a.numel(); ++i) EXPECT_EQ(back.values()[i], a.values()[i]);
  EXPECT_EQ(code_of([] { concat_channels(TD::zeros({1, 2, 4, 4}), TD::zeros({1, 2, 4, 3})); }), Errc::shape_mismatch);
}

TEST(Concat, Gradient) {
  auto a = leaf({2, 2, 3, 3}, 1), b = leaf({2, 3, 3, 3}, 2);
  const auto r = TD::normal({2, 5, 3, 3}, 3, 1.0);
  EXPECT_LT(grad_check_params([&] { return sum(mul(concat_channels(a, b), r)); }, {a, b}), 1e-6);
}

TEST(Backward, SumGivesOnes) {
  auto x = leaf({3, 2}, 1);
  Tape<double> tape;
  const auto g = tape.backward(sum(x));
  for (double v : g.of(x).values()) EXPECT_EQ(v, 1.0);
}

TEST(Backward, HalfSquareGivesX) {
  auto x = leaf({4}, 1);
  Tape<double> tape;
  const auto g = tape.backward(scale(sum(mul(x, x)), 0.5));
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(g.of(x).values()[i], x.values()[i]);
}

TEST(Backward, UnreachableLeafGetsZero) {
  auto x = leaf({3}, 1), unused = leaf({2}, 2);
  Tape<double> tape;
  const auto y = mul(x, x);
  const auto g = tape.backward(sum(x));
  EXPECT_FALSE(g.reached(unused));
  const auto gu = g.of(unused);
  for (double v : gu.values()) EXPECT_EQ(v, 0.0);
  (void)y;
}

TEST(Backward, NonScalarLossThrows) {
  auto x = leaf({3}, 1);
  Tape<double> tape;
  const auto y = mul(x, x);
  EXPECT_EQ(code_of([&] { tape.backward(y); }), Errc::invalid_reduction);
}

TEST(Backward, SecondCallIsTapeConsumed) {
  auto x = leaf({3}, 1);
  Tape<double> tape;
  const auto loss = sum(mul(x, x));
  tape.backward(loss);
  EXPECT_TRUE(tape.consumed());
  EXPECT_EQ(code_of([&] { tape.backward(loss); }), Errc::tape_consumed);
}

TEST(Backward, TopologicalOrder) {
  auto x = leaf({3}, 1);
  Tape<double> tape;
  const auto a = mul(x, x);
  const auto b = add(a, x);
  const auto c = sum(b);
  for (std::size_t n = 0; n < tape.size(); ++n) {
    for (auto in : tape.inputs_of(static_cast<std::int64_t>(n))) EXPECT_LT(in, static_cast<std::int64_t>(n));
  }
  EXPECT_EQ(tape.op_name(c.node_id()), "sum");
}

TEST(Backward, Deterministic) {
  auto run = [] {
    auto x = leaf({4, 4}, 9), w = leaf({4, 4}, 10);
    Tape<double> tape;
    const auto g = tape.backward(sum(mul(matmul(x, w), matmul(w, x))));
    return std::vector<double>(g.of(w).values().begin(), g.of(w).values().end());
  };
  EXPECT_EQ(run(), run());
}

TEST(GradCheck, SumIsExact) {
  const auto x = TD::normal({3, 3}, 1, 1.0);
  EXPECT_LT(grad_check([](const TD& v) { return sum(v); }, x), 1e-10);
}

TEST(GradCheck, RejectsBadEpsAndNonFinite) {
  const auto x = TD::normal({3}, 1, 1.0);
  EXPECT_EQ(code_of([&] { grad_check([](const TD& v) { return sum(v); }, x, 1e-2); }), Errc::numerical_failure);
  EXPECT_EQ(code_of([&] { grad_check([](const TD& v) { return scale(sum(v), std::nan("")); }, x); }), Errc::numerical_failure);
}
