#include "ssf/ops.hpp"

#include <algorithm>
#include <string>

#include "linalg.hpp"

namespace ssf {

namespace {

std::vector<std::int64_t> row_major_strides(const Shape& shape) {
  std::vector<std::int64_t> strides(shape.size(), 1);
  for (int a = static_cast<int>(shape.size()) - 2; a >= 0; --a) strides[a] = strides[a + 1] * shape[a + 1];
  return strides;
}

// Visits every element of `shape` in row-major order together with its
// offset under `strides`.
template <class F>
void walk(const Shape& shape, const std::vector<std::int64_t>& strides, F&& f) {
  const int r = static_cast<int>(shape.size());
  const std::int64_t n = numel(shape);
  std::vector<std::int64_t> idx(static_cast<std::size_t>(r), 0);
  std::int64_t off = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    f(i, off);
    for (int a = r - 1; a >= 0; --a) {
      if (++idx[a] < shape[a]) {
        off += strides[a];
        break;
      }
      off -= strides[a] * (shape[a] - 1);
      idx[a] = 0;
    }
  }
}

enum class Broadcast { same, scalar, channel };

template <class T>
Broadcast broadcast_kind(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() == b.shape()) return Broadcast::same;
  if (b.rank() == 0) return Broadcast::scalar;
  if (b.rank() == 1 && a.rank() >= 2 && b.dim(0) == a.dim(1)) return Broadcast::channel;
  fail(Errc::shape_mismatch, "cannot broadcast " + to_string(b.shape()) + " onto " + to_string(a.shape()));
}

}  // namespace

template <class T>
Tensor<T> ewise(EwiseOp op, const Tensor<T>& a, const Tensor<T>& b) {
  const auto kind = broadcast_kind(a, b);
  const auto n = a.numel();
  const std::int64_t channels = kind == Broadcast::channel ? a.dim(1) : 1;
  std::int64_t inner = 1;
  for (int ax = 2; ax < a.rank(); ++ax) inner *= a.dim(ax);
  auto b_index = [=](std::int64_t i) -> std::int64_t {
    switch (kind) {
      case Broadcast::same: return i;
      case Broadcast::scalar: return 0;
      case Broadcast::channel: return (i / inner) % channels;
    }
    return 0;
  };

  const T* pa = a.data();
  const T* pb = b.data();
  std::vector<T> out(static_cast<std::size_t>(n));
  if (kind == Broadcast::same) {
    for (std::int64_t i = 0; i < n; ++i) {
      out[i] = op == EwiseOp::add ? pa[i] + pb[i] : op == EwiseOp::sub ? pa[i] - pb[i] : pa[i] * pb[i];
    }
  } else {
    for (std::int64_t i = 0; i < n; ++i) {
      const T bv = pb[b_index(i)];
      out[i] = op == EwiseOp::add ? pa[i] + bv : op == EwiseOp::sub ? pa[i] - bv : pa[i] * bv;
    }
  }

  const char* name = op == EwiseOp::add ? "add" : op == EwiseOp::sub ? "sub" : "mul";
  return record<T>(name, Tensor<T>(a.shape(), std::move(out)), {&a, &b},
                   [a = a.detach(), b = b.detach(), op, n, b_index](std::span<const T> g, std::span<const std::span<T>> gin) {
                     const T* pa = a.data();
                     const T* pb = b.data();
                     if (!gin[0].empty()) {
                       for (std::int64_t i = 0; i < n; ++i) {
                         gin[0][i] += op == EwiseOp::mul ? g[i] * pb[b_index(i)] : g[i];
                       }
                     }
                     if (!gin[1].empty()) {
                       for (std::int64_t i = 0; i < n; ++i) {
                         const T d = op == EwiseOp::add ? g[i] : op == EwiseOp::sub ? -g[i] : g[i] * pa[i];
                         gin[1][b_index(i)] += d;
                       }
                     }
                   });
}

template <class T>
Tensor<T> ewise(EwiseOp op, const Tensor<T>& a, T b) {
  const auto n = a.numel();
  const T* pa = a.data();
  std::vector<T> out(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    out[i] = op == EwiseOp::add ? pa[i] + b : op == EwiseOp::sub ? pa[i] - b : pa[i] * b;
  }
  return record<T>("ewise_scalar", Tensor<T>(a.shape(), std::move(out)), {&a},
                   [op, b](std::span<const T> g, std::span<const std::span<T>> gin) {
                     const T f = op == EwiseOp::mul ? b : T(1);
                     for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += f * g[i];
                   });
}

template <class T>
Tensor<T> reduce(ReduceOp op, const Tensor<T>& x, std::vector<int> axes) {
  const int r = x.rank();
  if (axes.empty()) {
    for (int a = 0; a < r; ++a) axes.push_back(a);
  }
  std::vector<bool> reduced(static_cast<std::size_t>(r), false);
  for (int a : axes) {
    if (a < 0 || a >= r) fail(Errc::invalid_axis, "axis " + std::to_string(a) + " out of range for rank " + std::to_string(r));
    if (reduced[a]) fail(Errc::invalid_axis, "duplicate axis " + std::to_string(a));
    reduced[a] = true;
  }
  Shape out_shape;
  std::int64_t count = 1;
  for (int a = 0; a < r; ++a) {
    if (reduced[a]) {
      count *= x.dim(a);
    } else {
      out_shape.push_back(x.dim(a));
    }
  }
  // Offsets into the output for each input axis; reduced axes contribute 0.
  std::vector<std::int64_t> map_strides(static_cast<std::size_t>(r), 0);
  {
    std::int64_t s = 1;
    for (int a = r - 1; a >= 0; --a) {
      if (!reduced[a]) {
        map_strides[a] = s;
        s *= x.dim(a);
      }
    }
  }
  std::vector<T> out(static_cast<std::size_t>(numel(out_shape)), T(0));
  const T* px = x.data();
  walk(x.shape(), map_strides, [&](std::int64_t i, std::int64_t o) { out[o] += px[i]; });
  const T factor = op == ReduceOp::mean ? T(1) / static_cast<T>(count) : T(1);
  if (op == ReduceOp::mean) {
    for (auto& v : out) v *= factor;
  }
  return record<T>(op == ReduceOp::sum ? "sum" : "mean", Tensor<T>(std::move(out_shape), std::move(out)), {&x},
                   [shape = x.shape(), map_strides, factor](std::span<const T> g, std::span<const std::span<T>> gin) {
                     auto gx = gin[0];
                     walk(shape, map_strides, [&](std::int64_t i, std::int64_t o) { gx[i] += factor * g[o]; });
                   });
}

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  for (auto d : shape) {
    if (d < 1) fail(Errc::invalid_shape, "non-positive extent in " + to_string(shape));
  }
  if (numel(shape) != x.numel()) {
    fail(Errc::invalid_shape, "reshape " + to_string(x.shape()) + " -> " + to_string(shape) + " changes element count");
  }
  return record<T>("reshape", with_shape(x, std::move(shape)), {&x}, [](std::span<const T> g, std::span<const std::span<T>> gin) {
    for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
  });
}

template <class T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<int>& perm) {
  const int r = x.rank();
  if (static_cast<int>(perm.size()) != r) fail(Errc::invalid_axis, "permutation length does not match rank");
  std::vector<bool> seen(static_cast<std::size_t>(r), false);
  for (int p : perm) {
    if (p < 0 || p >= r || seen[p]) fail(Errc::invalid_axis, "not a permutation of the axes");
    seen[p] = true;
  }
  const auto in_strides = row_major_strides(x.shape());
  Shape out_shape(static_cast<std::size_t>(r));
  std::vector<std::int64_t> gather_strides(static_cast<std::size_t>(r));
  for (int a = 0; a < r; ++a) {
    out_shape[a] = x.dim(perm[a]);
    gather_strides[a] = in_strides[perm[a]];
  }
  std::vector<T> out(static_cast<std::size_t>(x.numel()));
  const T* px = x.data();
  walk(out_shape, gather_strides, [&](std::int64_t o, std::int64_t i) { out[o] = px[i]; });
  return record<T>("permute", Tensor<T>(out_shape, std::move(out)), {&x},
                   [out_shape, gather_strides](std::span<const T> g, std::span<const std::span<T>> gin) {
                     auto gx = gin[0];
                     walk(out_shape, gather_strides, [&](std::int64_t o, std::int64_t i) { gx[i] += g[o]; });
                   });
}

template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() < 2 || a.rank() != b.rank()) fail(Errc::shape_mismatch, "concat needs equal ranks >= 2");
  for (int ax = 0; ax < a.rank(); ++ax) {
    if (ax != 1 && a.dim(ax) != b.dim(ax)) {
      fail(Errc::shape_mismatch, "concat of " + to_string(a.shape()) + " and " + to_string(b.shape()));
    }
  }
  const std::int64_t outer = a.dim(0);
  const std::int64_t block_a = a.numel() / outer;
  const std::int64_t block_b = b.numel() / outer;
  Shape shape = a.shape();
  shape[1] += b.dim(1);
  std::vector<T> out(static_cast<std::size_t>(a.numel() + b.numel()));
  for (std::int64_t n = 0; n < outer; ++n) {
    std::copy_n(a.data() + n * block_a, block_a, out.begin() + n * (block_a + block_b));
    std::copy_n(b.data() + n * block_b, block_b, out.begin() + n * (block_a + block_b) + block_a);
  }
  return record<T>("concat", Tensor<T>(std::move(shape), std::move(out)), {&a, &b},
                   [outer, block_a, block_b](std::span<const T> g, std::span<const std::span<T>> gin) {
                     for (std::int64_t n = 0; n < outer; ++n) {
                       const T* src = g.data() + n * (block_a + block_b);
                       if (!gin[0].empty()) {
                         for (std::int64_t i = 0; i < block_a; ++i) gin[0][n * block_a + i] += src[i];
                       }
                       if (!gin[1].empty()) {
                         for (std::int64_t i = 0; i < block_b; ++i) gin[1][n * block_b + i] += src[block_a + i];
                       }
                     }
                   });
}

template <class T>
Tensor<T> slice_channels(const Tensor<T>& x, std::int64_t begin, std::int64_t end) {
  if (x.rank() < 2) fail(Errc::invalid_shape, "slice_channels needs rank >= 2");
  if (begin < 0 || end > x.dim(1) || begin >= end) fail(Errc::invalid_shape, "channel range out of bounds");
  const std::int64_t outer = x.dim(0);
  const std::int64_t inner = x.numel() / (outer * x.dim(1));
  const std::int64_t block_in = x.dim(1) * inner;
  const std::int64_t block_out = (end - begin) * inner;
  Shape shape = x.shape();
  shape[1] = end - begin;
  std::vector<T> out(static_cast<std::size_t>(outer * block_out));
  for (std::int64_t n = 0; n < outer; ++n) {
    std::copy_n(x.data() + n * block_in + begin * inner, block_out, out.begin() + n * block_out);
  }
  return record<T>("slice", Tensor<T>(std::move(shape), std::move(out)), {&x},
                   [=](std::span<const T> g, std::span<const std::span<T>> gin) {
                     for (std::int64_t n = 0; n < outer; ++n) {
                       for (std::int64_t i = 0; i < block_out; ++i) gin[0][n * block_in + begin * inner + i] += g[n * block_out + i];
                     }
                   });
}

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  const bool batched = a.rank() == 3;
  if (!((a.rank() == 2 && b.rank() == 2) || (a.rank() == 3 && b.rank() == 3))) {
    fail(Errc::shape_mismatch, "matmul needs two rank-2 or two rank-3 operands");
  }
  const std::int64_t batch = batched ? a.dim(0) : 1;
  const int off = batched ? 1 : 0;
  const std::int64_t m = a.dim(off), k = a.dim(off + 1), n = b.dim(off + 1);
  if (b.dim(off) != k || (batched && b.dim(0) != batch)) {
    fail(Errc::shape_mismatch, "matmul " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  std::vector<T> out(static_cast<std::size_t>(batch * m * n));
  for (std::int64_t i = 0; i < batch; ++i) {
    linalg::view(out.data() + i * m * n, m, n).noalias() =
        linalg::view(a.data() + i * m * k, m, k) * linalg::view(b.data() + i * k * n, k, n);
  }
  Shape shape = batched ? Shape{batch, m, n} : Shape{m, n};
  return record<T>("matmul", Tensor<T>(std::move(shape), std::move(out)), {&a, &b},
                   [a = a.detach(), b = b.detach(), batch, m, k, n](std::span<const T> g, std::span<const std::span<T>> gin) {
                     for (std::int64_t i = 0; i < batch; ++i) {
                       auto gv = linalg::view(g.data() + i * m * n, m, n);
                       if (!gin[0].empty()) {
                         linalg::view(gin[0].data() + i * m * k, m, k).noalias() +=
                             gv * linalg::view(b.data() + i * k * n, k, n).transpose();
                       }
                       if (!gin[1].empty()) {
                         linalg::view(gin[1].data() + i * k * n, k, n).noalias() +=
                             linalg::view(a.data() + i * m * k, m, k).transpose() * gv;
                       }
                     }
                   });
}

#define SSF_INSTANTIATE_OPS(T)                                                        \
  template Tensor<T> ewise(EwiseOp, const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> ewise(EwiseOp, const Tensor<T>&, T);                             \
  template Tensor<T> reduce(ReduceOp, const Tensor<T>&, std::vector<int>);            \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<int>&);              \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);             \
  template Tensor<T> slice_channels(const Tensor<T>&, std::int64_t, std::int64_t);    \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);

SSF_INSTANTIATE_OPS(float)
SSF_INSTANTIATE_OPS(double)

}  // namespace ssf
