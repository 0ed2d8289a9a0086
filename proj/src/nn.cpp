#include "ssf/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "linalg.hpp"

namespace ssf {

namespace {

// Fixed summation order: Eigen's vectorized reductions on unaligned maps
// change rounding with the buffer address.
template <class T>
T ordered_sum(const T* p, std::int64_t n, std::int64_t stride) {
  T acc = 0;
  for (std::int64_t i = 0; i < n; ++i) acc += p[i * stride];
  return acc;
}

struct ConvGeometry {
  std::int64_t batch, in_c, h, w, out_c, out_h, out_w;
  int k, stride, pad, groups;
  std::int64_t in_cg() const { return in_c / groups; }
  std::int64_t out_cg() const { return out_c / groups; }
  std::int64_t col_rows() const { return in_cg() * k * k; }
  std::int64_t out_hw() const { return out_h * out_w; }
  bool pointwise() const { return k == 1 && stride == 1 && pad == 0; }
  bool depthwise() const { return in_cg() == 1 && out_cg() == 1; }
};

template <class T>
void im2col(const T* x, const ConvGeometry& g, T* col) {
  const auto k = g.k;
  for (std::int64_t c = 0; c < g.in_cg(); ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = col + ((c * k + ky) * k + kx) * g.out_hw();
        for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ky;
          T* r = row + oy * g.out_w;
          if (iy < 0 || iy >= g.h) {
            std::fill_n(r, g.out_w, T(0));
            continue;
          }
          const T* xr = x + (c * g.h + iy) * g.w;
          for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad + kx;
            r[ox] = (ix >= 0 && ix < g.w) ? xr[ix] : T(0);
          }
        }
      }
    }
  }
}

template <class T>
void col2im(const T* col, const ConvGeometry& g, T* dx) {
  const auto k = g.k;
  for (std::int64_t c = 0; c < g.in_cg(); ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = col + ((c * k + ky) * k + kx) * g.out_hw();
        for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          const T* r = row + oy * g.out_w;
          T* dr = dx + (c * g.h + iy) * g.w;
          for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) dr[ix] += r[ox];
          }
        }
      }
    }
  }
}

template <class T>
void depthwise_forward(const T* x, const T* w, const T* b, const ConvGeometry& g, T* out) {
  const auto k = g.k;
  for (std::int64_t n = 0; n < g.batch; ++n) {
    for (std::int64_t c = 0; c < g.in_c; ++c) {
      const T* xi = x + (n * g.in_c + c) * g.h * g.w;
      const T* wk = w + c * k * k;
      T* o = out + (n * g.out_c + c) * g.out_hw();
      const T bias = b ? b[c] : T(0);
      for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
        for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
          T acc = bias;
          for (int ky = 0; ky < k; ++ky) {
            const std::int64_t iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.h) continue;
            for (int kx = 0; kx < k; ++kx) {
              const std::int64_t ix = ox * g.stride - g.pad + kx;
              if (ix >= 0 && ix < g.w) acc += wk[ky * k + kx] * xi[iy * g.w + ix];
            }
          }
          o[oy * g.out_w + ox] = acc;
        }
      }
    }
  }
}

template <class T>
void depthwise_backward(const T* x, const T* w, const T* gout, const ConvGeometry& g, T* dx, T* dw, T* db) {
  const auto k = g.k;
  for (std::int64_t n = 0; n < g.batch; ++n) {
    for (std::int64_t c = 0; c < g.in_c; ++c) {
      const T* xi = x + (n * g.in_c + c) * g.h * g.w;
      const T* wk = w + c * k * k;
      const T* go = gout + (n * g.out_c + c) * g.out_hw();
      T* dxi = dx ? dx + (n * g.in_c + c) * g.h * g.w : nullptr;
      T* dwk = dw ? dw + c * k * k : nullptr;
      for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
        for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
          const T gv = go[oy * g.out_w + ox];
          if (db) db[c] += gv;
          for (int ky = 0; ky < k; ++ky) {
            const std::int64_t iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.h) continue;
            for (int kx = 0; kx < k; ++kx) {
              const std::int64_t ix = ox * g.stride - g.pad + kx;
              if (ix < 0 || ix >= g.w) continue;
              if (dwk) dwk[ky * k + kx] += gv * xi[iy * g.w + ix];
              if (dxi) dxi[iy * g.w + ix] += gv * wk[ky * k + kx];
            }
          }
        }
      }
    }
  }
}

}  // namespace

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, int stride, int padding, int groups) {
  if (x.rank() != 4 || weight.rank() != 4) fail(Errc::shape_mismatch, "conv2d needs NCHW input and 4-d weight");
  if (stride < 1 || padding < 0 || groups < 1) fail(Errc::invalid_shape, "conv2d needs stride >= 1, padding >= 0, groups >= 1");
  if (weight.dim(2) != weight.dim(3)) fail(Errc::invalid_shape, "conv2d supports square kernels only");
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), weight.dim(0), 0, 0, static_cast<int>(weight.dim(2)), stride, padding, groups};
  if (g.in_c % groups != 0 || g.out_c % groups != 0 || weight.dim(1) * groups != g.in_c) {
    fail(Errc::shape_mismatch, "conv2d weight " + to_string(weight.shape()) + " does not fit input " + to_string(x.shape()) +
                                   " with groups=" + std::to_string(groups));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.out_c)) {
    fail(Errc::shape_mismatch, "conv2d bias " + to_string(bias.shape()) + " for " + std::to_string(g.out_c) + " outputs");
  }
  const std::int64_t span_h = g.h + 2 * padding - g.k;
  const std::int64_t span_w = g.w + 2 * padding - g.k;
  if (span_h < 0 || span_w < 0) fail(Errc::invalid_shape, "conv2d output extent < 1 for input " + to_string(x.shape()));
  g.out_h = span_h / stride + 1;
  g.out_w = span_w / stride + 1;

  std::vector<T> out(static_cast<std::size_t>(g.batch * g.out_c * g.out_hw()));
  const T* pb = bias.defined() ? bias.data() : nullptr;
  if (g.depthwise()) {
    depthwise_forward(x.data(), weight.data(), pb, g, out.data());
  } else {
    std::vector<T> col(g.pointwise() ? 0 : static_cast<std::size_t>(g.col_rows() * g.out_hw()));
    for (std::int64_t n = 0; n < g.batch; ++n) {
      for (int gr = 0; gr < groups; ++gr) {
        const T* xin = x.data() + (n * g.in_c + gr * g.in_cg()) * g.h * g.w;
        const T* cols = xin;
        if (!g.pointwise()) {
          im2col(xin, g, col.data());
          cols = col.data();
        }
        T* o = out.data() + (n * g.out_c + gr * g.out_cg()) * g.out_hw();
        auto ov = linalg::view(o, g.out_cg(), g.out_hw());
        ov.noalias() = linalg::view(weight.data() + gr * g.out_cg() * g.col_rows(), g.out_cg(), g.col_rows()) *
                       linalg::view(cols, g.col_rows(), g.out_hw());
        if (pb) {
          for (std::int64_t c = 0; c < g.out_cg(); ++c) ov.row(c).array() += pb[gr * g.out_cg() + c];
        }
      }
    }
  }

  Tensor<T> result(Shape{g.batch, g.out_c, g.out_h, g.out_w}, std::move(out));
  return record<T>("conv2d", std::move(result), {&x, &weight, &bias},
                   [x = x.detach(), w = weight.detach(), g](std::span<const T> gout, std::span<const std::span<T>> gin) {
                     T* dx = gin[0].empty() ? nullptr : gin[0].data();
                     T* dw = gin[1].empty() ? nullptr : gin[1].data();
                     T* db = gin[2].empty() ? nullptr : gin[2].data();
                     if (g.depthwise()) {
                       depthwise_backward(x.data(), w.data(), gout.data(), g, dx, dw, db);
                       return;
                     }
                     std::vector<T> col(g.pointwise() ? 0 : static_cast<std::size_t>(g.col_rows() * g.out_hw()));
                     std::vector<T> dcol(g.pointwise() || !dx ? 0 : col.size());
                     for (std::int64_t n = 0; n < g.batch; ++n) {
                       for (int gr = 0; gr < g.groups; ++gr) {
                         const std::int64_t x_off = (n * g.in_c + gr * g.in_cg()) * g.h * g.w;
                         const T* go = gout.data() + (n * g.out_c + gr * g.out_cg()) * g.out_hw();
                         auto gv = linalg::view(go, g.out_cg(), g.out_hw());
                         if (db) {
                           for (std::int64_t c = 0; c < g.out_cg(); ++c) db[gr * g.out_cg() + c] += ordered_sum(go + c * g.out_hw(), g.out_hw(), 1);
                         }
                         auto wv = linalg::view(w.data() + gr * g.out_cg() * g.col_rows(), g.out_cg(), g.col_rows());
                         if (dw) {
                           const T* cols = x.data() + x_off;
                           if (!g.pointwise()) {
                             im2col(x.data() + x_off, g, col.data());
                             cols = col.data();
                           }
                           linalg::view(dw + gr * g.out_cg() * g.col_rows(), g.out_cg(), g.col_rows()).noalias() +=
                               gv * linalg::view(cols, g.col_rows(), g.out_hw()).transpose();
                         }
                         if (dx) {
                           if (g.pointwise()) {
                             linalg::view(dx + x_off, g.col_rows(), g.out_hw()).noalias() += wv.transpose() * gv;
                           } else {
                             linalg::view(dcol.data(), g.col_rows(), g.out_hw()).noalias() = wv.transpose() * gv;
                             col2im(dcol.data(), g, dx + x_off);
                           }
                         }
                       }
                     }
                   });
}

template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (weight.rank() != 2) fail(Errc::shape_mismatch, "linear weight must be [C_out, C_in]");
  const std::int64_t cout = weight.dim(0), cin = weight.dim(1);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != cout)) fail(Errc::shape_mismatch, "linear bias does not match weight");
  const bool channels_first = x.rank() == 4;
  if (!(channels_first || x.rank() == 2 || x.rank() == 3)) fail(Errc::shape_mismatch, "linear input must have rank 2, 3 or 4");
  const int channel_axis = channels_first ? 1 : x.rank() - 1;
  if (x.dim(channel_axis) != cin) {
    fail(Errc::shape_mismatch, "linear expects " + std::to_string(cin) + " channels, input is " + to_string(x.shape()));
  }
  Shape shape = x.shape();
  shape[channel_axis] = cout;
  std::vector<T> out(static_cast<std::size_t>(numel(shape)));
  const T* pb = bias.defined() ? bias.data() : nullptr;
  const auto wv = linalg::view(weight.data(), cout, cin);

  std::int64_t batch, positions;
  if (channels_first) {
    batch = x.dim(0);
    positions = x.dim(2) * x.dim(3);
    for (std::int64_t n = 0; n < batch; ++n) {
      auto ov = linalg::view(out.data() + n * cout * positions, cout, positions);
      ov.noalias() = wv * linalg::view(x.data() + n * cin * positions, cin, positions);
      if (pb) {
        for (std::int64_t c = 0; c < cout; ++c) ov.row(c).array() += pb[c];
      }
    }
  } else {
    batch = 1;
    positions = x.numel() / cin;
    auto ov = linalg::view(out.data(), positions, cout);
    ov.noalias() = linalg::view(x.data(), positions, cin) * wv.transpose();
    if (pb) {
      for (std::int64_t r = 0; r < positions; ++r) {
        for (std::int64_t c = 0; c < cout; ++c) ov(r, c) += pb[c];
      }
    }
  }

  return record<T>("linear", Tensor<T>(std::move(shape), std::move(out)), {&x, &weight, &bias},
                   [x = x.detach(), w = weight.detach(), channels_first, batch, positions, cin, cout](
                       std::span<const T> g, std::span<const std::span<T>> gin) {
                     const auto wv = linalg::view(w.data(), cout, cin);
                     if (channels_first) {
                       for (std::int64_t n = 0; n < batch; ++n) {
                         auto gv = linalg::view(g.data() + n * cout * positions, cout, positions);
                         if (!gin[0].empty()) linalg::view(gin[0].data() + n * cin * positions, cin, positions).noalias() += wv.transpose() * gv;
                         if (!gin[1].empty()) {
                           linalg::view(gin[1].data(), cout, cin).noalias() +=
                               gv * linalg::view(x.data() + n * cin * positions, cin, positions).transpose();
                         }
                         if (!gin[2].empty()) {
                           for (std::int64_t c = 0; c < cout; ++c) gin[2][c] += ordered_sum(g.data() + (n * cout + c) * positions, positions, 1);
                         }
                       }
                     } else {
                       auto gv = linalg::view(g.data(), positions, cout);
                       if (!gin[0].empty()) linalg::view(gin[0].data(), positions, cin).noalias() += gv * wv;
                       if (!gin[1].empty()) {
                         linalg::view(gin[1].data(), cout, cin).noalias() += gv.transpose() * linalg::view(x.data(), positions, cin);
                       }
                       if (!gin[2].empty()) {
                         for (std::int64_t c = 0; c < cout; ++c) gin[2][c] += ordered_sum(g.data() + c, positions, cout);
                       }
                     }
                   });
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> out(x.values().begin(), x.values().end());
  for (auto& v : out) v = v > T(0) ? v : T(0);
  return record<T>("relu", Tensor<T>(x.shape(), std::move(out)), {&x},
                   [x = x.detach()](std::span<const T> g, std::span<const std::span<T>> gin) {
                     const T* px = x.data();
                     for (std::size_t i = 0; i < g.size(); ++i) {
                       if (px[i] > T(0)) gin[0][i] += g[i];
                     }
                   });
}

template <class T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T c = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  constexpr T a = static_cast<T>(0.044715);
  std::vector<T> out(static_cast<std::size_t>(x.numel()));
  const T* px = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = px[i];
    out[i] = T(0.5) * v * (T(1) + std::tanh(c * (v + a * v * v * v)));
  }
  return record<T>("gelu", Tensor<T>(x.shape(), std::move(out)), {&x},
                   [x = x.detach()](std::span<const T> g, std::span<const std::span<T>> gin) {
                     const T* px = x.data();
                     for (std::size_t i = 0; i < g.size(); ++i) {
                       const T v = px[i];
                       const T t = std::tanh(c * (v + a * v * v * v));
                       const T d = T(0.5) * (T(1) + t) + T(0.5) * v * (T(1) - t * t) * c * (T(1) + T(3) * a * v * v);
                       gin[0][i] += g[i] * d;
                     }
                   });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  std::vector<T> out(static_cast<std::size_t>(x.numel()));
  const T* px = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = px[i];
    if (v >= T(0)) {
      out[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      out[i] = e / (T(1) + e);
    }
  }
  Tensor<T> y(x.shape(), std::move(out));
  return record<T>("sigmoid", y, {&x}, [y = y.detach()](std::span<const T> g, std::span<const std::span<T>> gin) {
    const T* py = y.data();
    for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * py[i] * (T(1) - py[i]);
  });
}

template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, double eps) {
  if (x.rank() < 1) fail(Errc::shape_mismatch, "layer_norm needs rank >= 1");
  const std::int64_t c = x.dim(x.rank() - 1);
  if (gamma.rank() != 1 || gamma.dim(0) != c || beta.rank() != 1 || beta.dim(0) != c) {
    fail(Errc::shape_mismatch, "layer_norm affine parameters do not match " + to_string(x.shape()));
  }
  const std::int64_t rows = x.numel() / c;
  std::vector<T> xhat(static_cast<std::size_t>(x.numel()));
  std::vector<T> rstd(static_cast<std::size_t>(rows));
  std::vector<T> out(xhat.size());
  const T* px = x.data();
  const T* pg = gamma.data();
  const T* pbeta = beta.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* row = px + r * c;
    T mu = 0;
    for (std::int64_t j = 0; j < c; ++j) mu += row[j];
    mu /= static_cast<T>(c);
    T var = 0;
    for (std::int64_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(c);
    const T rs = T(1) / std::sqrt(var + static_cast<T>(eps));
    rstd[r] = rs;
    for (std::int64_t j = 0; j < c; ++j) {
      const T h = (row[j] - mu) * rs;
      xhat[r * c + j] = h;
      out[r * c + j] = h * pg[j] + pbeta[j];
    }
  }
  return record<T>("layer_norm", Tensor<T>(x.shape(), std::move(out)), {&x, &gamma, &beta},
                   [xhat = std::move(xhat), rstd = std::move(rstd), gamma = gamma.detach(), rows, c](
                       std::span<const T> g, std::span<const std::span<T>> gin) {
                     const T* pg = gamma.data();
                     for (std::int64_t r = 0; r < rows; ++r) {
                       const T* gr = g.data() + r * c;
                       const T* hr = xhat.data() + r * c;
                       if (!gin[1].empty() || !gin[2].empty()) {
                         for (std::int64_t j = 0; j < c; ++j) {
                           if (!gin[1].empty()) gin[1][j] += gr[j] * hr[j];
                           if (!gin[2].empty()) gin[2][j] += gr[j];
                         }
                       }
                       if (gin[0].empty()) continue;
                       T mean_d = 0, mean_dh = 0;
                       for (std::int64_t j = 0; j < c; ++j) {
                         const T d = gr[j] * pg[j];
                         mean_d += d;
                         mean_dh += d * hr[j];
                       }
                       mean_d /= static_cast<T>(c);
                       mean_dh /= static_cast<T>(c);
                       for (std::int64_t j = 0; j < c; ++j) {
                         gin[0][r * c + j] += rstd[r] * (gr[j] * pg[j] - mean_d - hr[j] * mean_dh);
                       }
                     }
                   });
}

template <class T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  if (x.rank() < 1) fail(Errc::shape_mismatch, "softmax needs rank >= 1");
  const std::int64_t n = x.dim(x.rank() - 1);
  const std::int64_t rows = x.numel() / n;
  std::vector<T> out(static_cast<std::size_t>(x.numel()));
  const T* px = x.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* row = px + r * n;
    T* o = out.data() + r * n;
    const T mx = *std::max_element(row, row + n);
    T total = 0;
    for (std::int64_t j = 0; j < n; ++j) {
      o[j] = std::exp(row[j] - mx);
      total += o[j];
    }
    for (std::int64_t j = 0; j < n; ++j) o[j] /= total;
  }
  Tensor<T> y(x.shape(), std::move(out));
  return record<T>("softmax", y, {&x}, [y = y.detach(), rows, n](std::span<const T> g, std::span<const std::span<T>> gin) {
    const T* py = y.data();
    for (std::int64_t r = 0; r < rows; ++r) {
      T dot = 0;
      for (std::int64_t j = 0; j < n; ++j) dot += g[r * n + j] * py[r * n + j];
      for (std::int64_t j = 0; j < n; ++j) gin[0][r * n + j] += py[r * n + j] * (g[r * n + j] - dot);
    }
  });
}

namespace {

struct Tap {
  std::int64_t i0, i1;
  double frac;
};

std::vector<Tap> bilinear_taps(std::int64_t in, std::int64_t out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::int64_t d = 0; d < out; ++d) {
    const double src = std::max((static_cast<double>(d) + 0.5) * ratio - 0.5, 0.0);
    auto i0 = static_cast<std::int64_t>(src);
    i0 = std::min(i0, in - 1);
    const std::int64_t i1 = std::min(i0 + 1, in - 1);
    taps[d] = Tap{i0, i1, src - static_cast<double>(i0)};
  }
  return taps;
}

}  // namespace

template <class T>
Tensor<T> bilinear_upsample(const Tensor<T>& x, std::int64_t out_h, std::int64_t out_w) {
  if (x.rank() != 4) fail(Errc::shape_mismatch, "bilinear_upsample needs NCHW input");
  if (out_h < 1 || out_w < 1) fail(Errc::invalid_shape, "bilinear_upsample output size must be >= 1");
  const std::int64_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  auto ty = bilinear_taps(h, out_h);
  auto tx = bilinear_taps(w, out_w);
  std::vector<T> out(static_cast<std::size_t>(planes * out_h * out_w));
  const T* px = x.data();
  for (std::int64_t p = 0; p < planes; ++p) {
    const T* src = px + p * h * w;
    T* dst = out.data() + p * out_h * out_w;
    for (std::int64_t oy = 0; oy < out_h; ++oy) {
      const auto& a = ty[oy];
      const T ly = static_cast<T>(a.frac);
      const T* r0 = src + a.i0 * w;
      const T* r1 = src + a.i1 * w;
      for (std::int64_t ox = 0; ox < out_w; ++ox) {
        const auto& b = tx[ox];
        const T lx = static_cast<T>(b.frac);
        const T top = (T(1) - lx) * r0[b.i0] + lx * r0[b.i1];
        const T bot = (T(1) - lx) * r1[b.i0] + lx * r1[b.i1];
        dst[oy * out_w + ox] = (T(1) - ly) * top + ly * bot;
      }
    }
  }
  Shape shape{x.dim(0), x.dim(1), out_h, out_w};
  return record<T>("bilinear_upsample", Tensor<T>(std::move(shape), std::move(out)), {&x},
                   [ty = std::move(ty), tx = std::move(tx), planes, h, w, out_h, out_w](std::span<const T> g,
                                                                                           std::span<const std::span<T>> gin) {
                     for (std::int64_t p = 0; p < planes; ++p) {
                       const T* gp = g.data() + p * out_h * out_w;
                       T* dx = gin[0].data() + p * h * w;
                       for (std::int64_t oy = 0; oy < out_h; ++oy) {
                         const auto& a = ty[oy];
                         const T ly = static_cast<T>(a.frac);
                         T* r0 = dx + a.i0 * w;
                         T* r1 = dx + a.i1 * w;
                         for (std::int64_t ox = 0; ox < out_w; ++ox) {
                           const auto& b = tx[ox];
                           const T lx = static_cast<T>(b.frac);
                           const T gv = gp[oy * out_w + ox];
                           r0[b.i0] += (T(1) - ly) * (T(1) - lx) * gv;
                           r0[b.i1] += (T(1) - ly) * lx * gv;
                           r1[b.i0] += ly * (T(1) - lx) * gv;
                           r1[b.i1] += ly * lx * gv;
                         }
                       }
                     }
                   });
}

#define SSF_INSTANTIATE_NN(T)                                                                            \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int, int);        \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> relu(const Tensor<T>&);                                                             \
  template Tensor<T> gelu(const Tensor<T>&);                                                             \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                          \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double);           \
  template Tensor<T> softmax_rows(const Tensor<T>&);                                                     \
  template Tensor<T> bilinear_upsample(const Tensor<T>&, std::int64_t, std::int64_t);

SSF_INSTANTIATE_NN(float)
SSF_INSTANTIATE_NN(double)

}  // namespace ssf
