#include "ssf/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "ssf/ops.hpp"

namespace ssf {

EncoderConfig EncoderConfig::tiny() { return EncoderConfig{}; }

EncoderConfig EncoderConfig::small() {
  EncoderConfig c;
  c.dims = {32, 64, 160, 256};
  c.depths = {2, 2, 2, 2};
  c.heads = {1, 2, 5, 8};
  return c;
}

int EncoderConfig::cumulative_stride(int stage) const {
  int s = 1;
  for (int i = 0; i <= stage; ++i) s *= patch_strides[i];
  return s;
}

void EncoderConfig::validate() const {
  for (int s = 0; s < kStages; ++s) {
    if (dims[s] < 1 || heads[s] < 1 || depths[s] < 0 || sr_ratios[s] < 1 || patch_strides[s] < 1 || patch_kernels[s] < 1) {
      fail(Errc::invalid_shape, "encoder stage " + std::to_string(s + 1) + " has a non-positive setting");
    }
    if (dims[s] % heads[s] != 0) {
      fail(Errc::invalid_shape, "stage " + std::to_string(s + 1) + " dim " + std::to_string(dims[s]) + " not divisible by " +
                                    std::to_string(heads[s]) + " heads");
    }
  }
  if (ffn_expand < 1 || in_channels < 1) fail(Errc::invalid_shape, "ffn_expand and in_channels must be positive");
}

template <class T>
EncoderParams<T> init_encoder(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  ParamFactory<T> make(seed);
  EncoderParams<T> params;
  params.config = config;
  std::int64_t in_c = config.in_channels;
  for (int s = 0; s < kStages; ++s) {
    const std::int64_t c = config.dims[s];
    const std::string sp = "encoder.stage" + std::to_string(s + 1);
    auto& stage = params.stages[s];
    const int k = config.patch_kernels[s];
    stage.patch = make.conv(sp + ".patch", in_c, c, k, config.patch_strides[s], k / 2, 1, Init::xavier);
    stage.patch_norm = make.norm(c);
    for (int b = 0; b < config.depths[s]; ++b) {
      const std::string bp = sp + ".block" + std::to_string(b);
      BlockParams<T> block;
      block.norm1 = make.norm(c);
      block.attn.heads = config.heads[s];
      block.attn.sr_ratio = config.sr_ratios[s];
      block.attn.q = make.linear(bp + ".attn.q", c, c, Init::xavier);
      block.attn.k = make.linear(bp + ".attn.k", c, c, Init::xavier);
      block.attn.v = make.linear(bp + ".attn.v", c, c, Init::xavier);
      block.attn.proj = make.linear(bp + ".attn.proj", c, c, Init::xavier);
      if (config.sr_ratios[s] > 1) {
        const int r = config.sr_ratios[s];
        block.attn.sr = make.conv(bp + ".attn.sr", c, c, r, r, 0, 1, Init::xavier);
        block.attn.sr_norm = make.norm(c);
      }
      block.norm2 = make.norm(c);
      const std::int64_t hidden = c * config.ffn_expand;
      block.ffn.fc1 = make.linear(bp + ".ffn.fc1", c, hidden, Init::xavier);
      block.ffn.dw = make.conv(bp + ".ffn.dw", hidden, hidden, 3, 1, 1, static_cast<int>(hidden), Init::xavier);
      block.ffn.fc2 = make.linear(bp + ".ffn.fc2", hidden, c, Init::xavier);
      stage.blocks.push_back(std::move(block));
    }
    in_c = c;
  }
  return params;
}

template <class T>
Tensor<T> tokens_to_map(const Tensor<T>& tokens, std::int64_t h, std::int64_t w) {
  if (tokens.rank() != 3 || tokens.dim(1) != h * w) {
    fail(Errc::shape_mismatch, "tokens " + to_string(tokens.shape()) + " do not cover a " + std::to_string(h) + "x" +
                                   std::to_string(w) + " grid");
  }
  return reshape(permute(tokens, {0, 2, 1}), {tokens.dim(0), tokens.dim(2), h, w});
}

template <class T>
Tensor<T> map_to_tokens(const Tensor<T>& map) {
  if (map.rank() != 4) fail(Errc::shape_mismatch, "expected an NCHW map");
  return permute(reshape(map, {map.dim(0), map.dim(1), map.dim(2) * map.dim(3)}), {0, 2, 1});
}

template <class T>
TokenGrid<T> overlap_patch_embed(const Tensor<T>& x, const StageParams<T>& stage) {
  if (x.rank() != 4) fail(Errc::shape_mismatch, "patch embedding expects NCHW input");
  const int stride = stage.patch.stride;
  if (x.dim(2) % stride != 0 || x.dim(3) % stride != 0) {
    fail(Errc::invalid_shape, "input " + to_string(x.shape()) + " not divisible by patch stride " + std::to_string(stride));
  }
  const auto map = conv2d(x, stage.patch);
  return {layer_norm(map_to_tokens(map), stage.patch_norm), map.dim(2), map.dim(3)};
}

template <class T>
Tensor<T> sr_attention(const Tensor<T>& tokens, std::int64_t h, std::int64_t w, const AttentionParams<T>& p, AttentionMap* record) {
  if (tokens.rank() != 3 || tokens.dim(1) != h * w) fail(Errc::invalid_shape, "token count does not match the grid");
  const std::int64_t n = tokens.dim(0), t = tokens.dim(1), c = tokens.dim(2);
  const std::int64_t heads = p.heads;
  if (c % heads != 0) fail(Errc::invalid_shape, "channels not divisible by heads");
  if (h % p.sr_ratio != 0 || w % p.sr_ratio != 0) {
    fail(Errc::invalid_shape, "sr ratio " + std::to_string(p.sr_ratio) + " does not divide the " + std::to_string(h) + "x" +
                                  std::to_string(w) + " grid");
  }
  const std::int64_t d = c / heads;

  auto q = reshape(permute(reshape(linear(tokens, p.q), {n, t, heads, d}), {0, 2, 1, 3}), {n * heads, t, d});

  Tensor<T> source = tokens;
  std::int64_t kv_h = h, kv_w = w;
  if (p.sr_ratio > 1) {
    const auto reduced = conv2d(tokens_to_map(tokens, h, w), p.sr);
    kv_h = reduced.dim(2);
    kv_w = reduced.dim(3);
    source = layer_norm(map_to_tokens(reduced), p.sr_norm);
  }
  const std::int64_t tk = kv_h * kv_w;
  auto k = reshape(permute(reshape(linear(source, p.k), {n, tk, heads, d}), {0, 2, 3, 1}), {n * heads, d, tk});
  auto v = reshape(permute(reshape(linear(source, p.v), {n, tk, heads, d}), {0, 2, 1, 3}), {n * heads, tk, d});

  const auto attn = softmax_rows(scale(matmul(q, k), static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)))));
  if (record) {
    record->q_h = h;
    record->q_w = w;
    record->kv_h = kv_h;
    record->kv_w = kv_w;
    record->weights.assign(static_cast<std::size_t>(t * tk), 0.0);
    const T* pa = attn.data();
    for (std::int64_t hd = 0; hd < heads; ++hd) {
      for (std::int64_t i = 0; i < t * tk; ++i) record->weights[i] += static_cast<double>(pa[hd * t * tk + i]) / heads;
    }
  }
  const auto out = reshape(permute(reshape(matmul(attn, v), {n, heads, t, d}), {0, 2, 1, 3}), {n, t, c});
  return linear(out, p.proj);
}

template <class T>
Tensor<T> mix_ffn(const Tensor<T>& tokens, std::int64_t h, std::int64_t w, const MixFfnParams<T>& p) {
  if (tokens.rank() != 3 || tokens.dim(1) != h * w) fail(Errc::shape_mismatch, "token count does not match the grid");
  const auto hidden = linear(tokens, p.fc1);
  const auto mixed = gelu(conv2d(tokens_to_map(hidden, h, w), p.dw));
  return linear(map_to_tokens(mixed), p.fc2);
}

template <class T>
PyramidFeatures<T> encoder_forward(const Tensor<T>& x, const EncoderParams<T>& params, AttentionRecord* record) {
  const auto& cfg = params.config;
  if (x.rank() != 4 || x.dim(1) != cfg.in_channels) {
    fail(Errc::shape_mismatch, "encoder expects [N," + std::to_string(cfg.in_channels) + ",H,W], got " + to_string(x.shape()));
  }
  const int total = cfg.cumulative_stride(kStages - 1);
  if (x.dim(2) % total != 0 || x.dim(3) % total != 0) {
    fail(Errc::invalid_shape, "input size " + std::to_string(x.dim(2)) + "x" + std::to_string(x.dim(3)) +
                                  " not divisible by " + std::to_string(total));
  }
  PyramidFeatures<T> out;
  Tensor<T> input = x;
  for (int s = 0; s < kStages; ++s) {
    const auto& stage = params.stages[s];
    auto grid = overlap_patch_embed(input, stage);
    auto tokens = grid.tokens;
    AttentionMap* stage_record = nullptr;
    if (record) {
      record->stages[s].emplace();
      stage_record = &*record->stages[s];
    }
    for (std::size_t b = 0; b < stage.blocks.size(); ++b) {
      const auto& block = stage.blocks[b];
      const bool last = b + 1 == stage.blocks.size();
      tokens = add(tokens, sr_attention(layer_norm(tokens, block.norm1), grid.h, grid.w, block.attn, last ? stage_record : nullptr));
      tokens = add(tokens, mix_ffn(layer_norm(tokens, block.norm2), grid.h, grid.w, block.ffn));
    }
    if (record && stage.blocks.empty()) record->stages[s].reset();
    out.levels[s] = tokens_to_map(tokens, grid.h, grid.w);
    input = out.levels[s];
  }
  return out;
}

Tensor<double> attention_row(const AttentionRecord& record, int stage, std::int64_t query_index) {
  if (stage < 0 || stage >= kStages || !record.stages[stage]) {
    fail(Errc::not_recorded, "no attention recorded for stage " + std::to_string(stage + 1));
  }
  const auto& m = *record.stages[stage];
  const std::int64_t tk = m.kv_h * m.kv_w;
  if (query_index < 0 || query_index >= m.q_h * m.q_w) fail(Errc::invalid_shape, "query index out of range");
  std::vector<double> row(m.weights.begin() + query_index * tk, m.weights.begin() + (query_index + 1) * tk);
  return Tensor<double>({m.kv_h, m.kv_w}, std::move(row));
}

Tensor<double> attention_heatmap(const AttentionRecord& record, int stage, std::int64_t query_index) {
  return minmax_normalize(attention_row(record, stage, query_index));
}

Tensor<double> minmax_normalize(const Tensor<double>& x) {
  const auto v = x.values();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  std::vector<double> out(v.size(), 0.0);
  const double range = *hi - *lo;
  if (range > 0.0) {
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *lo) / range;
  }
  return Tensor<double>(x.shape(), std::move(out));
}

#define SSF_INSTANTIATE_ENCODER(T)                                                                                      \
  template EncoderParams<T> init_encoder(const EncoderConfig&, std::uint64_t);                                         \
  template Tensor<T> tokens_to_map(const Tensor<T>&, std::int64_t, std::int64_t);                                      \
  template Tensor<T> map_to_tokens(const Tensor<T>&);                                                                   \
  template TokenGrid<T> overlap_patch_embed(const Tensor<T>&, const StageParams<T>&);                                   \
  template Tensor<T> sr_attention(const Tensor<T>&, std::int64_t, std::int64_t, const AttentionParams<T>&, AttentionMap*); \
  template Tensor<T> mix_ffn(const Tensor<T>&, std::int64_t, std::int64_t, const MixFfnParams<T>&);                    \
  template PyramidFeatures<T> encoder_forward(const Tensor<T>&, const EncoderParams<T>&, AttentionRecord*);

SSF_INSTANTIATE_ENCODER(float)
SSF_INSTANTIATE_ENCODER(double)

}  // namespace ssf
