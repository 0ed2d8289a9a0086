#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ssf/params.hpp"
#include "ssf/tensor.hpp"

namespace ssf {

inline constexpr int kStages = 4;

/// Four-stage pyramid Transformer configuration.
struct EncoderConfig {
  std::array<int, kStages> dims{16, 32, 64, 128};
  std::array<int, kStages> depths{1, 1, 1, 1};
  std::array<int, kStages> heads{1, 2, 4, 8};
  std::array<int, kStages> sr_ratios{8, 4, 2, 1};
  std::array<int, kStages> patch_strides{4, 2, 2, 2};
  std::array<int, kStages> patch_kernels{7, 3, 3, 3};
  int ffn_expand = 4;
  int in_channels = 3;

  static EncoderConfig tiny();
  static EncoderConfig small();

  /// Product of patch strides up to and including `stage` (0-based).
  int cumulative_stride(int stage) const;
  /// Throws InvalidShape when dims are not divisible by heads or any
  /// ratio/stride is non-positive.
  void validate() const;
};

template <class T>
struct AttentionParams {
  LinearParams<T> q, k, v, proj;
  /// Key/value reduction; only populated when sr_ratio > 1.
  ConvParams<T> sr;
  NormParams<T> sr_norm;
  int heads = 1;
  int sr_ratio = 1;
};

template <class T>
struct MixFfnParams {
  LinearParams<T> fc1;
  ConvParams<T> dw;
  LinearParams<T> fc2;
};

template <class T>
struct BlockParams {
  NormParams<T> norm1;
  AttentionParams<T> attn;
  NormParams<T> norm2;
  MixFfnParams<T> ffn;
};

template <class T>
struct StageParams {
  ConvParams<T> patch;
  NormParams<T> patch_norm;
  std::vector<BlockParams<T>> blocks;
};

template <class T>
struct EncoderParams {
  EncoderConfig config;
  std::array<StageParams<T>, kStages> stages;
};

template <class T>
struct PyramidFeatures {
  std::array<Tensor<T>, kStages> levels;
};

/// Tokens [N, h*w, C] laid out row-major over an h x w grid.
template <class T>
struct TokenGrid {
  Tensor<T> tokens;
  std::int64_t h = 0;
  std::int64_t w = 0;
};

/// Head-averaged attention weights of batch item 0, rows = queries over the
/// stage grid, columns = keys over the reduced grid.
struct AttentionMap {
  std::int64_t q_h = 0, q_w = 0, kv_h = 0, kv_w = 0;
  std::vector<double> weights;
};

/// Last block's attention per stage, filled when passed to encoder_forward.
struct AttentionRecord {
  std::array<std::optional<AttentionMap>, kStages> stages;
};

template <class T>
EncoderParams<T> init_encoder(const EncoderConfig& config, std::uint64_t seed);

template <class T, class F>
void visit(const std::string& prefix, EncoderParams<T>& params, F&& f) {
  for (int s = 0; s < kStages; ++s) {
    auto& stage = params.stages[s];
    const std::string sp = prefix + ".stage" + std::to_string(s + 1);
    visit(sp + ".patch", stage.patch, f);
    visit(sp + ".patch_norm", stage.patch_norm, f);
    for (std::size_t b = 0; b < stage.blocks.size(); ++b) {
      auto& block = stage.blocks[b];
      const std::string bp = sp + ".block" + std::to_string(b);
      visit(bp + ".norm1", block.norm1, f);
      visit(bp + ".attn.q", block.attn.q, f);
      visit(bp + ".attn.k", block.attn.k, f);
      visit(bp + ".attn.v", block.attn.v, f);
      visit(bp + ".attn.proj", block.attn.proj, f);
      if (block.attn.sr_ratio > 1) {
        visit(bp + ".attn.sr", block.attn.sr, f);
        visit(bp + ".attn.sr_norm", block.attn.sr_norm, f);
      }
      visit(bp + ".norm2", block.norm2, f);
      visit(bp + ".ffn.fc1", block.ffn.fc1, f);
      visit(bp + ".ffn.dw", block.ffn.dw, f);
      visit(bp + ".ffn.fc2", block.ffn.fc2, f);
    }
  }
}

template <class T>
Tensor<T> tokens_to_map(const Tensor<T>& tokens, std::int64_t h, std::int64_t w);
template <class T>
Tensor<T> map_to_tokens(const Tensor<T>& map);

/// Strided convolution (padding kernel/2), flatten to tokens, layer norm.
template <class T>
TokenGrid<T> overlap_patch_embed(const Tensor<T>& x, const StageParams<T>& stage);

/// Spatial-reduction multi-head attention. Residual and pre-norm belong to
/// the calling block.
template <class T>
Tensor<T> sr_attention(const Tensor<T>& tokens, std::int64_t h, std::int64_t w, const AttentionParams<T>& p,
                       AttentionMap* record = nullptr);

/// Linear expand, 3x3 depthwise conv on the grid, gelu, linear project.
template <class T>
Tensor<T> mix_ffn(const Tensor<T>& tokens, std::int64_t h, std::int64_t w, const MixFfnParams<T>& p);

template <class T>
PyramidFeatures<T> encoder_forward(const Tensor<T>& x, const EncoderParams<T>& params, AttentionRecord* record = nullptr);

/// Raw attention of `query_index` reshaped to the key grid [kv_h, kv_w].
Tensor<double> attention_row(const AttentionRecord& record, int stage, std::int64_t query_index);
/// attention_row min-max normalized to [0,1]; a constant row maps to zeros.
/// NotRecorded when the stage has no recorded attention.
Tensor<double> attention_heatmap(const AttentionRecord& record, int stage, std::int64_t query_index);

/// Min-max normalization to [0,1]; constant input maps to all zeros.
Tensor<double> minmax_normalize(const Tensor<double>& x);

}  // namespace ssf
