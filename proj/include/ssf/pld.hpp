#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "ssf/encoder.hpp"
#include "ssf/params.hpp"

namespace ssf {

enum class FusionMode { cat, add };

/// Progressive Locality Decoder configuration. Disabling `le_enabled`
/// replaces local emphasis with a per-stage 1x1 channel alignment;
/// disabling `sfa_enabled` replaces the stepwise chain with a parallel sum.
struct PLDConfig {
  int unified_dim = 64;
  FusionMode fusion = FusionMode::cat;
  bool le_enabled = true;
  bool sfa_enabled = true;
};

/// Local emphasis for one stage: C_i -> C (3x3) and C -> C (3x3). With
/// emphasis disabled only `first` is set, as a 1x1 C_i -> C alignment.
template <class T>
struct LEParams {
  ConvParams<T> first;
  ConvParams<T> second;
};

template <class T>
struct PLDParams {
  PLDConfig config;
  std::array<LEParams<T>, kStages> le;
  /// fuse[i] and fuse_post[i] produce G_{i+1} (0-based stage i) from G_{i+2}.
  std::array<LinearParams<T>, kStages - 1> fuse;
  std::array<LinearParams<T>, kStages - 1> fuse_post;
  /// Used instead of the chain when SFA is disabled.
  LinearParams<T> parallel;
  LinearParams<T> pred;
};

/// Intermediate maps of one decoder pass, shallowest stage first.
template <class T>
struct PLDTrace {
  std::array<Tensor<T>, kStages> le;
  std::array<Tensor<T>, kStages> fused;
};

template <class T>
PLDParams<T> init_pld(const PLDConfig& config, const std::array<int, kStages>& stage_dims, std::uint64_t seed);

template <class T, class F>
void visit(const std::string& prefix, PLDParams<T>& params, F&& f) {
  for (int s = 0; s < kStages; ++s) {
    const std::string lp = prefix + ".le" + std::to_string(s + 1);
    visit(lp + ".first", params.le[s].first, f);
    if (params.le[s].second.weight.defined()) visit(lp + ".second", params.le[s].second, f);
  }
  if (params.config.sfa_enabled) {
    for (int i = 0; i < kStages - 1; ++i) {
      visit(prefix + ".fuse" + std::to_string(i + 1), params.fuse[i], f);
      visit(prefix + ".fuse_post" + std::to_string(i + 1), params.fuse_post[i], f);
    }
  } else {
    visit(prefix + ".parallel", params.parallel, f);
  }
  visit(prefix + ".pred", params.pred, f);
}

/// relu(conv(relu(conv(f)))) resampled to (target_h, target_w); the
/// resample is skipped when the map is already at the target size.
template <class T>
Tensor<T> local_emphasis(const Tensor<T>& f, const LEParams<T>& p, std::int64_t target_h, std::int64_t target_w);

/// One fusion unit: cat -> linear(concat(shallower, deeper)), add ->
/// linear(shallower + deeper), then relu(linear fusion layer).
template <class T>
Tensor<T> fuse_step(const Tensor<T>& deeper, const Tensor<T>& shallower, FusionMode mode, const LinearParams<T>& fuse,
                    const LinearParams<T>& post);

/// Logits [N,1,4h,4w] from a pyramid whose first level is [N,C_1,h,w].
template <class T>
Tensor<T> pld_forward(const PyramidFeatures<T>& pyramid, const PLDParams<T>& params, PLDTrace<T>* trace = nullptr);

/// Per-pixel channel L2 magnitude of batch item 0, min-max normalized to
/// [0,1]; a constant map yields all zeros.
template <class T>
Tensor<double> feature_heatmap(const Tensor<T>& g);

}  // namespace ssf
