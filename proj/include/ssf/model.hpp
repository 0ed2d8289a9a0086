#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ssf/encoder.hpp"
#include "ssf/pld.hpp"

namespace ssf {

struct ModelConfig {
  EncoderConfig encoder = EncoderConfig::tiny();
  PLDConfig pld;
};

template <class T>
struct ForwardTrace {
  PyramidFeatures<T> pyramid;
  PLDTrace<T> decoder;
  AttentionRecord attention;
};

/// Pyramid Transformer encoder followed by the Progressive Locality Decoder.
template <class T>
class SSFormer {
 public:
  using NamedTensors = std::vector<std::pair<std::string, Tensor<T>>>;

  SSFormer() = default;
  SSFormer(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  const EncoderParams<T>& encoder() const noexcept { return encoder_; }
  const PLDParams<T>& decoder() const noexcept { return decoder_; }
  EncoderParams<T>& encoder() noexcept { return encoder_; }
  PLDParams<T>& decoder() noexcept { return decoder_; }

  /// Logits [N,1,H,W] for images [N,3,H,W]; H and W divisible by 32.
  Tensor<T> forward(const Tensor<T>& images, ForwardTrace<T>* trace = nullptr) const;

  template <class F>
  void visit_parameters(F&& f) {
    visit("encoder", encoder_, f);
    visit("decoder", decoder_, f);
  }

  /// Handles sharing storage with the model, in a fixed order.
  NamedTensors named_parameters() const;
  std::int64_t parameter_count() const;

  /// Copy with every parameter converted to U.
  template <class U>
  SSFormer<U> cast() const {
    SSFormer<U> out(config_, 0);
    auto src = named_parameters();
    std::size_t i = 0;
    out.visit_parameters([&](const std::string&, Tensor<U>& t) {
      t = src[i++].second.template cast<U>();
      t.set_requires_grad(true);
    });
    return out;
  }

 private:
  ModelConfig config_;
  EncoderParams<T> encoder_;
  PLDParams<T> decoder_;
};

extern template class SSFormer<float>;
extern template class SSFormer<double>;

}  // namespace ssf
