#include "ssf/model.hpp"

namespace ssf {

template <class T>
SSFormer<T>::SSFormer(const ModelConfig& config, std::uint64_t seed)
    : config_(config), encoder_(init_encoder<T>(config.encoder, seed)), decoder_(init_pld<T>(config.pld, config.encoder.dims, seed)) {}

template <class T>
Tensor<T> SSFormer<T>::forward(const Tensor<T>& images, ForwardTrace<T>* trace) const {
  auto pyramid = encoder_forward(images, encoder_, trace ? &trace->attention : nullptr);
  auto logits = pld_forward(pyramid, decoder_, trace ? &trace->decoder : nullptr);
  if (trace) trace->pyramid = std::move(pyramid);
  return logits;
}

template <class T>
typename SSFormer<T>::NamedTensors SSFormer<T>::named_parameters() const {
  NamedTensors out;
  auto self = *this;  // handles share storage with *this
  self.visit_parameters([&](const std::string& name, Tensor<T>& t) { out.emplace_back(name, t); });
  return out;
}

template <class T>
std::int64_t SSFormer<T>::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : named_parameters()) n += t.numel();
  return n;
}

template class SSFormer<float>;
template class SSFormer<double>;

}  // namespace ssf
