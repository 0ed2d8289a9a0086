#include "ssf/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "ssf/rng.hpp"

namespace ssf {

namespace detail {

template <class T>
TapeState<T>*& active_tape() noexcept {
  thread_local TapeState<T>* tape = nullptr;
  return tape;
}

template <class T>
class TapeState : public std::enable_shared_from_this<TapeState<T>> {
 public:
  struct Node {
    std::string_view op;
    std::vector<std::int64_t> inputs;
    BackwardFn<T> backward;
    Shape shape;
    const void* leaf_key = nullptr;
  };

  std::vector<Node> nodes;
  std::unordered_map<const void*, std::int64_t> leaves;
  bool consumed = false;

  std::int64_t node_for(const Tensor<T>& t) {
    if (!t.defined()) return -1;
    if (t.node_ >= 0 && t.tape_.get() == this) return t.node_;
    if (!t.requires_grad_) return -1;
    auto [it, inserted] = leaves.try_emplace(t.storage_id(), static_cast<std::int64_t>(nodes.size()));
    if (inserted) nodes.push_back(Node{"leaf", {}, {}, t.shape_, t.storage_id()});
    return it->second;
  }

  Tensor<T> attach(std::string_view op, Tensor<T> out, const std::vector<const Tensor<T>*>& inputs,
                   BackwardFn<T> backward) {
    if (consumed) fail(Errc::tape_consumed, "cannot record '" + std::string(op) + "' after backward");
    std::vector<std::int64_t> ids;
    ids.reserve(inputs.size());
    bool any = false;
    for (const auto* in : inputs) {
      // Leaves are only registered when the op actually records.
      const bool participates = in->defined() && ((in->node_ >= 0 && in->tape_.get() == this) || in->requires_grad_);
      any = any || participates;
      ids.push_back(participates ? node_for(*in) : -1);
    }
    if (!any) return out;
    out.node_ = static_cast<std::int64_t>(nodes.size());
    out.tape_ = this->shared_from_this();
    out.requires_grad_ = false;
    nodes.push_back(Node{op, std::move(ids), std::move(backward), out.shape_, nullptr});
    return out;
  }

  Gradients<T> backward(const Tensor<T>& loss) {
    if (consumed) fail(Errc::tape_consumed, "backward already ran on this tape");
    if (loss.numel() != 1) fail(Errc::invalid_reduction, "loss must be a scalar, got shape " + to_string(loss.shape()));
    consumed = true;
    Gradients<T> result;
    if (loss.node_ < 0 || loss.tape_.get() != this) return result;

    const auto root = loss.node_;
    std::vector<std::vector<T>> grads(nodes.size());
    grads[root].assign(1, T(1));
    std::vector<std::span<T>> spans;
    for (auto id = root; id >= 0; --id) {
      if (grads[id].empty()) continue;
      auto& node = nodes[id];
      if (node.leaf_key) continue;
      spans.assign(node.inputs.size(), std::span<T>{});
      for (std::size_t i = 0; i < node.inputs.size(); ++i) {
        const auto in = node.inputs[i];
        if (in < 0) continue;
        if (grads[in].empty()) grads[in].assign(static_cast<std::size_t>(numel(nodes[in].shape)), T(0));
        spans[i] = std::span<T>(grads[in]);
      }
      node.backward(std::span<const T>(grads[id]), std::span<const std::span<T>>(spans));
      std::vector<T>().swap(grads[id]);
      node.backward = nullptr;
    }
    for (const auto& [key, id] : leaves) {
      if (grads[id].empty()) continue;
      result.grads_.emplace(key, Tensor<T>(nodes[id].shape, std::move(grads[id])));
    }
    return result;
  }
};

}  // namespace detail

template <class T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)) {
  for (auto d : shape_) {
    if (d < 1) fail(Errc::invalid_shape, "non-positive extent in " + to_string(shape_));
  }
  if (ssf::numel(shape_) != static_cast<std::int64_t>(values.size())) {
    fail(Errc::invalid_shape, "shape " + to_string(shape_) + " needs " + std::to_string(ssf::numel(shape_)) +
                                  " values, got " + std::to_string(values.size()));
  }
  storage_ = std::make_shared<std::vector<T>>(std::move(values));
}

template <class T>
Tensor<T> Tensor<T>::zeros(Shape shape) {
  return full(std::move(shape), T(0));
}

template <class T>
Tensor<T> Tensor<T>::full(Shape shape, T value) {
  for (auto d : shape) {
    if (d < 1) fail(Errc::invalid_shape, "non-positive extent in " + to_string(shape));
  }
  const auto n = static_cast<std::size_t>(ssf::numel(shape));
  return Tensor(std::move(shape), std::vector<T>(n, value));
}

template <class T>
Tensor<T> Tensor<T>::scalar(T value) {
  return Tensor(Shape{}, std::vector<T>{value});
}

template <class T>
Tensor<T> Tensor<T>::normal(Shape shape, std::uint64_t seed, double stddev) {
  if (!(stddev > 0.0)) fail(Errc::invalid_shape, "normal fill needs stddev > 0");
  for (auto d : shape) {
    if (d < 1) fail(Errc::invalid_shape, "non-positive extent in " + to_string(shape));
  }
  Rng rng(seed);
  std::vector<T> values(static_cast<std::size_t>(ssf::numel(shape)));
  for (auto& v : values) v = static_cast<T>(rng.normal() * stddev);
  return Tensor(std::move(shape), std::move(values));
}

template <class T>
std::int64_t Tensor<T>::dim(int axis) const {
  if (axis < 0 || axis >= rank()) fail(Errc::invalid_axis, "axis " + std::to_string(axis) + " out of range for " + to_string(shape_));
  return shape_[static_cast<std::size_t>(axis)];
}

template <class T>
std::span<const T> Tensor<T>::values() const noexcept {
  if (!storage_) return {};
  return std::span<const T>(*storage_);
}

template <class T>
std::span<T> Tensor<T>::mutable_values() noexcept {
  if (!storage_) return {};
  return std::span<T>(*storage_);
}

template <class T>
T Tensor<T>::item() const {
  if (numel() != 1) fail(Errc::invalid_shape, "item() on tensor of shape " + to_string(shape_));
  return (*storage_)[0];
}

template <class T>
T Tensor<T>::at(std::initializer_list<std::int64_t> index) const {
  if (index.size() != shape_.size()) fail(Errc::invalid_shape, "index rank does not match " + to_string(shape_));
  std::int64_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i < 0 || i >= shape_[axis]) fail(Errc::invalid_shape, "index out of range for " + to_string(shape_));
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return (*storage_)[static_cast<std::size_t>(flat)];
}

template <class T>
Tensor<T>& Tensor<T>::set_requires_grad(bool on) {
  requires_grad_ = on && node_ < 0;
  return *this;
}

template <class T>
Tensor<T> Tensor<T>::detach() const {
  Tensor out;
  out.shape_ = shape_;
  out.storage_ = storage_;
  return out;
}

template <class T>
Tensor<T> Tensor<T>::clone() const {
  return Tensor(shape_, std::vector<T>(values().begin(), values().end()));
}

template <class T>
Tensor<T> with_shape(const Tensor<T>& src, Shape shape) {
  if (numel(shape) != src.numel()) {
    fail(Errc::invalid_shape, "cannot view " + to_string(src.shape()) + " as " + to_string(shape));
  }
  Tensor<T> out;
  out.shape_ = std::move(shape);
  out.storage_ = src.storage_;
  return out;
}

template <class T>
Tensor<T> record(std::string_view op, Tensor<T> out, std::vector<const Tensor<T>*> inputs, BackwardFn<T> backward) {
  auto* tape = detail::active_tape<T>();
  if (!tape) return out;
  return tape->attach(op, std::move(out), inputs, std::move(backward));
}

template <class T>
Tensor<T> Gradients<T>::of(const Tensor<T>& leaf) const {
  auto it = grads_.find(leaf.storage_id());
  if (it == grads_.end()) return Tensor<T>::zeros(leaf.shape());
  return it->second;
}

template <class T>
Tape<T>::Tape() : state_(std::make_shared<detail::TapeState<T>>()) {
  previous_ = detail::active_tape<T>();
  detail::active_tape<T>() = state_.get();
}

template <class T>
Tape<T>::~Tape() {
  if (detail::active_tape<T>() == state_.get()) detail::active_tape<T>() = previous_;
}

template <class T>
Gradients<T> Tape<T>::backward(const Tensor<T>& loss) {
  return state_->backward(loss);
}

template <class T>
std::size_t Tape<T>::size() const noexcept {
  return state_->nodes.size();
}

template <class T>
std::string_view Tape<T>::op_name(std::int64_t node) const {
  return state_->nodes.at(static_cast<std::size_t>(node)).op;
}

template <class T>
const std::vector<std::int64_t>& Tape<T>::inputs_of(std::int64_t node) const {
  return state_->nodes.at(static_cast<std::size_t>(node)).inputs;
}

template <class T>
bool Tape<T>::consumed() const noexcept {
  return state_->consumed;
}

template <class T>
bool Tape<T>::active() noexcept {
  return detail::active_tape<T>() != nullptr;
}

template class Tensor<float>;
template class Tensor<double>;
template class Gradients<float>;
template class Gradients<double>;
template class Tape<float>;
template class Tape<double>;
template Tensor<float> with_shape(const Tensor<float>&, Shape);
template Tensor<double> with_shape(const Tensor<double>&, Shape);
template Tensor<float> record(std::string_view, Tensor<float>, std::vector<const Tensor<float>*>, BackwardFn<float>);
template Tensor<double> record(std::string_view, Tensor<double>, std::vector<const Tensor<double>*>, BackwardFn<double>);

}  // namespace ssf
