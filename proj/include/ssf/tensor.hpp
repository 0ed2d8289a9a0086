#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <unordered_map>
#include <vector>

#include "ssf/error.hpp"

namespace ssf {

enum class DType { f32, f64 };

template <class T>
inline constexpr DType dtype_of = std::is_same_v<T, float> ? DType::f32 : DType::f64;

namespace detail {
template <class T>
class TapeState;
}

/// Dense row-major array, NCHW for images, with optional tape participation.
///
/// A Tensor is a handle: copies share storage. Values are treated as
/// immutable once created; the only writers are the optimizer and the
/// finite-difference harness, through mutable_values().
template <class T>
class Tensor {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);

 public:
  using value_type = T;

  Tensor() = default;
  /// Throws InvalidShape on non-positive extents or a size mismatch.
  Tensor(Shape shape, std::vector<T> values);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, T value);
  static Tensor scalar(T value);
  /// Normal(0, stddev) fill, deterministic per (seed, shape).
  static Tensor normal(Shape shape, std::uint64_t seed, double stddev);

  bool defined() const noexcept { return storage_ != nullptr; }
  const Shape& shape() const noexcept { return shape_; }
  int rank() const noexcept { return static_cast<int>(shape_.size()); }
  std::int64_t dim(int axis) const;
  std::int64_t numel() const noexcept { return storage_ ? static_cast<std::int64_t>(storage_->size()) : 0; }
  DType dtype() const noexcept { return dtype_of<T>; }

  std::span<const T> values() const noexcept;
  std::span<T> mutable_values() noexcept;
  const T* data() const noexcept { return storage_->data(); }
  T item() const;
  T at(std::initializer_list<std::int64_t> index) const;

  /// Marks a leaf as trainable. Only meaningful on tensors without a tape node.
  Tensor& set_requires_grad(bool on);
  /// True for trainable leaves and for outputs recorded on a tape.
  bool requires_grad() const noexcept { return requires_grad_ || node_ >= 0; }
  std::int64_t node_id() const noexcept { return node_; }
  const void* storage_id() const noexcept { return storage_.get(); }

  /// Same values, no tape link, not trainable.
  Tensor detach() const;
  /// Deep copy, not trainable.
  Tensor clone() const;

  template <class U>
  Tensor<U> cast() const {
    std::vector<U> out(values().begin(), values().end());
    return Tensor<U>(shape_, std::move(out));
  }

 private:
  template <class>
  friend class detail::TapeState;
  template <class U>
  friend Tensor<U> with_shape(const Tensor<U>& src, Shape shape);

  Shape shape_;
  std::shared_ptr<std::vector<T>> storage_;
  bool requires_grad_ = false;
  std::shared_ptr<detail::TapeState<T>> tape_;
  std::int64_t node_ = -1;
};

/// Shares storage with `src` under a new shape of equal element count.
template <class T>
Tensor<T> with_shape(const Tensor<T>& src, Shape shape);

/// Backward rule for a recorded op. `grad_in[i]` is empty for inputs that do
/// not participate in differentiation; otherwise the rule must accumulate
/// into it.
template <class T>
using BackwardFn = std::function<void(std::span<const T> grad_out, std::span<const std::span<T>> grad_in)>;

/// Attaches `out` to the thread's active tape when any input participates.
/// Returns `out` unchanged otherwise.
template <class T>
Tensor<T> record(std::string_view op, Tensor<T> out, std::vector<const Tensor<T>*> inputs, BackwardFn<T> backward);

/// Gradients of trainable leaves produced by one backward pass.
template <class T>
class Gradients {
 public:
  /// Gradient of `leaf`; zeros when the loss does not reach it.
  Tensor<T> of(const Tensor<T>& leaf) const;
  bool reached(const Tensor<T>& leaf) const { return grads_.count(leaf.storage_id()) != 0; }

 private:
  template <class>
  friend class detail::TapeState;
  std::unordered_map<const void*, Tensor<T>> grads_;
};

/// Define-by-run computation tape. Constructing a Tape makes it the active
/// tape for dtype T on this thread until it is destroyed. Ops record onto it
/// whenever one of their inputs is a trainable leaf or a recorded output.
/// backward() may be called once; a second call raises TapeConsumed.
template <class T>
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Gradients<T> backward(const Tensor<T>& loss);

  std::size_t size() const noexcept;
  std::string_view op_name(std::int64_t node) const;
  const std::vector<std::int64_t>& inputs_of(std::int64_t node) const;
  bool consumed() const noexcept;

  static bool active() noexcept;

 private:
  std::shared_ptr<detail::TapeState<T>> state_;
  detail::TapeState<T>* previous_ = nullptr;
};

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Gradients<float>;
extern template class Gradients<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace ssf
