#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ssf {

enum class Errc {
  invalid_shape,
  shape_mismatch,
  invalid_axis,
  invalid_reduction,
  tape_consumed,
  numerical_failure,
  not_recorded,
  invalid_target,
  invalid_epoch,
  divergence_detected,
  format_error,
  invalid_config,
};

/// CamelCase name of an error kind, e.g. "ShapeMismatch".
std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& message);

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape) noexcept;
std::string to_string(const Shape& shape);

}  // namespace ssf
