#include "ssf/error.hpp"

namespace ssf {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_shape: return "InvalidShape";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::invalid_axis: return "InvalidAxis";
    case Errc::invalid_reduction: return "InvalidReduction";
    case Errc::tape_consumed: return "TapeConsumed";
    case Errc::numerical_failure: return "NumericalFailure";
    case Errc::not_recorded: return "NotRecorded";
    case Errc::invalid_target: return "InvalidTarget";
    case Errc::invalid_epoch: return "InvalidEpoch";
    case Errc::divergence_detected: return "DivergenceDetected";
    case Errc::format_error: return "FormatError";
    case Errc::invalid_config: return "InvalidConfig";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

void fail(Errc code, const std::string& message) { throw Error(code, message); }

std::int64_t numel(const Shape& shape) noexcept {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace ssf
