#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ssf/model.hpp"
#include "ssf/tensor.hpp"

namespace ssf {

/// Binary checkpoint layout, all integers u32 little-endian:
///
///   "SSF1" | version | entry count |
///   per entry: name_len | name (utf-8) | rank | dims[rank] | f32 LE payload
inline constexpr std::uint32_t kCheckpointVersion = 1;

using NamedTensor = std::pair<std::string, Tensor<float>>;

std::vector<std::uint8_t> encode_checkpoint(const std::vector<NamedTensor>& entries);
/// Validates magic, version, and every length before allocating. Corrupt or
/// truncated input and duplicate names raise FormatError.
std::vector<NamedTensor> decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void checkpoint_save(const std::vector<NamedTensor>& entries, const std::filesystem::path& path);
std::vector<NamedTensor> checkpoint_load(const std::filesystem::path& path);

void save_model(const SSFormer<float>& model, const std::filesystem::path& path);
/// Copies checkpoint values into the model's parameters. ShapeMismatch
/// naming the tensor when one is missing or differs in shape.
void load_model(SSFormer<float>& model, const std::vector<NamedTensor>& entries);

}  // namespace ssf
