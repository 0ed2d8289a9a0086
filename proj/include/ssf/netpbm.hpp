#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ssf/tensor.hpp"

namespace ssf {

/// Decodes binary PGM (P5) or PPM (P6) with maxval 255 into [C,H,W] in
/// [0,1]; C is 1 for P5 and 3 for P6. `#` comments are allowed anywhere
/// in the header. Bad magic or truncation raises FormatError with the byte
/// offset.
Tensor<float> decode_netpbm(const std::vector<std::uint8_t>& bytes, const std::string& source = "<memory>");

/// Encodes [1,H,W], [H,W] (P5) or [3,H,W] (P6), rounding v*255 and clamping.
std::vector<std::uint8_t> encode_netpbm(const Tensor<float>& image);

Tensor<float> load_netpbm(const std::filesystem::path& path);
void save_netpbm(const Tensor<float>& image, const std::filesystem::path& path);

/// Loads a single-channel mask, binarized at 128/255.
Tensor<float> load_mask(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace ssf
