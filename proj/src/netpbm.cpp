#include "ssf/netpbm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

namespace ssf {

namespace {

class HeaderReader {
 public:
  HeaderReader(const std::vector<std::uint8_t>& bytes, const std::string& source) : bytes_(bytes), source_(source) {}

  [[noreturn]] void error(const std::string& what) const {
    fail(Errc::format_error, source_ + ": " + what + " at byte " + std::to_string(pos_));
  }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::int64_t number() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size()) error("truncated header");
    if (!std::isdigit(bytes_[pos_])) error("expected a decimal number");
    std::int64_t v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > (1 << 24)) error("header value too large");
      ++pos_;
    }
    return v;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void raster_separator() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) error("missing whitespace before raster");
    ++pos_;
  }

  std::size_t pos_ = 0;

 private:
  const std::vector<std::uint8_t>& bytes_;
  const std::string& source_;
};

}  // namespace

Tensor<float> decode_netpbm(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  HeaderReader r(bytes, source);
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) r.error("bad magic, expected P5 or P6");
  const std::int64_t channels = bytes[1] == '5' ? 1 : 3;
  r.pos_ = 2;
  const auto width = r.number();
  const auto height = r.number();
  const auto maxval = r.number();
  if (width < 1 || height < 1) r.error("image extent must be positive");
  if (maxval != 255) r.error("only maxval 255 is supported");
  r.raster_separator();
  const auto needed = static_cast<std::size_t>(channels * width * height);
  if (bytes.size() - r.pos_ < needed) {
    r.pos_ = bytes.size();
    r.error("truncated raster: need " + std::to_string(needed) + " bytes");
  }
  std::vector<float> values(needed);
  const auto* raster = bytes.data() + r.pos_;
  // Interleaved RGB -> planar CHW.
  for (std::int64_t y = 0; y < height; ++y) {
    for (std::int64_t x = 0; x < width; ++x) {
      for (std::int64_t c = 0; c < channels; ++c) {
        values[(c * height + y) * width + x] = static_cast<float>(raster[(y * width + x) * channels + c]) / 255.0f;
      }
    }
  }
  return Tensor<float>({channels, height, width}, std::move(values));
}

std::vector<std::uint8_t> encode_netpbm(const Tensor<float>& image) {
  std::int64_t channels, height, width;
  if (image.rank() == 2) {
    channels = 1;
    height = image.dim(0);
    width = image.dim(1);
  } else if (image.rank() == 3 && (image.dim(0) == 1 || image.dim(0) == 3)) {
    channels = image.dim(0);
    height = image.dim(1);
    width = image.dim(2);
  } else {
    fail(Errc::shape_mismatch, "netpbm export needs [H,W], [1,H,W] or [3,H,W], got " + to_string(image.shape()));
  }
  const std::string header = std::string(channels == 1 ? "P5" : "P6") + "\n" + std::to_string(width) + " " +
                             std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + static_cast<std::size_t>(channels * height * width));
  const float* p = image.data();
  for (std::int64_t y = 0; y < height; ++y) {
    for (std::int64_t x = 0; x < width; ++x) {
      for (std::int64_t c = 0; c < channels; ++c) {
        const float v = std::clamp(p[(c * height + y) * width + x], 0.0f, 1.0f);
        out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
      }
    }
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::format_error, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::format_error, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::format_error, "short write to " + path.string());
}

Tensor<float> load_netpbm(const std::filesystem::path& path) { return decode_netpbm(read_file(path), path.string()); }

void save_netpbm(const Tensor<float>& image, const std::filesystem::path& path) { write_file(path, encode_netpbm(image)); }

Tensor<float> load_mask(const std::filesystem::path& path) {
  auto img = load_netpbm(path);
  if (img.dim(0) != 1) fail(Errc::format_error, path.string() + ": mask must be a P5 image");
  std::vector<float> bin(static_cast<std::size_t>(img.numel()));
  const float* p = img.data();
  for (std::size_t i = 0; i < bin.size(); ++i) bin[i] = p[i] >= 128.0f / 255.0f ? 1.0f : 0.0f;
  return Tensor<float>(img.shape(), std::move(bin));
}

}  // namespace ssf
