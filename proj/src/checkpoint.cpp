#include "ssf/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <unordered_map>
#include <unordered_set>

#include "ssf/netpbm.hpp"

namespace ssf {

namespace {

constexpr char kMagic[4] = {'S', 'S', 'F', '1'};
constexpr std::uint32_t kMaxRank = 4;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t offset() const { return pos_; }

  std::uint32_t u32(const std::string& what) {
    if (remaining() < 4) fail(Errc::format_error, "truncated " + what + " at byte " + std::to_string(pos_));
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  const std::uint8_t* take(std::size_t n) {
    const auto* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const std::vector<NamedTensor>& entries) {
  std::unordered_set<std::string> names;
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, t] : entries) {
    if (!names.insert(name).second) fail(Errc::format_error, "duplicate checkpoint entry '" + name + "'");
    if (t.rank() > static_cast<int>(kMaxRank)) fail(Errc::format_error, "entry '" + name + "' has rank > 4");
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : t.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

std::vector<NamedTensor> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 || !std::equal(kMagic, kMagic + 4, bytes.begin())) fail(Errc::format_error, "bad checkpoint magic");
  r.take(4);
  const auto version = r.u32("version");
  if (version != kCheckpointVersion) fail(Errc::format_error, "unsupported checkpoint version " + std::to_string(version));
  const auto count = r.u32("entry count");
  // Every entry needs at least 8 header bytes.
  if (static_cast<std::uint64_t>(count) * 8 > r.remaining()) fail(Errc::format_error, "entry count exceeds file size");

  std::vector<NamedTensor> out;
  std::unordered_set<std::string> names;
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::string label = "entry " + std::to_string(e);
    const auto name_len = r.u32(label + " name length");
    if (name_len > r.remaining()) fail(Errc::format_error, "truncated name of " + label);
    const auto* name_bytes = r.take(name_len);
    std::string name(reinterpret_cast<const char*>(name_bytes), name_len);
    const auto rank = r.u32("rank of '" + name + "'");
    if (rank > kMaxRank) fail(Errc::format_error, "entry '" + name + "' has rank " + std::to_string(rank));
    Shape shape;
    std::uint64_t count_values = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const auto d = r.u32("dims of '" + name + "'");
      if (d == 0) fail(Errc::format_error, "entry '" + name + "' has a zero extent");
      count_values *= d;
      if (count_values > (std::uint64_t{1} << 32)) fail(Errc::format_error, "entry '" + name + "' is implausibly large");
      shape.push_back(d);
    }
    if (count_values * 4 > r.remaining()) {
      fail(Errc::format_error, "truncated payload of '" + name + "': need " + std::to_string(count_values * 4) + " bytes, have " +
                                   std::to_string(r.remaining()));
    }
    if (!names.insert(name).second) fail(Errc::format_error, "duplicate checkpoint entry '" + name + "'");
    std::vector<float> values(static_cast<std::size_t>(count_values));
    const auto* payload = r.take(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(payload[i * 4 + b]) << (8 * b);
      values[i] = std::bit_cast<float>(bits);
    }
    out.emplace_back(std::move(name), Tensor<float>(std::move(shape), std::move(values)));
  }
  if (r.remaining() != 0) fail(Errc::format_error, std::to_string(r.remaining()) + " trailing bytes after the last entry");
  return out;
}

void checkpoint_save(const std::vector<NamedTensor>& entries, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(entries));
}

std::vector<NamedTensor> checkpoint_load(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

void save_model(const SSFormer<float>& model, const std::filesystem::path& path) {
  checkpoint_save(model.named_parameters(), path);
}

void load_model(SSFormer<float>& model, const std::vector<NamedTensor>& entries) {
  std::unordered_map<std::string, const Tensor<float>*> by_name;
  for (const auto& [name, t] : entries) by_name.emplace(name, &t);
  model.visit_parameters([&](const std::string& name, Tensor<float>& param) {
    auto it = by_name.find(name);
    if (it == by_name.end()) fail(Errc::shape_mismatch, "checkpoint has no tensor '" + name + "'");
    if (it->second->shape() != param.shape()) {
      fail(Errc::shape_mismatch, "tensor '" + name + "' is " + to_string(it->second->shape()) + " in the checkpoint but " +
                                     to_string(param.shape()) + " in the model");
    }
    auto dst = param.mutable_values();
    std::copy(it->second->values().begin(), it->second->values().end(), dst.begin());
  });
  if (by_name.size() != model.named_parameters().size()) {
    fail(Errc::shape_mismatch, "checkpoint has " + std::to_string(by_name.size()) + " tensors, model expects " +
                                   std::to_string(model.named_parameters().size()));
  }
}

}  // namespace ssf
