#include "vqlatent/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>

#include "vqlatent/errors.hpp"
#include "vqlatent/fileio.hpp"

namespace vql {

namespace {

constexpr char kMagic[4] = {'V', 'Q', 'L', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  bool done() const { return pos_ == bytes_.size(); }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IoError("checkpoint: truncated file");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const ad::Tensor<float>& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw InputError("checkpoint: no tensor named '" + name + "'");
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, 4);
  const std::string json = ckpt.config.dump();
  put_u32(out, static_cast<std::uint32_t>(json.size()));
  out += json;
  for (const auto& [name, t] : ckpt.tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(4) != std::string_view(kMagic, 4)) throw IoError("checkpoint: bad magic bytes");
  Checkpoint ckpt;
  const std::uint32_t json_len = r.u32();
  const auto json = r.take(json_len);
  try {
    ckpt.config = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: malformed config blob: ") + e.what());
  }
  while (!r.done()) {
    const std::uint32_t name_len = r.u32();
    std::string name(r.take(name_len));
    const std::uint32_t rank = r.u32();
    ad::Shape shape(rank);
    for (auto& d : shape) d = r.u32();
    const std::size_t n = ad::shape_numel(shape);
    std::vector<float> data(n);
    for (float& v : data) v = std::bit_cast<float>(r.u32());
    ckpt.tensors.emplace_back(std::move(name), ad::Tensor<float>(std::move(shape), std::move(data)));
  }
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path));
}

}  // namespace vql
