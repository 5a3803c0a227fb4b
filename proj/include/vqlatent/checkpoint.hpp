#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vqlatent/tensor.hpp"

namespace vql {

// Binary layout, all integers unsigned 32-bit little-endian:
//   "VQL1" | json_len | json bytes (UTF-8)
//   then until EOF, per tensor:
//   name_len | name bytes | rank | dims[rank] | float32 LE values
struct Checkpoint {
  nlohmann::json config;
  std::vector<std::pair<std::string, ad::Tensor<float>>> tensors;

  const ad::Tensor<float>& tensor(const std::string& name) const;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace vql
