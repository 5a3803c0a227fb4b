#pragma once

#include <cstdint>
#include <vector>

namespace vql {

using TokenId = std::int32_t;
using TokenIds = std::vector<TokenId>;

// Reserved ids shared by the vocabulary and the model.
inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kStartId = 1;
inline constexpr TokenId kEndId = 2;
inline constexpr TokenId kUnkId = 3;
inline constexpr TokenId kNumSpecialIds = 4;

}  // namespace vql
