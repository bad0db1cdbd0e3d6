#pragma once
// Compact SHA-256. Used only by the optional term concretizer for trace
// export; nothing in the verified path depends on it.

#include <array>
#include <cstdint>
#include <cstddef>
#include <string>

namespace chatsrp {

std::array<uint8_t, 32> sha256(const uint8_t* data, size_t len);

std::string to_hex(const uint8_t* data, size_t len);

}  // namespace chatsrp
