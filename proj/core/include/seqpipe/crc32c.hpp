#pragma once

#include <cstdint>
#include <string_view>

namespace seqpipe {

// CRC32C (Castagnoli), reflected polynomial 0x82F63B78, init and final xor
// 0xFFFFFFFF. Check value: crc32c("123456789") == 0xE3069283.
std::uint32_t crc32c(std::string_view data);

} // namespace seqpipe
