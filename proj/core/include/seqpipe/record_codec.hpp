#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "seqpipe/types.hpp"

namespace seqpipe {

// On-disk record payload, all integers little-endian:
//   u64 cache_index
//   u16 feature count
//   per feature, sorted by name:
//     u16 name length, name bytes,
//     u8 dtype tag (0=int32, 1=int64, 2=float32, 3=bytes),
//     u32 element count,
//     raw little-endian element data
std::string encode_payload(const Example& example);

// Throws corrupt_record on any framing or bounds violation.
Example decode_payload(std::string_view payload);

// Record framing in .rec files:
//   u32 payload length, u32 CRC32C of payload, payload bytes
std::string frame_record(std::string_view payload);

inline constexpr std::size_t kRecordHeaderBytes = 8;

} // namespace seqpipe
