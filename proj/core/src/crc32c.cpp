#include "seqpipe/crc32c.hpp"

#include <array>

namespace seqpipe {

namespace {

constexpr std::uint32_t kPolyReflected = 0x82F63B78u;

constexpr std::array<std::uint32_t, 256> build_table()
{
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t i = 0; i < 256; ++i)
    {
        std::uint32_t crc = i;
        for (int bit = 0; bit < 8; ++bit)
        {
            crc = (crc & 1) ? (crc >> 1) ^ kPolyReflected : crc >> 1;
        }
        table[i] = crc;
    }
    return table;
}

constexpr auto kTable = build_table();

} // namespace

std::uint32_t crc32c(std::string_view data)
{
    std::uint32_t crc = 0xFFFFFFFFu;
    for (char c : data)
    {
        const auto byte = static_cast<unsigned char>(c);
        crc = kTable[(crc ^ byte) & 0xFF] ^ (crc >> 8);
    }
    return crc ^ 0xFFFFFFFFu;
}

} // namespace seqpipe
