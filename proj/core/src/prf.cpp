#include "seqpipe/prf.hpp"

#include <array>

namespace seqpipe {

std::uint64_t prf_fold_bytes(std::uint64_t key, std::string_view data)
{
    std::uint64_t h = prf64(key, data.size());
    for (std::size_t pos = 0; pos < data.size(); pos += 8)
    {
        std::uint64_t chunk = 0;
        const std::size_t n = std::min<std::size_t>(8, data.size() - pos);
        for (std::size_t i = 0; i < n; ++i)
        {
            chunk |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
        }
        h = prf64(h, chunk);
    }
    return h;
}

std::string u64_to_hex(std::uint64_t value)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i)
    {
        out[static_cast<std::size_t>(i)] = digits[value & 0xF];
        value >>= 4;
    }
    return out;
}

std::optional<std::uint64_t> u64_from_hex(std::string_view hex)
{
    if (hex.empty() || hex.size() > 16)
    {
        return std::nullopt;
    }
    std::uint64_t value = 0;
    for (char c : hex)
    {
        std::uint64_t digit = 0;
        if (c >= '0' && c <= '9')
        {
            digit = static_cast<std::uint64_t>(c - '0');
        }
        else if (c >= 'a' && c <= 'f')
        {
            digit = static_cast<std::uint64_t>(10 + c - 'a');
        }
        else if (c >= 'A' && c <= 'F')
        {
            digit = static_cast<std::uint64_t>(10 + c - 'A');
        }
        else
        {
            return std::nullopt;
        }
        value = (value << 4) | digit;
    }
    return value;
}

} // namespace seqpipe
