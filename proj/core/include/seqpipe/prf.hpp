#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace seqpipe {

// Keyed 64-bit pseudo-random function built on the splitmix64 finalizer.
// Every source of randomness in the pipeline derives from this function, so
// shuffles, per-example seeds and epoch permutations are bit-exact across
// platforms and across runs.

inline constexpr std::uint64_t kPrfGolden = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t splitmix64_mix(std::uint64_t z)
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t prf64(std::uint64_t key, std::uint64_t x)
{
    return splitmix64_mix(key ^ (x + kPrfGolden));
}

// Multi-argument form folds left: prf64(k, a, b) == prf64(prf64(k, a), b).
template <typename... Rest>
constexpr std::uint64_t prf64(std::uint64_t key, std::uint64_t x, std::uint64_t y, Rest... rest)
{
    return prf64(prf64(key, x), y, rest...);
}

// Deterministic value stream: value t of the stream is prf64(seed, t).
class PrfStream {
  public:
    explicit constexpr PrfStream(std::uint64_t seed) : seed_(seed)
    {
    }

    constexpr std::uint64_t next()
    {
        return prf64(seed_, counter_++);
    }

    // Uniform-ish draw in [0, n) by modulo; n must be >= 1. The modulo bias is
    // irrelevant here: only determinism matters.
    constexpr std::uint64_t next_below(std::uint64_t n)
    {
        return next() % n;
    }

  private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

// Folds a byte string into the PRF chain: first the length, then each 8-byte
// little-endian chunk (final chunk zero-padded). Length-prefixing removes
// concatenation ambiguity between consecutive folded strings.
std::uint64_t prf_fold_bytes(std::uint64_t key, std::string_view data);

// 16 lowercase hex digits, zero padded.
std::string u64_to_hex(std::uint64_t value);
std::optional<std::uint64_t> u64_from_hex(std::string_view hex);

} // namespace seqpipe
