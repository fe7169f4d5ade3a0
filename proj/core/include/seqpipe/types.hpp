#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace seqpipe {

enum class Dtype : std::uint8_t {
    int32 = 0,
    int64 = 1,
    float32 = 2,
    bytes = 3,
};

const char* dtype_name(Dtype dtype);
std::optional<Dtype> dtype_from_name(std::string_view name);

// Feature name grammar: [a-z][a-z0-9_]*
bool valid_feature_name(std::string_view name);

// Per-feature contract between task output and feature-converter input.
struct FeatureSpec {
    std::string name;
    Dtype dtype = Dtype::int32;
    // Runtime pad/trim target; absent means variable length.
    std::optional<std::uint32_t> fixed_length;

    bool operator==(const FeatureSpec&) const = default;
};

// One named, typed tensor value. Exactly one of the payload members is active,
// selected by dtype (ints carries both int32 and int64 values).
struct Feature {
    Dtype dtype = Dtype::int32;
    std::vector<std::int64_t> ints;
    std::vector<float> floats;
    std::string bytes;

    static Feature int32_seq(std::vector<std::int64_t> values);
    static Feature int64_seq(std::vector<std::int64_t> values);
    static Feature float32_seq(std::vector<float> values);
    static Feature byte_string(std::string value);

    bool is_integral() const
    {
        return dtype == Dtype::int32 || dtype == Dtype::int64;
    }

    std::size_t element_count() const;

    bool operator==(const Feature&) const = default;
};

// The unit flowing through preprocessing, shuffle, sharding and reading.
// cache_index is the globally assigned ordinal once the example is cached;
// before that the field carries the source enumeration index.
struct Example {
    std::uint64_t cache_index = 0;
    std::map<std::string, Feature> features;

    bool operator==(const Example&) const = default;
};

} // namespace seqpipe
