#include "seqpipe/record_codec.hpp"

#include <bit>
#include <cstring>
#include <limits>

#include "seqpipe/crc32c.hpp"
#include "seqpipe/error.hpp"

namespace seqpipe {

namespace {

void append_u16(std::string& out, std::uint16_t v)
{
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void append_u32(std::string& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
    {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

void append_u64(std::string& out, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i)
    {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

class Cursor {
  public:
    explicit Cursor(std::string_view data) : data_(data)
    {
    }

    std::uint64_t remaining() const
    {
        return data_.size() - pos_;
    }

    std::uint16_t read_u16()
    {
        return static_cast<std::uint16_t>(read_le(2));
    }

    std::uint32_t read_u32()
    {
        return static_cast<std::uint32_t>(read_le(4));
    }

    std::uint64_t read_u64()
    {
        return read_le(8);
    }

    std::uint8_t read_u8()
    {
        return static_cast<std::uint8_t>(read_le(1));
    }

    std::string_view read_bytes(std::size_t n)
    {
        require(n);
        auto out = data_.substr(pos_, n);
        pos_ += n;
        return out;
    }

  private:
    void require(std::size_t n) const
    {
        if (data_.size() - pos_ < n)
        {
            throw Error(ErrorCode::corrupt_record, "record payload truncated");
        }
    }

    std::uint64_t read_le(std::size_t n)
    {
        require(n);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < n; ++i)
        {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += n;
        return v;
    }

    std::string_view data_;
    std::size_t pos_ = 0;
};

} // namespace

std::string encode_payload(const Example& example)
{
    if (example.features.size() > std::numeric_limits<std::uint16_t>::max())
    {
        throw Error(ErrorCode::invalid_argument, "too many features in one example");
    }
    std::string out;
    append_u64(out, example.cache_index);
    append_u16(out, static_cast<std::uint16_t>(example.features.size()));
    // std::map iteration gives the required sorted-by-name order.
    for (const auto& [name, feature] : example.features)
    {
        if (name.size() > std::numeric_limits<std::uint16_t>::max())
        {
            throw Error(ErrorCode::invalid_argument, "feature name too long");
        }
        append_u16(out, static_cast<std::uint16_t>(name.size()));
        out += name;
        out.push_back(static_cast<char>(feature.dtype));
        const std::uint64_t count = feature.element_count();
        if (count > std::numeric_limits<std::uint32_t>::max())
        {
            throw Error(ErrorCode::invalid_argument, "feature \"" + name + "\" too long");
        }
        append_u32(out, static_cast<std::uint32_t>(count));
        switch (feature.dtype)
        {
        case Dtype::int32:
            for (std::int64_t v : feature.ints)
            {
                if (v < std::numeric_limits<std::int32_t>::min() ||
                    v > std::numeric_limits<std::int32_t>::max())
                {
                    throw Error(ErrorCode::invalid_argument,
                                "int32 feature \"" + name + "\" value out of range");
                }
                append_u32(out, static_cast<std::uint32_t>(static_cast<std::int32_t>(v)));
            }
            break;
        case Dtype::int64:
            for (std::int64_t v : feature.ints)
            {
                append_u64(out, static_cast<std::uint64_t>(v));
            }
            break;
        case Dtype::float32:
            for (float v : feature.floats)
            {
                append_u32(out, std::bit_cast<std::uint32_t>(v));
            }
            break;
        case Dtype::bytes:
            out += feature.bytes;
            break;
        }
    }
    return out;
}

Example decode_payload(std::string_view payload)
{
    Cursor cur(payload);
    Example example;
    example.cache_index = cur.read_u64();
    const std::uint16_t feature_count = cur.read_u16();
    std::string prev_name;
    for (std::uint16_t i = 0; i < feature_count; ++i)
    {
        const std::uint16_t name_len = cur.read_u16();
        std::string name(cur.read_bytes(name_len));
        if (i > 0 && !(prev_name < name))
        {
            throw Error(ErrorCode::corrupt_record, "feature names not strictly ascending");
        }
        const std::uint8_t tag = cur.read_u8();
        if (tag > static_cast<std::uint8_t>(Dtype::bytes))
        {
            throw Error(ErrorCode::corrupt_record, "unknown dtype tag");
        }
        const auto dtype = static_cast<Dtype>(tag);
        const std::uint32_t count = cur.read_u32();
        Feature feature;
        feature.dtype = dtype;
        switch (dtype)
        {
        case Dtype::int32:
            feature.ints.reserve(count);
            for (std::uint32_t k = 0; k < count; ++k)
            {
                feature.ints.push_back(static_cast<std::int32_t>(cur.read_u32()));
            }
            break;
        case Dtype::int64:
            feature.ints.reserve(count);
            for (std::uint32_t k = 0; k < count; ++k)
            {
                feature.ints.push_back(static_cast<std::int64_t>(cur.read_u64()));
            }
            break;
        case Dtype::float32:
            feature.floats.reserve(count);
            for (std::uint32_t k = 0; k < count; ++k)
            {
                feature.floats.push_back(std::bit_cast<float>(cur.read_u32()));
            }
            break;
        case Dtype::bytes:
            feature.bytes.assign(cur.read_bytes(count));
            break;
        }
        prev_name = name;
        example.features.emplace(std::move(name), std::move(feature));
    }
    if (cur.remaining() != 0)
    {
        throw Error(ErrorCode::corrupt_record, "trailing bytes after last feature");
    }
    return example;
}

std::string frame_record(std::string_view payload)
{
    if (payload.size() > std::numeric_limits<std::uint32_t>::max())
    {
        throw Error(ErrorCode::invalid_argument, "record payload too large");
    }
    std::string out;
    out.reserve(kRecordHeaderBytes + payload.size());
    append_u32(out, static_cast<std::uint32_t>(payload.size()));
    append_u32(out, crc32c(payload));
    out += payload;
    return out;
}

} // namespace seqpipe
