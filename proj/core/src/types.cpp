#include "seqpipe/types.hpp"

namespace seqpipe {

const char* dtype_name(Dtype dtype)
{
    switch (dtype)
    {
    case Dtype::int32:
        return "int32";
    case Dtype::int64:
        return "int64";
    case Dtype::float32:
        return "float32";
    case Dtype::bytes:
        return "bytes";
    }
    return "unknown";
}

std::optional<Dtype> dtype_from_name(std::string_view name)
{
    if (name == "int32")
    {
        return Dtype::int32;
    }
    if (name == "int64")
    {
        return Dtype::int64;
    }
    if (name == "float32")
    {
        return Dtype::float32;
    }
    if (name == "bytes")
    {
        return Dtype::bytes;
    }
    return std::nullopt;
}

bool valid_feature_name(std::string_view name)
{
    if (name.empty() || name[0] < 'a' || name[0] > 'z')
    {
        return false;
    }
    for (char c : name)
    {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
        if (!ok)
        {
            return false;
        }
    }
    return true;
}

Feature Feature::int32_seq(std::vector<std::int64_t> values)
{
    Feature f;
    f.dtype = Dtype::int32;
    f.ints = std::move(values);
    return f;
}

Feature Feature::int64_seq(std::vector<std::int64_t> values)
{
    Feature f;
    f.dtype = Dtype::int64;
    f.ints = std::move(values);
    return f;
}

Feature Feature::float32_seq(std::vector<float> values)
{
    Feature f;
    f.dtype = Dtype::float32;
    f.floats = std::move(values);
    return f;
}

Feature Feature::byte_string(std::string value)
{
    Feature f;
    f.dtype = Dtype::bytes;
    f.bytes = std::move(value);
    return f;
}

std::size_t Feature::element_count() const
{
    switch (dtype)
    {
    case Dtype::int32:
    case Dtype::int64:
        return ints.size();
    case Dtype::float32:
        return floats.size();
    case Dtype::bytes:
        return bytes.size();
    }
    return 0;
}

} // namespace seqpipe
