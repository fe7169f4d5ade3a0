#include "seqpipe/task.hpp"

#include <charconv>

namespace seqpipe {

namespace {

std::string format_rate(double rate)
{
    // Shortest round-trip representation, stable across platforms.
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), rate);
    return std::string(buf, ptr);
}

std::string join_features(const std::vector<std::string>& features)
{
    std::string out;
    for (std::size_t i = 0; i < features.size(); ++i)
    {
        if (i > 0)
        {
            out.push_back('+');
        }
        out += features[i];
    }
    return out;
}

} // namespace

const char* source_kind_name(SourceKind kind)
{
    switch (kind)
    {
    case SourceKind::text_lines:
        return "text_lines";
    case SourceKind::tsv_pairs:
        return "tsv_pairs";
    case SourceKind::record_dir:
        return "record_dir";
    }
    return "unknown";
}

std::optional<SourceKind> source_kind_from_name(std::string_view name)
{
    if (name == "text_lines")
    {
        return SourceKind::text_lines;
    }
    if (name == "tsv_pairs")
    {
        return SourceKind::tsv_pairs;
    }
    if (name == "record_dir")
    {
        return SourceKind::record_dir;
    }
    return std::nullopt;
}

std::map<std::string, std::string> DataSourceSpec::effective_field_map() const
{
    if (!field_map.empty())
    {
        return field_map;
    }
    switch (kind)
    {
    case SourceKind::text_lines:
        return {{"line", "text"}};
    case SourceKind::tsv_pairs:
        return {{"0", "inputs"}, {"1", "targets"}};
    case SourceKind::record_dir:
        return {}; // identity
    }
    return {};
}

std::string DataSourceSpec::location_for_split(std::string_view split) const
{
    static constexpr std::string_view kPlaceholder = "{split}";
    std::string out = location;
    std::size_t pos = 0;
    while ((pos = out.find(kPlaceholder, pos)) != std::string::npos)
    {
        out.replace(pos, kPlaceholder.size(), split);
        pos += split.size();
    }
    return out;
}

const char* op_kind_name(OpKind kind)
{
    switch (kind)
    {
    case OpKind::tokenize:
        return "tokenize";
    case OpKind::append_eos:
        return "append_eos";
    case OpKind::lowercase:
        return "lowercase";
    case OpKind::random_span_mask:
        return "random_span_mask";
    }
    return "unknown";
}

std::optional<OpKind> op_kind_from_name(std::string_view name)
{
    if (name == "tokenize")
    {
        return OpKind::tokenize;
    }
    if (name == "append_eos")
    {
        return OpKind::append_eos;
    }
    if (name == "lowercase")
    {
        return OpKind::lowercase;
    }
    if (name == "random_span_mask")
    {
        return OpKind::random_span_mask;
    }
    return std::nullopt;
}

std::string PreprocessorSpec::describe() const
{
    std::string out = op_kind_name(op);
    out.push_back('(');
    switch (op)
    {
    case OpKind::tokenize:
        out += "vocab=" + vocab_ref + ",features=" + join_features(features);
        break;
    case OpKind::append_eos:
    case OpKind::lowercase:
        out += "features=" + join_features(features);
        break;
    case OpKind::random_span_mask:
        out += "feature=" + join_features(features) + ",rate=" + format_rate(rate);
        break;
    }
    out.push_back(')');
    return out;
}

std::vector<std::size_t> TaskSpec::cache_op_indices() const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < preprocessors.size(); ++i)
    {
        if (preprocessors[i].stage == OpStage::cache)
        {
            out.push_back(i);
        }
    }
    return out;
}

std::vector<std::size_t> TaskSpec::runtime_op_indices() const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < preprocessors.size(); ++i)
    {
        if (preprocessors[i].stage == OpStage::runtime)
        {
            out.push_back(i);
        }
    }
    return out;
}

} // namespace seqpipe
