#include "seqpipe/feature_converter.hpp"

#include <algorithm>
#include <limits>

#include "seqpipe/error.hpp"

namespace seqpipe {

const char* architecture_name(Architecture arch)
{
    switch (arch)
    {
    case Architecture::enc_dec:
        return "enc_dec";
    case Architecture::decoder_only:
        return "decoder_only";
    }
    return "unknown";
}

std::optional<Architecture> architecture_from_name(std::string_view name)
{
    if (name == "enc_dec")
    {
        return Architecture::enc_dec;
    }
    if (name == "decoder_only")
    {
        return Architecture::decoder_only;
    }
    return std::nullopt;
}

std::vector<std::int32_t> shift_right(std::span<const std::int32_t> seq)
{
    std::vector<std::int32_t> out(seq.size(), 0);
    for (std::size_t t = 1; t < seq.size(); ++t)
    {
        out[t] = seq[t - 1];
    }
    return out;
}

namespace {

// Fetches an integer feature, truncates from the right to `budget`, and
// rejects negative ids.
std::vector<std::int32_t> take_tokens(const Example& example, const char* name,
                                      std::uint32_t budget)
{
    auto it = example.features.find(name);
    if (it == example.features.end())
    {
        throw Error(ErrorCode::missing_feature, std::string("no feature \"") + name + "\" in example " +
                                                    std::to_string(example.cache_index));
    }
    if (!it->second.is_integral())
    {
        throw Error(ErrorCode::missing_feature, std::string("feature \"") + name +
                                                    "\" is not an integer sequence");
    }
    const auto& ints = it->second.ints;
    const std::size_t n = std::min<std::size_t>(ints.size(), budget);
    std::vector<std::int32_t> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        if (ints[i] < 0)
        {
            throw Error(ErrorCode::negative_id, std::string("feature \"") + name + "\" holds negative id " +
                                                    std::to_string(ints[i]));
        }
        if (ints[i] > std::numeric_limits<std::int32_t>::max())
        {
            throw Error(ErrorCode::out_of_range, std::string("feature \"") + name + "\" id " +
                                                     std::to_string(ints[i]) + " exceeds int32");
        }
        out.push_back(static_cast<std::int32_t>(ints[i]));
    }
    return out;
}

void pad_to(std::vector<std::int32_t>& seq, std::size_t length)
{
    seq.resize(length, 0);
}

ModelFeatures convert_enc_dec(const Example& example, const ConverterSpec& spec)
{
    ModelFeatures out;
    out.encoder_input_tokens = take_tokens(example, "inputs", spec.input_length);
    pad_to(out.encoder_input_tokens, spec.input_length);

    out.decoder_target_tokens = take_tokens(example, "targets", spec.target_length);
    pad_to(out.decoder_target_tokens, spec.target_length);

    out.decoder_input_tokens = shift_right(out.decoder_target_tokens);
    out.decoder_loss_weights.resize(spec.target_length);
    for (std::size_t t = 0; t < out.decoder_target_tokens.size(); ++t)
    {
        out.decoder_loss_weights[t] = out.decoder_target_tokens[t] != 0 ? 1 : 0;
    }
    return out;
}

ModelFeatures convert_decoder_only(const Example& example, const ConverterSpec& spec)
{
    const auto inputs = take_tokens(example, "inputs", spec.input_length);
    const auto targets = take_tokens(example, "targets", spec.target_length);
    const std::size_t total =
        static_cast<std::size_t>(spec.input_length) + static_cast<std::size_t>(spec.target_length);

    ModelFeatures out;
    out.decoder_target_tokens.reserve(total);
    out.decoder_target_tokens.insert(out.decoder_target_tokens.end(), inputs.begin(), inputs.end());
    out.decoder_target_tokens.insert(out.decoder_target_tokens.end(), targets.begin(), targets.end());
    pad_to(out.decoder_target_tokens, total);

    out.decoder_input_tokens = shift_right(out.decoder_target_tokens);
    out.decoder_loss_weights.resize(total, 0);
    for (std::size_t t = 0; t < total; ++t)
    {
        const bool in_input_segment = t < inputs.size();
        if (in_input_segment && !spec.loss_on_inputs)
        {
            continue;
        }
        out.decoder_loss_weights[t] = out.decoder_target_tokens[t] != 0 ? 1 : 0;
    }
    return out;
}

} // namespace

ModelFeatures convert(const Example& example, const ConverterSpec& spec)
{
    if (spec.input_length < 1 || spec.target_length < 1)
    {
        throw Error(ErrorCode::invalid_spec, "converter lengths must be >= 1");
    }
    switch (spec.architecture)
    {
    case Architecture::enc_dec:
        return convert_enc_dec(example, spec);
    case Architecture::decoder_only:
        return convert_decoder_only(example, spec);
    }
    throw Error(ErrorCode::invalid_spec, "unhandled architecture");
}

} // namespace seqpipe
