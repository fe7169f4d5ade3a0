#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "seqpipe/types.hpp"

namespace seqpipe {

enum class Architecture { enc_dec, decoder_only };

const char* architecture_name(Architecture arch);
std::optional<Architecture> architecture_from_name(std::string_view name);

struct ConverterSpec {
    Architecture architecture = Architecture::enc_dec;
    std::uint32_t input_length = 1;  // budget for the "inputs" feature
    std::uint32_t target_length = 1; // budget for the "targets" feature
    bool loss_on_inputs = false;     // decoder_only only
};

// Model-ready features. enc_dec fills all four members; decoder_only leaves
// encoder_input_tokens empty and uses length input_length + target_length for
// the rest.
struct ModelFeatures {
    std::vector<std::int32_t> encoder_input_tokens;
    std::vector<std::int32_t> decoder_input_tokens;
    std::vector<std::int32_t> decoder_target_tokens;
    std::vector<std::int32_t> decoder_loss_weights;

    bool operator==(const ModelFeatures&) const = default;
};

// Teacher-forcing shift: output[0] = 0, output[t] = input[t-1]; the last
// element is dropped.
std::vector<std::int32_t> shift_right(std::span<const std::int32_t> seq);

// Pure reshaping from task features ("inputs", "targets" integer sequences)
// to model features. Over-long sequences are truncated from the right, which
// may drop a task-appended EOS. Throws missing_feature / negative_id.
ModelFeatures convert(const Example& example, const ConverterSpec& spec);

} // namespace seqpipe
