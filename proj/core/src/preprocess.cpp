#include "seqpipe/preprocess.hpp"

#include <algorithm>

#include "seqpipe/error.hpp"
#include "seqpipe/prf.hpp"

namespace seqpipe {

const Vocabulary& VocabularyCache::get(const std::string& ref)
{
    auto it = cache_.find(ref);
    if (it == cache_.end())
    {
        it = cache_.emplace(ref, Vocabulary::resolve(ref)).first;
    }
    return it->second;
}

namespace {

Feature& require_feature(Example& example, const std::string& name, const PreprocessorSpec& op)
{
    auto it = example.features.find(name);
    if (it == example.features.end())
    {
        throw Error(ErrorCode::preprocessor_failure,
                    op.describe() + " references missing feature \"" + name + "\"");
    }
    return it->second;
}

void tokenize(const PreprocessorSpec& op, Example& example, VocabularyCache& vocabs)
{
    const Vocabulary& vocab = vocabs.get(op.vocab_ref);
    for (const auto& name : op.features)
    {
        Feature& feature = require_feature(example, name, op);
        if (feature.dtype != Dtype::bytes)
        {
            throw Error(ErrorCode::preprocessor_failure,
                        "tokenize expects a bytes feature, \"" + name + "\" is " +
                            dtype_name(feature.dtype));
        }
        const auto ids = vocab.encode(feature.bytes);
        Feature tokenized;
        tokenized.dtype = Dtype::int32;
        tokenized.ints.assign(ids.begin(), ids.end());
        feature = std::move(tokenized);
    }
}

void append_eos(const PreprocessorSpec& op, Example& example)
{
    for (const auto& name : op.features)
    {
        Feature& feature = require_feature(example, name, op);
        if (!feature.is_integral())
        {
            throw Error(ErrorCode::preprocessor_failure,
                        "append_eos expects an integer feature, \"" + name + "\" is " +
                            dtype_name(feature.dtype));
        }
        feature.ints.push_back(Vocabulary::kEosId);
    }
}

void lowercase(const PreprocessorSpec& op, Example& example)
{
    for (const auto& name : op.features)
    {
        Feature& feature = require_feature(example, name, op);
        if (feature.dtype != Dtype::bytes)
        {
            throw Error(ErrorCode::preprocessor_failure,
                        "lowercase expects a bytes feature, \"" + name + "\" is " +
                            dtype_name(feature.dtype));
        }
        for (char& c : feature.bytes)
        {
            if (c >= 'A' && c <= 'Z')
            {
                c = static_cast<char>(c - 'A' + 'a');
            }
        }
    }
}

// Replaces one contiguous span with unk. The span covers floor(rate * n)
// positions (at least one); its start is drawn from the op's counter stream.
void random_span_mask(const PreprocessorSpec& op, Example& example, std::uint64_t seed)
{
    Feature& feature = require_feature(example, op.features.front(), op);
    if (!feature.is_integral())
    {
        throw Error(ErrorCode::preprocessor_failure,
                    "random_span_mask expects an integer feature, \"" + op.features.front() +
                        "\" is " + dtype_name(feature.dtype));
    }
    const std::uint64_t n = feature.ints.size();
    if (n == 0)
    {
        return;
    }
    const std::uint64_t span = std::clamp<std::uint64_t>(
        static_cast<std::uint64_t>(op.rate * static_cast<double>(n)), 1, n);
    PrfStream stream(seed);
    const std::uint64_t start = stream.next_below(n - span + 1);
    for (std::uint64_t i = start; i < start + span; ++i)
    {
        feature.ints[i] = Vocabulary::kUnkId;
    }
}

} // namespace

void apply_preprocessor(const PreprocessorSpec& op, Example& example, std::uint64_t seed,
                        VocabularyCache& vocabs)
{
    switch (op.op)
    {
    case OpKind::tokenize:
        tokenize(op, example, vocabs);
        break;
    case OpKind::append_eos:
        append_eos(op, example);
        break;
    case OpKind::lowercase:
        lowercase(op, example);
        break;
    case OpKind::random_span_mask:
        random_span_mask(op, example, seed);
        break;
    }
}

} // namespace seqpipe
