#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "seqpipe/types.hpp"

namespace seqpipe {

enum class SourceKind {
    text_lines, // one example per line
    tsv_pairs,  // (input, target) per tab-separated line
    record_dir, // an already-built cache directory, enumerated by cache_index
};

const char* source_kind_name(SourceKind kind);
std::optional<SourceKind> source_kind_from_name(std::string_view name);

struct DataSourceSpec {
    SourceKind kind = SourceKind::text_lines;
    // May contain the literal "{split}", substituted with the split name at
    // enumeration time.
    std::string location;
    // Source field -> feature name. Defaults when empty:
    //   text_lines: {"line" -> "text"}, tsv_pairs: {"0" -> "inputs",
    //   "1" -> "targets"}, record_dir: identity.
    std::map<std::string, std::string> field_map;

    std::map<std::string, std::string> effective_field_map() const;
    std::string location_for_split(std::string_view split) const;

    bool operator==(const DataSourceSpec&) const = default;
};

enum class OpKind {
    tokenize,         // bytes -> int32 token ids via a vocabulary
    append_eos,       // append eos id to integer sequences
    lowercase,        // ASCII lowercase on byte strings
    random_span_mask, // replace one contiguous span with unk, seeded
};

const char* op_kind_name(OpKind kind);
std::optional<OpKind> op_kind_from_name(std::string_view name);

enum class OpStage { cache, runtime };

struct PreprocessorSpec {
    OpKind op = OpKind::tokenize;
    OpStage stage = OpStage::cache;
    std::vector<std::string> features; // target feature names (single entry for random_span_mask)
    std::string vocab_ref;             // tokenize only
    double rate = 0.0;                 // random_span_mask only, in (0, 1)

    // Canonical descriptor folded into cache fingerprints; stable format.
    std::string describe() const;

    bool operator==(const PreprocessorSpec&) const = default;
};

struct TaskSpec {
    std::string name;
    DataSourceSpec source;
    std::vector<PreprocessorSpec> preprocessors;
    std::vector<FeatureSpec> schema;
    std::vector<std::string> metrics;
    std::set<std::string> splits;

    // Indices into preprocessors, preserving order.
    std::vector<std::size_t> cache_op_indices() const;
    std::vector<std::size_t> runtime_op_indices() const;

    bool operator==(const TaskSpec&) const = default;
};

struct MixtureSpec {
    std::string name;
    // (child task or mixture name, positive rate)
    std::vector<std::pair<std::string, double>> components;

    bool operator==(const MixtureSpec&) const = default;
};

} // namespace seqpipe
