#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "seqpipe/registry.hpp"

namespace seqpipe {

using TokenSeq = std::vector<std::int32_t>;

struct EvalPair {
    std::uint64_t cache_index = 0;
    TokenSeq target;
    TokenSeq prediction;
};

// Corpus-level metric: aligned (target, prediction) pairs -> named values.
// Pairs arrive sorted by cache_index, making every metric order-independent.
using MetricFn = std::function<std::map<std::string, double>(const std::vector<EvalPair>&)>;

// Built-in metrics: exact_match, token_accuracy.
const std::map<std::string, MetricFn>& metric_registry();
bool metric_exists(const std::string& name);

struct EvalReport {
    std::string task;
    std::string split;
    std::uint64_t num_examples = 0;
    std::map<std::string, double> metrics;
    std::vector<EvalPair> pairs; // retained only when requested

    // Deterministic structured-text rendering (one key=value line per field).
    std::string to_text() const;
};

using Predictions = std::map<std::uint64_t, TokenSeq>;

// UTF-8 lines of `cache_index<TAB>space-separated token ids`.
Predictions load_predictions_file(const std::filesystem::path& path);

// Reads the split's cache, aligns predictions to targets by cache_index and
// runs every metric attached to the task. Predictions must cover each
// cache_index exactly once.
EvalReport evaluate(const Registry& registry, const std::filesystem::path& cache_root,
                    const std::string& task, const std::string& split,
                    const Predictions& predictions, bool keep_pairs = false);

} // namespace seqpipe
