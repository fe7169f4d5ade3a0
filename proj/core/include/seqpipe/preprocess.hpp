#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>

#include "seqpipe/task.hpp"
#include "seqpipe/types.hpp"
#include "seqpipe/vocabulary.hpp"

namespace seqpipe {

// Lazily resolves and caches vocabularies by ref. Not thread-safe; use one
// instance per worker or stream.
class VocabularyCache {
  public:
    const Vocabulary& get(const std::string& ref);

  private:
    std::unordered_map<std::string, Vocabulary> cache_;
};

// Applies one preprocessor in place. Stochastic ops draw from the counter
// stream seeded with `seed`; deterministic ops ignore it. Throws
// preprocessor_failure on missing features or dtype mismatches.
void apply_preprocessor(const PreprocessorSpec& op, Example& example, std::uint64_t seed,
                        VocabularyCache& vocabs);

} // namespace seqpipe
