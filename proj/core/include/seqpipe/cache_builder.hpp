#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "seqpipe/manifest.hpp"
#include "seqpipe/registry.hpp"

namespace seqpipe {

struct BuildConfig {
    std::string task;
    std::string split;
    std::uint64_t seed = 0;
    std::uint32_t num_shards = 1;
    std::uint32_t num_workers = 1;
    // Caches are written to <output_root>/<task>/<split>/, which must be
    // empty or absent at the start of the build.
    std::filesystem::path output_root;
    // Builds with at most this many examples sort in memory; larger builds
    // stream a k-way merge over the sorted worker runs. Both paths produce
    // identical bytes.
    std::uint64_t in_memory_merge_limit = 1'000'000;
};

// Seed for stochastic preprocessor `op_index` on source example
// `source_index`; equals prf64(pipeline_seed, source_index, op_index).
std::uint64_t example_seed(std::uint64_t pipeline_seed, std::uint64_t source_index,
                           std::uint64_t op_index);

// The offline deterministic job: enumerate the raw source, apply cache-stage
// preprocessors with per-example seeds, globally shuffle by sorting on
// (prf64(seed, source_index), source_index), assign ordered cache indices,
// and write index-modulo sharded files. The manifest is written last; output
// bytes are independent of num_workers.
CacheManifest build_cache(const Registry& registry, const BuildConfig& config);

} // namespace seqpipe
