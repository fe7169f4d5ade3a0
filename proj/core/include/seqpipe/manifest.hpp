#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "seqpipe/task.hpp"
#include "seqpipe/types.hpp"

namespace seqpipe {

// Immutable descriptor of a built cache; the root of all determinism
// guarantees. Serialized as manifest.json with fixed key order so identical
// builds produce identical bytes. Written last during a build: its presence
// marks the cache complete.
struct CacheManifest {
    static constexpr int kFormatVersion = 1;
    static constexpr const char* kFileName = "manifest.json";

    int format_version = kFormatVersion;
    std::string task_name;
    std::string split;
    std::uint64_t num_examples = 0;
    std::uint32_t num_shards = 1;
    std::uint64_t seed = 0;
    std::vector<FeatureSpec> schema;
    std::uint64_t fingerprint = 0;

    // Number of records stored in one shard under index-modulo placement.
    std::uint64_t shard_record_count(std::uint32_t shard) const;

    void save(const std::filesystem::path& cache_dir) const;
    static CacheManifest load(const std::filesystem::path& cache_dir);
    static bool exists(const std::filesystem::path& cache_dir);
};

// PRF-fold over task name, source kind and location, each cache-stage op
// descriptor in order, seed and shard count. Runtime-stage ops are excluded:
// they do not affect cache bytes.
std::uint64_t fingerprint_task(const TaskSpec& spec, std::uint64_t seed, std::uint32_t num_shards);

// Canonical cache directory layout: <root>/<task>/<split>/
std::filesystem::path cache_dir_for(const std::filesystem::path& root, std::string_view task,
                                    std::string_view split);

} // namespace seqpipe
