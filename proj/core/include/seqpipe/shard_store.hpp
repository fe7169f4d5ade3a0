#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "seqpipe/manifest.hpp"
#include "seqpipe/types.hpp"

namespace seqpipe {

// "data-SSSSS-of-FFFFF" (5-digit zero-padded decimal).
std::string shard_basename(std::uint32_t shard, std::uint32_t num_shards);
std::filesystem::path shard_rec_path(const std::filesystem::path& dir, std::uint32_t shard,
                                     std::uint32_t num_shards);
std::filesystem::path shard_idx_path(const std::filesystem::path& dir, std::uint32_t shard,
                                     std::uint32_t num_shards);

// Appends CRC-framed records to one shard. Enforces index-modulo placement:
// record k must carry cache_index == k * num_shards + shard. A shard has
// exactly one writer; files are immutable after finalize().
class ShardWriter {
  public:
    ShardWriter(const std::filesystem::path& dir, std::uint32_t shard, std::uint32_t num_shards);
    ~ShardWriter();

    ShardWriter(const ShardWriter&) = delete;
    ShardWriter& operator=(const ShardWriter&) = delete;

    void append(const Example& example);

    // Same placement contract, but takes an already-encoded payload whose
    // embedded index equals cache_index. Used by the builder's merge phase.
    void append_raw(std::uint64_t cache_index, std::string payload);

    void finalize();

    std::uint64_t record_count() const
    {
        return record_count_;
    }

  private:
    std::filesystem::path rec_path_;
    std::filesystem::path idx_path_;
    std::ofstream rec_;
    std::ofstream idx_;
    std::uint32_t shard_ = 0;
    std::uint32_t num_shards_ = 1;
    std::uint64_t record_count_ = 0;
    std::uint64_t byte_offset_ = 0;
    bool finalized_ = false;
};

struct ReadStats {
    std::uint64_t payload_records_read = 0;
    std::uint64_t payload_bytes_read = 0;
};

// Random-access reader over one finalized shard. Offsets come from the .idx
// file, so a read costs one seek regardless of position. Single consumer per
// instance; open as many instances as needed for concurrent reads.
class ShardReader {
  public:
    ShardReader(const std::filesystem::path& dir, std::uint32_t shard, std::uint32_t num_shards);

    std::uint64_t record_count() const
    {
        return offsets_.size();
    }

    // Seeks, validates CRC, decodes. Throws out_of_range / corrupt_record.
    Example read(std::uint64_t k);

    const ReadStats& stats() const
    {
        return stats_;
    }

  private:
    std::filesystem::path rec_path_;
    std::ifstream rec_;
    std::vector<std::uint64_t> offsets_;
    std::uint32_t shard_ = 0;
    ReadStats stats_;
};

struct CacheViolation {
    enum class Kind {
        manifest_invalid,
        missing_file,
        truncated_record,
        crc_mismatch,
        index_mismatch,
        offset_mismatch,
        schema_mismatch,
        count_mismatch,
    };

    Kind kind;
    std::int64_t shard = -1;  // -1 when not shard-specific
    std::int64_t record = -1; // -1 when not record-specific
    std::string detail;
};

const char* violation_kind_name(CacheViolation::Kind kind);

struct VerifyReport {
    std::vector<CacheViolation> violations;

    bool ok() const
    {
        return violations.empty();
    }
};

// Full structural audit of a cache directory: file presence, record counts,
// index-modulo placement, CRCs, idx offsets and schema conformance. Collects
// every violation instead of aborting on the first.
VerifyReport verify_cache(const std::filesystem::path& cache_dir);

} // namespace seqpipe
