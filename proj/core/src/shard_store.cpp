#include "seqpipe/shard_store.hpp"

#include <cstdio>
#include <cstring>

#include "seqpipe/crc32c.hpp"
#include "seqpipe/error.hpp"
#include "seqpipe/record_codec.hpp"

namespace seqpipe {

namespace {

std::string zero_padded(std::uint32_t value)
{
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05u", value);
    return buf;
}

void append_u64_le(std::string& out, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i)
    {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

std::uint32_t read_u32_le(const char* p)
{
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
    {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    }
    return v;
}

std::uint64_t read_u64_le(const char* p)
{
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
    {
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    }
    return v;
}

} // namespace

std::string shard_basename(std::uint32_t shard, std::uint32_t num_shards)
{
    return "data-" + zero_padded(shard) + "-of-" + zero_padded(num_shards);
}

std::filesystem::path shard_rec_path(const std::filesystem::path& dir, std::uint32_t shard,
                                     std::uint32_t num_shards)
{
    return dir / (shard_basename(shard, num_shards) + ".rec");
}

std::filesystem::path shard_idx_path(const std::filesystem::path& dir, std::uint32_t shard,
                                     std::uint32_t num_shards)
{
    return dir / (shard_basename(shard, num_shards) + ".idx");
}

ShardWriter::ShardWriter(const std::filesystem::path& dir, std::uint32_t shard,
                         std::uint32_t num_shards)
    : rec_path_(shard_rec_path(dir, shard, num_shards)),
      idx_path_(shard_idx_path(dir, shard, num_shards)), shard_(shard), num_shards_(num_shards)
{
    rec_.open(rec_path_, std::ios::binary | std::ios::trunc);
    idx_.open(idx_path_, std::ios::binary | std::ios::trunc);
    if (!rec_ || !idx_)
    {
        throw Error(ErrorCode::io_failure, "cannot open shard files for " + rec_path_.string());
    }
}

ShardWriter::~ShardWriter()
{
    if (!finalized_)
    {
        // Destructor cleanup without the flush checks; callers that care about
        // durability must call finalize().
        rec_.close();
        idx_.close();
    }
}

void ShardWriter::append(const Example& example)
{
    append_raw(example.cache_index, encode_payload(example));
}

void ShardWriter::append_raw(std::uint64_t cache_index, std::string payload)
{
    const std::uint64_t expected = record_count_ * num_shards_ + shard_;
    if (cache_index % num_shards_ != shard_)
    {
        throw Error(ErrorCode::index_mismatch,
                    "cache_index " + std::to_string(cache_index) + " does not belong to shard " +
                        std::to_string(shard_) + " of " + std::to_string(num_shards_));
    }
    if (cache_index != expected)
    {
        throw Error(ErrorCode::index_mismatch,
                    "cache_index " + std::to_string(cache_index) + " out of order; slot " +
                        std::to_string(record_count_) + " of shard " + std::to_string(shard_) +
                        " expects " + std::to_string(expected));
    }
    const std::string framed = frame_record(payload);
    rec_.write(framed.data(), static_cast<std::streamsize>(framed.size()));
    std::string offset_bytes;
    append_u64_le(offset_bytes, byte_offset_);
    idx_.write(offset_bytes.data(), static_cast<std::streamsize>(offset_bytes.size()));
    if (!rec_ || !idx_)
    {
        throw Error(ErrorCode::io_failure, "write failed on " + rec_path_.string());
    }
    byte_offset_ += framed.size();
    ++record_count_;
}

void ShardWriter::finalize()
{
    rec_.flush();
    idx_.flush();
    if (!rec_ || !idx_)
    {
        throw Error(ErrorCode::io_failure, "flush failed on " + rec_path_.string());
    }
    rec_.close();
    idx_.close();
    finalized_ = true;
}

ShardReader::ShardReader(const std::filesystem::path& dir, std::uint32_t shard,
                         std::uint32_t num_shards)
    : rec_path_(shard_rec_path(dir, shard, num_shards)), shard_(shard)
{
    const auto idx_path = shard_idx_path(dir, shard, num_shards);
    std::ifstream idx(idx_path, std::ios::binary);
    if (!idx)
    {
        throw Error(ErrorCode::cache_missing, "missing index file " + idx_path.string());
    }
    std::string raw((std::istreambuf_iterator<char>(idx)), std::istreambuf_iterator<char>());
    if (raw.size() % 8 != 0)
    {
        throw Error(ErrorCode::corrupt_record, "index file size not a multiple of 8: " + idx_path.string());
    }
    offsets_.reserve(raw.size() / 8);
    for (std::size_t pos = 0; pos < raw.size(); pos += 8)
    {
        offsets_.push_back(read_u64_le(raw.data() + pos));
    }
    rec_.open(rec_path_, std::ios::binary);
    if (!rec_)
    {
        throw Error(ErrorCode::cache_missing, "missing record file " + rec_path_.string());
    }
}

Example ShardReader::read(std::uint64_t k)
{
    if (k >= offsets_.size())
    {
        throw Error(ErrorCode::out_of_range, "record " + std::to_string(k) + " >= count " +
                                                 std::to_string(offsets_.size()) + " in shard " +
                                                 std::to_string(shard_));
    }
    rec_.clear();
    rec_.seekg(static_cast<std::streamoff>(offsets_[k]));
    char header[kRecordHeaderBytes];
    rec_.read(header, sizeof(header));
    if (!rec_)
    {
        throw Error(ErrorCode::corrupt_record,
                    "short read of record header, shard " + std::to_string(shard_) + " record " +
                        std::to_string(k));
    }
    const std::uint32_t length = read_u32_le(header);
    const std::uint32_t expected_crc = read_u32_le(header + 4);
    std::string payload(length, '\0');
    rec_.read(payload.data(), static_cast<std::streamsize>(length));
    if (!rec_)
    {
        throw Error(ErrorCode::corrupt_record, "short read of record payload, shard " +
                                                   std::to_string(shard_) + " record " +
                                                   std::to_string(k));
    }
    if (crc32c(payload) != expected_crc)
    {
        throw Error(ErrorCode::corrupt_record, "CRC mismatch, shard " + std::to_string(shard_) +
                                                   " record " + std::to_string(k));
    }
    stats_.payload_records_read += 1;
    stats_.payload_bytes_read += payload.size();
    return decode_payload(payload);
}

const char* violation_kind_name(CacheViolation::Kind kind)
{
    switch (kind)
    {
    case CacheViolation::Kind::manifest_invalid:
        return "ManifestInvalid";
    case CacheViolation::Kind::missing_file:
        return "MissingFile";
    case CacheViolation::Kind::truncated_record:
        return "TruncatedRecord";
    case CacheViolation::Kind::crc_mismatch:
        return "CrcMismatch";
    case CacheViolation::Kind::index_mismatch:
        return "IndexMismatch";
    case CacheViolation::Kind::offset_mismatch:
        return "OffsetMismatch";
    case CacheViolation::Kind::schema_mismatch:
        return "SchemaMismatch";
    case CacheViolation::Kind::count_mismatch:
        return "CountMismatch";
    }
    return "Unknown";
}

namespace {

// Returns the number of complete records actually present in the shard.
std::uint64_t verify_shard(const std::filesystem::path& cache_dir, const CacheManifest& manifest,
                           std::uint32_t shard, VerifyReport& report)
{
    auto violate = [&](CacheViolation::Kind kind, std::int64_t record, std::string detail) {
        report.violations.push_back({kind, static_cast<std::int64_t>(shard), record, std::move(detail)});
    };

    const auto rec_path = shard_rec_path(cache_dir, shard, manifest.num_shards);
    const auto idx_path = shard_idx_path(cache_dir, shard, manifest.num_shards);
    std::error_code ec;
    const bool have_rec = std::filesystem::is_regular_file(rec_path, ec);
    const bool have_idx = std::filesystem::is_regular_file(idx_path, ec);
    if (!have_rec)
    {
        violate(CacheViolation::Kind::missing_file, -1, rec_path.filename().string());
    }
    if (!have_idx)
    {
        violate(CacheViolation::Kind::missing_file, -1, idx_path.filename().string());
    }
    if (!have_rec)
    {
        return 0;
    }

    std::vector<std::uint64_t> idx_offsets;
    if (have_idx)
    {
        std::ifstream idx(idx_path, std::ios::binary);
        std::string raw((std::istreambuf_iterator<char>(idx)), std::istreambuf_iterator<char>());
        if (raw.size() % 8 != 0)
        {
            violate(CacheViolation::Kind::truncated_record, -1, "idx size not a multiple of 8");
        }
        for (std::size_t pos = 0; pos + 8 <= raw.size(); pos += 8)
        {
            idx_offsets.push_back(read_u64_le(raw.data() + pos));
        }
    }

    std::ifstream rec(rec_path, std::ios::binary);
    std::string data((std::istreambuf_iterator<char>(rec)), std::istreambuf_iterator<char>());
    const std::uint64_t expected_count = manifest.shard_record_count(shard);

    std::uint64_t pos = 0;
    std::uint64_t k = 0;
    while (pos < data.size())
    {
        if (data.size() - pos < kRecordHeaderBytes)
        {
            violate(CacheViolation::Kind::truncated_record, static_cast<std::int64_t>(k),
                    "trailing bytes shorter than a record header");
            break;
        }
        const std::uint32_t length = read_u32_le(data.data() + pos);
        const std::uint32_t expected_crc = read_u32_le(data.data() + pos + 4);
        if (data.size() - pos - kRecordHeaderBytes < length)
        {
            violate(CacheViolation::Kind::truncated_record, static_cast<std::int64_t>(k),
                    "record extends past end of file");
            break;
        }
        if (k < idx_offsets.size() && idx_offsets[k] != pos)
        {
            violate(CacheViolation::Kind::offset_mismatch, static_cast<std::int64_t>(k),
                    "idx offset " + std::to_string(idx_offsets[k]) + " != actual " + std::to_string(pos));
        }
        const std::string_view payload(data.data() + pos + kRecordHeaderBytes, length);
        if (crc32c(payload) != expected_crc)
        {
            violate(CacheViolation::Kind::crc_mismatch, static_cast<std::int64_t>(k), "payload CRC mismatch");
        }
        else
        {
            try
            {
                const Example example = decode_payload(payload);
                const std::uint64_t expected_index = k * manifest.num_shards + shard;
                if (example.cache_index != expected_index)
                {
                    violate(CacheViolation::Kind::index_mismatch, static_cast<std::int64_t>(k),
                            "cache_index " + std::to_string(example.cache_index) + " != " +
                                std::to_string(expected_index));
                }
                if (example.features.size() != manifest.schema.size())
                {
                    violate(CacheViolation::Kind::schema_mismatch, static_cast<std::int64_t>(k),
                            "feature count " + std::to_string(example.features.size()) + " != schema size " +
                                std::to_string(manifest.schema.size()));
                }
                else
                {
                    for (const auto& spec : manifest.schema)
                    {
                        auto it = example.features.find(spec.name);
                        if (it == example.features.end())
                        {
                            violate(CacheViolation::Kind::schema_mismatch, static_cast<std::int64_t>(k),
                                    "missing feature \"" + spec.name + "\"");
                        }
                        else if (it->second.dtype != spec.dtype)
                        {
                            violate(CacheViolation::Kind::schema_mismatch, static_cast<std::int64_t>(k),
                                    "feature \"" + spec.name + "\" dtype " + dtype_name(it->second.dtype) +
                                        " != " + dtype_name(spec.dtype));
                        }
                    }
                }
            }
            catch (const Error& e)
            {
                violate(CacheViolation::Kind::truncated_record, static_cast<std::int64_t>(k), e.what());
            }
        }
        pos += kRecordHeaderBytes + length;
        ++k;
    }

    if (have_idx && idx_offsets.size() != k)
    {
        violate(CacheViolation::Kind::count_mismatch, -1,
                "idx lists " + std::to_string(idx_offsets.size()) + " records, rec holds " +
                    std::to_string(k));
    }
    if (k != expected_count)
    {
        violate(CacheViolation::Kind::count_mismatch, -1,
                "shard holds " + std::to_string(k) + " records, manifest implies " +
                    std::to_string(expected_count));
    }
    return k;
}

} // namespace

VerifyReport verify_cache(const std::filesystem::path& cache_dir)
{
    VerifyReport report;
    CacheManifest manifest;
    try
    {
        manifest = CacheManifest::load(cache_dir);
    }
    catch (const Error& e)
    {
        report.violations.push_back({CacheViolation::Kind::manifest_invalid, -1, -1, e.what()});
        return report;
    }

    std::uint64_t total = 0;
    for (std::uint32_t shard = 0; shard < manifest.num_shards; ++shard)
    {
        total += verify_shard(cache_dir, manifest, shard, report);
    }
    if (total != manifest.num_examples)
    {
        report.violations.push_back({CacheViolation::Kind::count_mismatch, -1, -1,
                                     "shards hold " + std::to_string(total) + " records, manifest says " +
                                         std::to_string(manifest.num_examples)});
    }
    return report;
}

} // namespace seqpipe
