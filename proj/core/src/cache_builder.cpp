#include "seqpipe/cache_builder.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <memory>
#include <queue>
#include <thread>
#include <vector>

#include "seqpipe/crc32c.hpp"
#include "seqpipe/error.hpp"
#include "seqpipe/preprocess.hpp"
#include "seqpipe/prf.hpp"
#include "seqpipe/record_codec.hpp"
#include "seqpipe/shard_store.hpp"

namespace seqpipe {

std::uint64_t example_seed(std::uint64_t pipeline_seed, std::uint64_t source_index,
                           std::uint64_t op_index)
{
    return prf64(pipeline_seed, source_index, op_index);
}

namespace {

void append_u32_le(std::string& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
    {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
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

// Overwrites the embedded cache_index (first 8 payload bytes).
void patch_cache_index(std::string& payload, std::uint64_t cache_index)
{
    for (int i = 0; i < 8; ++i)
    {
        payload[static_cast<std::size_t>(i)] = static_cast<char>((cache_index >> (8 * i)) & 0xFF);
    }
}

// ---------------------------------------------------------------------------
// Source enumeration

std::vector<Example> enumerate_text_lines(const std::string& location, const std::string& feature)
{
    std::ifstream in(location, std::ios::binary);
    if (!in)
    {
        throw Error(ErrorCode::source_unreadable, "cannot open " + location);
    }
    std::vector<Example> out;
    std::string line;
    while (std::getline(in, line))
    {
        if (!line.empty() && line.back() == '\r')
        {
            line.pop_back();
        }
        Example ex;
        ex.cache_index = out.size(); // source_index until indices are assigned
        ex.features[feature] = Feature::byte_string(line);
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<Example> enumerate_tsv_pairs(const std::string& location,
                                         const std::map<std::string, std::string>& field_map)
{
    std::ifstream in(location, std::ios::binary);
    if (!in)
    {
        throw Error(ErrorCode::source_unreadable, "cannot open " + location);
    }
    std::vector<Example> out;
    std::string line;
    while (std::getline(in, line))
    {
        if (!line.empty() && line.back() == '\r')
        {
            line.pop_back();
        }
        std::vector<std::string> columns;
        std::size_t start = 0;
        while (true)
        {
            const auto tab = line.find('\t', start);
            columns.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
            if (tab == std::string::npos)
            {
                break;
            }
            start = tab + 1;
        }
        Example ex;
        ex.cache_index = out.size();
        for (const auto& [column, feature] : field_map)
        {
            std::size_t index = 0;
            try
            {
                index = std::stoul(column);
            }
            catch (...)
            {
                throw Error(ErrorCode::invalid_spec,
                            "tsv_pairs field key \"" + column + "\" is not a column index");
            }
            if (index >= columns.size())
            {
                throw Error(ErrorCode::source_unreadable,
                            location + " line " + std::to_string(out.size() + 1) + " has " +
                                std::to_string(columns.size()) + " columns, field map needs column " +
                                column);
            }
            ex.features[feature] = Feature::byte_string(columns[index]);
        }
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<Example> enumerate_record_dir(const std::string& location,
                                          const std::map<std::string, std::string>& rename)
{
    const std::filesystem::path dir(location);
    if (!CacheManifest::exists(dir))
    {
        throw Error(ErrorCode::source_unreadable, "no cache manifest under " + location);
    }
    const auto manifest = CacheManifest::load(dir);
    std::vector<std::unique_ptr<ShardReader>> readers;
    for (std::uint32_t f = 0; f < manifest.num_shards; ++f)
    {
        readers.push_back(std::make_unique<ShardReader>(dir, f, manifest.num_shards));
    }
    std::vector<Example> out;
    out.reserve(manifest.num_examples);
    for (std::uint64_t i = 0; i < manifest.num_examples; ++i)
    {
        Example ex = readers[i % manifest.num_shards]->read(i / manifest.num_shards);
        ex.cache_index = i;
        if (!rename.empty())
        {
            Example renamed;
            renamed.cache_index = ex.cache_index;
            for (auto& [name, feature] : ex.features)
            {
                auto it = rename.find(name);
                renamed.features[it == rename.end() ? name : it->second] = std::move(feature);
            }
            ex = std::move(renamed);
        }
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<Example> enumerate_source(const DataSourceSpec& source, const std::string& split)
{
    const auto location = source.location_for_split(split);
    const auto fields = source.effective_field_map();
    switch (source.kind)
    {
    case SourceKind::text_lines:
        if (fields.size() != 1)
        {
            throw Error(ErrorCode::invalid_spec, "text_lines takes exactly one field mapping");
        }
        return enumerate_text_lines(location, fields.begin()->second);
    case SourceKind::tsv_pairs:
        return enumerate_tsv_pairs(location, fields);
    case SourceKind::record_dir:
        return enumerate_record_dir(location, fields);
    }
    throw Error(ErrorCode::invalid_spec, "unhandled source kind");
}

// ---------------------------------------------------------------------------
// Phase 1: per-worker preprocessing into sorted keyed runs

struct KeyedPayload {
    std::uint64_t shuffle_key = 0;
    std::uint64_t source_index = 0;
    std::string payload; // encoded record payload, index slot = source_index

    bool operator<(const KeyedPayload& other) const
    {
        if (shuffle_key != other.shuffle_key)
        {
            return shuffle_key < other.shuffle_key;
        }
        return source_index < other.source_index;
    }
};

void check_schema(const Example& example, const TaskSpec& spec, std::uint64_t source_index)
{
    if (example.features.size() != spec.schema.size())
    {
        throw Error(ErrorCode::preprocessor_failure,
                    "source example " + std::to_string(source_index) + " produced " +
                        std::to_string(example.features.size()) + " features, schema has " +
                        std::to_string(spec.schema.size()));
    }
    for (const auto& feature : spec.schema)
    {
        auto it = example.features.find(feature.name);
        if (it == example.features.end())
        {
            throw Error(ErrorCode::preprocessor_failure,
                        "source example " + std::to_string(source_index) + " is missing feature \"" +
                            feature.name + "\"");
        }
        if (it->second.dtype != feature.dtype)
        {
            throw Error(ErrorCode::preprocessor_failure,
                        "source example " + std::to_string(source_index) + " feature \"" + feature.name +
                            "\" has dtype " + dtype_name(it->second.dtype) + ", schema says " +
                            dtype_name(feature.dtype));
        }
    }
}

std::filesystem::path run_path(const std::filesystem::path& tmp_dir, std::uint32_t worker)
{
    char buf[16];
    std::snprintf(buf, sizeof(buf), "run-%05u", worker);
    return tmp_dir / buf;
}

// Temp run record: u64 shuffle key, u64 source index, then the CRC-framed
// payload. Runs are sorted by (key, source index) before writing.
void write_run(const std::filesystem::path& path, std::vector<KeyedPayload>& records)
{
    std::sort(records.begin(), records.end());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
    {
        throw Error(ErrorCode::io_failure, "cannot open temp run " + path.string());
    }
    std::string buffer;
    for (const auto& record : records)
    {
        buffer.clear();
        append_u64_le(buffer, record.shuffle_key);
        append_u64_le(buffer, record.source_index);
        append_u32_le(buffer, static_cast<std::uint32_t>(record.payload.size()));
        append_u32_le(buffer, crc32c(record.payload));
        buffer += record.payload;
        out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    }
    out.flush();
    if (!out)
    {
        throw Error(ErrorCode::io_failure, "failed to write temp run " + path.string());
    }
}

void preprocess_range(const TaskSpec& spec, const BuildConfig& config,
                      std::vector<Example>& raw_examples, std::uint64_t begin, std::uint64_t end,
                      const std::filesystem::path& out_path)
{
    VocabularyCache vocabs;
    const auto cache_ops = spec.cache_op_indices();
    std::vector<KeyedPayload> records;
    records.reserve(end - begin);
    for (std::uint64_t i = begin; i < end; ++i)
    {
        Example& example = raw_examples[i];
        for (std::size_t op_index : cache_ops)
        {
            try
            {
                apply_preprocessor(spec.preprocessors[op_index], example,
                                   example_seed(config.seed, i, op_index), vocabs);
            }
            catch (const Error& e)
            {
                throw Error(ErrorCode::preprocessor_failure,
                            "op " + std::to_string(op_index) + " failed on source example " +
                                std::to_string(i) + ": " + e.what());
            }
        }
        check_schema(example, spec, i);
        KeyedPayload record;
        record.shuffle_key = prf64(config.seed, i);
        record.source_index = i;
        example.cache_index = i;
        record.payload = encode_payload(example);
        records.push_back(std::move(record));
        example.features.clear(); // free as we go
    }
    write_run(out_path, records);
}

// ---------------------------------------------------------------------------
// Phase 2: merge the sorted runs and write index-modulo shards

class RunCursor {
  public:
    explicit RunCursor(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary)
    {
        if (!in_)
        {
            throw Error(ErrorCode::io_failure, "cannot reopen temp run " + path.string());
        }
        advance();
    }

    bool exhausted() const
    {
        return exhausted_;
    }

    const KeyedPayload& current() const
    {
        return current_;
    }

    KeyedPayload take()
    {
        KeyedPayload out = std::move(current_);
        advance();
        return out;
    }

  private:
    void advance()
    {
        char header[24];
        in_.read(header, sizeof(header));
        if (in_.gcount() == 0)
        {
            exhausted_ = true;
            return;
        }
        if (in_.gcount() != sizeof(header))
        {
            throw Error(ErrorCode::io_failure, "truncated temp run " + path_.string());
        }
        current_.shuffle_key = read_u64_le(header);
        current_.source_index = read_u64_le(header + 8);
        const std::uint32_t length = read_u32_le(header + 16);
        const std::uint32_t expected_crc = read_u32_le(header + 20);
        current_.payload.resize(length);
        in_.read(current_.payload.data(), length);
        if (in_.gcount() != static_cast<std::streamsize>(length) ||
            crc32c(current_.payload) != expected_crc)
        {
            throw Error(ErrorCode::io_failure, "corrupt temp run " + path_.string());
        }
    }

    std::filesystem::path path_;
    std::ifstream in_;
    KeyedPayload current_;
    bool exhausted_ = false;
};

class ShardFanout {
  public:
    ShardFanout(const std::filesystem::path& dir, std::uint32_t num_shards)
    {
        for (std::uint32_t f = 0; f < num_shards; ++f)
        {
            writers_.push_back(std::make_unique<ShardWriter>(dir, f, num_shards));
        }
    }

    void write(std::uint64_t cache_index, std::string payload)
    {
        patch_cache_index(payload, cache_index);
        writers_[cache_index % writers_.size()]->append_raw(cache_index, std::move(payload));
    }

    void finalize()
    {
        for (auto& writer : writers_)
        {
            writer->finalize();
        }
    }

  private:
    std::vector<std::unique_ptr<ShardWriter>> writers_;
};

void merge_in_memory(std::vector<std::unique_ptr<RunCursor>>& runs, ShardFanout& fanout)
{
    std::vector<KeyedPayload> all;
    for (auto& run : runs)
    {
        while (!run->exhausted())
        {
            all.push_back(run->take());
        }
    }
    std::sort(all.begin(), all.end());
    for (std::uint64_t rank = 0; rank < all.size(); ++rank)
    {
        fanout.write(rank, std::move(all[rank].payload));
    }
}

void merge_streaming(std::vector<std::unique_ptr<RunCursor>>& runs, ShardFanout& fanout)
{
    auto greater = [&](std::size_t a, std::size_t b) { return runs[b]->current() < runs[a]->current(); };
    std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(greater)> heap(greater);
    for (std::size_t i = 0; i < runs.size(); ++i)
    {
        if (!runs[i]->exhausted())
        {
            heap.push(i);
        }
    }
    std::uint64_t rank = 0;
    while (!heap.empty())
    {
        const std::size_t i = heap.top();
        heap.pop();
        fanout.write(rank++, runs[i]->take().payload);
        if (!runs[i]->exhausted())
        {
            heap.push(i);
        }
    }
}

} // namespace

CacheManifest build_cache(const Registry& registry, const BuildConfig& config)
{
    const TaskSpec& spec = registry.task(config.task);
    if (!spec.splits.count(config.split))
    {
        throw Error(ErrorCode::invalid_spec,
                    "task \"" + config.task + "\" has no split \"" + config.split + "\"");
    }
    if (config.num_shards < 1)
    {
        throw Error(ErrorCode::invalid_spec, "num_shards must be >= 1");
    }
    if (config.num_workers < 1)
    {
        throw Error(ErrorCode::invalid_spec, "num_workers must be >= 1");
    }

    const auto dir = cache_dir_for(config.output_root, config.task, config.split);
    std::error_code ec;
    if (std::filesystem::exists(dir, ec) && !std::filesystem::is_empty(dir, ec))
    {
        if (CacheManifest::exists(dir))
        {
            throw Error(ErrorCode::dir_not_empty, "cache already built at " + dir.string());
        }
        throw Error(ErrorCode::partial_build_detected,
                    dir.string() + " holds files but no manifest; remove it and rebuild");
    }
    std::filesystem::create_directories(dir, ec);
    if (ec)
    {
        throw Error(ErrorCode::io_failure, "cannot create " + dir.string());
    }
    const auto tmp_dir = dir / "tmp";
    std::filesystem::create_directories(tmp_dir, ec);
    if (ec)
    {
        throw Error(ErrorCode::io_failure, "cannot create " + tmp_dir.string());
    }

    std::vector<Example> raw = enumerate_source(spec.source, config.split);
    const std::uint64_t num_examples = raw.size();

    // Workers preprocess disjoint contiguous source ranges and communicate
    // with the merge phase only through their sorted run files, so the output
    // cannot depend on thread scheduling.
    const std::uint32_t num_workers = config.num_workers;
    std::vector<std::exception_ptr> failures(num_workers);
    {
        std::vector<std::thread> workers;
        workers.reserve(num_workers);
        for (std::uint32_t w = 0; w < num_workers; ++w)
        {
            const std::uint64_t begin = num_examples * w / num_workers;
            const std::uint64_t end = num_examples * (w + 1) / num_workers;
            workers.emplace_back([&, w, begin, end]() {
                try
                {
                    preprocess_range(spec, config, raw, begin, end, run_path(tmp_dir, w));
                }
                catch (...)
                {
                    failures[w] = std::current_exception();
                }
            });
        }
        for (auto& worker : workers)
        {
            worker.join();
        }
    }
    for (const auto& failure : failures)
    {
        if (failure)
        {
            std::rethrow_exception(failure);
        }
    }
    raw.clear();
    raw.shrink_to_fit();

    {
        std::vector<std::unique_ptr<RunCursor>> runs;
        for (std::uint32_t w = 0; w < num_workers; ++w)
        {
            runs.push_back(std::make_unique<RunCursor>(run_path(tmp_dir, w)));
        }
        ShardFanout fanout(dir, config.num_shards);
        if (num_examples <= config.in_memory_merge_limit)
        {
            merge_in_memory(runs, fanout);
        }
        else
        {
            merge_streaming(runs, fanout);
        }
        fanout.finalize();
    }

    CacheManifest manifest;
    manifest.task_name = config.task;
    manifest.split = config.split;
    manifest.num_examples = num_examples;
    manifest.num_shards = config.num_shards;
    manifest.seed = config.seed;
    manifest.schema = spec.schema;
    manifest.fingerprint = fingerprint_task(spec, config.seed, config.num_shards);
    manifest.save(dir); // manifest last: its presence marks a complete build

    std::filesystem::remove_all(tmp_dir, ec);
    return manifest;
}

} // namespace seqpipe
