#include "seqpipe/reader.hpp"

#include <algorithm>
#include <numeric>

#include "seqpipe/error.hpp"
#include "seqpipe/prf.hpp"

namespace seqpipe {

namespace {

constexpr std::uint64_t kWithinShardStreamTag = 0xE9;

std::vector<std::uint32_t> owned_shards_for(std::uint32_t num_shards, std::uint32_t reader_id,
                                            std::uint32_t num_readers)
{
    std::vector<std::uint32_t> owned;
    for (std::uint32_t f = reader_id; f < num_shards; f += num_readers)
    {
        owned.push_back(f);
    }
    return owned;
}

void check_reader_split(const CacheManifest& manifest, std::uint32_t reader_id,
                        std::uint32_t num_readers)
{
    if (num_readers < 1)
    {
        throw Error(ErrorCode::invalid_argument, "num_readers must be >= 1");
    }
    if (reader_id >= num_readers)
    {
        throw Error(ErrorCode::invalid_argument,
                    "reader_id " + std::to_string(reader_id) + " >= num_readers " +
                        std::to_string(num_readers));
    }
    if (manifest.num_shards % num_readers != 0)
    {
        throw Error(ErrorCode::indivisible_readers,
                    "num_readers " + std::to_string(num_readers) + " does not divide " +
                        std::to_string(manifest.num_shards) + " shards");
    }
}

// Deterministic Fisher-Yates driven by the PRF counter stream.
std::vector<std::uint64_t> permuted_records(std::uint64_t count, std::uint64_t stream_seed)
{
    std::vector<std::uint64_t> perm(count);
    std::iota(perm.begin(), perm.end(), 0);
    PrfStream stream(stream_seed);
    for (std::uint64_t i = count; i-- > 1;)
    {
        const std::uint64_t j = stream.next_below(i + 1);
        std::swap(perm[i], perm[j]);
    }
    return perm;
}

} // namespace

std::vector<std::pair<std::uint32_t, std::uint64_t>> epoch_order(std::uint64_t epoch,
                                                                 const CacheManifest& manifest,
                                                                 std::uint32_t reader_id,
                                                                 std::uint32_t num_readers,
                                                                 std::uint64_t seed)
{
    check_reader_split(manifest, reader_id, num_readers);
    const auto owned = owned_shards_for(manifest.num_shards, reader_id, num_readers);

    std::vector<std::pair<std::uint32_t, std::uint64_t>> order;
    std::uint64_t total = 0;
    for (std::uint32_t f : owned)
    {
        total += manifest.shard_record_count(f);
    }
    order.reserve(total);

    if (epoch == 0)
    {
        // Round-robin over owned shards in ascending id; identical to
        // ascending cache_index restricted to this reader's set.
        std::uint64_t max_count = 0;
        for (std::uint32_t f : owned)
        {
            max_count = std::max(max_count, manifest.shard_record_count(f));
        }
        for (std::uint64_t k = 0; k < max_count; ++k)
        {
            for (std::uint32_t f : owned)
            {
                if (k < manifest.shard_record_count(f))
                {
                    order.emplace_back(f, k);
                }
            }
        }
        return order;
    }

    // Later epochs: reshuffle shard visit order and records within each
    // shard, keeping reads shard-local so file IO stays sequential-ish.
    std::vector<std::pair<std::uint64_t, std::uint32_t>> ranked;
    ranked.reserve(owned.size());
    for (std::uint32_t f : owned)
    {
        ranked.emplace_back(prf64(seed, epoch, f), f);
    }
    std::sort(ranked.begin(), ranked.end());
    for (const auto& [rank, f] : ranked)
    {
        const std::uint64_t count = manifest.shard_record_count(f);
        const auto perm = permuted_records(count, prf64(seed, epoch, f, kWithinShardStreamTag));
        for (std::uint64_t k : perm)
        {
            order.emplace_back(f, k);
        }
    }
    return order;
}

TaskExampleStream::TaskExampleStream(const TaskSpec& spec, const std::filesystem::path& cache_dir,
                                     std::uint32_t reader_id, std::uint32_t num_readers,
                                     std::uint64_t seed)
    : spec_(spec), manifest_(CacheManifest::load(cache_dir)), reader_id_(reader_id),
      num_readers_(num_readers), seed_(seed)
{
    if (manifest_.task_name != spec.name)
    {
        throw Error(ErrorCode::fingerprint_mismatch,
                    "cache at " + cache_dir.string() + " was built for task \"" + manifest_.task_name +
                        "\", not \"" + spec.name + "\"");
    }
    const std::uint64_t expected =
        fingerprint_task(spec, manifest_.seed, manifest_.num_shards);
    if (expected != manifest_.fingerprint)
    {
        throw Error(ErrorCode::fingerprint_mismatch,
                    "cache fingerprint " + u64_to_hex(manifest_.fingerprint) +
                        " does not match task \"" + spec.name + "\" (expected " + u64_to_hex(expected) +
                        "); the cache is stale or built from a different spec");
    }
    check_reader_split(manifest_, reader_id, num_readers);
    owned_shards_ = owned_shards_for(manifest_.num_shards, reader_id, num_readers);
    for (std::uint32_t f : owned_shards_)
    {
        readers_.push_back(std::make_unique<ShardReader>(cache_dir, f, manifest_.num_shards));
        per_epoch_count_ += readers_.back()->record_count();
    }
    enter_epoch(0);
}

void TaskExampleStream::enter_epoch(std::uint64_t epoch)
{
    epoch_ = epoch;
    order_ = epoch_order(epoch, manifest_, reader_id_, num_readers_, seed_);
}

Example TaskExampleStream::next()
{
    if (per_epoch_count_ == 0)
    {
        throw Error(ErrorCode::out_of_range,
                    "cache for task \"" + spec_.name + "\" holds no examples for reader " +
                        std::to_string(reader_id_));
    }
    const std::uint64_t epoch = consumed_ / per_epoch_count_;
    const std::uint64_t offset = consumed_ % per_epoch_count_;
    if (epoch != epoch_)
    {
        enter_epoch(epoch);
    }
    const auto [shard, k] = order_[offset];
    // Owned shards are {reader_id + slot * num_readers}, so the reader slot
    // is recoverable without a search.
    const std::uint32_t slot = (shard - reader_id_) / num_readers_;
    Example example = readers_[slot]->read(k);

    VocabularyCache& vocabs = vocabs_;
    for (std::size_t op_index : spec_.runtime_op_indices())
    {
        apply_preprocessor(spec_.preprocessors[op_index], example,
                           prf64(seed_, example.cache_index, epoch_, op_index), vocabs);
    }
    for (const auto& feature_spec : spec_.schema)
    {
        if (!feature_spec.fixed_length)
        {
            continue;
        }
        auto it = example.features.find(feature_spec.name);
        if (it == example.features.end())
        {
            continue;
        }
        const std::size_t target = *feature_spec.fixed_length;
        switch (it->second.dtype)
        {
        case Dtype::int32:
        case Dtype::int64:
            it->second.ints.resize(target, 0);
            break;
        case Dtype::float32:
            it->second.floats.resize(target, 0.0f);
            break;
        case Dtype::bytes:
            it->second.bytes.resize(target, '\0');
            break;
        }
    }
    ++consumed_;
    return example;
}

void TaskExampleStream::seek_to_consumed(std::uint64_t n)
{
    if (per_epoch_count_ == 0)
    {
        if (n == 0)
        {
            return;
        }
        throw Error(ErrorCode::out_of_range,
                    "cannot seek into an empty cache for task \"" + spec_.name + "\"");
    }
    consumed_ = n;
    const std::uint64_t epoch = n / per_epoch_count_;
    if (epoch != epoch_)
    {
        enter_epoch(epoch);
    }
}

ReadStats TaskExampleStream::stats() const
{
    ReadStats total;
    for (const auto& reader : readers_)
    {
        total.payload_records_read += reader->stats().payload_records_read;
        total.payload_bytes_read += reader->stats().payload_bytes_read;
    }
    return total;
}

DatasetStream open_dataset(const Registry& registry, const OpenOptions& options)
{
    if (options.batch_size < 1)
    {
        throw Error(ErrorCode::invalid_argument, "batch_size must be >= 1");
    }
    const auto components = registry.resolve_mixture(options.name);

    DatasetStream stream;
    stream.batch_size_ = options.batch_size;
    stream.converter_ = options.converter;
    stream.skip_steps_ = options.skip_steps;
    std::sort(stream.skip_steps_.begin(), stream.skip_steps_.end());
    stream.skip_steps_.erase(std::unique(stream.skip_steps_.begin(), stream.skip_steps_.end()),
                             stream.skip_steps_.end());

    for (const auto& component : components)
    {
        const TaskSpec& spec = registry.task(component.task);
        if (!spec.splits.count(options.split))
        {
            throw Error(ErrorCode::invalid_spec, "task \"" + component.task + "\" has no split \"" +
                                                     options.split + "\"");
        }
        const auto dir = cache_dir_for(options.cache_root, component.task, options.split);
        if (!CacheManifest::exists(dir))
        {
            throw Error(ErrorCode::cache_missing,
                        "no cache for task \"" + component.task + "\" split \"" + options.split +
                            "\" under " + options.cache_root.string());
        }
        stream.streams_.push_back(std::make_unique<TaskExampleStream>(
            spec, dir, options.reader_id, options.num_readers, options.seed));
    }
    if (registry.has_mixture(options.name))
    {
        stream.schedule_.emplace(components);
    }
    return stream;
}

void DatasetStream::advance_one_batch(Batch* out)
{
    if (out == nullptr)
    {
        // Skipped batch: advance every position by arithmetic, reading no
        // payloads.
        if (!schedule_)
        {
            auto& stream = *streams_.front();
            stream.seek_to_consumed(stream.consumed() + batch_size_);
            return;
        }
        std::vector<std::uint64_t> extra(streams_.size(), 0);
        for (std::uint64_t b = 0; b < batch_size_; ++b)
        {
            ++extra[schedule_->next_component()];
        }
        for (std::size_t k = 0; k < streams_.size(); ++k)
        {
            if (extra[k] > 0)
            {
                streams_[k]->seek_to_consumed(streams_[k]->consumed() + extra[k]);
            }
        }
        return;
    }

    out->examples.reserve(batch_size_);
    out->task_names.reserve(batch_size_);
    for (std::uint64_t b = 0; b < batch_size_; ++b)
    {
        TaskExampleStream& stream =
            schedule_ ? *streams_[schedule_->next_component()] : *streams_.front();
        out->examples.push_back(stream.next());
        out->task_names.push_back(stream.task_name());
    }
    if (converter_)
    {
        out->model_features.reserve(batch_size_);
        for (const auto& example : out->examples)
        {
            out->model_features.push_back(convert(example, *converter_));
        }
    }
}

Batch DatasetStream::next_batch()
{
    while (std::binary_search(skip_steps_.begin(), skip_steps_.end(), next_step_))
    {
        advance_one_batch(nullptr);
        ++next_step_;
    }
    Batch batch;
    batch.step = next_step_;
    advance_one_batch(&batch);
    ++next_step_;
    return batch;
}

void DatasetStream::seek_to_step(std::uint64_t step)
{
    const std::uint64_t consumed = step * batch_size_;
    if (!schedule_)
    {
        streams_.front()->seek_to_consumed(consumed);
    }
    else
    {
        // Scheduler state is pure arithmetic; replay it, then place each
        // component stream at its consumed count.
        schedule_->reset();
        for (std::uint64_t i = 0; i < consumed; ++i)
        {
            schedule_->next_component();
        }
        const auto consumed_per_task = schedule_->consumed();
        for (std::size_t k = 0; k < streams_.size(); ++k)
        {
            streams_[k]->seek_to_consumed(consumed_per_task[k]);
        }
    }
    next_step_ = step;
}

StreamPosition DatasetStream::position() const
{
    StreamPosition pos;
    pos.next_step = next_step_;
    if (!schedule_)
    {
        const auto& stream = *streams_.front();
        if (stream.per_epoch_count() > 0)
        {
            pos.epoch = stream.consumed() / stream.per_epoch_count();
            pos.within_epoch = stream.consumed() % stream.per_epoch_count();
        }
    }
    else
    {
        for (const auto& stream : streams_)
        {
            pos.per_task_consumed.emplace_back(stream->task_name(), stream->consumed());
        }
    }
    return pos;
}

ReadStats DatasetStream::stats() const
{
    ReadStats total;
    for (const auto& stream : streams_)
    {
        const auto s = stream->stats();
        total.payload_records_read += s.payload_records_read;
        total.payload_bytes_read += s.payload_bytes_read;
    }
    return total;
}

} // namespace seqpipe
