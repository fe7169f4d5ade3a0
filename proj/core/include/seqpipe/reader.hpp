#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "seqpipe/feature_converter.hpp"
#include "seqpipe/manifest.hpp"
#include "seqpipe/mixture_schedule.hpp"
#include "seqpipe/preprocess.hpp"
#include "seqpipe/registry.hpp"
#include "seqpipe/shard_store.hpp"
#include "seqpipe/task.hpp"

namespace seqpipe {

struct OpenOptions {
    std::string name; // task or mixture
    std::string split;
    std::uint32_t reader_id = 0;
    std::uint32_t num_readers = 1;
    std::uint64_t batch_size = 1;
    std::uint64_t seed = 0;
    std::filesystem::path cache_root;
    // Global steps whose batches are consumed but never returned (for
    // skipping over data known to destabilize training).
    std::vector<std::uint64_t> skip_steps;
    // When set, each example is also converted to model features.
    std::optional<ConverterSpec> converter;
};

struct Batch {
    std::uint64_t step = 0;
    std::vector<Example> examples;          // exactly batch_size entries
    std::vector<std::string> task_names;    // provenance, parallel to examples
    std::vector<ModelFeatures> model_features; // filled iff a converter is set
};

// Checkpoint-grade position accounting: everything here is recomputable from
// (global step, batch_size, num_readers) with no data IO.
struct StreamPosition {
    std::uint64_t next_step = 0;
    std::uint64_t epoch = 0;        // single-task streams
    std::uint64_t within_epoch = 0; // single-task streams
    std::vector<std::pair<std::string, std::uint64_t>> per_task_consumed; // mixtures
};

// Ordered (shard, record) sequence reader `reader_id` consumes in one epoch.
//
// Epoch 0 round-robins the owned shards in ascending shard id (equivalently:
// ascending cache_index restricted to the reader's set). Later epochs order
// owned shards by prf64(seed, epoch, shard) and permute records within each
// shard by a Fisher-Yates driven by the counter stream seeded with
// prf64(seed, epoch, shard, 0xE9). Only owned shards ever appear.
std::vector<std::pair<std::uint32_t, std::uint64_t>> epoch_order(std::uint64_t epoch,
                                                                 const CacheManifest& manifest,
                                                                 std::uint32_t reader_id,
                                                                 std::uint32_t num_readers,
                                                                 std::uint64_t seed);

// Example-level cursor over one task's cache for one data-parallel reader.
// The stream is the flat concatenation of epoch orders; seeking is pure
// arithmetic plus idx lookups and never touches record payloads.
class TaskExampleStream {
  public:
    TaskExampleStream(const TaskSpec& spec, const std::filesystem::path& cache_dir,
                      std::uint32_t reader_id, std::uint32_t num_readers, std::uint64_t seed);

    Example next();
    void seek_to_consumed(std::uint64_t n);

    std::uint64_t consumed() const
    {
        return consumed_;
    }

    std::uint64_t per_epoch_count() const
    {
        return per_epoch_count_;
    }

    std::uint64_t epoch() const
    {
        return epoch_;
    }

    const std::string& task_name() const
    {
        return spec_.name;
    }

    const CacheManifest& manifest() const
    {
        return manifest_;
    }

    ReadStats stats() const;

  private:
    void enter_epoch(std::uint64_t epoch);

    TaskSpec spec_;
    CacheManifest manifest_;
    std::uint32_t reader_id_ = 0;
    std::uint32_t num_readers_ = 1;
    std::uint64_t seed_ = 0;
    std::vector<std::uint32_t> owned_shards_;
    std::vector<std::unique_ptr<ShardReader>> readers_; // parallel to owned_shards_
    std::uint64_t per_epoch_count_ = 0;
    std::uint64_t consumed_ = 0;
    std::uint64_t epoch_ = 0;
    std::vector<std::pair<std::uint32_t, std::uint64_t>> order_; // current epoch
    VocabularyCache vocabs_;
};

// Deterministic batch stream over a task or mixture. Two handles opened with
// equal arguments yield byte-identical streams; single consumer per handle.
class DatasetStream {
  public:
    Batch next_batch();

    // Repositions so the next returned batch is global step `step`. Uses
    // epoch arithmetic and scheduler replay only; no record payload is read.
    void seek_to_step(std::uint64_t step);

    std::uint64_t next_step() const
    {
        return next_step_;
    }

    std::uint64_t batch_size() const
    {
        return batch_size_;
    }

    StreamPosition position() const;
    ReadStats stats() const;

    bool is_mixture() const
    {
        return schedule_.has_value();
    }

  private:
    friend DatasetStream open_dataset(const Registry& registry, const OpenOptions& options);

    DatasetStream() = default;

    void advance_one_batch(Batch* out);

    std::vector<std::unique_ptr<TaskExampleStream>> streams_;
    std::optional<MixtureSchedule> schedule_;
    std::uint64_t batch_size_ = 1;
    std::uint64_t next_step_ = 0;
    std::vector<std::uint64_t> skip_steps_;
    std::optional<ConverterSpec> converter_;
};

// Validates cache presence and fingerprint, requires num_readers to divide
// every component cache's shard count, and positions the stream at step 0.
DatasetStream open_dataset(const Registry& registry, const OpenOptions& options);

} // namespace seqpipe
