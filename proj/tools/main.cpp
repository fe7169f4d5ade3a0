#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "seqpipe/cache_builder.hpp"
#include "seqpipe/config.hpp"
#include "seqpipe/error.hpp"
#include "seqpipe/evaluator.hpp"
#include "seqpipe/manifest.hpp"
#include "seqpipe/prf.hpp"
#include "seqpipe/reader.hpp"
#include "seqpipe/shard_store.hpp"
#include "seqpipe/vocabulary.hpp"

namespace {

using namespace seqpipe;

// Exit codes: 0 ok, 2 usage/validation, 3 runtime/IO.
constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

int exit_code_for(ErrorCode code)
{
    switch (code)
    {
    case ErrorCode::source_unreadable:
    case ErrorCode::preprocessor_failure:
    case ErrorCode::io_failure:
    case ErrorCode::corrupt_record:
    case ErrorCode::cache_missing:
    case ErrorCode::fingerprint_mismatch:
        return kExitRuntime;
    default:
        return kExitUsage;
    }
}

struct GlobalFlags {
    std::string config_path;
    std::string cache_root;
};

Registry load_registry_or_fail(const GlobalFlags& flags)
{
    if (flags.config_path.empty())
    {
        throw Error(ErrorCode::invalid_argument, "--config is required for this subcommand");
    }
    return load_registry(flags.config_path);
}

void require_cache_root(const GlobalFlags& flags)
{
    if (flags.cache_root.empty())
    {
        throw Error(ErrorCode::invalid_argument, "--cache-root is required for this subcommand");
    }
}

// ---------------------------------------------------------------------------
// Rendering

std::string render_escaped(const std::string& text)
{
    std::string out = "\"";
    for (unsigned char c : text)
    {
        switch (c)
        {
        case '\\':
            out += "\\\\";
            break;
        case '"':
            out += "\\\"";
            break;
        case '\n':
            out += "\\n";
            break;
        case '\r':
            out += "\\r";
            break;
        case '\t':
            out += "\\t";
            break;
        default:
            if (c < 0x20 || c >= 0x7F)
            {
                char buf[8];
                std::snprintf(buf, sizeof(buf), "\\x%02x", c);
                out += buf;
            }
            else
            {
                out.push_back(static_cast<char>(c));
            }
        }
    }
    out.push_back('"');
    return out;
}

std::string render_hex(std::string_view data)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out = "0x";
    for (unsigned char c : data)
    {
        out.push_back(digits[c >> 4]);
        out.push_back(digits[c & 0xF]);
    }
    return out;
}

std::string render_int_list(const std::vector<std::int64_t>& values)
{
    std::string out = "[";
    for (std::size_t i = 0; i < values.size(); ++i)
    {
        if (i > 0)
        {
            out.push_back(',');
        }
        out += std::to_string(values[i]);
    }
    out.push_back(']');
    return out;
}

std::string render_i32_list(const std::vector<std::int32_t>& values)
{
    std::string out = "[";
    for (std::size_t i = 0; i < values.size(); ++i)
    {
        if (i > 0)
        {
            out.push_back(',');
        }
        out += std::to_string(values[i]);
    }
    out.push_back(']');
    return out;
}

std::string render_float_list(const std::vector<float>& values)
{
    std::string out = "[";
    char buf[32];
    for (std::size_t i = 0; i < values.size(); ++i)
    {
        if (i > 0)
        {
            out.push_back(',');
        }
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), values[i]);
        out.append(buf, ptr);
    }
    out.push_back(']');
    return out;
}

// ids mode prints raw values; text mode decodes integer features through the
// task's vocabulary and renders lossy dtypes as hex.
std::string render_feature(const Feature& feature, bool as_text, const Vocabulary* vocab)
{
    switch (feature.dtype)
    {
    case Dtype::int32:
    case Dtype::int64:
        if (as_text && vocab != nullptr)
        {
            std::vector<std::int32_t> ids;
            ids.reserve(feature.ints.size());
            for (std::int64_t v : feature.ints)
            {
                if (v < 0 || v >= vocab->size())
                {
                    return render_int_list(feature.ints);
                }
                ids.push_back(static_cast<std::int32_t>(v));
            }
            return render_escaped(vocab->decode(ids));
        }
        return render_int_list(feature.ints);
    case Dtype::float32:
        if (as_text)
        {
            std::string raw;
            for (float v : feature.floats)
            {
                std::uint32_t bits = 0;
                static_assert(sizeof(bits) == sizeof(v));
                std::memcpy(&bits, &v, sizeof(bits));
                for (int b = 0; b < 4; ++b)
                {
                    raw.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
                }
            }
            return render_hex(raw);
        }
        return render_float_list(feature.floats);
    case Dtype::bytes:
        return render_hex(feature.bytes);
    }
    return "[]";
}

// The first tokenize op of the task decides the decoding vocabulary.
std::optional<Vocabulary> task_vocabulary(const TaskSpec& spec)
{
    for (const auto& op : spec.preprocessors)
    {
        if (op.op == OpKind::tokenize)
        {
            return Vocabulary::resolve(op.vocab_ref);
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// cache

struct CacheArgs {
    std::string task;
    std::string split;
    std::string output;
    std::uint32_t num_shards = 1;
    std::uint64_t seed = 0;
    std::uint32_t workers = 1;
};

int cmd_cache(const GlobalFlags& flags, const CacheArgs& args)
{
    const Registry registry = load_registry_or_fail(flags);
    BuildConfig config;
    config.task = args.task;
    config.split = args.split;
    config.seed = args.seed;
    config.num_shards = args.num_shards;
    config.num_workers = args.workers;
    config.output_root = args.output;
    const CacheManifest manifest = build_cache(registry, config);
    std::cout << "built cache for task=" << manifest.task_name << " split=" << manifest.split
              << " num_examples=" << manifest.num_examples << " num_shards=" << manifest.num_shards
              << " seed=" << manifest.seed << " fingerprint=" << u64_to_hex(manifest.fingerprint)
              << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// verify

int cmd_verify(const std::string& dir)
{
    const VerifyReport report = verify_cache(dir);
    for (const auto& violation : report.violations)
    {
        std::cout << violation_kind_name(violation.kind);
        if (violation.shard >= 0)
        {
            std::cout << " shard=" << violation.shard;
        }
        if (violation.record >= 0)
        {
            std::cout << " record=" << violation.record;
        }
        std::cout << ": " << violation.detail << "\n";
    }
    if (report.ok())
    {
        std::cout << "ok\n";
        return kExitOk;
    }
    std::cout << report.violations.size() << " violations\n";
    return kExitRuntime;
}

// ---------------------------------------------------------------------------
// inspect

int cmd_inspect(const std::string& dir, std::uint64_t index)
{
    const auto manifest = CacheManifest::load(dir);
    if (index >= manifest.num_examples)
    {
        throw Error(ErrorCode::out_of_range, "--index " + std::to_string(index) +
                                                 " >= num_examples " +
                                                 std::to_string(manifest.num_examples));
    }
    const std::uint32_t shard = static_cast<std::uint32_t>(index % manifest.num_shards);
    ShardReader reader(dir, shard, manifest.num_shards);
    const Example example = reader.read(index / manifest.num_shards);
    std::cout << "cache_index=" << example.cache_index << "\n";
    for (const auto& [name, feature] : example.features)
    {
        std::cout << name << " (" << dtype_name(feature.dtype) << ", " << feature.element_count()
                  << " elements): " << render_feature(feature, false, nullptr) << "\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// read

struct ReadArgs {
    std::string task;
    std::string mixture;
    std::string split;
    std::uint32_t reader_id = 0;
    std::uint32_t num_readers = 1;
    std::uint64_t batch_size = 1;
    std::uint64_t start_step = 0;
    std::uint64_t steps = 1;
    std::string format = "ids";
    std::string arch;
    std::uint64_t seed = 0;
};

int cmd_read(const GlobalFlags& flags, const ReadArgs& args)
{
    const Registry registry = load_registry_or_fail(flags);
    require_cache_root(flags);
    const std::string name = args.task.empty() ? args.mixture : args.task;

    OpenOptions options;
    options.name = name;
    options.split = args.split;
    options.reader_id = args.reader_id;
    options.num_readers = args.num_readers;
    options.batch_size = args.batch_size;
    options.seed = args.seed;
    options.cache_root = flags.cache_root;

    if (!args.arch.empty())
    {
        const auto arch = architecture_from_name(args.arch);
        if (!arch)
        {
            throw Error(ErrorCode::invalid_argument, "--arch must be enc_dec or decoder_only");
        }
        // Converter budgets come from the schema's fixed_length entries.
        ConverterSpec converter;
        converter.architecture = *arch;
        bool have_inputs = false;
        bool have_targets = false;
        for (const auto& component : registry.resolve_mixture(name))
        {
            for (const auto& feature : registry.task(component.task).schema)
            {
                if (feature.name == "inputs" && feature.fixed_length)
                {
                    converter.input_length = *feature.fixed_length;
                    have_inputs = true;
                }
                if (feature.name == "targets" && feature.fixed_length)
                {
                    converter.target_length = *feature.fixed_length;
                    have_targets = true;
                }
            }
        }
        if (!have_inputs || !have_targets)
        {
            throw Error(ErrorCode::invalid_spec,
                        "--arch needs fixed_length on the \"inputs\" and \"targets\" schema features");
        }
        options.converter = converter;
    }

    DatasetStream stream = open_dataset(registry, options);
    stream.seek_to_step(args.start_step);

    const bool as_text = args.format == "text";
    std::map<std::string, std::optional<Vocabulary>> vocabs;
    for (const auto& component : registry.resolve_mixture(name))
    {
        vocabs.emplace(component.task, task_vocabulary(registry.task(component.task)));
    }

    for (std::uint64_t s = 0; s < args.steps; ++s)
    {
        const Batch batch = stream.next_batch();
        for (std::size_t b = 0; b < batch.examples.size(); ++b)
        {
            const Example& example = batch.examples[b];
            std::cout << "step=" << batch.step << " task=" << batch.task_names[b]
                      << " index=" << example.cache_index;
            if (!batch.model_features.empty())
            {
                const ModelFeatures& mf = batch.model_features[b];
                if (!mf.encoder_input_tokens.empty())
                {
                    std::cout << " encoder_input_tokens=" << render_i32_list(mf.encoder_input_tokens);
                }
                std::cout << " decoder_input_tokens=" << render_i32_list(mf.decoder_input_tokens)
                          << " decoder_target_tokens=" << render_i32_list(mf.decoder_target_tokens)
                          << " decoder_loss_weights=" << render_i32_list(mf.decoder_loss_weights);
            }
            else
            {
                const auto& vocab = vocabs.at(batch.task_names[b]);
                for (const auto& [feature_name, feature] : example.features)
                {
                    std::cout << " " << feature_name << "="
                              << render_feature(feature, as_text, vocab ? &*vocab : nullptr);
                }
            }
            std::cout << "\n";
        }
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
    std::string task;
    std::string split;
    std::uint32_t num_readers = 1;
    std::uint64_t batch_size = 1;
    double seconds = 5.0;
    std::uint64_t seed = 0;
};

int cmd_bench(const GlobalFlags& flags, const BenchArgs& args)
{
    if (args.seconds <= 0.0)
    {
        throw Error(ErrorCode::invalid_argument, "--seconds must be > 0");
    }
    const Registry registry = load_registry_or_fail(flags);
    require_cache_root(flags);

    struct ReaderResult {
        double examples_per_s = 0.0;
        double bytes_per_s = 0.0;
    };
    std::vector<ReaderResult> results(args.num_readers);
    std::vector<std::thread> threads;
    std::atomic<bool> failed{false};
    std::string failure_message;
    std::mutex failure_mutex;

    const auto start = std::chrono::steady_clock::now();
    const auto warm_end = start + std::chrono::seconds(1);
    const auto end = warm_end + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                    std::chrono::duration<double>(args.seconds));

    for (std::uint32_t r = 0; r < args.num_readers; ++r)
    {
        threads.emplace_back([&, r]() {
            try
            {
                OpenOptions options;
                options.name = args.task;
                options.split = args.split;
                options.reader_id = r;
                options.num_readers = args.num_readers;
                options.batch_size = args.batch_size;
                options.seed = args.seed;
                options.cache_root = flags.cache_root;
                DatasetStream stream = open_dataset(registry, options);

                std::uint64_t examples = 0;
                std::uint64_t base_examples = 0;
                std::uint64_t base_bytes = 0;
                bool warmed = false;
                while (std::chrono::steady_clock::now() < end)
                {
                    (void)stream.next_batch();
                    examples += args.batch_size;
                    if (!warmed && std::chrono::steady_clock::now() >= warm_end)
                    {
                        base_examples = examples;
                        base_bytes = stream.stats().payload_bytes_read;
                        warmed = true;
                    }
                }
                if (!warmed)
                {
                    base_examples = examples;
                    base_bytes = stream.stats().payload_bytes_read;
                }
                results[r].examples_per_s =
                    static_cast<double>(examples - base_examples) / args.seconds;
                results[r].bytes_per_s =
                    static_cast<double>(stream.stats().payload_bytes_read - base_bytes) / args.seconds;
            }
            catch (const std::exception& e)
            {
                std::lock_guard<std::mutex> lock(failure_mutex);
                failed = true;
                if (failure_message.empty())
                {
                    failure_message = e.what();
                }
            }
        });
    }
    for (auto& thread : threads)
    {
        thread.join();
    }
    if (failed)
    {
        throw Error(ErrorCode::cache_missing, failure_message);
    }

    double total_examples = 0.0;
    double total_bytes = 0.0;
    for (std::uint32_t r = 0; r < args.num_readers; ++r)
    {
        std::printf("reader %u: %.1f examples/s, %.1f bytes/s\n", r, results[r].examples_per_s,
                    results[r].bytes_per_s);
        total_examples += results[r].examples_per_s;
        total_bytes += results[r].bytes_per_s;
    }
    std::printf("aggregate: %.1f examples/s, %.1f bytes/s\n", total_examples, total_bytes);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::string task;
    std::string split;
    std::string predictions_path;
    std::string report_path;
};

int cmd_eval(const GlobalFlags& flags, const EvalArgs& args)
{
    const Registry registry = load_registry_or_fail(flags);
    require_cache_root(flags);
    const Predictions predictions = load_predictions_file(args.predictions_path);
    const EvalReport report =
        evaluate(registry, flags.cache_root, args.task, args.split, predictions);
    const std::string text = report.to_text();
    std::cout << text;
    if (!args.report_path.empty())
    {
        std::ofstream out(args.report_path, std::ios::binary | std::ios::trunc);
        if (!out)
        {
            throw Error(ErrorCode::io_failure, "cannot write report to " + args.report_path);
        }
        out << text;
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"seqpipe: deterministic task-based data pipelines for sequence models"};
    app.require_subcommand(1);

    GlobalFlags flags;
    app.add_option("--config", flags.config_path, "Task/mixture registry config file (JSON)");
    app.add_option("--cache-root", flags.cache_root, "Directory holding built caches");

    CacheArgs cache_args;
    auto* cache_cmd = app.add_subcommand("cache", "Build the deterministic cache for a task split");
    cache_cmd->add_option("--task", cache_args.task, "Task name")->required();
    cache_cmd->add_option("--split", cache_args.split, "Split name")->required();
    cache_cmd->add_option("--output", cache_args.output, "Output root directory")->required();
    cache_cmd->add_option("--num-shards", cache_args.num_shards, "Number of shard files");
    cache_cmd->add_option("--seed", cache_args.seed, "Pipeline seed");
    cache_cmd->add_option("--workers", cache_args.workers, "Build parallelism");

    std::string verify_dir;
    auto* verify_cmd = app.add_subcommand("verify", "Audit a cache directory");
    verify_cmd->add_option("--dir", verify_dir, "Cache directory (holds manifest.json)")->required();

    std::string inspect_dir;
    std::uint64_t inspect_index = 0;
    auto* inspect_cmd = app.add_subcommand("inspect", "Pretty-print one cached record");
    inspect_cmd->add_option("--dir", inspect_dir, "Cache directory")->required();
    inspect_cmd->add_option("--index", inspect_index, "cache_index of the record")->required();

    ReadArgs read_args;
    auto* read_cmd = app.add_subcommand("read", "Stream deterministic batches to stdout");
    auto* read_task = read_cmd->add_option("--task", read_args.task, "Task name");
    auto* read_mixture = read_cmd->add_option("--mixture", read_args.mixture, "Mixture name");
    read_task->excludes(read_mixture);
    read_mixture->excludes(read_task);
    read_cmd->add_option("--split", read_args.split, "Split name")->required();
    read_cmd->add_option("--reader-id", read_args.reader_id, "This reader's id in [0, num_readers)");
    read_cmd->add_option("--num-readers", read_args.num_readers, "Total data-parallel readers");
    read_cmd->add_option("--batch-size", read_args.batch_size, "Examples per step for this reader");
    read_cmd->add_option("--start-step", read_args.start_step, "Global step to seek to first");
    read_cmd->add_option("--steps", read_args.steps, "Number of steps to stream");
    read_cmd->add_option("--format", read_args.format, "ids|text")
        ->check(CLI::IsMember({"ids", "text"}));
    read_cmd->add_option("--arch", read_args.arch, "Convert features: enc_dec|decoder_only")
        ->check(CLI::IsMember({"enc_dec", "decoder_only"}));
    read_cmd->add_option("--seed", read_args.seed, "Stream seed (epoch shuffles, runtime ops)");

    BenchArgs bench_args;
    auto* bench_cmd = app.add_subcommand("bench", "Measure streaming throughput");
    bench_cmd->add_option("--task", bench_args.task, "Task name")->required();
    bench_cmd->add_option("--split", bench_args.split, "Split name")->required();
    bench_cmd->add_option("--num-readers", bench_args.num_readers, "Concurrent readers");
    bench_cmd->add_option("--batch-size", bench_args.batch_size, "Examples per step per reader");
    bench_cmd->add_option("--seconds", bench_args.seconds, "Measured duration (after 1s warm-up)");
    bench_cmd->add_option("--seed", bench_args.seed, "Stream seed");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "Run task metrics over a predictions file");
    eval_cmd->add_option("--task", eval_args.task, "Task name")->required();
    eval_cmd->add_option("--split", eval_args.split, "Split name")->required();
    eval_cmd->add_option("--predictions", eval_args.predictions_path, "Predictions file")->required();
    eval_cmd->add_option("--report", eval_args.report_path, "Also write the report to this file");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return kExitUsage;
    }

    try
    {
        if (cache_cmd->parsed())
        {
            return cmd_cache(flags, cache_args);
        }
        if (verify_cmd->parsed())
        {
            return cmd_verify(verify_dir);
        }
        if (inspect_cmd->parsed())
        {
            return cmd_inspect(inspect_dir, inspect_index);
        }
        if (read_cmd->parsed())
        {
            if (read_args.task.empty() && read_args.mixture.empty())
            {
                throw Error(ErrorCode::invalid_argument, "read needs --task or --mixture");
            }
            return cmd_read(flags, read_args);
        }
        if (bench_cmd->parsed())
        {
            return cmd_bench(flags, bench_args);
        }
        if (eval_cmd->parsed())
        {
            return cmd_eval(flags, eval_args);
        }
    }
    catch (const Error& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
