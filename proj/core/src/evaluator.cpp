#include "seqpipe/evaluator.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <memory>

#include "seqpipe/error.hpp"
#include "seqpipe/manifest.hpp"
#include "seqpipe/shard_store.hpp"
#include "seqpipe/vocabulary.hpp"

namespace seqpipe {

namespace {

// Drops trailing pad and eos ids before whole-sequence comparison.
TokenSeq strip_trailing_pad_eos(const TokenSeq& seq)
{
    TokenSeq out = seq;
    while (!out.empty() && (out.back() == Vocabulary::kPadId || out.back() == Vocabulary::kEosId))
    {
        out.pop_back();
    }
    return out;
}

std::map<std::string, double> exact_match(const std::vector<EvalPair>& pairs)
{
    if (pairs.empty())
    {
        return {{"exact_match", 0.0}};
    }
    std::uint64_t hits = 0;
    for (const auto& pair : pairs)
    {
        if (strip_trailing_pad_eos(pair.target) == strip_trailing_pad_eos(pair.prediction))
        {
            ++hits;
        }
    }
    return {{"exact_match", 100.0 * static_cast<double>(hits) / static_cast<double>(pairs.size())}};
}

std::map<std::string, double> token_accuracy(const std::vector<EvalPair>& pairs)
{
    std::uint64_t matches = 0;
    std::uint64_t total = 0;
    for (const auto& pair : pairs)
    {
        for (std::size_t t = 0; t < pair.target.size(); ++t)
        {
            if (pair.target[t] == Vocabulary::kPadId)
            {
                continue;
            }
            ++total;
            if (t < pair.prediction.size() && pair.prediction[t] == pair.target[t])
            {
                ++matches;
            }
        }
    }
    if (total == 0)
    {
        return {{"token_accuracy", 0.0}};
    }
    return {{"token_accuracy", 100.0 * static_cast<double>(matches) / static_cast<double>(total)}};
}

std::string format_metric(double value)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", value);
    return buf;
}

} // namespace

const std::map<std::string, MetricFn>& metric_registry()
{
    static const std::map<std::string, MetricFn> registry = {
        {"exact_match", exact_match},
        {"token_accuracy", token_accuracy},
    };
    return registry;
}

bool metric_exists(const std::string& name)
{
    return metric_registry().count(name) > 0;
}

std::string EvalReport::to_text() const
{
    std::string out;
    out += "task=" + task + "\n";
    out += "split=" + split + "\n";
    out += "num_examples=" + std::to_string(num_examples) + "\n";
    for (const auto& [name, value] : metrics)
    {
        out += name + "=" + format_metric(value) + "\n";
    }
    return out;
}

Predictions load_predictions_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw Error(ErrorCode::io_failure, "cannot open predictions file " + path.string());
    }
    Predictions predictions;
    std::string line;
    std::uint64_t line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
        {
            line.pop_back();
        }
        if (line.empty())
        {
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
        {
            throw Error(ErrorCode::invalid_argument,
                        path.string() + " line " + std::to_string(line_no) + " has no tab separator");
        }
        std::uint64_t index = 0;
        const auto* first = line.data();
        auto [ptr, ec] = std::from_chars(first, first + tab, index);
        if (ec != std::errc() || ptr != first + tab)
        {
            throw Error(ErrorCode::invalid_argument, path.string() + " line " +
                                                         std::to_string(line_no) +
                                                         " has a malformed cache_index");
        }
        if (predictions.count(index))
        {
            throw Error(ErrorCode::invalid_argument, path.string() + " repeats cache_index " +
                                                         std::to_string(index));
        }
        TokenSeq ids;
        std::size_t pos = tab + 1;
        while (pos < line.size())
        {
            while (pos < line.size() && line[pos] == ' ')
            {
                ++pos;
            }
            if (pos >= line.size())
            {
                break;
            }
            std::int32_t id = 0;
            auto [p2, ec2] = std::from_chars(line.data() + pos, line.data() + line.size(), id);
            if (ec2 != std::errc())
            {
                throw Error(ErrorCode::invalid_argument, path.string() + " line " +
                                                             std::to_string(line_no) +
                                                             " has a malformed token id");
            }
            ids.push_back(id);
            pos = static_cast<std::size_t>(p2 - line.data());
        }
        predictions.emplace(index, std::move(ids));
    }
    return predictions;
}

EvalReport evaluate(const Registry& registry, const std::filesystem::path& cache_root,
                    const std::string& task, const std::string& split,
                    const Predictions& predictions, bool keep_pairs)
{
    const TaskSpec& spec = registry.task(task);
    const auto dir = cache_dir_for(cache_root, task, split);
    if (!CacheManifest::exists(dir))
    {
        throw Error(ErrorCode::cache_missing,
                    "no cache for task \"" + task + "\" split \"" + split + "\" under " +
                        cache_root.string());
    }
    const auto manifest = CacheManifest::load(dir);

    // Coverage check before any IO-heavy work.
    std::vector<std::uint64_t> missing;
    for (std::uint64_t i = 0; i < manifest.num_examples; ++i)
    {
        if (!predictions.count(i))
        {
            missing.push_back(i);
        }
    }
    if (!missing.empty())
    {
        std::string detail = "predictions missing for cache indices:";
        const std::size_t shown = std::min<std::size_t>(missing.size(), 10);
        for (std::size_t i = 0; i < shown; ++i)
        {
            detail += " " + std::to_string(missing[i]);
        }
        if (missing.size() > shown)
        {
            detail += " ... (" + std::to_string(missing.size()) + " total)";
        }
        throw Error(ErrorCode::missing_predictions, detail);
    }
    for (const auto& [index, ids] : predictions)
    {
        if (index >= manifest.num_examples)
        {
            throw Error(ErrorCode::invalid_argument,
                        "prediction for cache_index " + std::to_string(index) + " but the split has " +
                            std::to_string(manifest.num_examples) + " examples");
        }
    }

    std::vector<std::unique_ptr<ShardReader>> readers;
    for (std::uint32_t f = 0; f < manifest.num_shards; ++f)
    {
        readers.push_back(std::make_unique<ShardReader>(dir, f, manifest.num_shards));
    }

    // Ascending cache_index keeps every metric order-independent.
    std::vector<EvalPair> pairs;
    pairs.reserve(manifest.num_examples);
    for (std::uint64_t i = 0; i < manifest.num_examples; ++i)
    {
        Example example = readers[i % manifest.num_shards]->read(i / manifest.num_shards);
        auto it = example.features.find("targets");
        if (it == example.features.end() || !it->second.is_integral())
        {
            throw Error(ErrorCode::missing_feature,
                        "task \"" + task + "\" cache has no integer \"targets\" feature");
        }
        EvalPair pair;
        pair.cache_index = i;
        pair.target.reserve(it->second.ints.size());
        for (std::int64_t v : it->second.ints)
        {
            pair.target.push_back(static_cast<std::int32_t>(v));
        }
        pair.prediction = predictions.at(i);
        pairs.push_back(std::move(pair));
    }

    EvalReport report;
    report.task = task;
    report.split = split;
    report.num_examples = manifest.num_examples;
    for (const auto& metric_name : spec.metrics)
    {
        auto it = metric_registry().find(metric_name);
        if (it == metric_registry().end())
        {
            throw Error(ErrorCode::unknown_metric, "no metric named \"" + metric_name + "\"");
        }
        for (auto& [name, value] : it->second(pairs))
        {
            report.metrics[name] = value;
        }
    }
    if (keep_pairs)
    {
        report.pairs = std::move(pairs);
    }
    return report;
}

} // namespace seqpipe
