#include "seqpipe/manifest.hpp"

#include <fstream>

#include <json.hpp>

#include "seqpipe/error.hpp"
#include "seqpipe/prf.hpp"

namespace seqpipe {

namespace {

// Insertion-ordered JSON keeps the manifest's key order bit-stable.
using ordered_json = nlohmann::ordered_json;

} // namespace

std::uint64_t CacheManifest::shard_record_count(std::uint32_t shard) const
{
    if (shard >= num_shards || num_examples <= shard)
    {
        return 0;
    }
    return (num_examples - 1 - shard) / num_shards + 1;
}

void CacheManifest::save(const std::filesystem::path& cache_dir) const
{
    ordered_json schema_json = ordered_json::array();
    for (const auto& feature : schema)
    {
        ordered_json f;
        f["name"] = feature.name;
        f["dtype"] = dtype_name(feature.dtype);
        if (feature.fixed_length)
        {
            f["fixed_length"] = *feature.fixed_length;
        }
        schema_json.push_back(std::move(f));
    }
    ordered_json doc;
    doc["format_version"] = format_version;
    doc["task_name"] = task_name;
    doc["split"] = split;
    doc["num_examples"] = num_examples;
    doc["num_shards"] = num_shards;
    doc["seed"] = seed;
    doc["schema"] = std::move(schema_json);
    doc["fingerprint"] = u64_to_hex(fingerprint);

    const auto path = cache_dir / kFileName;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
    {
        throw Error(ErrorCode::io_failure, "cannot write manifest " + path.string());
    }
    out << doc.dump(2) << '\n';
    out.flush();
    if (!out)
    {
        throw Error(ErrorCode::io_failure, "failed to flush manifest " + path.string());
    }
}

bool CacheManifest::exists(const std::filesystem::path& cache_dir)
{
    std::error_code ec;
    return std::filesystem::is_regular_file(cache_dir / kFileName, ec);
}

CacheManifest CacheManifest::load(const std::filesystem::path& cache_dir)
{
    const auto path = cache_dir / kFileName;
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw Error(ErrorCode::cache_missing, "no manifest at " + path.string());
    }
    ordered_json doc;
    try
    {
        in >> doc;
    }
    catch (const std::exception& e)
    {
        throw Error(ErrorCode::corrupt_record, "manifest " + path.string() + " unparseable: " + e.what());
    }
    try
    {
        CacheManifest m;
        m.format_version = doc.at("format_version").get<int>();
        if (m.format_version != kFormatVersion)
        {
            throw Error(ErrorCode::invalid_spec,
                        "unsupported manifest format_version " + std::to_string(m.format_version));
        }
        m.task_name = doc.at("task_name").get<std::string>();
        m.split = doc.at("split").get<std::string>();
        m.num_examples = doc.at("num_examples").get<std::uint64_t>();
        m.num_shards = doc.at("num_shards").get<std::uint32_t>();
        m.seed = doc.at("seed").get<std::uint64_t>();
        for (const auto& f : doc.at("schema"))
        {
            FeatureSpec feature;
            feature.name = f.at("name").get<std::string>();
            const auto dtype = dtype_from_name(f.at("dtype").get<std::string>());
            if (!dtype)
            {
                throw Error(ErrorCode::invalid_spec, "unknown dtype in manifest schema");
            }
            feature.dtype = *dtype;
            if (f.contains("fixed_length"))
            {
                feature.fixed_length = f.at("fixed_length").get<std::uint32_t>();
            }
            m.schema.push_back(std::move(feature));
        }
        const auto fp = u64_from_hex(doc.at("fingerprint").get<std::string>());
        if (!fp)
        {
            throw Error(ErrorCode::invalid_spec, "bad fingerprint in manifest");
        }
        m.fingerprint = *fp;
        if (m.num_shards < 1)
        {
            throw Error(ErrorCode::invalid_spec, "manifest num_shards < 1");
        }
        return m;
    }
    catch (const ordered_json::exception& e)
    {
        throw Error(ErrorCode::invalid_spec, "manifest " + path.string() + " invalid: " + e.what());
    }
}

std::uint64_t fingerprint_task(const TaskSpec& spec, std::uint64_t seed, std::uint32_t num_shards)
{
    std::uint64_t h = prf_fold_bytes(0, spec.name);
    h = prf_fold_bytes(h, source_kind_name(spec.source.kind));
    h = prf_fold_bytes(h, spec.source.location);
    for (std::size_t i : spec.cache_op_indices())
    {
        h = prf_fold_bytes(h, spec.preprocessors[i].describe());
    }
    h = prf64(h, seed);
    h = prf64(h, num_shards);
    return h;
}

std::filesystem::path cache_dir_for(const std::filesystem::path& root, std::string_view task,
                                    std::string_view split)
{
    return root / task / split;
}

} // namespace seqpipe
