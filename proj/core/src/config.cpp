#include "seqpipe/config.hpp"

#include <fstream>

#include <json.hpp>

#include "seqpipe/error.hpp"

namespace seqpipe {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& message)
{
    throw Error(ErrorCode::invalid_spec, "config: " + message);
}

void check_keys(const json& obj, const char* what, std::initializer_list<const char*> allowed)
{
    for (const auto& [key, value] : obj.items())
    {
        bool ok = false;
        for (const char* name : allowed)
        {
            if (key == name)
            {
                ok = true;
                break;
            }
        }
        if (!ok)
        {
            bad(std::string("unknown key \"") + key + "\" in " + what);
        }
    }
}

std::string get_string(const json& obj, const char* key, const char* what)
{
    if (!obj.contains(key) || !obj[key].is_string())
    {
        bad(std::string(what) + " needs a string \"" + key + "\"");
    }
    return obj[key].get<std::string>();
}

// Paths in the config are resolved against the config file's directory so a
// registry means the same thing regardless of the process working directory.
std::string resolve_path(const std::string& path, const std::filesystem::path& base_dir)
{
    std::filesystem::path p(path);
    if (p.is_absolute())
    {
        return path;
    }
    return (base_dir / p).lexically_normal().string();
}

DataSourceSpec parse_source(const json& obj, const std::filesystem::path& base_dir)
{
    if (!obj.is_object())
    {
        bad("\"source\" must be an object");
    }
    check_keys(obj, "source", {"kind", "location", "fields"});
    DataSourceSpec source;
    const auto kind = source_kind_from_name(get_string(obj, "kind", "source"));
    if (!kind)
    {
        bad("unknown source kind \"" + get_string(obj, "kind", "source") + "\"");
    }
    source.kind = *kind;
    source.location = resolve_path(get_string(obj, "location", "source"), base_dir);
    if (obj.contains("fields"))
    {
        if (!obj["fields"].is_object())
        {
            bad("source \"fields\" must be an object of source field -> feature name");
        }
        for (const auto& [field, feature] : obj["fields"].items())
        {
            if (!feature.is_string())
            {
                bad("source field \"" + field + "\" must map to a feature name string");
            }
            source.field_map[field] = feature.get<std::string>();
        }
    }
    return source;
}

PreprocessorSpec parse_preprocessor(const json& obj, const std::filesystem::path& base_dir)
{
    if (!obj.is_object())
    {
        bad("each preprocessor must be an object");
    }
    check_keys(obj, "preprocessor", {"op", "stage", "features", "feature", "vocab", "rate"});
    PreprocessorSpec op;
    const auto kind = op_kind_from_name(get_string(obj, "op", "preprocessor"));
    if (!kind)
    {
        bad("unknown preprocessor op \"" + get_string(obj, "op", "preprocessor") + "\"");
    }
    op.op = *kind;
    if (obj.contains("stage"))
    {
        const auto stage = get_string(obj, "stage", "preprocessor");
        if (stage == "cache")
        {
            op.stage = OpStage::cache;
        }
        else if (stage == "runtime")
        {
            op.stage = OpStage::runtime;
        }
        else
        {
            bad("preprocessor stage must be \"cache\" or \"runtime\", got \"" + stage + "\"");
        }
    }
    if (obj.contains("features"))
    {
        if (!obj["features"].is_array())
        {
            bad("preprocessor \"features\" must be an array");
        }
        for (const auto& f : obj["features"])
        {
            if (!f.is_string())
            {
                bad("preprocessor feature names must be strings");
            }
            op.features.push_back(f.get<std::string>());
        }
    }
    if (obj.contains("feature"))
    {
        op.features.push_back(get_string(obj, "feature", "preprocessor"));
    }
    if (obj.contains("vocab"))
    {
        const auto ref = get_string(obj, "vocab", "preprocessor");
        op.vocab_ref = ref == "byte_level" ? ref : resolve_path(ref, base_dir);
    }
    if (obj.contains("rate"))
    {
        if (!obj["rate"].is_number())
        {
            bad("preprocessor \"rate\" must be a number");
        }
        op.rate = obj["rate"].get<double>();
    }
    return op;
}

FeatureSpec parse_feature(const json& obj)
{
    if (!obj.is_object())
    {
        bad("each schema entry must be an object");
    }
    check_keys(obj, "schema entry", {"name", "dtype", "fixed_length"});
    FeatureSpec feature;
    feature.name = get_string(obj, "name", "schema entry");
    const auto dtype = dtype_from_name(get_string(obj, "dtype", "schema entry"));
    if (!dtype)
    {
        bad("unknown dtype \"" + get_string(obj, "dtype", "schema entry") + "\"");
    }
    feature.dtype = *dtype;
    if (obj.contains("fixed_length"))
    {
        if (!obj["fixed_length"].is_number_unsigned() || obj["fixed_length"].get<std::uint64_t>() < 1)
        {
            bad("\"fixed_length\" must be a positive integer");
        }
        feature.fixed_length = obj["fixed_length"].get<std::uint32_t>();
    }
    return feature;
}

TaskSpec parse_task(const json& obj, const std::filesystem::path& base_dir)
{
    if (!obj.is_object())
    {
        bad("each task must be an object");
    }
    check_keys(obj, "task", {"name", "source", "preprocessors", "schema", "metrics", "splits"});
    TaskSpec spec;
    spec.name = get_string(obj, "name", "task");
    if (!obj.contains("source"))
    {
        bad("task \"" + spec.name + "\" has no source");
    }
    spec.source = parse_source(obj["source"], base_dir);
    if (obj.contains("preprocessors"))
    {
        if (!obj["preprocessors"].is_array())
        {
            bad("task \"preprocessors\" must be an array");
        }
        for (const auto& p : obj["preprocessors"])
        {
            spec.preprocessors.push_back(parse_preprocessor(p, base_dir));
        }
    }
    if (!obj.contains("schema") || !obj["schema"].is_array())
    {
        bad("task \"" + spec.name + "\" needs a schema array");
    }
    for (const auto& f : obj["schema"])
    {
        spec.schema.push_back(parse_feature(f));
    }
    if (obj.contains("metrics"))
    {
        if (!obj["metrics"].is_array())
        {
            bad("task \"metrics\" must be an array");
        }
        for (const auto& m : obj["metrics"])
        {
            if (!m.is_string())
            {
                bad("metric names must be strings");
            }
            spec.metrics.push_back(m.get<std::string>());
        }
    }
    if (!obj.contains("splits") || !obj["splits"].is_array() || obj["splits"].empty())
    {
        bad("task \"" + spec.name + "\" needs a non-empty splits array");
    }
    for (const auto& s : obj["splits"])
    {
        if (!s.is_string())
        {
            bad("split names must be strings");
        }
        spec.splits.insert(s.get<std::string>());
    }
    return spec;
}

MixtureSpec parse_mixture(const json& obj)
{
    if (!obj.is_object())
    {
        bad("each mixture must be an object");
    }
    check_keys(obj, "mixture", {"name", "components"});
    MixtureSpec spec;
    spec.name = get_string(obj, "name", "mixture");
    if (!obj.contains("components") || !obj["components"].is_array())
    {
        bad("mixture \"" + spec.name + "\" needs a components array");
    }
    for (const auto& c : obj["components"])
    {
        if (!c.is_object())
        {
            bad("each mixture component must be an object");
        }
        check_keys(c, "mixture component", {"name", "rate"});
        const auto child = get_string(c, "name", "mixture component");
        if (!c.contains("rate") || !c["rate"].is_number())
        {
            bad("mixture component \"" + child + "\" needs a numeric rate");
        }
        spec.components.emplace_back(child, c["rate"].get<double>());
    }
    return spec;
}

} // namespace

Registry load_registry(const std::filesystem::path& config_path)
{
    std::ifstream in(config_path, std::ios::binary);
    if (!in)
    {
        throw Error(ErrorCode::io_failure, "cannot open config " + config_path.string());
    }
    json doc;
    try
    {
        in >> doc;
    }
    catch (const std::exception& e)
    {
        throw Error(ErrorCode::invalid_spec,
                    "config " + config_path.string() + " is not valid JSON: " + e.what());
    }
    if (!doc.is_object())
    {
        bad("top level must be an object");
    }
    check_keys(doc, "config", {"tasks", "mixtures"});

    const auto base_dir = std::filesystem::absolute(config_path).parent_path();
    Registry registry;
    if (doc.contains("tasks"))
    {
        if (!doc["tasks"].is_array())
        {
            bad("\"tasks\" must be an array");
        }
        for (const auto& t : doc["tasks"])
        {
            registry.register_task(parse_task(t, base_dir));
        }
    }
    if (doc.contains("mixtures"))
    {
        if (!doc["mixtures"].is_array())
        {
            bad("\"mixtures\" must be an array");
        }
        for (const auto& m : doc["mixtures"])
        {
            registry.register_mixture(parse_mixture(m));
        }
    }
    return registry;
}

} // namespace seqpipe
