#include "seqpipe/registry.hpp"

#include <cmath>
#include <set>

#include "seqpipe/error.hpp"
#include "seqpipe/evaluator.hpp"

namespace seqpipe {

namespace {

void validate_task(const TaskSpec& spec)
{
    if (!valid_feature_name(spec.name))
    {
        throw Error(ErrorCode::invalid_spec, "task name \"" + spec.name + "\" is not a valid identifier");
    }
    if (spec.source.location.empty())
    {
        throw Error(ErrorCode::invalid_spec, "task \"" + spec.name + "\" has an empty source location");
    }
    if (spec.schema.empty())
    {
        throw Error(ErrorCode::invalid_spec, "task \"" + spec.name + "\" has an empty schema");
    }
    if (spec.splits.empty())
    {
        throw Error(ErrorCode::invalid_spec, "task \"" + spec.name + "\" declares no splits");
    }
    std::set<std::string> seen;
    for (const auto& feature : spec.schema)
    {
        if (!valid_feature_name(feature.name))
        {
            throw Error(ErrorCode::invalid_spec,
                        "feature name \"" + feature.name + "\" is not a valid identifier");
        }
        if (!seen.insert(feature.name).second)
        {
            throw Error(ErrorCode::invalid_spec, "duplicate feature name \"" + feature.name + "\"");
        }
        if (feature.fixed_length && *feature.fixed_length < 1)
        {
            throw Error(ErrorCode::invalid_spec,
                        "feature \"" + feature.name + "\" has fixed_length < 1");
        }
    }
    bool runtime_seen = false;
    for (const auto& op : spec.preprocessors)
    {
        if (op.stage == OpStage::runtime)
        {
            runtime_seen = true;
        }
        else if (runtime_seen)
        {
            throw Error(ErrorCode::invalid_spec,
                        "cache-stage op " + op.describe() + " follows a runtime-stage op");
        }
        if (op.features.empty())
        {
            throw Error(ErrorCode::invalid_spec, op.describe() + " names no features");
        }
        if (op.op == OpKind::tokenize && op.vocab_ref.empty())
        {
            throw Error(ErrorCode::invalid_spec, "tokenize op without a vocabulary ref");
        }
        if (op.op == OpKind::random_span_mask)
        {
            if (op.features.size() != 1)
            {
                throw Error(ErrorCode::invalid_spec, "random_span_mask takes exactly one feature");
            }
            if (!(op.rate > 0.0) || !(op.rate < 1.0))
            {
                throw Error(ErrorCode::invalid_spec, "random_span_mask rate must be in (0, 1)");
            }
        }
    }
    for (const auto& metric : spec.metrics)
    {
        if (!metric_exists(metric))
        {
            throw Error(ErrorCode::invalid_spec,
                        "task \"" + spec.name + "\" names unknown metric \"" + metric + "\"");
        }
    }
}

void validate_mixture(const MixtureSpec& spec)
{
    if (!valid_feature_name(spec.name))
    {
        throw Error(ErrorCode::invalid_spec,
                    "mixture name \"" + spec.name + "\" is not a valid identifier");
    }
    if (spec.components.size() < 2)
    {
        throw Error(ErrorCode::invalid_spec,
                    "mixture \"" + spec.name + "\" needs at least 2 components");
    }
    std::set<std::string> seen;
    for (const auto& [child, rate] : spec.components)
    {
        if (!seen.insert(child).second)
        {
            throw Error(ErrorCode::invalid_spec,
                        "mixture \"" + spec.name + "\" lists component \"" + child + "\" twice");
        }
        if (!(rate > 0.0) || !std::isfinite(rate))
        {
            throw Error(ErrorCode::invalid_spec, "mixture \"" + spec.name + "\" component \"" +
                                                     child + "\" has non-positive rate");
        }
    }
}

std::string join_path(const std::vector<std::string>& path, const std::string& tail)
{
    std::string out;
    for (const auto& node : path)
    {
        out += node;
        out += " -> ";
    }
    out += tail;
    return out;
}

} // namespace

void Registry::register_task(TaskSpec spec)
{
    validate_task(spec);
    if (tasks_.count(spec.name) || mixtures_.count(spec.name))
    {
        throw Error(ErrorCode::duplicate_name, "\"" + spec.name + "\" is already registered");
    }
    tasks_.emplace(spec.name, std::move(spec));
}

void Registry::register_mixture(MixtureSpec spec)
{
    validate_mixture(spec);
    if (tasks_.count(spec.name) || mixtures_.count(spec.name))
    {
        throw Error(ErrorCode::duplicate_name, "\"" + spec.name + "\" is already registered");
    }
    mixtures_.emplace(spec.name, std::move(spec));
}

bool Registry::has_task(const std::string& name) const
{
    return tasks_.count(name) > 0;
}

bool Registry::has_mixture(const std::string& name) const
{
    return mixtures_.count(name) > 0;
}

const TaskSpec& Registry::task(const std::string& name) const
{
    auto it = tasks_.find(name);
    if (it == tasks_.end())
    {
        throw Error(ErrorCode::not_found, "no task named \"" + name + "\"");
    }
    return it->second;
}

const MixtureSpec& Registry::mixture(const std::string& name) const
{
    auto it = mixtures_.find(name);
    if (it == mixtures_.end())
    {
        throw Error(ErrorCode::not_found, "no mixture named \"" + name + "\"");
    }
    return it->second;
}

std::vector<ResolvedComponent> Registry::resolve_mixture(const std::string& name) const
{
    if (!has_task(name) && !has_mixture(name))
    {
        throw Error(ErrorCode::not_found, "no task or mixture named \"" + name + "\"");
    }

    std::map<std::string, double> shares;
    std::vector<std::string> path;

    auto flatten = [&](auto&& self, const std::string& node, double share) -> void {
        if (has_task(node))
        {
            shares[node] += share;
            return;
        }
        auto it = mixtures_.find(node);
        if (it == mixtures_.end())
        {
            throw Error(ErrorCode::not_found,
                        "mixture component \"" + node + "\" is not registered (path: " +
                            join_path(path, node) + ")");
        }
        for (const auto& seen : path)
        {
            if (seen == node)
            {
                throw Error(ErrorCode::cycle_detected, "mixture cycle: " + join_path(path, node));
            }
        }
        path.push_back(node);
        double total = 0.0;
        for (const auto& [child, rate] : it->second.components)
        {
            total += rate;
        }
        for (const auto& [child, rate] : it->second.components)
        {
            self(self, child, share * rate / total);
        }
        path.pop_back();
    };
    flatten(flatten, name, 1.0);

    double total = 0.0;
    for (const auto& [task, share] : shares)
    {
        total += share;
    }
    std::vector<ResolvedComponent> out;
    out.reserve(shares.size());
    for (const auto& [task, share] : shares)
    {
        out.push_back({task, share / total});
    }
    return out;
}

std::vector<std::string> Registry::task_names() const
{
    std::vector<std::string> out;
    out.reserve(tasks_.size());
    for (const auto& [name, spec] : tasks_)
    {
        out.push_back(name);
    }
    return out;
}

std::vector<std::string> Registry::mixture_names() const
{
    std::vector<std::string> out;
    out.reserve(mixtures_.size());
    for (const auto& [name, spec] : mixtures_)
    {
        out.push_back(name);
    }
    return out;
}

} // namespace seqpipe
