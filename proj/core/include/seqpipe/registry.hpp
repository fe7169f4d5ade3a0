#pragma once

#include <map>
#include <string>
#include <vector>

#include "seqpipe/task.hpp"

namespace seqpipe {

struct ResolvedComponent {
    std::string task;
    double rate = 0.0; // normalized, components sum to 1
};

// Name-keyed task and mixture registry. Built once during setup, then treated
// as immutable; const lookups are safe from any number of threads.
class Registry {
  public:
    // Validates all TaskSpec invariants (metric names resolve against the
    // evaluator's metric registry). Throws duplicate_name or invalid_spec.
    void register_task(TaskSpec spec);

    // Validates local MixtureSpec invariants; child references and acyclicity
    // are checked at resolve time since children may register later.
    void register_mixture(MixtureSpec spec);

    bool has_task(const std::string& name) const;
    bool has_mixture(const std::string& name) const;

    const TaskSpec& task(const std::string& name) const;
    const MixtureSpec& mixture(const std::string& name) const;

    // Flattens nested mixtures by multiplying parent rate shares into
    // children, normalizes rates to sum 1, merges duplicate leaf tasks by
    // summing, and orders by task name. A plain task name resolves to a
    // single component with rate 1.
    std::vector<ResolvedComponent> resolve_mixture(const std::string& name) const;

    std::vector<std::string> task_names() const;
    std::vector<std::string> mixture_names() const;

  private:
    std::map<std::string, TaskSpec> tasks_;
    std::map<std::string, MixtureSpec> mixtures_;
};

} // namespace seqpipe
