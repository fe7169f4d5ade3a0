#include "seqpipe/mixture_schedule.hpp"

#include <algorithm>

#include "seqpipe/error.hpp"

namespace seqpipe {

MixtureSchedule::MixtureSchedule(std::vector<ResolvedComponent> components)
    : components_(std::move(components)), consumed_(components_.size(), 0)
{
    if (components_.empty())
    {
        throw Error(ErrorCode::invalid_argument, "mixture schedule needs at least one component");
    }
    // Components must already be name-sorted (the resolve order); the deficit
    // tie-break below relies on it.
    for (std::size_t i = 1; i < components_.size(); ++i)
    {
        if (!(components_[i - 1].task < components_[i].task))
        {
            throw Error(ErrorCode::invalid_argument, "mixture components not sorted by task name");
        }
    }
}

std::size_t MixtureSchedule::next_component()
{
    // Largest deficit wins: deficit_k = rate_k * (p + 1) - consumed_k. Ties
    // fall to the smallest index, which is the lexicographically first task.
    const double target = static_cast<double>(draws_ + 1);
    std::size_t best = 0;
    double best_deficit = components_[0].rate * target - static_cast<double>(consumed_[0]);
    for (std::size_t k = 1; k < components_.size(); ++k)
    {
        const double deficit = components_[k].rate * target - static_cast<double>(consumed_[k]);
        if (deficit > best_deficit)
        {
            best_deficit = deficit;
            best = k;
        }
    }
    ++consumed_[best];
    ++draws_;
    return best;
}

void MixtureSchedule::reset()
{
    std::fill(consumed_.begin(), consumed_.end(), 0);
    draws_ = 0;
}

MixtureSchedule MixtureSchedule::replayed_to(std::vector<ResolvedComponent> components,
                                             std::uint64_t p)
{
    MixtureSchedule schedule(std::move(components));
    for (std::uint64_t i = 0; i < p; ++i)
    {
        schedule.next_component();
    }
    return schedule;
}

} // namespace seqpipe
