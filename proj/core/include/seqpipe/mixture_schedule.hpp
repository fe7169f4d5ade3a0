#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "seqpipe/registry.hpp"

namespace seqpipe {

// Deterministic largest-deficit scheduler realizing mixing rates with
// bounded discrepancy: draw p picks argmax_k(rate_k * (p + 1) - consumed_k),
// ties broken by task name (components are name-sorted). After any number of
// draws, |consumed_k - rate_k * p| <= 1 for every component. Resumption is
// pure arithmetic: replay p draws.
class MixtureSchedule {
  public:
    // Components as produced by Registry::resolve_mixture: normalized rates,
    // ordered by task name.
    explicit MixtureSchedule(std::vector<ResolvedComponent> components);

    // Picks the next component, increments its consumed count and the draw
    // counter, and returns the component index.
    std::size_t next_component();

    const std::string& component_task(std::size_t index) const
    {
        return components_[index].task;
    }

    std::size_t num_components() const
    {
        return components_.size();
    }

    std::uint64_t draws() const
    {
        return draws_;
    }

    std::span<const std::uint64_t> consumed() const
    {
        return consumed_;
    }

    void reset();

    // Scheduler state after exactly p draws from a fresh schedule.
    static MixtureSchedule replayed_to(std::vector<ResolvedComponent> components, std::uint64_t p);

  private:
    std::vector<ResolvedComponent> components_;
    std::vector<std::uint64_t> consumed_;
    std::uint64_t draws_ = 0;
};

} // namespace seqpipe
