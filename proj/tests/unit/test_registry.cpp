#include <doctest.h>

#include <cmath>

#include "../common/test_util.hpp"
#include "seqpipe/error.hpp"
#include "seqpipe/registry.hpp"

using namespace seqpipe;
using seqpipe::testing::copy_task_spec;

namespace {

ErrorCode code_of(const std::function<void()>& fn)
{
    try
    {
        fn();
    }
    catch (const Error& e)
    {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::invalid_argument;
}

MixtureSpec mixture(std::string name, std::vector<std::pair<std::string, double>> components)
{
    MixtureSpec spec;
    spec.name = std::move(name);
    spec.components = std::move(components);
    return spec;
}

} // namespace

TEST_CASE("register then lookup returns the identical spec")
{
    Registry registry;
    const auto spec = copy_task_spec("wmt_toy", "/data/toy.tsv");
    registry.register_task(spec);
    CHECK(registry.task("wmt_toy") == spec);
}

TEST_CASE("duplicate registration fails")
{
    Registry registry;
    registry.register_task(copy_task_spec("wmt_toy", "/data/toy.tsv"));
    CHECK(code_of([&] { registry.register_task(copy_task_spec("wmt_toy", "/other.tsv")); }) ==
          ErrorCode::duplicate_name);
}

TEST_CASE("unknown metric is rejected at registration and named")
{
    Registry registry;
    auto spec = copy_task_spec("task_a", "/data/a.tsv");
    spec.metrics.push_back("bleu_v9");
    try
    {
        registry.register_task(spec);
        FAIL("expected InvalidSpec");
    }
    catch (const Error& e)
    {
        CHECK(e.code() == ErrorCode::invalid_spec);
        CHECK(std::string(e.what()).find("bleu_v9") != std::string::npos);
    }
}

TEST_CASE("spec invariant violations are rejected")
{
    Registry registry;

    auto no_schema = copy_task_spec("task_a", "/data/a.tsv");
    no_schema.schema.clear();
    CHECK(code_of([&] { registry.register_task(no_schema); }) == ErrorCode::invalid_spec);

    auto bad_stage_order = copy_task_spec("task_b", "/data/b.tsv");
    bad_stage_order.preprocessors = {
        {OpKind::random_span_mask, OpStage::runtime, {"inputs"}, "", 0.5},
        {OpKind::append_eos, OpStage::cache, {"inputs"}, "", 0.0},
    };
    CHECK(code_of([&] { registry.register_task(bad_stage_order); }) == ErrorCode::invalid_spec);

    auto bad_rate = copy_task_spec("task_c", "/data/c.tsv");
    bad_rate.preprocessors.push_back({OpKind::random_span_mask, OpStage::runtime, {"inputs"}, "", 1.5});
    CHECK(code_of([&] { registry.register_task(bad_rate); }) == ErrorCode::invalid_spec);

    auto bad_feature = copy_task_spec("task_d", "/data/d.tsv");
    bad_feature.schema.push_back({"BadName", Dtype::int32, std::nullopt});
    CHECK(code_of([&] { registry.register_task(bad_feature); }) == ErrorCode::invalid_spec);
}

TEST_CASE("symmetric mixture resolves to equal halves")
{
    Registry registry;
    registry.register_task(copy_task_spec("task_a", "/a.tsv"));
    registry.register_task(copy_task_spec("task_b", "/b.tsv"));
    registry.register_mixture(mixture("mix", {{"task_a", 1.0}, {"task_b", 1.0}}));

    const auto resolved = registry.resolve_mixture("mix");
    REQUIRE(resolved.size() == 2);
    CHECK(resolved[0].task == "task_a");
    CHECK(resolved[0].rate == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(resolved[1].task == "task_b");
    CHECK(resolved[1].rate == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("nested mixture multiplies parent shares into children")
{
    // {A:1, M:{B:1, C:3} at rate 1} -> A 0.5, B 0.125, C 0.375.
    Registry registry;
    registry.register_task(copy_task_spec("task_a", "/a.tsv"));
    registry.register_task(copy_task_spec("task_b", "/b.tsv"));
    registry.register_task(copy_task_spec("task_c", "/c.tsv"));
    registry.register_mixture(mixture("inner", {{"task_b", 1.0}, {"task_c", 3.0}}));
    registry.register_mixture(mixture("outer", {{"task_a", 1.0}, {"inner", 1.0}}));

    const auto resolved = registry.resolve_mixture("outer");
    REQUIRE(resolved.size() == 3);
    CHECK(resolved[0].task == "task_a");
    CHECK(resolved[0].rate == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(resolved[1].task == "task_b");
    CHECK(resolved[1].rate == doctest::Approx(0.125).epsilon(1e-12));
    CHECK(resolved[2].task == "task_c");
    CHECK(resolved[2].rate == doctest::Approx(0.375).epsilon(1e-12));
}

TEST_CASE("resolved rates sum to 1 and are scale-invariant")
{
    Registry registry;
    registry.register_task(copy_task_spec("task_a", "/a.tsv"));
    registry.register_task(copy_task_spec("task_b", "/b.tsv"));
    registry.register_task(copy_task_spec("task_c", "/c.tsv"));
    registry.register_mixture(
        mixture("mix1", {{"task_a", 0.3}, {"task_b", 1.7}, {"task_c", 2.5}}));
    // Same rates scaled by 1000.
    registry.register_mixture(
        mixture("mix2", {{"task_a", 300.0}, {"task_b", 1700.0}, {"task_c", 2500.0}}));

    const auto r1 = registry.resolve_mixture("mix1");
    const auto r2 = registry.resolve_mixture("mix2");
    double sum = 0.0;
    for (const auto& component : r1)
    {
        sum += component.rate;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    REQUIRE(r1.size() == r2.size());
    for (std::size_t i = 0; i < r1.size(); ++i)
    {
        CHECK(r1[i].task == r2[i].task);
        CHECK(r1[i].rate == doctest::Approx(r2[i].rate).epsilon(1e-12));
    }
}

TEST_CASE("cycle through nested mixtures is detected with a path")
{
    Registry registry;
    registry.register_task(copy_task_spec("task_a", "/a.tsv"));
    registry.register_mixture(mixture("m1", {{"task_a", 1.0}, {"m2", 1.0}}));
    registry.register_mixture(mixture("m2", {{"task_a", 1.0}, {"m1", 1.0}}));
    try
    {
        registry.resolve_mixture("m1");
        FAIL("expected CycleDetected");
    }
    catch (const Error& e)
    {
        CHECK(e.code() == ErrorCode::cycle_detected);
        CHECK(std::string(e.what()).find("m1") != std::string::npos);
        CHECK(std::string(e.what()).find("m2") != std::string::npos);
    }
}

TEST_CASE("resolve of an unregistered name fails")
{
    Registry registry;
    CHECK(code_of([&] { registry.resolve_mixture("ghost"); }) == ErrorCode::not_found);
}

TEST_CASE("mixture component referencing a missing child fails at resolve")
{
    Registry registry;
    registry.register_task(copy_task_spec("task_a", "/a.tsv"));
    registry.register_mixture(mixture("mix", {{"task_a", 1.0}, {"ghost", 1.0}}));
    CHECK(code_of([&] { registry.resolve_mixture("mix"); }) == ErrorCode::not_found);
}

TEST_CASE("mixture local invariants")
{
    Registry registry;
    registry.register_task(copy_task_spec("task_a", "/a.tsv"));
    CHECK(code_of([&] { registry.register_mixture(mixture("m", {{"task_a", 1.0}})); }) ==
          ErrorCode::invalid_spec);
    CHECK(code_of([&] {
              registry.register_mixture(mixture("m", {{"task_a", 1.0}, {"task_a", 2.0}}));
          }) == ErrorCode::invalid_spec);
    CHECK(code_of([&] {
              registry.register_mixture(mixture("m", {{"task_a", 0.0}, {"task_b", 1.0}}));
          }) == ErrorCode::invalid_spec);
}

TEST_CASE("a task name resolves to a single full-rate component")
{
    Registry registry;
    registry.register_task(copy_task_spec("task_a", "/a.tsv"));
    const auto resolved = registry.resolve_mixture("task_a");
    REQUIRE(resolved.size() == 1);
    CHECK(resolved[0].task == "task_a");
    CHECK(resolved[0].rate == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("duplicate leaf tasks reached by two paths merge by summing")
{
    Registry registry;
    registry.register_task(copy_task_spec("task_a", "/a.tsv"));
    registry.register_task(copy_task_spec("task_b", "/b.tsv"));
    registry.register_task(copy_task_spec("task_c", "/c.tsv"));
    registry.register_mixture(mixture("n1", {{"task_a", 1.0}, {"task_b", 1.0}}));
    registry.register_mixture(mixture("n2", {{"task_a", 1.0}, {"task_c", 1.0}}));
    registry.register_mixture(mixture("top", {{"n1", 1.0}, {"n2", 1.0}}));
    const auto resolved = registry.resolve_mixture("top");
    REQUIRE(resolved.size() == 3);
    CHECK(resolved[0].task == "task_a");
    CHECK(resolved[0].rate == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(resolved[1].rate == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(resolved[2].rate == doctest::Approx(0.25).epsilon(1e-12));
}
