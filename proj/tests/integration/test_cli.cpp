#include <doctest.h>

#include <cstdio>
#include <string>

#include "../common/test_util.hpp"

using namespace seqpipe::testing;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string output; // stdout and stderr merged
};

CliResult run_cli(const std::string& args)
{
    const std::string command = std::string(SEQPIPE_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(command.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CliResult result;
    char buffer[4096];
    std::size_t n = 0;
    while ((n = fread(buffer, 1, sizeof(buffer), pipe)) > 0)
    {
        result.output.append(buffer, n);
    }
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

// Writes the toy registry + data and returns the --config path.
std::string setup_fixture(const TempDir& tmp, std::size_t n = 8)
{
    write_text_file(tmp.path() / "data" / "copy.train.tsv", toy_tsv(n));
    write_text_file(tmp.path() / "data" / "copy.validation.tsv", toy_tsv(4));
    const std::string config = R"({
  "tasks": [
    {
      "name": "copy_toy",
      "source": {"kind": "tsv_pairs", "location": "data/copy.{split}.tsv"},
      "preprocessors": [
        {"op": "tokenize", "stage": "cache", "vocab": "byte_level", "features": ["inputs", "targets"]},
        {"op": "append_eos", "stage": "cache", "features": ["inputs", "targets"]}
      ],
      "schema": [
        {"name": "inputs", "dtype": "int32", "fixed_length": 16},
        {"name": "targets", "dtype": "int32", "fixed_length": 16}
      ],
      "metrics": ["exact_match", "token_accuracy"],
      "splits": ["train", "validation"]
    }
  ]
})";
    write_text_file(tmp.path() / "registry.json", config);
    return (tmp.path() / "registry.json").string();
}

std::string cache_flags(const TempDir& tmp, const std::string& config)
{
    return "--config " + config + " cache --task copy_toy --split train --output " +
           (tmp.path() / "caches").string() + " --num-shards 4 --seed 7 --workers 2";
}

} // namespace

TEST_CASE("cache builds and reports the manifest summary")
{
    TempDir tmp;
    const auto config = setup_fixture(tmp);
    const auto result = run_cli(cache_flags(tmp, config));
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("num_examples=8") != std::string::npos);

    const auto verify =
        run_cli("verify --dir " + (tmp.path() / "caches" / "copy_toy" / "train").string());
    CHECK(verify.exit_code == 0);
    CHECK(verify.output.find("ok") != std::string::npos);
}

TEST_CASE("missing required flag exits 2 with usage text")
{
    TempDir tmp;
    const auto config = setup_fixture(tmp);
    const auto result = run_cli("--config " + config + " cache --split train --output " +
                                (tmp.path() / "caches").string());
    CHECK(result.exit_code == 2);
    CHECK(result.output.find("--task") != std::string::npos);
}

TEST_CASE("unknown flags are errors")
{
    TempDir tmp;
    const auto config = setup_fixture(tmp);
    const auto result = run_cli("--config " + config + " cache --task copy_toy --split train " +
                                "--output " + (tmp.path() / "caches").string() + " --frobnicate 3");
    CHECK(result.exit_code == 2);
}

TEST_CASE("rerunning into a built cache exits 2")
{
    TempDir tmp;
    const auto config = setup_fixture(tmp);
    REQUIRE(run_cli(cache_flags(tmp, config)).exit_code == 0);
    const auto rerun = run_cli(cache_flags(tmp, config));
    CHECK(rerun.exit_code == 2);
    CHECK(rerun.output.find("DirNotEmpty") != std::string::npos);
}

TEST_CASE("read output is byte-identical across runs")
{
    TempDir tmp;
    const auto config = setup_fixture(tmp);
    REQUIRE(run_cli(cache_flags(tmp, config)).exit_code == 0);
    const std::string read_cmd = "--config " + config + " --cache-root " +
                                 (tmp.path() / "caches").string() +
                                 " read --task copy_toy --split train --reader-id 0 "
                                 "--num-readers 2 --batch-size 2 --start-step 0 --steps 2";
    const auto first = run_cli(read_cmd);
    const auto second = run_cli(read_cmd);
    CHECK(first.exit_code == 0);
    CHECK(second.exit_code == 0);
    CHECK(!first.output.empty());
    CHECK(first.output == second.output);
}

TEST_CASE("seeked read equals the tail of a longer read")
{
    TempDir tmp;
    const auto config = setup_fixture(tmp);
    REQUIRE(run_cli(cache_flags(tmp, config)).exit_code == 0);
    const std::string base = "--config " + config + " --cache-root " +
                             (tmp.path() / "caches").string() +
                             " read --task copy_toy --split train --batch-size 2 ";
    const auto full = run_cli(base + "--start-step 0 --steps 4");
    const auto tail = run_cli(base + "--start-step 3 --steps 1");
    REQUIRE(full.exit_code == 0);
    REQUIRE(tail.exit_code == 0);
    // The tail run's bytes are exactly the final batch of the full run.
    CHECK(tail.output.size() < full.output.size());
    CHECK(full.output.substr(full.output.size() - tail.output.size()) == tail.output);
}

TEST_CASE("indivisible reader count exits 2")
{
    TempDir tmp;
    const auto config = setup_fixture(tmp);
    REQUIRE(run_cli(cache_flags(tmp, config)).exit_code == 0);
    const auto result = run_cli("--config " + config + " --cache-root " +
                                (tmp.path() / "caches").string() +
                                " read --task copy_toy --split train --num-readers 3");
    CHECK(result.exit_code == 2);
    CHECK(result.output.find("IndivisibleReaders") != std::string::npos);
}

TEST_CASE("reading a missing cache exits 3")
{
    TempDir tmp;
    const auto config = setup_fixture(tmp);
    const auto result = run_cli("--config " + config + " --cache-root " +
                                (tmp.path() / "caches").string() +
                                " read --task copy_toy --split train");
    CHECK(result.exit_code == 3);
}

TEST_CASE("inspect prints the record at --index")
{
    TempDir tmp;
    const auto config = setup_fixture(tmp);
    REQUIRE(run_cli(cache_flags(tmp, config)).exit_code == 0);
    const auto result = run_cli(
        "inspect --dir " + (tmp.path() / "caches" / "copy_toy" / "train").string() + " --index 7");
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("cache_index=7") != std::string::npos);
    CHECK(result.output.find("inputs") != std::string::npos);
    CHECK(result.output.find("targets") != std::string::npos);

    const auto out_of_range = run_cli(
        "inspect --dir " + (tmp.path() / "caches" / "copy_toy" / "train").string() + " --index 8");
    CHECK(out_of_range.exit_code == 2);
}

TEST_CASE("verify reports violations and exits nonzero on a damaged cache")
{
    TempDir tmp;
    const auto config = setup_fixture(tmp);
    REQUIRE(run_cli(cache_flags(tmp, config)).exit_code == 0);
    const auto dir = tmp.path() / "caches" / "copy_toy" / "train";
    std::filesystem::remove(dir / "data-00001-of-00004.idx");
    const auto result = run_cli("verify --dir " + dir.string());
    CHECK(result.exit_code == 3);
    CHECK(result.output.find("MissingFile") != std::string::npos);
}

TEST_CASE("eval prints metric lines for a complete predictions file")
{
    TempDir tmp;
    const auto config = setup_fixture(tmp);
    REQUIRE(run_cli("--config " + config + " cache --task copy_toy --split validation --output " +
                    (tmp.path() / "caches").string() + " --num-shards 2 --seed 7")
                .exit_code == 0);

    // Copy predictions straight out of inspect output.
    std::string predictions;
    for (int i = 0; i < 4; ++i)
    {
        const auto inspect = run_cli("inspect --dir " +
                                     (tmp.path() / "caches" / "copy_toy" / "validation").string() +
                                     " --index " + std::to_string(i));
        REQUIRE(inspect.exit_code == 0);
        const auto pos = inspect.output.find("targets (int32");
        REQUIRE(pos != std::string::npos);
        const auto open = inspect.output.find('[', pos);
        const auto close = inspect.output.find(']', open);
        std::string ids = inspect.output.substr(open + 1, close - open - 1);
        for (char& c : ids)
        {
            if (c == ',')
            {
                c = ' ';
            }
        }
        predictions += std::to_string(i) + "\t" + ids + "\n";
    }
    write_text_file(tmp.path() / "preds.txt", predictions);

    const auto result = run_cli("--config " + config + " --cache-root " +
                                (tmp.path() / "caches").string() +
                                " eval --task copy_toy --split validation --predictions " +
                                (tmp.path() / "preds.txt").string() + " --report " +
                                (tmp.path() / "report.txt").string());
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("exact_match=100.0000") != std::string::npos);
    CHECK(read_file_bytes(tmp.path() / "report.txt") == result.output);

    // Incomplete predictions exit 2.
    write_text_file(tmp.path() / "short.txt", "0\t1 2\n");
    const auto incomplete = run_cli("--config " + config + " --cache-root " +
                                    (tmp.path() / "caches").string() +
                                    " eval --task copy_toy --split validation --predictions " +
                                    (tmp.path() / "short.txt").string());
    CHECK(incomplete.exit_code == 2);
    CHECK(incomplete.output.find("MissingPredictions") != std::string::npos);
}

TEST_CASE("read with --arch emits model features")
{
    TempDir tmp;
    const auto config = setup_fixture(tmp);
    REQUIRE(run_cli(cache_flags(tmp, config)).exit_code == 0);
    const auto result = run_cli("--config " + config + " --cache-root " +
                                (tmp.path() / "caches").string() +
                                " read --task copy_toy --split train --steps 1 --arch enc_dec");
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("encoder_input_tokens=") != std::string::npos);
    CHECK(result.output.find("decoder_loss_weights=") != std::string::npos);

    const auto decoder = run_cli("--config " + config + " --cache-root " +
                                 (tmp.path() / "caches").string() +
                                 " read --task copy_toy --split train --steps 1 --arch decoder_only");
    CHECK(decoder.exit_code == 0);
    CHECK(decoder.output.find("encoder_input_tokens=") == std::string::npos);
    CHECK(decoder.output.find("decoder_target_tokens=") != std::string::npos);
}

TEST_CASE("bench rejects --seconds 0 and reports positive rates otherwise")
{
    TempDir tmp;
    const auto config = setup_fixture(tmp);
    REQUIRE(run_cli(cache_flags(tmp, config)).exit_code == 0);
    const std::string base = "--config " + config + " --cache-root " +
                             (tmp.path() / "caches").string() +
                             " bench --task copy_toy --split train --batch-size 4 ";

    const auto zero = run_cli(base + "--seconds 0");
    CHECK(zero.exit_code == 2);

    const auto smoke = run_cli(base + "--num-readers 1 --seconds 0.3");
    CHECK(smoke.exit_code == 0);
    CHECK(smoke.output.find("aggregate:") != std::string::npos);
    CHECK(smoke.output.find("examples/s") != std::string::npos);
    // Rates are positive finite numbers.
    CHECK(smoke.output.find("-") == std::string::npos);
    CHECK(smoke.output.find("nan") == std::string::npos);
    CHECK(smoke.output.find("inf") == std::string::npos);
}

TEST_CASE("two readers sustain at least 0.9x the single-reader aggregate")
{
    TempDir tmp;
    const auto config = setup_fixture(tmp, 64);
    REQUIRE(run_cli("--config " + config + " cache --task copy_toy --split train --output " +
                    (tmp.path() / "caches").string() + " --num-shards 2 --seed 7")
                .exit_code == 0);
    const std::string base = "--config " + config + " --cache-root " +
                             (tmp.path() / "caches").string() +
                             " bench --task copy_toy --split train --batch-size 8 --seconds 1 ";

    auto aggregate_rate = [](const std::string& output) {
        const auto pos = output.find("aggregate: ");
        REQUIRE(pos != std::string::npos);
        return std::stod(output.substr(pos + 11));
    };
    const auto one = run_cli(base + "--num-readers 1");
    const auto two = run_cli(base + "--num-readers 2");
    REQUIRE(one.exit_code == 0);
    REQUIRE(two.exit_code == 0);
    const double rate1 = aggregate_rate(one.output);
    const double rate2 = aggregate_rate(two.output);
    CHECK(rate1 > 0.0);
    // Regression guard against pathological contention between readers.
    CHECK(rate2 >= 0.9 * rate1);
}
