#include "helpers.hpp"
#include "remkit/checkpoint.hpp"
#include "remkit/config.hpp"
#include "remkit/error.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>

using namespace remkit;
using namespace testing;

namespace {

Checkpoint sample_checkpoint(bool with_masks) {
    Checkpoint ck;
    ck.net = round_to_storage(small_net(5));
    ck.master_seed = 0xDEADBEEFCAFEull;
    if (with_masks) {
        const std::vector<std::int64_t> ids{4, 9, 17};
        ck.masks = assign_etd_masks(ids, ck.net.mem_widths(), 0.4, 3);
    }
    return ck;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit-exact") {
    for (bool masks : {false, true}) {
        const Checkpoint ck = sample_checkpoint(masks);
        const std::string bytes = serialize_checkpoint(ck);
        const Checkpoint back = deserialize_checkpoint(bytes);
        CHECK(back.net == ck.net);
        CHECK(back.master_seed == ck.master_seed);
        CHECK(back.masks.has_value() == masks);
        if (masks) CHECK(*back.masks == *ck.masks);
        CHECK(serialize_checkpoint(back) == bytes);
    }
}

TEST_CASE("checkpoint file save and load") {
    const auto path = (std::filesystem::temp_directory_path() / "remkit_test_ck.rmck").string();
    const Checkpoint ck = sample_checkpoint(true);
    save_checkpoint(ck, path);
    CHECK(load_checkpoint(path).net == ck.net);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_checkpoint(path), MissingFileError);
}

TEST_CASE("checkpoint refuses malformed input") {
    const std::string bytes = serialize_checkpoint(sample_checkpoint(true));
    std::string swapped = bytes;
    std::swap(swapped[8], swapped[11]);
    std::swap(swapped[9], swapped[10]);
    CHECK_THROWS_AS(deserialize_checkpoint(swapped), FormatError);
    std::string magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_checkpoint(magic), FormatError);
    for (std::size_t cut : {std::size_t{3}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1})
        CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, cut)), FormatError);
    CHECK_THROWS_AS(deserialize_checkpoint(bytes + "x"), FormatError);
}

TEST_CASE("config rejects unknown keys and bad ranges") {
    using nlohmann::json;
    CHECK_NOTHROW(config_from_json(json::object()));
    CHECK_THROWS_AS(config_from_json(json{{"bogus", json::object()}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"data", {{"sidee", 8}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"unlearn", {{"gamma", 1.5}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"corruption", {{"interclass_n", 7}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"grid", {{"methods", {"nope"}}}}}), ConfigError);
}

TEST_CASE("config json round trip") {
    using nlohmann::json;
    const json in{{"data", {{"side", 8}, {"num_classes", 5}}},
                  {"corruption", {{"interclass_a", 1}, {"interclass_b", 4}}},
                  {"unlearn", {{"gamma", 0.3}, {"enable_step32", false}}},
                  {"grid", {{"methods", {"rem", "npo+etd"}}, {"seeds", {4, 5}}, {"jobs", 2}}},
                  {"output", {{"dir", "results"}}}};
    const Config c = config_from_json(in);
    CHECK(c.bench.data.side == 8);
    CHECK(c.bench.unlearn.gamma == 0.3);
    CHECK_FALSE(c.bench.unlearn.rem.enable_step32);
    CHECK(c.methods == std::vector<std::string>{"rem", "npo+etd"});
    CHECK(c.grid.jobs == 2);
    const json out = config_to_json(c);
    CHECK(config_to_json(config_from_json(out)) == out);
}

TEST_CASE("output directory precedence") {
    Config c;
    ::unsetenv("REMKIT_OUTPUT_DIR");
    CHECK(resolve_output_dir(c) == "out");
    ::setenv("REMKIT_OUTPUT_DIR", "env_dir", 1);
    CHECK(resolve_output_dir(c) == "env_dir");
    c.output_dir = "cfg_dir";
    CHECK(resolve_output_dir(c) == "cfg_dir");
    ::unsetenv("REMKIT_OUTPUT_DIR");
}
