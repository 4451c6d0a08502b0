#include <doctest.h>

#include "config.hpp"
#include "support.hpp"

using namespace psydial;
using psydial::testing::spit;
using psydial::testing::TempDir;

TEST_SUITE("config") {
  TEST_CASE("defaults resolve against the data dir") {
    const auto c = resolve_config(default_config_json("/data"), {});
    CHECK(c.machines_dir == std::filesystem::path("/data/machines"));
    CHECK(c.emrs == std::filesystem::path("/data/emrs/sample"));
    CHECK(c.backend == BackendKind::scripted);
    CHECK(c.feds_per_emr == 5);
    CHECK(c.turn_cap == 200);
    CHECK(c.strategies.size() == 2);
    CHECK(c.char_count == CharCount::codepoints);
  }

  TEST_CASE("later layers win key by key") {
    const auto c = resolve_config(default_config_json("/data"),
                                  {json{{"seed", 5}, {"workers", 3}}, json{{"seed", 9}, {"remote", {{"max_retries", 7}}}}});
    CHECK(c.seed == 9);
    CHECK(c.workers == 3);
    CHECK(c.remote.max_retries == 7);
    CHECK(c.remote.backoff_mult == BackendConfig{}.backoff_mult);
    CHECK(c.effective["seed"] == 9);
  }

  TEST_CASE("a data_dir layer moves the relative paths") {
    const auto c = resolve_config(default_config_json("/data"), {json{{"data_dir", "/elsewhere"}}});
    CHECK(c.machines_dir == std::filesystem::path("/elsewhere/machines"));
    const auto abs = resolve_config(default_config_json("/data"), {json{{"emrs", "/abs/emrs"}}});
    CHECK(abs.emrs == std::filesystem::path("/abs/emrs"));
  }

  TEST_CASE("bad keys and values") {
    const auto d = default_config_json("/data");
    CHECK_THROWS_AS(resolve_config(d, {json{{"sed", 1}}}), ConfigError);
    CHECK_THROWS_AS(resolve_config(d, {json{{"remote", {{"endpiont", "x"}}}}}), ConfigError);
    CHECK_THROWS_AS(resolve_config(d, {json{{"seed", nullptr}}}), ConfigError);
    CHECK_THROWS_AS(resolve_config(d, {json{{"seed", -1}}}), ConfigError);
    CHECK_THROWS_AS(resolve_config(d, {json{{"workers", 0}}}), ConfigError);
    CHECK_THROWS_AS(resolve_config(d, {json{{"backend", "magic"}}}), ConfigError);
    CHECK_THROWS_AS(resolve_config(d, {json{{"strategies", "random,random"}}}), ConfigError);
    CHECK_THROWS_AS(resolve_config(d, {json{{"turn_cap", "many"}}}), ConfigError);
    CHECK_THROWS_AS(resolve_config(d, {json::array()}), ConfigError);
  }

  TEST_CASE("strategy lists") {
    CHECK(parse_strategy_list("symptom_informed") == std::vector<Strategy>{Strategy::symptom_informed});
    CHECK(parse_strategy_list("random,symptom_informed").size() == 2);
    CHECK_THROWS_AS(parse_strategy_list("greedy"), ConfigError);
    CHECK_THROWS_AS(parse_strategy_list("random,random"), ConfigError);
  }

  TEST_CASE("config files") {
    TempDir dir("cfg");
    spit(dir / "ok.json", R"({"seed": 3})");
    spit(dir / "bad.json", "{seed: 3}");
    spit(dir / "list.json", "[1]");
    CHECK(read_config_file(dir / "ok.json")["seed"] == 3);
    CHECK_THROWS_AS(read_config_file(dir / "bad.json"), ConfigError);
    CHECK_THROWS_AS(read_config_file(dir / "list.json"), ConfigError);
    CHECK_THROWS_AS(read_config_file(dir / "missing.json"), IoError);
  }
}
