#include "doctest.h"

#include <filesystem>

#include "etcbound/io.hpp"
#include "helpers.hpp"

using namespace etcbound;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "etcbound_io_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("dataset round-trips bit-identically") {
    Rng rng(3);
    Dataset ds;
    ds.meta = ArtifactMeta{"dataset", "abc123", 42};
    for (int i = 0; i < 5; ++i) {
      auto inst = testutil::random_instance(rng, 7 + i, 3, "v" + std::to_string(i));
      if (i % 2 == 0) inst.gt = Interval{0.1 * i / 5.0, 0.3 + 0.1 * i};
      ds.instances.push_back(inst);
    }
    const auto path = scratch("ds.jsonl");
    io::write_dataset(path, ds);
    const auto back = io::read_dataset(path);
    REQUIRE(back.meta.has_value());
    CHECK(*back.meta == *ds.meta);
    CHECK(back.instances == ds.instances);

    io::write_dataset(scratch("ds2.jsonl"), back);
    CHECK(io::read_text(path) == io::read_text(scratch("ds2.jsonl")));
  }

  TEST_CASE("dictionary round-trips") {
    DescriptionDict d;
    d.meta = ArtifactMeta{"dictionary", "h", 1};
    d.set("v1", 0, {{0, "a b"}, {1, "c"}});
    d.set("v0", 3, {{4, "unicode \xc3\xa9"}});
    const auto path = scratch("dict.jsonl");
    io::write_dictionary(path, d);
    const auto back = io::read_dictionary(path);
    CHECK(back == d);
    CHECK(back.meta == d.meta);
  }

  TEST_CASE("score cache round-trips") {
    std::vector<match::ScoreCacheEntry> entries = {
        {"v0", "00ff", {{0.0, 0.25, 1.0}, ScoreKind::QDM}},
        {"v0", "00ff", {{1.0 / 3.0, 0.0, 1.0}, ScoreKind::QFM}},
    };
    const auto path = scratch("scores.jsonl");
    io::write_score_cache(path, entries, ArtifactMeta{"scores", "x", 0});
    CHECK(io::read_score_cache(path) == entries);
  }

  TEST_CASE("predictor parameters round-trip") {
    Rng rng(5);
    auto p = model::PredictorParams::initialized(3, 4, rng);
    p.k = 123.5;
    const auto j = io::params_to_json(p, 9, 17);
    CHECK(j.at("seed") == 9);
    CHECK(j.at("step") == 17);
    for (const char* key : {"w1", "b1", "w2", "b2", "k"}) CHECK(j.contains(key));
    const auto back = io::params_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back == p);
  }

  TEST_CASE("malformed input is a data error naming the line") {
    const auto path = scratch("bad.jsonl");
    io::write_text(path, "{\"meta\": {\"kind\": \"dataset\", \"config_hash\": \"x\", \"seed\": 0}}\n{not json}\n");
    try {
      io::read_dataset(path);
      FAIL("expected a DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
    io::write_text(path, "{\"video_id\": \"v\", \"frames\": [[1.0], [2.0, 3.0]], \"query_tokens\": [], "
                         "\"query_embedding\": [1.0], \"gt\": null}\n");
    CHECK_THROWS_AS(io::read_dataset(path), DataError);
    CHECK_THROWS_AS(io::read_dataset(scratch("does_not_exist.jsonl")), DataError);
  }
}
